// Command line front end: ingest, index, ask, serve, eval-report, analytics.

#include "resrag/analytics.hpp"
#include "resrag/corpus.hpp"
#include "resrag/eval.hpp"
#include "resrag/generation.hpp"
#include "resrag/http_server.hpp"
#include "resrag/qa_service.hpp"
#include "resrag/retrieval.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace resrag;

namespace {

std::string env_or(char const *name, std::string fallback)
{
  char const *v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

std::string slurp(std::filesystem::path const &p)
{
  std::ifstream in(p, std::ios::binary);
  if (!in) { throw std::runtime_error("cannot read " + p.string()); }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(std::filesystem::path const &p, std::string const &data)
{
  if (p.has_parent_path()) { std::filesystem::create_directories(p.parent_path()); }
  std::ofstream out(p, std::ios::binary);
  if (!out) { throw std::runtime_error("cannot write " + p.string()); }
  out << data;
}

struct EmbedderChoice
{
  std::string kind = "auto"; // auto | http | hash
  int hash_dim = 256;
};

/// `model_hint` is the index's model id when one is known.
std::shared_ptr<EmbeddingGateway> make_gateway(EmbedderChoice const &choice, std::string const &model_hint = {})
{
  std::string kind = choice.kind;
  int dim = choice.hash_dim;
  if (kind == "auto") {
    if (model_hint.starts_with("hash-")) {
      kind = "hash";
      dim = std::stoi(model_hint.substr(5));
    } else {
      kind = "http";
    }
  }
  std::shared_ptr<EmbeddingProvider> provider;
  if (kind == "hash") {
    provider = std::make_shared<HashingEmbeddingProvider>(dim);
  } else if (kind == "http") {
    auto const url = env_or("EMBED_URL", "");
    if (url.empty()) { throw InvalidConfig("EMBED_URL is not set (or pass --embedder hash)"); }
    auto model = env_or("EMBED_MODEL", model_hint);
    if (model.empty()) { throw InvalidConfig("EMBED_MODEL is not set"); }
    provider = std::make_shared<HttpEmbeddingProvider>(url, model);
  } else {
    throw InvalidConfig("unknown embedder '" + kind + "'");
  }
  return std::make_shared<EmbeddingGateway>(provider, GatewayConfig::from_env());
}

std::shared_ptr<GenerationProvider> make_generator()
{
  auto const url = env_or("GEN_URL", "");
  auto const model = env_or("GEN_MODEL", "");
  if (url.empty() || model.empty()) { throw InvalidConfig("GEN_URL and GEN_MODEL must be set"); }
  return std::make_shared<HttpGenerationProvider>(url, model);
}

void print_retrieved(std::vector<RetrievedDoc> const &docs)
{
  for (auto const &d : docs) {
    std::cout << d.final_rank << ". " << d.doc_id << "  r=" << d.rerank_score << "  cos=" << d.prefetch_score
              << " (prefetch rank " << d.prefetch_rank << ")\n   " << d.meta.title << " [" << d.meta.date.iso() << "]\n";
    if (d.best_sentence) { std::cout << "   > " << d.best_sentence->text << "\n"; }
  }
}

HttpServer *g_server = nullptr;

void on_signal(int)
{
  if (g_server) { g_server->stop(); }
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Retrieval-augmented question answering over resolution archives"};
  app.require_subcommand(1);

  // ingest
  auto *ingest = app.add_subcommand("ingest", "Parse a corpus directory into records.bin");
  std::filesystem::path corpus_dir, records_out, report_out, abbreviations;
  unsigned workers = 0;
  std::string date_policy = "reject";
  ingest->add_option("--corpus-dir", corpus_dir, "Directory of JSON records")->required();
  ingest->add_option("--out", records_out, "Output records file")->required();
  ingest->add_option("--report", report_out, "Write the ingest report (JSON) here");
  ingest->add_option("--workers", workers, "Parser threads (0 = hardware)");
  ingest->add_option("--date-policy", date_policy, "reject|warn")->check(CLI::IsMember({"reject", "warn"}));
  ingest->add_option("--abbreviations", abbreviations, "Abbreviation list for the sentence splitter");

  // index
  auto *index_cmd = app.add_subcommand("index", "Build or inspect a vector index");
  index_cmd->require_subcommand(1);
  auto *index_build = index_cmd->add_subcommand("build", "Embed records and write an index");
  std::filesystem::path records_in, index_path;
  EmbedderChoice embedder;
  index_build->add_option("--records", records_in, "records.bin from ingest")->required();
  index_build->add_option("--out", index_path, "Index file")->required();
  index_build->add_option("--embedder", embedder.kind, "auto|http|hash")->check(CLI::IsMember({"auto", "http", "hash"}));
  index_build->add_option("--hash-dim", embedder.hash_dim, "Dimension of the hashing embedder");
  auto *index_info = index_cmd->add_subcommand("info", "Describe an index file");
  index_info->add_option("--index", index_path, "Index file")->required();

  // ask
  auto *ask = app.add_subcommand("ask", "Answer one question");
  std::string query;
  RetrievalConfig rc;
  bool retrieve_only = false;
  std::filesystem::path upload_path;
  ask->add_option("--index", index_path, "Index file")->required();
  ask->add_option("--query", query, "Question")->required();
  ask->add_option("--n", rc.n, "Prefetch width");
  ask->add_option("--k", rc.k, "Documents kept");
  ask->add_option("--alpha", rc.alpha, "Best-sentence weight");
  ask->add_option("--pdf", upload_path, "Include this PDF in the prompt");
  ask->add_flag("--retrieve-only", retrieve_only, "Print retrieved documents and stop");
  ask->add_option("--embedder", embedder.kind, "auto|http|hash")->check(CLI::IsMember({"auto", "http", "hash"}));

  // serve
  auto *serve = app.add_subcommand("serve", "Run the HTTP API");
  std::filesystem::path pdf_store, session_dir, eval_log;
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--index", index_path, "Index file")->required();
  serve->add_option("--pdf-store", pdf_store, "Directory of original PDFs (<doc>/<lang>.pdf)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--session-dir", session_dir, "Persist sessions here");
  serve->add_option("--eval-log", eval_log, "Ratings log (NDJSON)");
  serve->add_option("--embedder", embedder.kind, "auto|http|hash")->check(CLI::IsMember({"auto", "http", "hash"}));

  // eval-report
  auto *eval_cmd = app.add_subcommand("eval-report", "Aggregate a ratings log");
  std::filesystem::path log_path;
  std::string format = "table";
  AggregateOptions agg;
  std::string config_filter;
  eval_cmd->add_option("--log", log_path, "Ratings log (NDJSON)")->required();
  eval_cmd->add_option("--format", format, "table|csv|json")->check(CLI::IsMember({"table", "csv", "json"}));
  eval_cmd->add_option("--config", config_filter, "Only this retriever or generator tag");
  eval_cmd->add_flag("--per-rater", agg.per_rater, "Break cells down by rater");

  // analytics
  auto *analytics = app.add_subcommand("analytics", "Subject tag clustering and temporal profiles");
  analytics->require_subcommand(1);
  auto *cluster = analytics->add_subcommand("cluster", "Cluster subject tags");
  std::filesystem::path tags_path, out_path, clusters_path;
  double threshold = 2.0;
  std::string linkage = "ward";
  cluster->add_option("--tags", tags_path, "JSON array of tags")->required();
  cluster->add_option("--threshold", threshold, "Merge while linkage distance is below this");
  cluster->add_option("--linkage", linkage, "ward|average|complete|single");
  cluster->add_option("--out", out_path, "clusters.json")->required();
  cluster->add_option("--embedder", embedder.kind, "auto|http|hash")->check(CLI::IsMember({"auto", "http", "hash"}));
  cluster->add_option("--hash-dim", embedder.hash_dim, "Dimension of the hashing embedder");
  auto *tags_cmd = analytics->add_subcommand("tags", "Write the unique subject tags of a records file");
  tags_cmd->add_option("--records", records_in, "records.bin")->required();
  tags_cmd->add_option("--out", out_path, "tags.json")->required();
  auto *profile = analytics->add_subcommand("profile", "Normalized cluster frequency per period");
  int period = 10;
  profile->add_option("--clusters", clusters_path, "clusters.json")->required();
  profile->add_option("--records", records_in, "records.bin")->required();
  profile->add_option("--period", period, "Period length in years")->check(CLI::IsMember({5, 10}));
  profile->add_option("--out", out_path, "profile.csv")->required();
  auto *heatmap = analytics->add_subcommand("heatmap", "Per-subject proportions for one cluster");
  int cluster_id = 0;
  heatmap->add_option("--clusters", clusters_path, "clusters.json")->required();
  heatmap->add_option("--cluster-id", cluster_id, "Cluster to expand")->required();
  heatmap->add_option("--records", records_in, "records.bin")->required();
  heatmap->add_option("--period", period, "Period length in years")->check(CLI::IsMember({5, 10}));
  heatmap->add_option("--out", out_path, "heatmap.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      ParseOptions opts;
      opts.date_policy = date_policy == "warn" ? DateWindowPolicy::Warn : DateWindowPolicy::Reject;
      std::optional<SentenceSplitter> splitter;
      if (!abbreviations.empty()) {
        splitter = SentenceSplitter::from_file(abbreviations);
        opts.splitter = &*splitter;
      }
      auto const result = ingest_corpus(corpus_dir, opts, workers);
      write_records(records_out, result.records);
      auto const report = report_json(result);
      if (!report_out.empty()) { spit(report_out, report); }
      std::cout << "ingested " << result.records.size() << " records (" << result.errors.size() << " errors, "
                << result.warnings.size() << " warnings)\n";
      for (auto const &e : result.errors) { std::cerr << e.file << ": " << e.kind << ": " << e.message << "\n"; }
      return result.errors.empty() ? 0 : 2;
    }

    if (*index_build) {
      auto const records = read_records(records_in);
      auto gateway = make_gateway(embedder);
      auto const index = build_index(records, *gateway);
      index.save(index_path);
      std::cout << "indexed " << index.size() << " documents, " << index.sentence_count() << " sentences, model "
                << index.model_id() << ", dim " << index.dim() << "\n";
      return 0;
    }
    if (*index_info) {
      auto const index = IndexedCorpus::load(index_path);
      nlohmann::ordered_json j{{"model_id", index.model_id()},
                               {"dim", index.dim()},
                               {"documents", index.size()},
                               {"sentences", index.sentence_count()}};
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (*ask) {
      auto const index = IndexedCorpus::load(index_path);
      auto gateway = make_gateway(embedder, index.model_id());
      Retriever retriever(index, *gateway);
      auto const docs = retriever.retrieve(query, rc);
      if (retrieve_only) {
        print_retrieved(docs);
        return 0;
      }
      std::optional<ParsedUpload> upload;
      if (!upload_path.empty()) { upload = parse_user_pdf(as_bytes(slurp(upload_path)), upload_path.filename().string()); }
      auto bundle = assemble_prompt(query, docs, upload);
      auto generator = make_generator();
      auto const answer = generate(bundle, *generator, GenerationOptions::from_env());
      std::cout << answer.text << "\n\nSources:\n";
      for (auto const &s : answer.sources) { std::cout << "- " << s.doc_id << " " << s.title << " (" << s.date.iso() << ")\n"; }
      return 0;
    }

    if (*serve) {
      auto index = std::make_shared<IndexedCorpus const>(IndexedCorpus::load(index_path));
      auto gateway = make_gateway(embedder, index->model_id());
      ServiceConfig cfg;
      cfg.generation = GenerationOptions::from_env();
      cfg.pdf_store = pdf_store;
      if (!session_dir.empty()) { cfg.session_dir = session_dir; }
      if (!eval_log.empty()) { cfg.eval_log = eval_log; }
      QaService service(index, gateway, make_generator(), cfg);
      ServerOptions sopts;
      sopts.request_timeout = std::chrono::duration_cast<std::chrono::seconds>(cfg.generation.timeout) + std::chrono::seconds(10);
      HttpServer server(service, sopts);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      if (port == 0) {
        port = server.bind_any_port(host);
        if (port < 0) { throw std::runtime_error("could not bind " + host); }
        std::cout << "listening on http://" << host << ":" << port << std::endl;
        bool const ok = server.run();
        g_server = nullptr;
        return ok ? 0 : 1;
      }
      std::cout << "listening on http://" << host << ":" << port << std::endl;
      bool const ok = server.listen(host, port);
      g_server = nullptr;
      if (!ok) {
        std::cerr << "could not listen on " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }

    if (*eval_cmd) {
      auto const records = RatingsLog(log_path).read_all();
      if (!config_filter.empty()) { agg.config = config_filter; }
      auto const report = aggregate(records, agg);
      if (format == "csv") {
        std::cout << render_csv(report);
      } else if (format == "json") {
        std::cout << report_json(report) << "\n";
      } else {
        std::cout << render_table(report);
      }
      return 0;
    }

    if (*cluster) {
      auto const tags = tags_from_json(slurp(tags_path));
      auto gateway = make_gateway(embedder);
      auto const vectors = embed_tags(tags, *gateway);
      auto const clusters = cluster_subjects(vectors, threshold, linkage_from_string(linkage));
      spit(out_path, clusters_to_json(clusters));
      std::cout << tags.size() << " tags -> " << clusters.size() << " clusters\n";
      return 0;
    }
    if (*tags_cmd) {
      auto const records = read_records(records_in);
      spit(out_path, nlohmann::json(collect_subjects(records)).dump(2) + "\n");
      return 0;
    }
    if (*profile) {
      auto const records = read_records(records_in);
      auto const clusters = clusters_from_json(slurp(clusters_path));
      spit(out_path, profile_to_csv(cluster_temporal_profile(records, clusters, period)));
      return 0;
    }
    if (*heatmap) {
      auto const records = read_records(records_in);
      auto const clusters = clusters_from_json(slurp(clusters_path));
      auto it = std::find_if(clusters.begin(), clusters.end(), [&](auto const &c) { return c.cluster_id == cluster_id; });
      if (it == clusters.end()) { throw NotFound("no cluster " + std::to_string(cluster_id)); }
      spit(out_path, heatmap_to_csv(subject_heatmap(*it, records, period)));
      return 0;
    }
  } catch (Error const &e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (std::exception const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
