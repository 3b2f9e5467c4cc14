// Acceptance gate: one PASS/FAIL line per primary criterion. Exit status is
// non-zero when any criterion fails.

#include "eval_fixtures.hpp"
#include "mocks.hpp"
#include "oracles.hpp"
#include "random_corpus.hpp"
#include "temp_dir.hpp"

#include "resrag/analytics.hpp"
#include "resrag/generation.hpp"
#include "resrag/qa_service.hpp"
#include "resrag/ranking.hpp"
#include "resrag/retrieval.hpp"

#include <httplib.h>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char **environ;

using namespace resrag;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

class Failure : public std::runtime_error
{
  using std::runtime_error::runtime_error;
};

void require(bool ok, std::string const &what)
{
  if (!ok) { throw Failure(what); }
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(char const *f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Serves whatever query vector the test sets, so retrieval runs through the
// gateway exactly as in production.
class QueryProvider : public EmbeddingProvider
{
public:
  std::string model_id() const override { return "rand"; }
  EmbedResponse embed(std::vector<std::string> const &texts) override
  {
    EmbedResponse r;
    r.dim = static_cast<int>(current.size());
    for (std::size_t i = 0; i < texts.size(); ++i) { r.vectors.emplace_back(current.data(), current.data() + current.size()); }
    return r;
  }
  Vecf current;
};

// ---------------------------------------------------------------------------

Outcome retrieval_oracle()
{
  auto const t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> docs(1, 200);
  std::uniform_real_distribution<double> ua(0.0, 1.0);
  auto provider = std::make_shared<QueryProvider>();
  EmbeddingGateway gateway(provider);
  int compared = 0;
  for (int t = 0; t < 1000; ++t) {
    testing_support::RandomCorpusOptions o;
    o.docs = docs(rng);
    o.dim = 8;
    o.max_sentences = 20;
    o.no_sentence_prob = 0.05;
    auto const c = testing_support::random_corpus(rng, o);
    auto const idx = IndexedCorpus::build(c.records, c.docs, c.sentences);
    provider->current = testing_support::random_vector(rng, o.dim);
    auto const q = testing_support::to_oracle(provider->current);
    std::size_t const n = std::uniform_int_distribution<std::size_t>(1, static_cast<std::size_t>(o.docs))(rng);
    std::size_t const k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(n, 10))(rng);
    double const alpha = t % 10 == 0 ? 0.7 : ua(rng);
    auto const got = Retriever(idx, gateway).retrieve("query " + std::to_string(t), {n, k, alpha});

    // every corpus: same as the two-stage reference
    auto const staged = oracle::retrieve(c.oracle_docs, q, n, k, alpha);
    require(got.size() == staged.size(), "corpus " + std::to_string(t) + ": size differs from two-stage reference");
    for (std::size_t i = 0; i < got.size(); ++i) {
      require(got[i].doc_id == staged[i].id, "corpus " + std::to_string(t) + ": differs from two-stage reference");
    }

    auto full = oracle::brute_force(c.oracle_docs, q, alpha);
    if (full.size() > k) { full.resize(k); }
    auto const top_n = oracle::cosine_top_n(c.oracle_docs, q, n);
    std::set<std::string> const prefetch(top_n.begin(), top_n.end());
    bool contained = true;
    for (auto const &s : full) { contained = contained && prefetch.contains(s.id); }
    if (!contained) { continue; }
    ++compared;
    require(got.size() == full.size(), "corpus " + std::to_string(t) + ": result size differs");
    for (std::size_t i = 0; i < got.size(); ++i) {
      require(got[i].doc_id == full[i].id, "corpus " + std::to_string(t) + ": order differs at " + std::to_string(i));
      require(std::abs(got[i].rerank_score - full[i].relevance) <= 1e-9, "corpus " + std::to_string(t) + ": score differs");
    }
  }
  double const secs = seconds_since(t0);
  require(compared > 0, "no corpus satisfied the containment condition");
  require(secs < 60.0, "runtime " + fmt("%.1f", secs) + " s exceeds 60 s");
  return {true, std::to_string(compared) + "/1000 corpora with top-k inside the prefetch match the no-prefetch oracle, " +
                  "all 1000 match the two-stage reference, " + fmt("%.1f", secs) + " s"};
}

Outcome formula_fidelity()
{
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<int> ns(1, 20);
  double worst = 0;
  for (int t = 0; t < 10'000; ++t) {
    auto const q = testing_support::random_vector(rng, 8);
    RowMatrixf S(ns(rng), 8);
    std::vector<oracle::Vec> os;
    for (Index i = 0; i < S.rows(); ++i) {
      Vecf const s = testing_support::random_vector(rng, 8);
      S.row(i) = s.transpose();
      os.push_back(testing_support::to_oracle(s));
    }
    auto const oq = testing_support::to_oracle(q);
    double const r = relevance_score(q, S, 0.7);
    worst = std::max(worst, std::abs(r - oracle::relevance(oq, os, 0.7)));
    require(std::abs(r - oracle::relevance(oq, os, 0.7)) <= 1e-9, "case " + std::to_string(t) + " off by more than 1e-9");

    auto const sims = sentence_similarities(q, S);
    double sum = 0;
    for (Index i = 0; i < sims.size(); ++i) { sum += sims[i]; }
    require(relevance_score(q, S, 1.0) == sims.maxCoeff(), "alpha=1 is not exactly the max");
    require(relevance_score(q, S, 0.0) == sum / static_cast<double>(sims.size()), "alpha=0 is not exactly the mean");
  }
  return {true, "10000 cases, max deviation " + fmt("%.2e", worst)};
}

Outcome rank_semantics()
{
  std::mt19937_64 rng(1003);
  std::uniform_int_distribution<int> len(1, 60), levels(1, 12);
  for (int t = 0; t < 10'000; ++t) {
    int const L = levels(rng);
    std::uniform_int_distribution<int> lv(0, L);
    std::vector<double> s(static_cast<std::size_t>(len(rng)));
    for (auto &x : s) { x = static_cast<double>(lv(rng)) / L; }
    auto const got = competition_ranks(s);
    auto const want = oracle::ranks(s);
    for (std::size_t i = 0; i < s.size(); ++i) { require(got[i] == want[i], "vector " + std::to_string(t) + " differs"); }
  }
  return {true, "10000 score vectors with ties"};
}

Outcome cosine_properties()
{
  std::mt19937_64 rng(1004);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int t = 0; t < 10'000; ++t) {
    auto const a = testing_support::random_vector(rng, 8);
    auto const b = testing_support::random_vector(rng, 8);
    double const ab = cosine(a, b);
    require(ab == cosine(b, a), "not symmetric");
    require(ab >= -1.0 - 1e-6 && ab <= 1.0 + 1e-6, "out of range");

    std::vector<Vecf> docs;
    for (int d = 0; d < 10; ++d) { docs.push_back(testing_support::random_vector(rng, 8)); }
    Vecf const scaled = a * scale(rng);
    auto argmax = [&](Vecf const &q) {
      std::size_t best = 0;
      for (std::size_t d = 1; d < docs.size(); ++d) {
        if (cosine(q, docs[d]) > cosine(q, docs[best])) { best = d; }
      }
      return best;
    };
    require(argmax(a) == argmax(scaled), "argmax changed under positive scaling");
  }
  return {true, "10000 trials"};
}

std::string fixture(std::string const &name)
{
  std::ifstream in(testing_support::fixtures() / name, std::ios::binary);
  require(static_cast<bool>(in), "missing fixture " + name);
  return {std::istreambuf_iterator<char>(in), {}};
}

RetrievedDoc doc(std::string id, std::vector<std::string> excerpt)
{
  RetrievedDoc d;
  d.doc_id = d.meta.doc_id = std::move(id);
  d.excerpt = std::move(excerpt);
  return d;
}

Outcome prompt_golden()
{
  std::string const q = "Is interfaith or interreligious dialogue addressed by the United Nations?";
  std::vector<RetrievedDoc> const docs{
    doc("A/RES/65/5", {"The General Assembly proclaims the first week of February of every year the World Interfaith "
                       "Harmony Week.",
                       "Mutual understanding and interreligious dialogue constitute important dimensions of a culture "
                       "of peace."}),
    doc("A/RES/62/90", {"The General Assembly recognizes the commitment of all religions to peace.",
                        "It encourages interreligious dialogue as a means of promoting understanding."})};
  ParsedUpload up;
  up.chunks = {"Interfaith councils met in Geneva in 2019. They issued a joint statement.",
               "The statement called for dialogue in schools."};
  ParsedUpload tiny;
  tiny.chunks = {"P"};
  require(assemble_prompt("Q", {doc("d1", {"D"})}).rendered == fixture("prompt_a.txt"), "prompt_a differs");
  require(assemble_prompt("Q", {doc("d1", {"D"})}, tiny).rendered == fixture("prompt_b.txt"), "prompt_b differs");
  require(assemble_prompt(q, docs).rendered == fixture("prompt_without_upload.txt"), "prompt_without_upload differs");
  require(assemble_prompt(q, docs, up).rendered == fixture("prompt_with_upload.txt"), "prompt_with_upload differs");
  require(fixture("prompt_a.txt").starts_with("You are a helpful AI assistant."), "template header missing");
  return {true, "4 golden prompts byte-equal"};
}

Outcome corpus_statistics()
{
  if (char const *dir = std::getenv("UNRES_CORPUS_DIR"); dir && *dir) {
    auto const result = ingest_corpus(dir);
    auto const eh = result.stats.at("en", Domain::HealthRS);
    auto const ee = result.stats.at("en", Domain::Education);
    require(eh == (DomainStats{4781, 2383}),
            "en health_rs " + std::to_string(eh.doc_count) + "/" + std::to_string(eh.subject_count));
    require(ee == (DomainStats{2718, 1944}),
            "en education " + std::to_string(ee.doc_count) + "/" + std::to_string(ee.subject_count));
    return {true, "full archive counts reproduced"};
  }
  auto const result = ingest_corpus(testing_support::fixtures() / "corpus");
  require(result.errors.empty(), "fixture corpus has ingest errors");
  struct Cell
  {
    char const *lang;
    Domain domain;
    DomainStats want;
  };
  Cell const cells[] = {
    {"en", Domain::HealthRS, {14, 19}}, {"en", Domain::Education, {11, 17}}, {"de", Domain::Education, {3, 5}},
    {"de", Domain::HealthRS, {2, 5}},   {"zh", Domain::HealthRS, {7, 14}},   {"zh", Domain::Education, {5, 11}},
    {"ar", Domain::Education, {6, 14}}, {"ar", Domain::HealthRS, {7, 15}},   {"es", Domain::Education, {7, 15}},
    {"es", Domain::HealthRS, {12, 18}}, {"fr", Domain::Education, {8, 15}},  {"fr", Domain::HealthRS, {11, 17}},
    {"ru", Domain::Education, {4, 10}}, {"ru", Domain::HealthRS, {9, 16}},
  };
  for (auto const &c : cells) {
    auto const got = result.stats.at(c.lang, c.domain);
    require(got == c.want, std::string(c.lang) + "/" + std::string(to_string(c.domain)) + " = " +
                             std::to_string(got.doc_count) + "/" + std::to_string(got.subject_count));
  }
  require(result.records.size() == 20 && result.stats.unique_subjects == 24, "document or subject totals differ");
  return {true, "UNRES_CORPUS_DIR unset; 20-doc fixture counts exact"};
}

Outcome index_persistence()
{
  testing_support::TempDir dir;
  std::mt19937_64 rng(1007);
  testing_support::RandomCorpusOptions o;
  o.docs = 150;
  o.no_sentence_prob = 0.1;
  auto const c = testing_support::random_corpus(rng, o);
  auto const idx = IndexedCorpus::build(c.records, c.docs, c.sentences);
  idx.save(dir / "index.bin");
  auto const back = IndexedCorpus::load(dir / "index.bin");
  for (int t = 0; t < 100; ++t) {
    auto const q = testing_support::random_vector(rng, o.dim);
    RetrievalConfig const cfg{50, 10, 0.7};
    auto const a = rerank(idx, q, cfg);
    auto const b = rerank(back, q, cfg);
    require(a.size() == b.size(), "result sizes differ");
    for (std::size_t i = 0; i < a.size(); ++i) {
      require(a[i].doc_id == b[i].doc_id && a[i].rerank_score == b[i].rerank_score &&
                a[i].prefetch_score == b[i].prefetch_score && a[i].excerpt == b[i].excerpt,
              "query " + std::to_string(t) + " differs after reload");
    }
  }
  auto const bytes = idx.serialize();
  int rejected = 0, trials = 0;
  std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
  for (int t = 0; t < 100; ++t, ++trials) {
    auto bad = bytes;
    bad[pos(rng)] ^= static_cast<char>(1 << (t % 8));
    try {
      IndexedCorpus::deserialize(bad);
    } catch (CorruptIndexError const &) {
      ++rejected;
    } catch (VersionError const &) {
      ++rejected;
    }
  }
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, bytes.size() / 3, bytes.size() - 1}) {
    ++trials;
    try {
      IndexedCorpus::deserialize(bytes.substr(0, cut));
    } catch (CorruptIndexError const &) {
      ++rejected;
    }
  }
  require(rejected == trials, std::to_string(trials - rejected) + " corrupted files accepted");
  return {true, "100 queries identical after reload; " + std::to_string(rejected) + " corrupted files rejected"};
}

bool reports_close(EvalReport const &a, EvalReport const &b)
{
  if (a.cells.size() != b.cells.size()) { return false; }
  for (auto const &[key, cell] : a.cells) {
    auto const o = b.cell(key.first, key.second);
    if (!o || o->count != cell.count || std::abs(o->mean() - cell.mean()) > 1e-9) { return false; }
  }
  return true;
}

Outcome eval_aggregation()
{
  std::mt19937_64 rng(1008);
  for (int t = 0; t < 500; ++t) {
    std::vector<EvalRecord> log;
    for (int i = 0; i < 1 + t % 60; ++i) { log.push_back(testing_support::random_record(rng)); }
    auto const base = aggregate(log);
    auto shuffled = log;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    require(reports_close(aggregate(shuffled), base), "not permutation invariant");
    auto const cut = static_cast<std::ptrdiff_t>(std::uniform_int_distribution<std::size_t>(0, log.size())(rng));
    std::vector<EvalRecord> a(log.begin(), log.begin() + cut), b(log.begin() + cut, log.end());
    require(reports_close(merge(aggregate(a), aggregate(b)), base), "merge disagrees with full aggregate");
  }
  auto const table = render_table(aggregate(testing_support::table_fixture_log()));
  std::istringstream lines(table);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  std::istringstream hs(header), rs(row);
  std::vector<std::string> htok, rtok;
  for (std::string w; hs >> w;) { htok.push_back(w); }
  for (std::string w; rs >> w;) { rtok.push_back(w); }
  require(htok.size() == 7 && htok[0] == "Document" && htok[1] == "Retriever" && htok[2] == "Relevance" &&
            htok[6] == "Actionability",
          "table header layout differs");
  require(rtok.size() == 6 && rtok[0] == "qwen3-emb-0.6b" && rtok[1] == "4.26", "4.26 cell not reproduced");
  require(table.find("Answer Generator") != std::string::npos, "answer section missing");
  return {true, "500 logs permutation/merge within 1e-9; 4.26 cell rendered"};
}

oracle::Link link_of(Linkage l)
{
  switch (l) {
  case Linkage::Ward: return oracle::Link::Ward;
  case Linkage::Average: return oracle::Link::Average;
  case Linkage::Complete: return oracle::Link::Complete;
  case Linkage::Single: return oracle::Link::Single;
  }
  return oracle::Link::Ward;
}

DocumentRecord rec(std::string id, int year, std::vector<std::string> subjects)
{
  DocumentRecord r;
  r.doc_id = std::move(id);
  r.date = {year, 6, 1};
  r.subjects = std::move(subjects);
  return r;
}

Outcome clustering_oracle()
{
  std::mt19937_64 rng(1009);
  std::uniform_int_distribution<int> ns(1, 50), dims(2, 8);
  std::uniform_real_distribution<double> th(0.2, 6.0);
  int cases = 0;
  for (auto l : {Linkage::Ward, Linkage::Average, Linkage::Complete, Linkage::Single}) {
    for (int t = 0; t < 150; ++t, ++cases) {
      int const n = ns(rng), dim = dims(rng);
      RowMatrixf p(n, dim);
      std::vector<oracle::Vec> op;
      for (int i = 0; i < n; ++i) {
        Vecf const v = testing_support::random_vector(rng, dim);
        p.row(i) = v.transpose();
        op.push_back(testing_support::to_oracle(v));
      }
      double const threshold = th(rng);
      auto const d = agglomerate(p, threshold, l);
      std::vector<int> const got(d.labels.begin(), d.labels.end());
      require(got == oracle::agglomerate(op, threshold, link_of(l)),
              std::string(to_string(l)) + " partition differs (n=" + std::to_string(n) + ")");
    }
  }

  // (10 / 50) x 100 / 2 = 10
  std::vector<DocumentRecord> rs;
  for (int i = 0; i < 50; ++i) {
    rs.push_back(rec("d" + std::to_string(i), 1990 + i % 10, i < 6 ? std::vector<std::string>{"X"}
                                                              : i < 10 ? std::vector<std::string>{"Y"}
                                                                       : std::vector<std::string>{}));
  }
  auto const prof = cluster_temporal_profile(rs, {{0, {"X", "Y"}, ""}, {1, {"Z"}, ""}}, 10);
  require(prof.size() == 2 && prof[0].normalized_freq == 10.0 && prof[1].normalized_freq == 0.0,
          "per-100 normalization example differs");

  // 2001 {A,B}, 2003 {A}, 2007 {C}, 2012 {A,C}, 2014 {B}; clusters {A,B}, {C}
  std::vector<DocumentRecord> const small{rec("r1", 2001, {"A", "B"}), rec("r2", 2003, {"A"}), rec("r3", 2007, {"C"}),
                                          rec("r4", 2012, {"A", "C"}), rec("r5", 2014, {"B"})};
  auto const five = cluster_temporal_profile(small, {{0, {"A", "B"}, ""}, {1, {"C"}, ""}}, 5);
  std::vector<double> const want{75.0, 0.0, 0.0, 100.0, 50.0, 50.0};
  require(five.size() == want.size(), "hand fixture period count differs");
  for (std::size_t i = 0; i < want.size(); ++i) { require(five[i].normalized_freq == want[i], "hand fixture value differs"); }
  return {true, std::to_string(cases) + " random inputs (4 linkages) match; normalization fixtures exact"};
}

// ---------------------------------------------------------------------------

struct Child
{
  pid_t pid = -1;
  int out = -1;
  ~Child()
  {
    if (pid > 0) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
    }
    if (out >= 0) { ::close(out); }
  }
};

std::string read_line(int fd, std::chrono::milliseconds limit)
{
  auto const deadline = Clock::now() + limit;
  std::string line;
  char ch;
  while (Clock::now() < deadline) {
    auto const n = ::read(fd, &ch, 1);
    if (n <= 0) { break; }
    if (ch == '\n') { return line; }
    line.push_back(ch);
  }
  return line;
}

Outcome end_to_end()
{
  auto const t0 = Clock::now();
  testing_support::TempDir dir;
  mocks::HttpMock providers;
  providers.serve_embeddings(16);
  providers.serve_chat([](std::string const &prompt) {
    auto const first = prompt.find('[');
    auto const id = prompt.substr(first + 1, prompt.find(']', first) - first - 1);
    return "**Yes.** See [" + id + "].";
  });
  auto const url = providers.url();

  {
    EmbeddingGateway gateway(std::make_shared<HttpEmbeddingProvider>(url, "mock-embed"));
    auto const records = ingest_corpus(testing_support::fixtures() / "corpus").records;
    build_index(records, gateway).save(dir / "index.bin");
  }

  int pipefd[2];
  require(::pipe(pipefd) == 0, "pipe failed");
  Child child;
  child.out = pipefd[0];
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, pipefd[0]);
  std::string const cli = RESRAG_CLI_PATH;
  std::vector<std::string> args{cli,         "serve",    "--index",  (dir / "index.bin").string(), "--pdf-store",
                                dir.path().string(), "--host", "127.0.0.1", "--port", "0"};
  std::vector<std::string> env{"EMBED_URL=" + url, "EMBED_MODEL=mock-embed", "GEN_URL=" + url, "GEN_MODEL=mock-gen",
                               "GEN_TIMEOUT_S=5"};
  std::vector<char *> argv, envp;
  for (auto &a : args) { argv.push_back(a.data()); }
  argv.push_back(nullptr);
  for (auto &e : env) { envp.push_back(e.data()); }
  envp.push_back(nullptr);
  int const rc = posix_spawn(&child.pid, cli.c_str(), &actions, nullptr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  ::close(pipefd[1]);
  require(rc == 0, "could not start " + cli);

  auto const line = read_line(child.out, std::chrono::seconds(4));
  auto const colon = line.rfind(':');
  require(line.starts_with("listening on http://") && colon != std::string::npos, "server did not report a port: " + line);
  int const port = std::stoi(line.substr(colon + 1));

  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(4, 0);
  nlohmann::json const body{{"query", "Is interfaith or interreligious dialogue addressed by the United Nations?"}, {"k", 3}};
  auto res = client.Post("/api/chat", body.dump(), "application/json");
  require(res && res->status == 200, "chat turn failed: " + (res ? res->body : httplib::to_string(res.error())));
  auto const chat = nlohmann::json::parse(res->body);
  auto const sid = chat.at("session_id").get<std::string>();
  auto const sources = chat.at("sources");
  require(!sources.empty() && sources.size() <= 3, "expected 1..3 sources, got " + std::to_string(sources.size()));
  require(chat.at("answer").get<std::string>().starts_with("**Yes.**"), "answer not passed through verbatim");

  res = client.Get("/api/history/" + sid + "?format=json");
  require(res && res->status == 200, "history export failed");
  auto const turns = turns_from_json(res->body);
  require(turns.size() == 1 && turns[0].query == body.at("query"), "history lost the turn");
  require(turns_from_json(turns_to_json(turns)) == turns, "history does not round-trip");
  require(turns[0].answer.sources.size() == sources.size(), "history sources differ from response");
  res = client.Get("/api/history/" + sid + "?format=markdown");
  require(res && res->status == 200 && res->body.find("## Question 1") != std::string::npos, "markdown export failed");

  ::kill(child.pid, SIGTERM);
  int status = 0;
  ::waitpid(child.pid, &status, 0);
  child.pid = -1;
  double const secs = seconds_since(t0);
  require(WIFEXITED(status) && WEXITSTATUS(status) == 0, "server did not shut down cleanly");
  require(secs < 5.0, "wall time " + fmt("%.2f", secs) + " s exceeds 5 s");
  require(providers.chat_calls.load() == 1, "generator called " + std::to_string(providers.chat_calls.load()) + " times");
  return {true, std::to_string(sources.size()) + " sources, history round-trips, " + fmt("%.2f", secs) + " s"};
}

} // namespace

int main()
{
  std::clog.rdbuf(nullptr); // retrieval fallback warnings would drown the report
  std::vector<std::pair<char const *, std::function<Outcome()>>> const criteria{
    {"retrieval-oracle-equivalence", retrieval_oracle},
    {"formula-fidelity", formula_fidelity},
    {"rank-semantics", rank_semantics},
    {"cosine-properties", cosine_properties},
    {"prompt-golden", prompt_golden},
    {"corpus-statistics", corpus_statistics},
    {"index-persistence", index_persistence},
    {"eval-aggregation", eval_aggregation},
    {"clustering-oracle", clustering_oracle},
    {"end-to-end-mock-providers", end_to_end},
  };
  int failed = 0;
  for (auto const &[name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (std::exception const &e) {
      o = {false, e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
