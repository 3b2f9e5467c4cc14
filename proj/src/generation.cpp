#include "resrag/generation.hpp"

#include "binary_io.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>

namespace resrag {

using nlohmann::json;

char const *const kDefaultPromptTemplate =
  "You are a helpful AI assistant. Use the following information to answer the user's question.\n"
  "\n"
  "User's question: {query}\n"
  "\n"
  "Relevant information from the retrieved documents: {retrieved_docs}\n"
  "\n"
  "Relevant information from the user uploaded PDF (optional): {parsed_pdf}\n";

namespace {
constexpr std::string_view kQuery = "{query}";
constexpr std::string_view kDocs = "{retrieved_docs}";
constexpr std::string_view kPdf = "{parsed_pdf}";

std::size_t count(std::string_view hay, std::string_view needle)
{
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) { ++n; }
  return n;
}

std::string substitute(std::string_view tmpl, std::string_view query, std::string_view docs, std::string_view pdf)
{
  std::string out;
  out.reserve(tmpl.size() + query.size() + docs.size() + pdf.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto const brace = tmpl.find('{', pos);
    if (brace == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, brace - pos));
    auto const rest = tmpl.substr(brace);
    if (rest.starts_with(kQuery)) {
      out.append(query);
      pos = brace + kQuery.size();
    } else if (rest.starts_with(kDocs)) {
      out.append(docs);
      pos = brace + kDocs.size();
    } else if (rest.starts_with(kPdf)) {
      out.append(pdf);
      pos = brace + kPdf.size();
    } else {
      out.push_back('{');
      pos = brace + 1;
    }
  }
  return out;
}

std::string join(std::vector<std::string> const &parts, std::string_view sep)
{
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) { out.append(sep); }
    out.append(parts[i]);
  }
  return out;
}

std::string block_text(std::string const &doc_id, std::vector<std::string> const &sentences, std::size_t n)
{
  std::string out = "[" + doc_id + "]";
  for (std::size_t i = 0; i < n; ++i) { out += " " + sentences[i]; }
  return out;
}
} // namespace

PromptTemplate::PromptTemplate(std::string text)
  : text_(std::move(text))
{
  for (auto slot : {kQuery, kDocs, kPdf}) {
    if (count(text_, slot) != 1) {
      throw InvalidConfig("prompt template must contain " + std::string(slot) + " exactly once");
    }
  }
  auto const slot = text_.find(kPdf);
  auto const prev = text_.rfind("\n\n", slot);
  auto const next = text_.find("\n\n", slot);
  if (next != std::string::npos) {
    auto const begin = prev == std::string::npos ? 0 : prev + 2;
    without_upload_ = text_.substr(0, begin) + text_.substr(next + 2);
  } else {
    auto end = text_.size();
    while (end > slot && (text_[end - 1] == '\n' || text_[end - 1] == '\r')) { --end; }
    auto const begin = prev == std::string::npos ? 0 : prev;
    without_upload_ = text_.substr(0, begin) + text_.substr(end);
  }
}

PromptTemplate PromptTemplate::builtin() { return PromptTemplate(kDefaultPromptTemplate); }

PromptTemplate PromptTemplate::from_file(std::filesystem::path const &path) { return PromptTemplate(io::read_file(path)); }

std::string PromptTemplate::render(std::string_view query, std::string_view retrieved_docs,
                                   std::optional<std::string_view> parsed_pdf) const
{
  if (parsed_pdf) { return substitute(text_, query, retrieved_docs, *parsed_pdf); }
  return substitute(without_upload_, query, retrieved_docs, {});
}

PromptBundle assemble_prompt(std::string const &query, std::vector<RetrievedDoc> const &retrieved,
                             std::optional<ParsedUpload> const &upload, std::size_t budget, PromptTemplate const &tmpl)
{
  if (retrieved.empty()) { throw InvalidConfig("assemble_prompt needs at least one retrieved document"); }
  if (budget < query.size()) { throw BudgetTooSmall("budget smaller than the query"); }

  bool const with_upload = upload.has_value() && !upload->chunks.empty();
  auto const skeleton = tmpl.render(query, "", with_upload ? std::optional<std::string_view>("") : std::nullopt);
  if (skeleton.size() >= budget) { throw BudgetTooSmall("budget cannot hold the prompt skeleton and query"); }
  std::size_t const reserve = with_upload ? budget / 5 : 0;
  std::size_t const doc_room = budget - skeleton.size() > reserve ? budget - skeleton.size() - reserve : 0;

  PromptBundle bundle;
  bundle.query = query;
  bundle.retrieved = retrieved;
  bundle.upload = upload;
  bundle.budget = budget;

  std::size_t used = 0;
  for (auto const &doc : retrieved) {
    auto const &sents = doc.excerpt;
    std::size_t const sep = bundle.retrieved_blocks.empty() ? 0 : 2;
    std::size_t keep = sents.size();
    std::string text = block_text(doc.doc_id, sents, keep);
    while (keep > 0 && used + sep + text.size() > doc_room) { text = block_text(doc.doc_id, sents, --keep); }
    if (keep == 0) { break; }
    used += sep + text.size();
    bundle.retrieved_blocks.emplace_back(doc.doc_id, std::move(text));
    if (keep < sents.size()) { break; }
  }
  if (bundle.retrieved_blocks.empty()) { throw BudgetTooSmall("budget cannot hold the query and one document block"); }

  std::vector<std::string> blocks;
  for (auto const &[id, text] : bundle.retrieved_blocks) { blocks.push_back(text); }
  auto const docs_text = join(blocks, "\n\n");

  if (with_upload) {
    std::size_t const room = budget - skeleton.size() - docs_text.size();
    std::vector<std::string> chunks;
    std::size_t up_used = 0;
    for (auto const &chunk : upload->chunks) {
      std::size_t const sep = chunks.empty() ? 0 : 2;
      if (up_used + sep + chunk.size() <= room) {
        chunks.push_back(chunk);
        up_used += sep + chunk.size();
        continue;
      }
      auto sents = split_sentences(chunk);
      while (!sents.empty() && up_used + sep + join(sents, " ").size() > room) { sents.pop_back(); }
      if (!sents.empty()) { chunks.push_back(join(sents, " ")); }
      break;
    }
    if (!chunks.empty()) { bundle.upload_blocks = std::move(chunks); }
  }

  if (bundle.upload_blocks) {
    bundle.rendered = tmpl.render(query, docs_text, join(*bundle.upload_blocks, "\n\n"));
  } else {
    bundle.rendered = tmpl.render(query, docs_text, std::nullopt);
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Provider

HttpGenerationProvider::HttpGenerationProvider(std::string base_url, std::string model)
  : model_(std::move(model))
{
  std::tie(origin_, prefix_) = split_url(base_url);
}

std::string HttpGenerationProvider::complete(std::string const &prompt, std::chrono::milliseconds timeout)
{
  httplib::Client cli(origin_);
  auto const secs = timeout.count() / 1000;
  auto const usecs = (timeout.count() % 1000) * 1000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);

  json body{{"model", model_}, {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  auto res = cli.Post(prefix_ + "/v1/chat/completions", body.dump(), "application/json");
  if (!res) {
    if (res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout) {
      throw ProviderTimeout("generation provider did not answer within " + std::to_string(timeout.count()) + " ms");
    }
    throw ProviderUnavailable("generation provider: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    std::string msg = res->body;
    std::string code;
    try {
      auto const j = json::parse(res->body);
      auto const &err = j.at("error");
      if (err.is_string()) {
        msg = err.get<std::string>();
      } else {
        msg = err.value("message", msg);
        code = err.value("code", "");
      }
    } catch (std::exception const &) {
    }
    std::string lowered = msg;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) { return std::tolower(c); });
    if (code == "context_length_exceeded" || lowered.find("context length") != std::string::npos ||
        lowered.find("context window") != std::string::npos || res->status == 413) {
      throw ContextOverflow(msg);
    }
    throw ProviderUnavailable("generation provider returned " + std::to_string(res->status) + ": " + msg);
  }
  try {
    auto const j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (json::exception const &e) {
    throw ProviderUnavailable(std::string("generation provider sent malformed body: ") + e.what());
  }
}

GenerationOptions GenerationOptions::from_env()
{
  GenerationOptions o;
  if (char const *v = std::getenv("GEN_TIMEOUT_S"); v && *v) {
    o.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(std::atof(v) * 1000));
  }
  return o;
}

GeneratedAnswer generate(PromptBundle &bundle, GenerationProvider &provider, GenerationOptions const &options)
{
  auto const start = std::chrono::steady_clock::now();
  GeneratedAnswer answer;
  answer.provider_model = provider.model();
  for (;;) {
    try {
      answer.text = provider.complete(bundle.rendered, options.timeout);
      break;
    } catch (ContextOverflow const &) {
      if (answer.retries > 0) { throw; }
      ++answer.retries;
      bundle = assemble_prompt(bundle.query, bundle.retrieved, bundle.upload, bundle.budget / 2,
                               options.tmpl ? *options.tmpl : PromptTemplate::builtin());
    }
  }
  if (answer.text.empty()) { throw ProviderUnavailable("generation provider returned an empty answer"); }
  for (auto const &[doc_id, text] : bundle.retrieved_blocks) {
    auto it = std::find_if(bundle.retrieved.begin(), bundle.retrieved.end(),
                           [&](RetrievedDoc const &d) { return d.doc_id == doc_id; });
    if (it != bundle.retrieved.end()) { answer.sources.push_back(it->meta); }
  }
  answer.latency_ms =
    std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  return answer;
}

} // namespace resrag
