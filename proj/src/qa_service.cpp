#include "resrag/qa_service.hpp"

#include "binary_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <ctime>
#include <iostream>
#include <sstream>

namespace resrag {

using nlohmann::json;
using nlohmann::ordered_json;
using Clock = std::chrono::system_clock;

struct QaService::Slot
{
  std::mutex mutex;
  ChatSession session;
};

std::string iso_timestamp(Clock::time_point t)
{
  auto const secs = Clock::to_time_t(t);
  auto const ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::string pdf_store_name(std::string_view doc_id)
{
  std::string out(doc_id);
  std::replace(out.begin(), out.end(), '/', '_');
  if (out == "." || out == "..") { out = "_" + out; }
  return out;
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace {

ordered_json meta_to_json(DocMeta const &m)
{
  return ordered_json{{"doc_id", m.doc_id},
                      {"title", m.title},
                      {"date", m.date.iso()},
                      {"domain", to_string(m.domain)},
                      {"languages", m.languages},
                      {"subjects", m.subjects}};
}

DocMeta meta_from_json(json const &j)
{
  DocMeta m;
  m.doc_id = j.at("doc_id").get<std::string>();
  m.title = j.at("title").get<std::string>();
  m.date = Date::parse(j.at("date").get<std::string>());
  m.domain = domain_from_string(j.at("domain").get<std::string>());
  m.languages = j.at("languages").get<std::set<std::string>>();
  m.subjects = j.at("subjects").get<std::vector<std::string>>();
  return m;
}

ordered_json turn_to_json(Turn const &t)
{
  auto sources = ordered_json::array();
  for (auto const &s : t.answer.sources) { sources.push_back(meta_to_json(s)); }
  return ordered_json{{"query", t.query},
                      {"answer",
                       {{"text", t.answer.text},
                        {"sources", sources},
                        {"provider_model", t.answer.provider_model},
                        {"latency_ms", t.answer.latency_ms},
                        {"retries", t.answer.retries}}},
                      {"retrieved", t.retrieved},
                      {"timestamp", t.timestamp},
                      {"upload_id", t.upload_id ? ordered_json(*t.upload_id) : ordered_json(nullptr)},
                      {"prompt", t.prompt}};
}

Turn turn_from_json(json const &j)
{
  Turn t;
  t.query = j.at("query").get<std::string>();
  auto const &a = j.at("answer");
  t.answer.text = a.at("text").get<std::string>();
  for (auto const &s : a.at("sources")) { t.answer.sources.push_back(meta_from_json(s)); }
  t.answer.provider_model = a.at("provider_model").get<std::string>();
  t.answer.latency_ms = a.at("latency_ms").get<std::int64_t>();
  t.answer.retries = a.at("retries").get<int>();
  t.retrieved = j.at("retrieved").get<std::vector<std::string>>();
  t.timestamp = j.at("timestamp").get<std::string>();
  if (auto it = j.find("upload_id"); it != j.end() && it->is_string()) { t.upload_id = it->get<std::string>(); }
  t.prompt = j.value("prompt", "");
  return t;
}

std::int64_t epoch_ms(Clock::time_point t)
{
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

Clock::time_point from_epoch_ms(std::int64_t ms) { return Clock::time_point(std::chrono::milliseconds(ms)); }

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

} // namespace

std::string doc_meta_json(DocMeta const &meta) { return meta_to_json(meta).dump(); }

std::string turns_to_json(std::vector<Turn> const &turns)
{
  auto arr = ordered_json::array();
  for (auto const &t : turns) { arr.push_back(turn_to_json(t)); }
  return arr.dump(2);
}

std::vector<Turn> turns_from_json(std::string_view json_text)
{
  try {
    std::vector<Turn> out;
    for (auto const &t : json::parse(json_text)) { out.push_back(turn_from_json(t)); }
    return out;
  } catch (json::exception const &e) {
    throw SchemaError(std::string("malformed history: ") + e.what());
  }
}

std::string turns_to_markdown(std::vector<Turn> const &turns)
{
  std::ostringstream os;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    auto const &t = turns[i];
    if (i) { os << "\n---\n\n"; }
    os << "## Question " << i + 1 << "\n\n" << t.query << "\n\n### Answer\n\n" << t.answer.text << "\n";
    if (!t.answer.sources.empty()) {
      os << "\n### Sources\n\n";
      for (auto const &s : t.answer.sources) {
        os << "- **" << s.doc_id << "** " << s.title << " (" << s.date.iso();
        if (!s.languages.empty()) {
          os << "; ";
          bool first = true;
          for (auto const &l : s.languages) {
            os << (first ? "" : ", ") << l;
            first = false;
          }
        }
        os << ")\n";
      }
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Service

QaService::QaService(std::shared_ptr<IndexedCorpus const> index, std::shared_ptr<EmbeddingGateway> gateway,
                     std::shared_ptr<GenerationProvider> generator, ServiceConfig config)
  : config_(std::move(config))
  , gateway_(std::move(gateway))
  , generator_(std::move(generator))
  , index_(std::move(index))
{
  config_.retrieval.validate();
  if (!index_) { throw InvalidConfig("service needs an index"); }
  if (!gateway_ || !generator_) { throw InvalidConfig("service needs embedding and generation providers"); }
  if (config_.retriever_tag.empty()) { config_.retriever_tag = index_->model_id(); }
  if (config_.generator_tag.empty()) { config_.generator_tag = generator_->model(); }
  if (config_.eval_log) { eval_log_ = std::make_unique<RatingsLog>(*config_.eval_log); }
  if (config_.session_dir) {
    std::filesystem::create_directories(*config_.session_dir);
    load_sessions();
  }
}

QaService::~QaService() = default;

std::shared_ptr<IndexedCorpus const> QaService::index() const
{
  std::lock_guard lock(index_mutex_);
  return index_;
}

void QaService::swap_index(std::shared_ptr<IndexedCorpus const> index)
{
  if (!index) { throw InvalidConfig("cannot swap in an empty index pointer"); }
  std::lock_guard lock(index_mutex_);
  index_ = std::move(index);
}

std::string QaService::create_session()
{
  auto s = std::make_shared<Slot>();
  s->session.session_id = random_id();
  s->session.last_active = Clock::now();
  std::lock_guard lock(sessions_mutex_);
  sessions_.emplace(s->session.session_id, s);
  return s->session.session_id;
}

bool QaService::has_session(std::string const &session_id) const
{
  std::lock_guard lock(sessions_mutex_);
  return sessions_.contains(session_id);
}

std::shared_ptr<QaService::Slot> QaService::slot(std::string const &session_id) const
{
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) { throw NotFound("unknown session '" + session_id + "'"); }
  return it->second;
}

std::shared_ptr<QaService::Slot> QaService::slot_or_create(std::optional<std::string> const &session_id)
{
  std::lock_guard lock(sessions_mutex_);
  if (session_id && !session_id->empty()) {
    if (auto it = sessions_.find(*session_id); it != sessions_.end()) { return it->second; }
  }
  auto s = std::make_shared<Slot>();
  // Client supplied ids are not trusted to be unguessable; always mint one.
  s->session.session_id = random_id();
  s->session.last_active = Clock::now();
  sessions_.emplace(s->session.session_id, s);
  return s;
}

ChatResponse QaService::handle_chat(ChatRequest const &request)
{
  if (blank(request.query)) { throw ValidationError("query", "query must not be empty"); }
  RetrievalConfig rc = config_.retrieval;
  if (request.n) { rc.n = *request.n; }
  if (request.k) { rc.k = *request.k; }
  if (request.alpha) { rc.alpha = *request.alpha; }
  rc.validate();

  auto const s = slot_or_create(request.session_id);
  std::lock_guard session_lock(s->mutex);
  auto &session = s->session;

  ChatResponse response;
  response.session_id = session.session_id;

  auto const idx = index();
  auto const t0 = std::chrono::steady_clock::now();
  Retriever retriever(*idx, *gateway_);
  auto const docs = retriever.retrieve(request.query, rc);
  auto const t1 = std::chrono::steady_clock::now();
  response.retrieve_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  if (docs.empty()) { throw EmptyIndexError("no documents retrieved"); }

  std::optional<ParsedUpload> upload = session.active_upload;
  auto const &tmpl = config_.generation.tmpl ? *config_.generation.tmpl : PromptTemplate::builtin();
  auto bundle = assemble_prompt(request.query, docs, upload, config_.prompt_budget, tmpl);

  GeneratedAnswer answer;
  {
    generation_slots_.acquire();
    struct Release
    {
      std::counting_semaphore<4> &sem;
      ~Release() { sem.release(); }
    } release{generation_slots_};
    answer = generate(bundle, *generator_, config_.generation);
  }
  response.generate_ms =
    std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t1).count();
  response.answer = answer.text;
  response.sources = answer.sources;

  Turn turn;
  turn.query = request.query;
  turn.answer = std::move(answer);
  for (auto const &d : docs) { turn.retrieved.push_back(d.doc_id); }
  turn.timestamp = iso_timestamp(Clock::now());
  if (upload) { turn.upload_id = upload->upload_id; }
  turn.prompt = bundle.rendered;
  session.turns.push_back(std::move(turn));
  session.last_active = Clock::now();
  persist(session);
  return response;
}

UploadResult QaService::upload_pdf(std::optional<std::string> const &session_id, std::span<std::byte const> bytes,
                                   std::string filename)
{
  auto parsed = parse_user_pdf(bytes, std::move(filename), config_.upload);
  auto const s = slot_or_create(session_id);
  std::lock_guard lock(s->mutex);
  UploadResult out{s->session.session_id, parsed.upload_id, parsed.chunks.size()};
  s->session.active_upload = std::move(parsed);
  s->session.last_active = Clock::now();
  persist(s->session);
  return out;
}

DocMeta QaService::document_meta(std::string const &doc_id) const
{
  auto const idx = index();
  auto const row = idx->find(doc_id);
  if (!row) { throw NotFound("unknown document '" + doc_id + "'"); }
  return idx->meta(*row);
}

DocumentFile QaService::get_document(std::string const &doc_id, std::string const &lang) const
{
  DocumentFile out;
  out.meta = document_meta(doc_id);
  if (!out.meta.languages.contains(lang)) {
    throw NotFound("document '" + doc_id + "' is not available in '" + lang + "'");
  }
  if (lang.find_first_of("/\\.") != std::string::npos) { throw NotFound("invalid language code"); }
  auto const path = config_.pdf_store / pdf_store_name(doc_id) / (lang + ".pdf");
  std::error_code ec;
  if (config_.pdf_store.empty() || !std::filesystem::is_regular_file(path, ec)) {
    throw NotFound("no stored PDF for '" + doc_id + "' in '" + lang + "'");
  }
  out.bytes = io::read_file(path);
  return out;
}

std::vector<Turn> QaService::history(std::string const &session_id) const
{
  auto const s = slot(session_id);
  std::lock_guard lock(s->mutex);
  return s->session.turns;
}

std::string QaService::export_history(std::string const &session_id, HistoryFormat format) const
{
  auto const turns = history(session_id);
  return format == HistoryFormat::Json ? turns_to_json(turns) : turns_to_markdown(turns);
}

EvalRecord QaService::record_eval(EvalRecord record)
{
  if (record.timestamp.empty()) { record.timestamp = iso_timestamp(Clock::now()); }
  validate(record);
  std::lock_guard lock(eval_mutex_);
  if (eval_log_) {
    eval_log_->append(record);
  } else {
    eval_memory_.push_back(record);
  }
  return record;
}

EvalReport QaService::eval_report(std::optional<std::string> const &config) const
{
  std::vector<EvalRecord> snapshot;
  {
    std::lock_guard lock(eval_mutex_);
    snapshot = eval_log_ ? eval_log_->read_all() : eval_memory_;
  }
  AggregateOptions opts;
  opts.config = config;
  return aggregate(snapshot, opts);
}

Health QaService::healthz() const
{
  auto const idx = index();
  return {"ok", static_cast<std::int64_t>(idx->size()), idx->model_id()};
}

std::size_t QaService::purge_expired()
{
  auto const cutoff = Clock::now() - config_.session_ttl;
  std::vector<std::string> gone;
  {
    std::lock_guard lock(sessions_mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      std::unique_lock slot_lock(it->second->mutex, std::try_to_lock);
      if (slot_lock.owns_lock() && it->second->session.last_active < cutoff) {
        gone.push_back(it->first);
        slot_lock.unlock();
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  if (config_.session_dir) {
    for (auto const &id : gone) {
      std::error_code ec;
      std::filesystem::remove(*config_.session_dir / (id + ".json"), ec);
    }
  }
  return gone.size();
}

void QaService::persist(ChatSession const &session) const
{
  if (!config_.session_dir) { return; }
  ordered_json j;
  j["session_id"] = session.session_id;
  j["last_active_ms"] = epoch_ms(session.last_active);
  auto turns = ordered_json::array();
  for (auto const &t : session.turns) { turns.push_back(turn_to_json(t)); }
  j["turns"] = std::move(turns);
  if (session.active_upload) {
    auto const &u = *session.active_upload;
    j["active_upload"] = {{"upload_id", u.upload_id},
                          {"filename", u.filename},
                          {"chunks", u.chunks},
                          {"created_ms", epoch_ms(u.created_at)}};
  } else {
    j["active_upload"] = nullptr;
  }
  io::write_file_atomic(*config_.session_dir / (session.session_id + ".json"), j.dump());
}

void QaService::load_sessions()
{
  auto const cutoff = Clock::now() - config_.session_ttl;
  for (auto const &entry : std::filesystem::directory_iterator(*config_.session_dir)) {
    if (entry.path().extension() != ".json") { continue; }
    try {
      auto const j = json::parse(io::read_file(entry.path()));
      auto s = std::make_shared<Slot>();
      auto &session = s->session;
      session.session_id = j.at("session_id").get<std::string>();
      session.last_active = from_epoch_ms(j.at("last_active_ms").get<std::int64_t>());
      if (session.last_active < cutoff) { continue; }
      for (auto const &t : j.at("turns")) { session.turns.push_back(turn_from_json(t)); }
      if (auto const &u = j.at("active_upload"); u.is_object()) {
        ParsedUpload up;
        up.upload_id = u.at("upload_id").get<std::string>();
        up.filename = u.at("filename").get<std::string>();
        up.chunks = u.at("chunks").get<std::vector<std::string>>();
        up.created_at = from_epoch_ms(u.at("created_ms").get<std::int64_t>());
        session.active_upload = std::move(up);
      }
      sessions_.emplace(session.session_id, std::move(s));
    } catch (std::exception const &e) {
      std::clog << "warning: skipping session file " << entry.path() << ": " << e.what() << "\n";
    }
  }
}

} // namespace resrag
