#include "resrag/eval.hpp"

#include "binary_io.hpp"

#include <json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace resrag {

using nlohmann::json;

std::string_view to_string(QuestionType t)
{
  switch (t) {
  case QuestionType::ListFinite: return "list_finite";
  case QuestionType::YesNo: return "yes_no";
  case QuestionType::Closed: return "closed";
  case QuestionType::OpenEnded: return "open_ended";
  case QuestionType::OpenEndedDiachronic: return "open_ended_diachronic";
  case QuestionType::YesNoPlusOpen: return "yes_no_plus_open";
  }
  return "?";
}

QuestionType question_type_from_string(std::string_view s)
{
  for (auto t : {QuestionType::ListFinite, QuestionType::YesNo, QuestionType::Closed, QuestionType::OpenEnded,
                 QuestionType::OpenEndedDiachronic, QuestionType::YesNoPlusOpen}) {
    if (to_string(t) == s) { return t; }
  }
  throw SchemaError("unknown question type '" + std::string(s) + "'");
}

std::vector<TestQuestion> parse_test_set(std::string_view json_text)
{
  json j;
  try {
    j = json::parse(json_text);
  } catch (json::parse_error const &e) {
    throw SchemaError(std::string("test set is not valid JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("questions")) { j = j.at("questions"); }
  if (!j.is_array()) { throw SchemaError("test set must be a JSON array of questions"); }

  std::vector<TestQuestion> out;
  std::set<std::pair<Domain, int>> seen;
  for (auto const &q : j) {
    try {
      TestQuestion t;
      t.id = q.at("id").get<int>();
      t.domain = domain_from_string(q.at("domain").get<std::string>());
      if (t.domain == Domain::Both) { throw SchemaError("test question domain must be health_rs or education"); }
      t.text = q.at("text").get<std::string>();
      t.qtype = question_type_from_string(q.at("qtype").get<std::string>());
      t.time_bound = q.at("time_bound").get<bool>();
      if (t.text.empty()) { throw SchemaError("question " + std::to_string(t.id) + " has empty text"); }
      if (!seen.insert({t.domain, t.id}).second) {
        throw SchemaError("duplicate question id " + std::to_string(t.id) + " in " + std::string(to_string(t.domain)));
      }
      out.push_back(std::move(t));
    } catch (json::exception const &e) {
      throw SchemaError(std::string("malformed test question: ") + e.what());
    }
  }
  auto const health = std::count_if(out.begin(), out.end(), [](auto const &q) { return q.domain == Domain::HealthRS; });
  auto const edu = static_cast<std::ptrdiff_t>(out.size()) - health;
  if (health != 50 || edu != 50) {
    throw CountError("expected 50 health_rs and 50 education questions, found " + std::to_string(health) + " and " +
                     std::to_string(edu));
  }
  return out;
}

std::vector<TestQuestion> load_test_set(std::filesystem::path const &path) { return parse_test_set(io::read_file(path)); }

// ---------------------------------------------------------------------------
// Records

namespace {

template <std::size_t N>
void validate_sheet(std::map<std::string, int> const &ratings, std::array<std::string_view, N> const &dims)
{
  for (auto d : dims) {
    if (!ratings.contains(std::string(d))) { throw ValidationError(std::string(d), "missing rating '" + std::string(d) + "'"); }
  }
  for (auto const &[key, value] : ratings) {
    if (std::find(dims.begin(), dims.end(), key) == dims.end()) {
      throw ValidationError(key, "unknown dimension '" + key + "'");
    }
    if (value < 1 || value > 5) {
      throw ValidationError(key, "rating for '" + key + "' must be an integer in 1..5, got " + std::to_string(value));
    }
  }
}

std::map<std::string, int> sheet_from_json(json const &j)
{
  if (!j.is_object()) { throw ValidationError("ratings", "ratings must be an object"); }
  std::map<std::string, int> out;
  for (auto const &[key, v] : j.items()) {
    if (!v.is_number_integer()) { throw ValidationError(key, "rating for '" + key + "' must be an integer in 1..5"); }
    auto const x = v.get<std::int64_t>();
    out[key] = static_cast<int>(std::clamp<std::int64_t>(x, -1, 99));
  }
  return out;
}

} // namespace

void validate(EvalRecord const &r)
{
  if (r.question_id < 1) { throw ValidationError("question_id", "question_id must be positive"); }
  if (r.domain == Domain::Both) { throw ValidationError("domain", "domain must be health_rs or education"); }
  if (r.config.retriever.empty() || r.config.generator.empty()) {
    throw ValidationError("config_id", "config_id needs retriever and generator tags");
  }
  if (r.rater_id.empty()) { throw ValidationError("rater_id", "rater_id must be non-empty"); }
  for (auto const &d : r.doc_ratings) {
    if (d.doc_id.empty()) { throw ValidationError("doc_id", "document rating without doc_id"); }
    validate_sheet(d.ratings, kRetrievalDimensions);
  }
  validate_sheet(r.answer_ratings, kAnswerDimensions);
}

EvalRecord eval_record_from_json(std::string_view json_text)
{
  json j;
  try {
    j = json::parse(json_text);
  } catch (json::parse_error const &e) {
    throw ValidationError("body", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) { throw ValidationError("body", "evaluation record must be an object"); }
  auto field = [&](char const *key) -> json const & {
    auto it = j.find(key);
    if (it == j.end()) { throw ValidationError(key, std::string("missing field '") + key + "'"); }
    return *it;
  };
  EvalRecord r;
  try {
    if (!field("question_id").is_number_integer()) { throw ValidationError("question_id", "question_id must be an integer"); }
    r.question_id = field("question_id").get<int>();
    try {
      r.domain = domain_from_string(field("domain").get<std::string>());
    } catch (SchemaError const &e) {
      throw ValidationError("domain", e.what());
    }
    auto const &cfg = field("config_id");
    r.config.retriever = cfg.at("retriever").get<std::string>();
    r.config.generator = cfg.at("generator").get<std::string>();
    auto const &docs = field("doc_ratings");
    if (!docs.is_array()) { throw ValidationError("doc_ratings", "doc_ratings must be an array"); }
    for (auto const &d : docs) {
      r.doc_ratings.push_back({d.at("doc_id").get<std::string>(), sheet_from_json(d.at("ratings"))});
    }
    r.answer_ratings = sheet_from_json(field("answer_ratings"));
    r.rater_id = field("rater_id").get<std::string>();
    if (auto it = j.find("timestamp"); it != j.end() && it->is_string()) { r.timestamp = it->get<std::string>(); }
  } catch (json::exception const &e) {
    throw ValidationError("body", std::string("malformed evaluation record: ") + e.what());
  }
  validate(r);
  return r;
}

std::string to_json(EvalRecord const &r)
{
  nlohmann::ordered_json j;
  j["question_id"] = r.question_id;
  j["domain"] = to_string(r.domain);
  j["config_id"] = {{"retriever", r.config.retriever}, {"generator", r.config.generator}};
  auto docs = nlohmann::ordered_json::array();
  for (auto const &d : r.doc_ratings) { docs.push_back({{"doc_id", d.doc_id}, {"ratings", d.ratings}}); }
  j["doc_ratings"] = std::move(docs);
  j["answer_ratings"] = r.answer_ratings;
  j["rater_id"] = r.rater_id;
  j["timestamp"] = r.timestamp;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Log

RatingsLog::RatingsLog(std::filesystem::path path)
  : path_(std::move(path))
{
}

void RatingsLog::append(EvalRecord const &record)
{
  validate(record);
  auto const line = to_json(record) + "\n";
  std::lock_guard lock(mutex_);
  int const fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) { throw std::system_error(errno, std::generic_category(), "open " + path_.string()); }
  std::size_t off = 0;
  while (off < line.size()) {
    auto const n = ::write(fd, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) { continue; }
      int const err = errno;
      ::close(fd);
      throw std::system_error(err, std::generic_category(), "write " + path_.string());
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    int const err = errno;
    ::close(fd);
    throw std::system_error(err, std::generic_category(), "fsync " + path_.string());
  }
  ::close(fd);
}

std::vector<EvalRecord> RatingsLog::read_all() const
{
  std::lock_guard lock(mutex_);
  std::vector<EvalRecord> out;
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) { continue; }
    out.push_back(eval_record_from_json(line));
  }
  return out;
}

std::size_t RatingsLog::size() const { return read_all().size(); }

// ---------------------------------------------------------------------------
// Aggregation

std::optional<ReportCell> EvalReport::cell(std::string const &config, std::string const &dimension) const
{
  auto it = cells.find({config, dimension});
  if (it == cells.end()) { return std::nullopt; }
  return it->second;
}

namespace {
void add(ReportCell &c, int v)
{
  if (c.count == 0) {
    c.min = c.max = v;
  } else {
    c.min = std::min(c.min, v);
    c.max = std::max(c.max, v);
  }
  c.sum += v;
  ++c.count;
}
} // namespace

EvalReport aggregate(std::span<EvalRecord const> log, AggregateOptions const &options)
{
  EvalReport report;
  for (auto const &r : log) {
    auto tag = [&](std::string const &base) { return options.per_rater ? base + "@" + r.rater_id : base; };
    bool const keep_retriever = !options.config || *options.config == r.config.retriever;
    bool const keep_generator = !options.config || *options.config == r.config.generator;
    if (keep_retriever) {
      for (auto const &d : r.doc_ratings) {
        for (auto const &[dim, v] : d.ratings) { add(report.cells[{tag(r.config.retriever), "retrieval." + dim}], v); }
      }
    }
    if (keep_generator) {
      for (auto const &[dim, v] : r.answer_ratings) { add(report.cells[{tag(r.config.generator), "answer." + dim}], v); }
    }
  }
  return report;
}

EvalReport merge(EvalReport const &a, EvalReport const &b)
{
  EvalReport out = a;
  for (auto const &[key, cb] : b.cells) {
    auto &c = out.cells[key];
    if (c.count == 0) {
      c = cb;
      continue;
    }
    c.min = std::min(c.min, cb.min);
    c.max = std::max(c.max, cb.max);
    c.sum += cb.sum;
    c.count += cb.count;
  }
  return out;
}

namespace {

std::string title_case(std::string_view s)
{
  std::string out(s);
  if (!out.empty()) { out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0]))); }
  return out;
}

template <std::size_t N>
void render_section(std::ostringstream &os, EvalReport const &report, char const *heading, char const *prefix,
                    std::array<std::string_view, N> const &dims)
{
  std::vector<std::string> tags;
  for (auto const &[key, cell] : report.cells) {
    if (key.second.starts_with(prefix) && (tags.empty() || tags.back() != key.first)) { tags.push_back(key.first); }
  }
  if (tags.empty()) { return; }
  std::size_t first = std::string_view(heading).size();
  for (auto const &t : tags) { first = std::max(first, t.size()); }
  first += 2;

  auto pad_right = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  auto pad_left = [](std::string s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };

  os << pad_right(heading, first);
  for (auto d : dims) { os << pad_left(title_case(d), std::max<std::size_t>(d.size(), 4) + 2); }
  os << "\n";
  for (auto const &t : tags) {
    os << pad_right(t, first);
    for (auto d : dims) {
      auto const c = report.cell(t, std::string(prefix) + std::string(d));
      std::string v = "-";
      if (c) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", c->mean());
        v = buf;
      }
      os << pad_left(v, std::max<std::size_t>(d.size(), 4) + 2);
    }
    os << "\n";
  }
}

} // namespace

std::string render_table(EvalReport const &report)
{
  std::ostringstream os;
  render_section(os, report, "Document Retriever", "retrieval.", kRetrievalDimensions);
  render_section(os, report, "Answer Generator", "answer.", kAnswerDimensions);
  return os.str();
}

std::string render_csv(EvalReport const &report)
{
  std::ostringstream os;
  os << "config,dimension,mean,count\n";
  for (auto const &[key, c] : report.cells) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", c.mean());
    os << key.first << "," << key.second << "," << buf << "," << c.count << "\n";
  }
  return os.str();
}

std::string report_json(EvalReport const &report)
{
  auto cells = nlohmann::ordered_json::array();
  for (auto const &[key, c] : report.cells) {
    cells.push_back({{"config", key.first}, {"dimension", key.second}, {"mean", c.mean()}, {"count", c.count}});
  }
  return nlohmann::ordered_json{{"cells", cells}}.dump();
}

} // namespace resrag
