#include "resrag/corpus.hpp"

#include "binary_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>
#include <thread>
#include <unordered_map>

namespace resrag {

using nlohmann::json;

std::string_view to_string(Domain d)
{
  switch (d) {
  case Domain::HealthRS: return "health_rs";
  case Domain::Education: return "education";
  case Domain::Both: return "both";
  }
  return "?";
}

Domain domain_from_string(std::string_view s)
{
  if (s == "health_rs") { return Domain::HealthRS; }
  if (s == "education") { return Domain::Education; }
  if (s == "both") { return Domain::Both; }
  throw SchemaError("unknown domain '" + std::string(s) + "'");
}

bool in_domain(Domain record, Domain concrete) { return record == concrete || record == Domain::Both; }

std::set<std::string> const &known_languages()
{
  static std::set<std::string> const langs{"ar", "de", "en", "es", "fr", "ru", "zh"};
  return langs;
}

// ---------------------------------------------------------------------------
// Date

namespace {
int parse_int(std::string_view s)
{
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) { throw SchemaError("bad date component '" + std::string(s) + "'"); }
  return v;
}

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }
} // namespace

Date Date::parse(std::string_view iso)
{
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw SchemaError("date must be YYYY-MM-DD, got '" + std::string(iso) + "'");
  }
  Date d{parse_int(iso.substr(0, 4)), parse_int(iso.substr(5, 2)), parse_int(iso.substr(8, 2))};
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (d.month < 1 || d.month > 12) { throw SchemaError("month out of range in '" + std::string(iso) + "'"); }
  int const maxd = days[d.month - 1] + (d.month == 2 && leap(d.year) ? 1 : 0);
  if (d.day < 1 || d.day > maxd) { throw SchemaError("day out of range in '" + std::string(iso) + "'"); }
  return d;
}

std::string Date::iso() const
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

// ---------------------------------------------------------------------------
// Sentence splitting

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Length of a closing quote/bracket at p[i], 0 if none.
std::size_t closer_at(std::string_view p, std::size_t i)
{
  char const c = p[i];
  if (c == '"' || c == '\'' || c == ')' || c == ']') { return 1; }
  auto starts = [&](std::string_view pre) { return p.substr(i, pre.size()) == pre; };
  if (starts("’") || starts("”")) { return 3; }
  if (starts("»")) { return 2; }
  return 0;
}

std::size_t opener_at(std::string_view p, std::size_t i)
{
  char const c = p[i];
  if (c == '"' || c == '\'' || c == '(' || c == '[') { return 1; }
  auto starts = [&](std::string_view pre) { return p.substr(i, pre.size()) == pre; };
  if (starts("“") || starts("‘")) { return 3; }
  if (starts("«") || starts("¿") || starts("¡")) { return 2; }
  return 0;
}

// Uppercase letter or digit at p[i]: ASCII, Latin-1 uppercase, Cyrillic uppercase.
bool starts_upper(std::string_view p, std::size_t i)
{
  auto const c = static_cast<unsigned char>(p[i]);
  if (std::isupper(c) || std::isdigit(c)) { return true; }
  if (i + 1 >= p.size()) { return false; }
  auto const c2 = static_cast<unsigned char>(p[i + 1]);
  if (c == 0xC3) { return c2 >= 0x80 && c2 <= 0x9E && c2 != 0x97; }
  if (c == 0xD0) { return c2 >= 0x80 && c2 <= 0xAF; }
  return false;
}

bool starts_sentence(std::string_view p, std::size_t k)
{
  while (k < p.size()) {
    auto const o = opener_at(p, k);
    if (o == 0) { break; }
    k += o;
  }
  return k < p.size() && starts_upper(p, k);
}

std::pair<std::size_t, std::size_t> trim(std::string_view p, std::size_t b, std::size_t e)
{
  while (b < e && is_space(p[b])) { ++b; }
  while (e > b && is_space(p[e - 1])) { --e; }
  return {b, e};
}

std::string lower(std::string_view s)
{
  std::string out(s);
  for (auto &ch : out) { ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch))); }
  return out;
}

} // namespace

SentenceSplitter::SentenceSplitter()
  : abbreviations_(default_abbreviations())
{
}

SentenceSplitter::SentenceSplitter(std::set<std::string> abbreviations)
{
  for (auto const &a : abbreviations) { abbreviations_.insert(lower(a)); }
}

std::set<std::string> const &SentenceSplitter::default_abbreviations()
{
  static std::set<std::string> const abbr{
    "mr.",   "mrs.",  "ms.",  "dr.",  "prof.", "st.",   "no.",    "nos.",    "art.",  "arts.",
    "para.", "paras.", "vol.", "p.",  "pp.",   "e.g.",  "i.e.",   "u.n.",    "u.s.",  "u.k.",
    "inc.",  "ltd.",  "co.",  "jr.",  "sr.",   "sra.",  "gen.",   "rev.",    "hon.",  "fig.",
    "sect.", "sec.",  "ch.",  "cf.",  "viz.",  "approx.", "res.", "rep.",    "m.",    "mme.",
    "núm.",  "nr.",   "abs.", "z.b.", "bzw.",  "vs.",   "op.",    "cit.",    "ibid.", "annex.",
  };
  return abbr;
}

SentenceSplitter SentenceSplitter::from_file(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw SchemaError("cannot read abbreviation list " + path.string()); }
  std::set<std::string> abbr;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) { line.erase(hash); }
    auto [b, e] = trim(line, 0, line.size());
    if (b < e) { abbr.insert(line.substr(b, e - b)); }
  }
  return SentenceSplitter(std::move(abbr));
}

bool SentenceSplitter::is_abbreviation(std::string_view word) const
{
  while (!word.empty()) {
    auto const o = opener_at(word, 0);
    if (o == 0) { break; }
    word.remove_prefix(o);
  }
  return abbreviations_.contains(lower(word));
}

std::vector<std::pair<std::size_t, std::size_t>> SentenceSplitter::split_spans(std::string_view p) const
{
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  auto emit = [&](std::size_t b, std::size_t e) {
    auto const t = trim(p, b, e);
    if (t.first < t.second) { spans.push_back(t); }
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < p.size()) {
    char const c = p[i];
    if (c != '.' && c != '!' && c != '?' && c != ';') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < p.size()) {
      auto const cl = closer_at(p, j);
      if (cl == 0) { break; }
      j += cl;
    }
    if (j >= p.size() || !is_space(p[j])) {
      i = j > i + 1 ? j : i + 1;
      continue;
    }
    std::size_t k = j;
    while (k < p.size() && is_space(p[k])) { ++k; }
    if (k >= p.size() || !starts_sentence(p, k)) {
      i = k;
      continue;
    }
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !is_space(p[w - 1])) { --w; }
      if (is_abbreviation(p.substr(w, i + 1 - w))) {
        i = k;
        continue;
      }
    }
    emit(start, j);
    start = k;
    i = k;
  }
  emit(start, p.size());
  return spans;
}

std::vector<std::string> SentenceSplitter::split(std::string_view paragraph) const
{
  std::vector<std::string> out;
  for (auto [b, e] : split_spans(paragraph)) { out.emplace_back(paragraph.substr(b, e - b)); }
  return out;
}

std::vector<std::string> split_sentences(std::string_view paragraph)
{
  static SentenceSplitter const splitter;
  return splitter.split(paragraph);
}

// ---------------------------------------------------------------------------
// Records

namespace {

json const &require(json const &obj, char const *key)
{
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) { throw SchemaError(std::string("missing required field '") + key + "'"); }
  return *it;
}

std::string require_string(json const &obj, char const *key)
{
  auto const &v = require(obj, key);
  if (!v.is_string()) { throw SchemaError(std::string("field '") + key + "' must be a string"); }
  return v.get<std::string>();
}

std::vector<std::string> require_strings(json const &obj, char const *key)
{
  auto const &v = require(obj, key);
  if (!v.is_array()) { throw SchemaError(std::string("field '") + key + "' must be an array"); }
  std::vector<std::string> out;
  out.reserve(v.size());
  for (auto const &e : v) {
    if (!e.is_string()) { throw SchemaError(std::string("field '") + key + "' must contain strings"); }
    out.push_back(e.get<std::string>());
  }
  return out;
}

} // namespace

DocumentRecord parse_record(std::string_view raw, ParseOptions const &options, std::vector<std::string> *warnings)
{
  json j;
  try {
    j = json::parse(raw);
  } catch (json::parse_error const &e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) { throw SchemaError("record must be a JSON object"); }

  DocumentRecord rec;
  rec.doc_id = require_string(j, "doc_id");
  if (rec.doc_id.empty()) { throw SchemaError("doc_id must be non-empty"); }
  rec.title = require_string(j, "title");
  rec.date = Date::parse(require_string(j, "date"));
  rec.domain = domain_from_string(require_string(j, "domain"));

  for (auto &lang : require_strings(j, "languages")) {
    if (!known_languages().contains(lang)) { throw SchemaError("unknown language code '" + lang + "'"); }
    rec.languages.insert(std::move(lang));
  }

  std::set<std::string> seen;
  for (auto &tag : require_strings(j, "subjects")) {
    if (seen.insert(tag).second) {
      rec.subjects.push_back(std::move(tag));
    } else if (warnings) {
      warnings->push_back(rec.doc_id + ": duplicate subject '" + tag + "' dropped");
    }
  }

  rec.paragraphs = require_strings(j, "paragraphs");

  if (rec.date < options.window_start || rec.date > options.window_end) {
    std::string msg = rec.doc_id + ": date " + rec.date.iso() + " outside " + options.window_start.iso() + ".." +
                      options.window_end.iso();
    if (options.date_policy == DateWindowPolicy::Reject) { throw DateRangeError(msg); }
    if (warnings) { warnings->push_back(std::move(msg)); }
  }

  static SentenceSplitter const default_splitter;
  auto const &splitter = options.splitter ? *options.splitter : default_splitter;
  for (std::size_t p = 0; p < rec.paragraphs.size(); ++p) {
    for (auto &s : splitter.split(rec.paragraphs[p])) {
      rec.sentences.push_back({static_cast<std::uint32_t>(p), std::move(s)});
    }
  }
  return rec;
}

std::string to_json(DocumentRecord const &record)
{
  nlohmann::ordered_json j;
  j["doc_id"] = record.doc_id;
  j["title"] = record.title;
  j["date"] = record.date.iso();
  j["domain"] = to_string(record.domain);
  j["languages"] = record.languages;
  j["subjects"] = record.subjects;
  j["paragraphs"] = record.paragraphs;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Stats

DomainStats CorpusStats::at(std::string const &language, Domain domain) const
{
  auto it = cells.find({language, domain});
  return it == cells.end() ? DomainStats{} : it->second;
}

CorpusStats compute_stats(std::vector<DocumentRecord> const &records)
{
  std::map<std::pair<std::string, Domain>, std::set<std::string>> tags;
  std::set<std::string> all_tags;
  CorpusStats stats;
  stats.total_documents = records.size();
  for (auto const &r : records) {
    all_tags.insert(r.subjects.begin(), r.subjects.end());
    for (auto const &lang : r.languages) {
      for (Domain d : {Domain::HealthRS, Domain::Education}) {
        if (!in_domain(r.domain, d)) { continue; }
        stats.cells[{lang, d}].doc_count++;
        tags[{lang, d}].insert(r.subjects.begin(), r.subjects.end());
      }
    }
  }
  for (auto &[key, set] : tags) { stats.cells[key].subject_count = set.size(); }
  stats.unique_subjects = all_tags.size();
  return stats;
}

// ---------------------------------------------------------------------------
// Ingest

IngestResult ingest_corpus(std::filesystem::path const &dir, ParseOptions const &options, unsigned workers)
{
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) { throw SchemaError("corpus directory not found: " + dir.string()); }

  std::vector<fs::path> files;
  for (auto const &entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") { files.push_back(entry.path()); }
  }
  std::sort(files.begin(), files.end());

  struct Slot
  {
    std::optional<DocumentRecord> record;
    std::optional<IngestIssue> error;
    std::vector<std::string> warnings;
  };
  std::vector<Slot> slots(files.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      auto const name = fs::relative(files[i], dir).string();
      try {
        slots[i].record = parse_record(io::read_file(files[i]), options, &slots[i].warnings);
      } catch (Error const &e) {
        slots[i].error = IngestIssue{name, e.kind(), e.what()};
      } catch (std::exception const &e) {
        slots[i].error = IngestIssue{name, "IoError", e.what()};
      }
    }
  };
  if (workers == 0) { workers = std::max(1u, std::thread::hardware_concurrency()); }
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(files.size(), 1)));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) { pool.emplace_back(work); }
    work();
  }

  IngestResult result;
  std::unordered_map<std::string, std::string> owner;
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto const name = fs::relative(files[i], dir).string();
    for (auto &w : slots[i].warnings) { result.warnings.push_back({name, "Warning", std::move(w)}); }
    if (slots[i].error) {
      result.errors.push_back(std::move(*slots[i].error));
      continue;
    }
    auto &rec = *slots[i].record;
    if (auto [it, fresh] = owner.emplace(rec.doc_id, name); !fresh) {
      throw DuplicateIdError("doc_id '" + rec.doc_id + "' appears in " + it->second + " and " + name);
    }
    result.records.push_back(std::move(rec));
  }
  std::sort(result.records.begin(), result.records.end(),
            [](auto const &a, auto const &b) { return a.doc_id < b.doc_id; });
  result.stats = compute_stats(result.records);
  return result;
}

std::string report_json(IngestResult const &result)
{
  nlohmann::ordered_json j;
  j["documents"] = result.stats.total_documents;
  j["unique_subjects"] = result.stats.unique_subjects;
  auto cells = nlohmann::ordered_json::array();
  for (auto const &[key, s] : result.stats.cells) {
    cells.push_back({{"language", key.first},
                     {"domain", to_string(key.second)},
                     {"doc_count", s.doc_count},
                     {"subject_count", s.subject_count}});
  }
  j["stats"] = std::move(cells);
  auto issues = [](std::vector<IngestIssue> const &v) {
    auto a = nlohmann::ordered_json::array();
    for (auto const &i : v) { a.push_back({{"file", i.file}, {"kind", i.kind}, {"message", i.message}}); }
    return a;
  };
  j["errors"] = issues(result.errors);
  j["warnings"] = issues(result.warnings);
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// records.bin

namespace {
constexpr char kRecordsMagic[4] = {'S', 'R', 'R', 'C'};
constexpr std::uint16_t kRecordsVersion = 1;

void put_strings(io::Writer &w, auto const &strings)
{
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(strings.size()));
  for (auto const &s : strings) { w.str(s); }
}
} // namespace

void write_records(std::filesystem::path const &path, std::vector<DocumentRecord> const &records)
{
  io::Writer w;
  w.bytes(kRecordsMagic, 4);
  w.pod(kRecordsVersion);
  w.pod<std::uint64_t>(records.size());
  for (auto const &r : records) {
    w.str(r.doc_id);
    w.str(r.title);
    w.pod<std::int16_t>(static_cast<std::int16_t>(r.date.year));
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(r.date.month));
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(r.date.day));
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(r.domain));
    put_strings(w, r.languages);
    put_strings(w, r.subjects);
    put_strings(w, r.paragraphs);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(r.sentences.size()));
    for (auto const &s : r.sentences) {
      w.pod(s.paragraph_index);
      w.str(s.text);
    }
  }
  w.pod(io::crc32(w.buffer()));
  io::write_file_atomic(path, w.buffer());
}

std::vector<DocumentRecord> read_records(std::filesystem::path const &path)
{
  auto const data = io::read_file(path);
  if (data.size() < 4 + 2 + 8 + 4 || data.compare(0, 4, kRecordsMagic, 4) != 0) {
    throw CorruptIndexError(path.string() + ": not a records file");
  }
  std::string_view body(data.data(), data.size() - 4);
  io::Reader trailer(std::string_view(data).substr(data.size() - 4));
  if (trailer.pod<std::uint32_t>() != io::crc32(body)) { throw CorruptIndexError(path.string() + ": checksum mismatch"); }

  io::Reader r(body);
  try {
    char magic[4];
    r.bytes(magic, 4);
    if (auto v = r.pod<std::uint16_t>(); v > kRecordsVersion) {
      throw VersionError(path.string() + ": records format version " + std::to_string(v) + " is newer than supported");
    }
    auto const count = r.pod<std::uint64_t>();
    std::vector<DocumentRecord> out;
    auto strings = [&] {
      std::vector<std::string> v(r.pod<std::uint32_t>());
      for (auto &s : v) { s = r.str(); }
      return v;
    };
    for (std::uint64_t i = 0; i < count; ++i) {
      DocumentRecord rec;
      rec.doc_id = r.str();
      rec.title = r.str();
      rec.date.year = r.pod<std::int16_t>();
      rec.date.month = r.pod<std::uint8_t>();
      rec.date.day = r.pod<std::uint8_t>();
      auto const dom = r.pod<std::uint8_t>();
      if (dom > 2) { throw CorruptIndexError(path.string() + ": bad domain tag"); }
      rec.domain = static_cast<Domain>(dom);
      for (auto &l : strings()) { rec.languages.insert(std::move(l)); }
      rec.subjects = strings();
      rec.paragraphs = strings();
      rec.sentences.resize(r.pod<std::uint32_t>());
      for (auto &s : rec.sentences) {
        s.paragraph_index = r.pod<std::uint32_t>();
        s.text = r.str();
      }
      out.push_back(std::move(rec));
    }
    return out;
  } catch (io::Truncated const &) {
    throw CorruptIndexError(path.string() + ": truncated records file");
  }
}

} // namespace resrag
