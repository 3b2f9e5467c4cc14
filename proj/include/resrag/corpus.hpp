#pragma once

#include "errors.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace resrag {

enum class Domain : std::uint8_t
{
  HealthRS = 0,
  Education = 1,
  Both = 2,
};

std::string_view to_string(Domain d);
Domain domain_from_string(std::string_view s); // throws SchemaError

/// True for the two concrete domains a record of `d` counts towards.
bool in_domain(Domain record, Domain concrete);

/// Language codes the archive is published in.
std::set<std::string> const &known_languages();

struct Date
{
  int year = 0;
  int month = 0;
  int day = 0;

  static Date parse(std::string_view iso); // YYYY-MM-DD, throws SchemaError
  std::string iso() const;
  auto operator<=>(Date const &) const = default;
};

struct Sentence
{
  std::uint32_t paragraph_index = 0;
  std::string text;
  bool operator==(Sentence const &) const = default;
};

struct DocumentRecord
{
  std::string doc_id;
  std::string title;
  Date date;
  Domain domain = Domain::HealthRS;
  std::set<std::string> languages;
  std::vector<std::string> subjects;
  std::vector<std::string> paragraphs;
  std::vector<Sentence> sentences;

  bool operator==(DocumentRecord const &) const = default;
};

/// Rule-based splitter: a sentence ends at one of `.!?;` (optionally followed by
/// closing quotes/brackets) when the next non-space character starts a new
/// sentence (uppercase letter or digit, possibly behind an opening quote), unless
/// the word carrying the punctuation is a known abbreviation.
class SentenceSplitter
{
public:
  SentenceSplitter();
  explicit SentenceSplitter(std::set<std::string> abbreviations);

  /// One abbreviation per line, `#` starts a comment. Entries are matched
  /// case-insensitively against the word including its trailing period.
  static SentenceSplitter from_file(std::filesystem::path const &path);
  static std::set<std::string> const &default_abbreviations();

  std::vector<std::string> split(std::string_view paragraph) const;
  /// Byte ranges [first, second) into `paragraph`, trimmed of whitespace.
  std::vector<std::pair<std::size_t, std::size_t>> split_spans(std::string_view paragraph) const;

private:
  bool is_abbreviation(std::string_view word) const;
  std::set<std::string> abbreviations_;
};

std::vector<std::string> split_sentences(std::string_view paragraph);

enum class DateWindowPolicy
{
  Reject, // UN-RES corpus: out-of-window dates are errors
  Warn,
};

struct ParseOptions
{
  DateWindowPolicy date_policy = DateWindowPolicy::Reject;
  Date window_start{1990, 1, 1};
  Date window_end{2025, 3, 31};
  SentenceSplitter const *splitter = nullptr; // default splitter when null
};

/// Parse one corpus record (JSON text). Warnings (duplicate subjects dropped,
/// out-of-window dates under DateWindowPolicy::Warn) are appended to `warnings`.
DocumentRecord parse_record(std::string_view raw, ParseOptions const &options = {},
                            std::vector<std::string> *warnings = nullptr);

/// Record schema JSON; sentences are not serialized, they are derived on parse.
std::string to_json(DocumentRecord const &record);

struct DomainStats
{
  std::uint64_t doc_count = 0;
  std::uint64_t subject_count = 0;
  bool operator==(DomainStats const &) const = default;
};

/// Counts per (language, concrete domain). A record with domain `both` counts
/// towards health_rs and education.
struct CorpusStats
{
  std::map<std::pair<std::string, Domain>, DomainStats> cells;
  std::uint64_t total_documents = 0;
  std::uint64_t unique_subjects = 0;

  DomainStats at(std::string const &language, Domain domain) const;
  bool operator==(CorpusStats const &) const = default;
};

CorpusStats compute_stats(std::vector<DocumentRecord> const &records);

struct IngestIssue
{
  std::string file;
  std::string kind;
  std::string message;
};

struct IngestResult
{
  std::vector<DocumentRecord> records; // sorted by doc_id
  CorpusStats stats;
  std::vector<IngestIssue> errors;
  std::vector<IngestIssue> warnings;
};

/// Parse every `*.json` file below `dir`. Malformed files are reported in
/// `errors` and skipped; a doc_id seen twice throws DuplicateIdError.
IngestResult ingest_corpus(std::filesystem::path const &dir, ParseOptions const &options = {},
                           unsigned workers = 0);

std::string report_json(IngestResult const &result);

// records.bin: "SRRC", u16 version, u64 count, records, CRC32 trailer.
void write_records(std::filesystem::path const &path, std::vector<DocumentRecord> const &records);
std::vector<DocumentRecord> read_records(std::filesystem::path const &path);

} // namespace resrag
