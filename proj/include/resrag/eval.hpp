#pragma once

#include "corpus.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace resrag {

enum class QuestionType
{
  ListFinite,
  YesNo,
  Closed,
  OpenEnded,
  OpenEndedDiachronic, // open-ended, diachronic change possible
  YesNoPlusOpen,
};

std::string_view to_string(QuestionType t);
QuestionType question_type_from_string(std::string_view s); // throws SchemaError

struct TestQuestion
{
  int id = 0; // 1..50 within its domain
  Domain domain = Domain::HealthRS;
  std::string text;
  QuestionType qtype = QuestionType::OpenEnded;
  bool time_bound = false;
};

/// Loads the question file; requires 50 health_rs and 50 education questions
/// with unique ids per domain (CountError / SchemaError otherwise).
std::vector<TestQuestion> load_test_set(std::filesystem::path const &path);
std::vector<TestQuestion> parse_test_set(std::string_view json_text);

inline constexpr std::array<std::string_view, 5> kRetrievalDimensions{"relevance", "accuracy", "usefulness",
                                                                      "temporality", "actionability"};
inline constexpr std::array<std::string_view, 5> kAnswerDimensions{"congruence", "coherence", "relevance",
                                                                   "creativity", "engagement"};

struct ConfigId
{
  std::string retriever;
  std::string generator;
  bool operator==(ConfigId const &) const = default;
};

struct DocRating
{
  std::string doc_id;
  std::map<std::string, int> ratings;
  bool operator==(DocRating const &) const = default;
};

struct EvalRecord
{
  int question_id = 0;
  Domain domain = Domain::HealthRS;
  ConfigId config;
  std::vector<DocRating> doc_ratings;
  std::map<std::string, int> answer_ratings;
  std::string rater_id;
  std::string timestamp;
  bool operator==(EvalRecord const &) const = default;
};

/// Throws ValidationError naming the offending key.
void validate(EvalRecord const &record);
EvalRecord eval_record_from_json(std::string_view json_text); // parses and validates
std::string to_json(EvalRecord const &record);

/// Newline-delimited JSON, one record per line, fsync'd per append.
class RatingsLog
{
public:
  explicit RatingsLog(std::filesystem::path path);
  void append(EvalRecord const &record);
  std::vector<EvalRecord> read_all() const;
  std::size_t size() const;
  std::filesystem::path const &path() const { return path_; }

private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
};

/// Cell key is (config tag, dimension). Document dimensions are keyed by the
/// retriever tag as "retrieval.<dim>", answer dimensions by the generator tag
/// as "answer.<dim>".
struct ReportCell
{
  double sum = 0;
  std::size_t count = 0;
  int min = 0;
  int max = 0;
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

struct EvalReport
{
  std::map<std::pair<std::string, std::string>, ReportCell> cells;
  bool empty() const { return cells.empty(); }
  std::optional<ReportCell> cell(std::string const &config, std::string const &dimension) const;
};

struct AggregateOptions
{
  bool per_rater = false;               // config tags become "<tag>@<rater>"
  std::optional<std::string> config;   // keep only cells of this tag
};

EvalReport aggregate(std::span<EvalRecord const> log, AggregateOptions const &options = {});
/// Count-weighted merge of two reports.
EvalReport merge(EvalReport const &a, EvalReport const &b);

std::string render_table(EvalReport const &report);
std::string render_csv(EvalReport const &report);
std::string report_json(EvalReport const &report);

} // namespace resrag
