#pragma once

#include "resrag/eval.hpp"

#include <random>

namespace testing_support {

inline resrag::EvalRecord rated(int question, std::string retriever, std::string generator, int doc_value,
                                int answer_value, std::string rater = "r1", std::size_t docs = 1)
{
  resrag::EvalRecord r;
  r.question_id = question;
  r.config = {std::move(retriever), std::move(generator)};
  for (std::size_t d = 0; d < docs; ++d) {
    resrag::DocRating dr;
    dr.doc_id = "A/RES/" + std::to_string(d + 1);
    for (auto dim : resrag::kRetrievalDimensions) { dr.ratings[std::string(dim)] = doc_value; }
    r.doc_ratings.push_back(dr);
  }
  for (auto dim : resrag::kAnswerDimensions) { r.answer_ratings[std::string(dim)] = answer_value; }
  r.rater_id = std::move(rater);
  r.timestamp = "2025-06-01T12:00:00Z";
  return r;
}

/// Every dimension rated independently at random.
inline resrag::EvalRecord random_record(std::mt19937_64 &rng)
{
  std::uniform_int_distribution<int> likert(1, 5), q(1, 50), pick(0, 2), docs(1, 5);
  static char const *retrievers[] = {"minilm", "qwen3-emb-0.6b", "bge"};
  static char const *generators[] = {"qwen3-0.6b", "qwen3-1.7b", "llama"};
  auto r = rated(q(rng), retrievers[pick(rng)], generators[pick(rng)], 1, 1, "r" + std::to_string(pick(rng)),
                 static_cast<std::size_t>(docs(rng)));
  r.domain = pick(rng) == 0 ? resrag::Domain::Education : resrag::Domain::HealthRS;
  for (auto &d : r.doc_ratings) {
    for (auto &[k, v] : d.ratings) { v = likert(rng); }
  }
  for (auto &[k, v] : r.answer_ratings) { v = likert(rng); }
  return r;
}

/// 50 retrieval relevance ratings averaging 4.26 (13 fives, 37 fours) for
/// "qwen3-emb-0.6b", the other retrieval dimensions at 4, answers at 3.
inline std::vector<resrag::EvalRecord> table_fixture_log()
{
  std::vector<resrag::EvalRecord> log;
  for (int i = 0; i < 50; ++i) {
    auto r = rated(i + 1, "qwen3-emb-0.6b", "qwen3-1.7b", 4, 3, i % 2 ? "expert-a" : "expert-b");
    r.doc_ratings[0].ratings["relevance"] = i < 13 ? 5 : 4;
    log.push_back(r);
  }
  return log;
}

} // namespace testing_support
