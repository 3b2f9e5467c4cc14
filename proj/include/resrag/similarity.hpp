#pragma once

#include "eigen_types.hpp"
#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace resrag {

namespace detail {
template <typename DA, typename DB>
void require_same_dim(Eigen::MatrixBase<DA> const &a, Eigen::MatrixBase<DB> const &b)
{
  if (a.size() != b.size()) {
    throw DimensionMismatch("dimension " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}
} // namespace detail

/// Cosine similarity of two vectors, computed in double and clamped to [-1, 1].
template <typename DA, typename DB>
double cosine(Eigen::MatrixBase<DA> const &a, Eigen::MatrixBase<DB> const &b)
{
  detail::require_same_dim(a, b);
  auto const ad = a.template cast<double>();
  auto const bd = b.template cast<double>();
  double const na = ad.norm();
  double const nb = bd.norm();
  if (na == 0.0 || nb == 0.0) { throw ZeroVectorError("cosine of a zero vector is undefined"); }
  double const c = ad.dot(bd) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

/// Sentence similarity: the negated Euclidean distance, so 0 is a perfect match
/// and larger is closer.
template <typename DA, typename DB>
double sentence_similarity(Eigen::MatrixBase<DA> const &query, Eigen::MatrixBase<DB> const &sentence)
{
  detail::require_same_dim(query, sentence);
  return -(query.template cast<double>() - sentence.template cast<double>()).norm();
}

/// Similarity of the query against every row of `sentences`.
template <typename DQ, typename DS>
Vecd sentence_similarities(Eigen::MatrixBase<DQ> const &query, Eigen::MatrixBase<DS> const &sentences)
{
  if (sentences.cols() != query.size()) {
    throw DimensionMismatch("dimension " + std::to_string(query.size()) + " vs " +
                            std::to_string(sentences.cols()));
  }
  Vecd out(sentences.rows());
  for (Index i = 0; i < sentences.rows(); ++i) {
    out[i] = sentence_similarity(query, sentences.row(i).transpose());
  }
  return out;
}

/// alpha * max(sims) + (1 - alpha) * mean(sims). The result is kept inside
/// [min(sims), max(sims)] so rounding in the mean cannot push it out.
template <typename Derived> double relevance_from_similarities(Eigen::DenseBase<Derived> const &sims, double alpha)
{
  if (sims.size() == 0) { throw EmptyDocumentError("document has no sentence embeddings"); }
  double const hi = static_cast<double>(sims.maxCoeff());
  double const lo = static_cast<double>(sims.minCoeff());
  double sum = 0; // left to right, so the mean does not depend on vectorization
  for (Index i = 0; i < sims.size(); ++i) { sum += static_cast<double>(sims(i)); }
  double const avg = std::clamp(sum / static_cast<double>(sims.size()), lo, hi);
  return std::clamp(alpha * hi + (1.0 - alpha) * avg, lo, hi);
}

/// Re-rank score of one document: its sentence embeddings are the rows of `sentences`.
template <typename DQ, typename DS>
double relevance_score(Eigen::MatrixBase<DQ> const &query, Eigen::MatrixBase<DS> const &sentences, double alpha)
{
  if (sentences.rows() == 0) { throw EmptyDocumentError("document has no sentence embeddings"); }
  return relevance_from_similarities(sentence_similarities(query, sentences), alpha);
}

} // namespace resrag
