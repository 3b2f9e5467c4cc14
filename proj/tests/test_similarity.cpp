#include "oracles.hpp"
#include "random_corpus.hpp"

#include "resrag/ranking.hpp"
#include "resrag/similarity.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace resrag;

namespace {
Vecf vec(std::initializer_list<float> xs)
{
  Vecf v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (float x : xs) { v[i++] = x; }
  return v;
}
} // namespace

TEST(Cosine, IdentityIsOne) { EXPECT_DOUBLE_EQ(cosine(vec({0.3f, -2.f, 5.f}), vec({0.3f, -2.f, 5.f})), 1.0); }

TEST(Cosine, OrthogonalIsZero) { EXPECT_EQ(cosine(vec({1, 0}), vec({0, 1})), 0.0); }

TEST(Cosine, FortyFiveDegrees) { EXPECT_NEAR(cosine(vec({1, 0}), vec({1, 1})), 0.70710678, 1e-6); }

TEST(Cosine, Errors)
{
  EXPECT_THROW(cosine(vec({1, 0}), vec({1, 0, 0})), DimensionMismatch);
  EXPECT_THROW(cosine(vec({0, 0}), vec({1, 0})), ZeroVectorError);
}

TEST(Cosine, SymmetricAndBounded)
{
  std::mt19937_64 rng(7);
  for (int t = 0; t < 2000; ++t) {
    auto const a = testing_support::random_vector(rng, 8);
    auto const b = testing_support::random_vector(rng, 8);
    double const ab = cosine(a, b);
    EXPECT_EQ(ab, cosine(b, a));
    EXPECT_GE(ab, -1.0 - 1e-6);
    EXPECT_LE(ab, 1.0 + 1e-6);
    EXPECT_NEAR(ab, oracle::cosine(testing_support::to_oracle(a), testing_support::to_oracle(b)), 1e-9);
  }
}

TEST(SentenceSimilarity, Examples)
{
  EXPECT_EQ(sentence_similarity(vec({1, 2}), vec({1, 2})), 0.0);
  EXPECT_DOUBLE_EQ(sentence_similarity(vec({0, 0}), vec({3, 4})), -5.0);
  EXPECT_THROW(sentence_similarity(vec({0, 0}), vec({3, 4, 5})), DimensionMismatch);
}

TEST(SentenceSimilarity, MatchesDirectFormula)
{
  std::mt19937_64 rng(11);
  for (int t = 0; t < 1000; ++t) {
    auto const q = testing_support::random_vector(rng, 8);
    auto const s = testing_support::random_vector(rng, 8);
    EXPECT_NEAR(sentence_similarity(q, s), oracle::neg_l2(testing_support::to_oracle(q), testing_support::to_oracle(s)),
                1e-9);
  }
}

TEST(Relevance, HandComputed)
{
  Vecd sims(2);
  sims << -0.1, -0.9;
  EXPECT_NEAR(relevance_from_similarities(sims, 0.7), -0.22, 1e-12);
}

TEST(Relevance, SingleSentenceIgnoresAlpha)
{
  Vecd sims(1);
  sims << -3.25;
  for (double a : {0.0, 0.3, 0.7, 1.0}) { EXPECT_EQ(relevance_from_similarities(sims, a), -3.25); }
}

TEST(Relevance, DegenerateWeights)
{
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    auto const q = testing_support::random_vector(rng, 8);
    RowMatrixf S(1 + t % 9, 8);
    for (Index i = 0; i < S.rows(); ++i) { S.row(i) = testing_support::random_vector(rng, 8).transpose(); }
    auto const sims = sentence_similarities(q, S);
    double sum = 0;
    for (Index i = 0; i < sims.size(); ++i) { sum += sims[i]; }
    EXPECT_EQ(relevance_score(q, S, 1.0), sims.maxCoeff());
    EXPECT_EQ(relevance_score(q, S, 0.0), sum / static_cast<double>(sims.size()));
  }
}

TEST(Relevance, EmptyDocument)
{
  RowMatrixf S(0, 4);
  EXPECT_THROW(relevance_score(vec({1, 2, 3, 4}), S, 0.7), EmptyDocumentError);
}

TEST(Relevance, BoundsAndMonotone)
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-4.0, 0.0);
  std::uniform_real_distribution<double> ua(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    Vecd sims(1 + t % 12);
    for (Index i = 0; i < sims.size(); ++i) { sims[i] = u(rng); }
    double const a = ua(rng);
    double const r = relevance_from_similarities(sims, a);
    EXPECT_GE(r, sims.minCoeff());
    EXPECT_LE(r, sims.maxCoeff());
    Vecd better = sims;
    auto const i = static_cast<Index>(t % sims.size());
    better[i] = std::min(0.0, better[i] + 0.5);
    EXPECT_GE(relevance_from_similarities(better, a), r);
  }
}

TEST(Ranking, WorkedExample)
{
  std::vector<double> scores{0.9, 0.5, 0.5, 0.1};
  EXPECT_EQ(competition_ranks(scores), (std::vector<std::uint32_t>{1, 2, 2, 4}));
}

TEST(Ranking, MatchesSetCardinality)
{
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> level(0, 6);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> s(static_cast<std::size_t>(1 + t % 40));
    for (auto &x : s) { x = level(rng) / 6.0; }
    auto const got = competition_ranks(s);
    auto const want = oracle::ranks(s);
    for (std::size_t i = 0; i < s.size(); ++i) { EXPECT_EQ(got[i], want[i]); }
  }
}

TEST(Ranking, Empty) { EXPECT_TRUE(competition_ranks(std::vector<double>{}).empty()); }
