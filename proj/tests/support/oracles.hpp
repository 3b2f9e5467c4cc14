#pragma once

// Reference implementations used as test oracles. They follow the textbook
// definitions with plain loops and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double dot(Vec const &a, Vec const &b)
{
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) { s += a[i] * b[i]; }
  return s;
}

inline double cosine(Vec const &a, Vec const &b) { return dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b))); }

inline double neg_l2(Vec const &a, Vec const &b)
{
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) { s += (a[i] - b[i]) * (a[i] - b[i]); }
  return -std::sqrt(s);
}

/// r = alpha * max(sim) + (1 - alpha) * mean(sim)
inline double relevance(Vec const &q, std::vector<Vec> const &sentences, double alpha)
{
  double best = -std::numeric_limits<double>::infinity();
  double sum = 0;
  for (auto const &s : sentences) {
    double const v = neg_l2(q, s);
    best = std::max(best, v);
    sum += v;
  }
  return alpha * best + (1 - alpha) * (sum / static_cast<double>(sentences.size()));
}

/// rank(d) = 1 + |{d' : score(d') > score(d)}|
inline std::vector<std::size_t> ranks(std::vector<double> const &scores)
{
  std::vector<std::size_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::size_t better = 0;
    for (double s : scores) { better += s > scores[i] ? 1 : 0; }
    out[i] = better + 1;
  }
  return out;
}

struct Doc
{
  std::string id;
  Vec vector;
  std::vector<Vec> sentences;
};

struct Scored
{
  std::string id;
  double cosine = 0;
  double relevance = 0;
};

/// Scores every document (no prefetch cut) and sorts by relevance desc,
/// cosine desc, id asc. Documents without sentences score their cosine.
inline std::vector<Scored> brute_force(std::vector<Doc> const &docs, Vec const &q, double alpha)
{
  std::vector<Scored> out;
  for (auto const &d : docs) {
    double const c = cosine(q, d.vector);
    out.push_back({d.id, c, d.sentences.empty() ? c : relevance(q, d.sentences, alpha)});
  }
  std::sort(out.begin(), out.end(), [](Scored const &a, Scored const &b) {
    if (a.relevance != b.relevance) { return a.relevance > b.relevance; }
    if (a.cosine != b.cosine) { return a.cosine > b.cosine; }
    return a.id < b.id;
  });
  return out;
}

/// Ids of the cosine top-n, ties by ascending id.
inline std::vector<std::string> cosine_top_n(std::vector<Doc> const &docs, Vec const &q, std::size_t n)
{
  std::vector<std::pair<double, std::string>> s;
  for (auto const &d : docs) { s.emplace_back(cosine(q, d.vector), d.id); }
  std::sort(s.begin(), s.end(), [](auto const &a, auto const &b) {
    if (a.first != b.first) { return a.first > b.first; }
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(n, s.size()); ++i) { out.push_back(s[i].second); }
  return out;
}

/// Two-stage reference: cosine top-n, then brute_force over those, first k.
inline std::vector<Scored> retrieve(std::vector<Doc> const &docs, Vec const &q, std::size_t n, std::size_t k,
                                    double alpha)
{
  auto const ids = cosine_top_n(docs, q, n);
  std::vector<Doc> kept;
  for (auto const &d : docs) {
    if (std::find(ids.begin(), ids.end(), d.id) != ids.end()) { kept.push_back(d); }
  }
  auto out = brute_force(kept, q, alpha);
  if (out.size() > k) { out.resize(k); }
  return out;
}

enum class Link
{
  Ward,
  Average,
  Complete,
  Single,
};

/// Naive agglomerative clustering: every step recomputes all cluster-pair
/// distances from the members. Ward uses the centroid form
/// sqrt(2 na nb / (na + nb)) * |ca - cb|. Clusters are identified by their
/// smallest member; the closest pair merges, ties to the smallest (i, j).
/// Returns a label per point, numbered in order of first appearance.
inline std::vector<int> agglomerate(std::vector<Vec> const &pts, double threshold, Link link)
{
  std::size_t const n = pts.size();
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) { clusters.push_back({i}); }
  auto dist = [&](std::size_t a, std::size_t b) { return -neg_l2(pts[a], pts[b]); };
  auto linkage = [&](std::vector<std::size_t> const &A, std::vector<std::size_t> const &B) {
    if (link == Link::Ward) {
      std::size_t const dim = pts[0].size();
      Vec ca(dim, 0.0), cb(dim, 0.0);
      for (auto i : A) {
        for (std::size_t k = 0; k < dim; ++k) { ca[k] += pts[i][k]; }
      }
      for (auto i : B) {
        for (std::size_t k = 0; k < dim; ++k) { cb[k] += pts[i][k]; }
      }
      for (std::size_t k = 0; k < dim; ++k) {
        ca[k] /= static_cast<double>(A.size());
        cb[k] /= static_cast<double>(B.size());
      }
      double const na = static_cast<double>(A.size()), nb = static_cast<double>(B.size());
      return std::sqrt(2 * na * nb / (na + nb)) * -neg_l2(ca, cb);
    }
    double agg = link == Link::Single ? std::numeric_limits<double>::infinity() : 0.0;
    for (auto i : A) {
      for (auto j : B) {
        double const d = dist(i, j);
        if (link == Link::Single) {
          agg = std::min(agg, d);
        } else if (link == Link::Complete) {
          agg = std::max(agg, d);
        } else {
          agg += d;
        }
      }
    }
    if (link == Link::Average) { agg /= static_cast<double>(A.size() * B.size()); }
    return agg;
  };

  while (clusters.size() > 1) {
    // clusters stay sorted by smallest member, so (a, b) order is (i, j) order
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double const d = linkage(clusters[a], clusters[b]);
        if (d < best) {
          best = d;
          ba = a;
          bb = b;
        }
      }
    }
    if (!(best < threshold)) { break; }
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    std::sort(clusters[ba].begin(), clusters[ba].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  std::vector<int> labels(n, -1);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (auto i : clusters[c]) { labels[i] = static_cast<int>(c); }
  }
  return labels;
}

} // namespace oracle
