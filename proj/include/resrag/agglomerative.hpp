#pragma once

#include "eigen_types.hpp"
#include "errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

namespace resrag {

enum class Linkage
{
  Ward,
  Average,
  Complete,
  Single,
};

std::string_view to_string(Linkage l);
Linkage linkage_from_string(std::string_view s); // throws InvalidConfig

struct MergeStep
{
  Index a = 0; // surviving slot (the smaller index)
  Index b = 0; // absorbed slot
  double distance = 0;
  Index size = 0; // members after the merge
};

struct Dendrogram
{
  std::vector<MergeStep> merges;
  std::vector<Index> labels; // cluster per input row, numbered by first member
  Index clusters = 0;
};

/// Bottom-up agglomerative clustering over Euclidean distance. Pairs are merged
/// while their linkage distance is strictly below `threshold`. The closest pair
/// wins; ties go to the lexicographically smallest (i, j). A merged cluster
/// keeps the smaller slot index.
template <typename Derived>
Dendrogram agglomerate(Eigen::MatrixBase<Derived> const &points, double threshold, Linkage linkage = Linkage::Ward)
{
  Index const n = points.rows();
  if (n == 0) { throw EmptyInputError("no points to cluster"); }
  bool const ward = linkage == Linkage::Ward;

  // Ward updates run on squared distances, the other linkages on plain ones.
  RowMatrixd dist(n, n);
  for (Index i = 0; i < n; ++i) {
    dist(i, i) = 0;
    for (Index j = i + 1; j < n; ++j) {
      double const d2 = (points.row(i).template cast<double>() - points.row(j).template cast<double>()).squaredNorm();
      dist(i, j) = dist(j, i) = ward ? d2 : std::sqrt(d2);
    }
  }
  auto to_distance = [ward](double v) { return ward ? std::sqrt(std::max(v, 0.0)) : v; };

  std::vector<Index> size(static_cast<std::size_t>(n), 1);
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  std::vector<Index> nn(static_cast<std::size_t>(n), -1);
  std::vector<double> nnd(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());

  // nn[i] looks only at j > i so that the scan below finds the smallest pair.
  auto refresh = [&](Index i) {
    nn[i] = -1;
    nnd[i] = std::numeric_limits<double>::infinity();
    for (Index j = i + 1; j < n; ++j) {
      if (active[j] && dist(i, j) < nnd[i]) {
        nnd[i] = dist(i, j);
        nn[i] = j;
      }
    }
  };
  for (Index i = 0; i < n; ++i) { refresh(i); }

  Dendrogram out;
  std::vector<Index> owner(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) { owner[i] = i; }

  for (Index remaining = n; remaining > 1; --remaining) {
    Index a = -1;
    for (Index i = 0; i < n; ++i) {
      if (active[i] && nn[i] >= 0 && (a < 0 || nnd[i] < nnd[a])) { a = i; }
    }
    if (a < 0) { break; }
    Index const b = nn[a];
    double const merge_dist = to_distance(nnd[a]);
    if (!(merge_dist < threshold)) { break; }

    double const na = static_cast<double>(size[a]);
    double const nb = static_cast<double>(size[b]);
    double const dab = dist(a, b);
    for (Index k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) { continue; }
      double const dka = dist(k, a);
      double const dkb = dist(k, b);
      double d = 0;
      switch (linkage) {
      case Linkage::Ward: {
        double const nk = static_cast<double>(size[k]);
        d = ((na + nk) * dka + (nb + nk) * dkb - nk * dab) / (na + nb + nk);
        break;
      }
      case Linkage::Average: d = (na * dka + nb * dkb) / (na + nb); break;
      case Linkage::Complete: d = std::max(dka, dkb); break;
      case Linkage::Single: d = std::min(dka, dkb); break;
      }
      dist(k, a) = dist(a, k) = d;
    }
    active[b] = 0;
    size[a] += size[b];
    for (Index i = 0; i < n; ++i) {
      if (owner[i] == b) { owner[i] = a; }
    }
    out.merges.push_back({a, b, merge_dist, size[a]});

    refresh(a);
    for (Index k = 0; k < a; ++k) {
      if (!active[k]) { continue; }
      if (nn[k] == a || nn[k] == b) {
        refresh(k);
      } else if (dist(k, a) < nnd[k] || (dist(k, a) == nnd[k] && a < nn[k])) {
        nnd[k] = dist(k, a);
        nn[k] = a;
      }
    }
    for (Index k = a + 1; k < b; ++k) {
      if (active[k] && nn[k] == b) { refresh(k); }
    }
  }

  std::vector<Index> slot_label(static_cast<std::size_t>(n), -1);
  out.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto &l = slot_label[owner[i]];
    if (l < 0) { l = out.clusters++; }
    out.labels[i] = l;
  }
  return out;
}

} // namespace resrag
