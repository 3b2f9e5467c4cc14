#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace resrag {

/// Competition ranks for descending scores: rank(i) = 1 + #{j : s[j] > s[i]}.
/// Ties share a rank and the following rank is skipped.
template <typename Scalar> std::vector<std::uint32_t> competition_ranks(std::span<Scalar const> scores)
{
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<std::uint32_t> ranks(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (pos > 0 && scores[order[pos]] == scores[order[pos - 1]]) {
      ranks[order[pos]] = ranks[order[pos - 1]];
    } else {
      ranks[order[pos]] = static_cast<std::uint32_t>(pos + 1);
    }
  }
  return ranks;
}

template <typename Scalar> std::vector<std::uint32_t> competition_ranks(std::vector<Scalar> const &scores)
{
  return competition_ranks(std::span<Scalar const>(scores));
}

} // namespace resrag
