#pragma once

#include "agglomerative.hpp"
#include "corpus.hpp"
#include "embedding.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace resrag {

/// Unique subject tags over the corpus, sorted.
std::vector<std::string> collect_subjects(std::span<DocumentRecord const> records);

struct SubjectCluster
{
  int cluster_id = 0;
  std::vector<std::string> members;
  std::string label; // optional, human supplied
  bool operator==(SubjectCluster const &) const = default;
};

/// One vector per tag, in the same order as `tags`.
std::vector<SubjectCluster> cluster_subjects(std::vector<std::string> const &tags, RowMatrixf const &vectors,
                                             double distance_threshold, Linkage linkage = Linkage::Ward);
/// Tags are taken from the row keys' doc_id field.
std::vector<SubjectCluster> cluster_subjects(EmbeddingMatrix const &tag_vectors, double distance_threshold,
                                             Linkage linkage = Linkage::Ward);

EmbeddingMatrix embed_tags(std::vector<std::string> const &tags, EmbeddingGateway &gateway);

inline int period_start(int year, int length) { return (year >= 0 ? year / length : (year - length + 1) / length) * length; }

struct TemporalProfile
{
  int period_start = 0;
  int period_length = 10;
  std::int64_t resolution_count = 0;
  int cluster_id = 0;
  std::int64_t mentions = 0;
  double normalized_freq = 0; // mentions per 100 resolutions, divided by cluster size
  bool empty_period = false;
  std::map<std::string, std::int64_t> subject_counts;
};

/// Rows ordered by (period_start, cluster_id). Periods run from the earliest
/// to the latest record year; periods without resolutions are kept and flagged.
std::vector<TemporalProfile> cluster_temporal_profile(std::span<DocumentRecord const> records,
                                                      std::vector<SubjectCluster> const &clusters, int period_length);

struct SubjectHeatmap
{
  int period_length = 5;
  std::vector<std::string> subjects;   // rows, cluster member order
  std::vector<int> period_starts;      // columns
  RowMatrixd proportion;               // tagged resolutions / resolutions in period
  RowMatrix<std::int64_t> counts;      // tagged resolutions
  std::vector<std::int64_t> resolution_totals;
  std::vector<std::int64_t> cluster_totals; // resolutions carrying any member subject
};

SubjectHeatmap subject_heatmap(SubjectCluster const &cluster, std::span<DocumentRecord const> records,
                               int period_length = 5);

std::vector<std::string> tags_from_json(std::string_view json_text); // array, or {"tags": [...]}
std::string clusters_to_json(std::vector<SubjectCluster> const &clusters);
std::vector<SubjectCluster> clusters_from_json(std::string_view json_text);
std::string profile_to_csv(std::vector<TemporalProfile> const &profile);
std::string heatmap_to_csv(SubjectHeatmap const &heatmap);

} // namespace resrag
