#include "resrag/analytics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

namespace resrag {

using nlohmann::json;

std::string_view to_string(Linkage l)
{
  switch (l) {
  case Linkage::Ward: return "ward";
  case Linkage::Average: return "average";
  case Linkage::Complete: return "complete";
  case Linkage::Single: return "single";
  }
  return "?";
}

Linkage linkage_from_string(std::string_view s)
{
  for (auto l : {Linkage::Ward, Linkage::Average, Linkage::Complete, Linkage::Single}) {
    if (to_string(l) == s) { return l; }
  }
  throw InvalidConfig("unknown linkage '" + std::string(s) + "'");
}

std::vector<std::string> collect_subjects(std::span<DocumentRecord const> records)
{
  std::set<std::string> tags;
  for (auto const &r : records) { tags.insert(r.subjects.begin(), r.subjects.end()); }
  return {tags.begin(), tags.end()};
}

std::vector<SubjectCluster> cluster_subjects(std::vector<std::string> const &tags, RowMatrixf const &vectors,
                                             double distance_threshold, Linkage linkage)
{
  if (tags.empty()) { throw EmptyInputError("no subject tags to cluster"); }
  if (static_cast<Index>(tags.size()) != vectors.rows()) {
    throw DimensionMismatch("expected one vector per tag: " + std::to_string(tags.size()) + " tags, " +
                            std::to_string(vectors.rows()) + " vectors");
  }
  auto const dendrogram = agglomerate(vectors, distance_threshold, linkage);
  std::vector<SubjectCluster> out(static_cast<std::size_t>(dendrogram.clusters));
  for (std::size_t c = 0; c < out.size(); ++c) { out[c].cluster_id = static_cast<int>(c); }
  for (std::size_t i = 0; i < tags.size(); ++i) {
    out[static_cast<std::size_t>(dendrogram.labels[i])].members.push_back(tags[i]);
  }
  return out;
}

std::vector<SubjectCluster> cluster_subjects(EmbeddingMatrix const &tag_vectors, double distance_threshold,
                                             Linkage linkage)
{
  std::vector<std::string> tags;
  tags.reserve(tag_vectors.keys.size());
  for (auto const &k : tag_vectors.keys) { tags.push_back(k.doc_id); }
  return cluster_subjects(tags, tag_vectors.rows, distance_threshold, linkage);
}

EmbeddingMatrix embed_tags(std::vector<std::string> const &tags, EmbeddingGateway &gateway)
{
  std::vector<RowKey> keys;
  keys.reserve(tags.size());
  for (auto const &t : tags) { keys.push_back({t, std::nullopt}); }
  return gateway.embed_batch(tags, std::move(keys));
}

namespace {

void check_period(int period_length)
{
  if (period_length != 5 && period_length != 10) { throw InvalidConfig("period length must be 5 or 10 years"); }
}

/// Period starts covering every record year, oldest first.
std::vector<int> period_axis(std::span<DocumentRecord const> records, int period_length)
{
  if (records.empty()) { return {}; }
  auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                      [](auto const &a, auto const &b) { return a.date.year < b.date.year; });
  std::vector<int> out;
  for (int p = period_start(lo->date.year, period_length); p <= hi->date.year; p += period_length) { out.push_back(p); }
  return out;
}

std::size_t period_slot(int year, int first, int period_length)
{
  return static_cast<std::size_t>((period_start(year, period_length) - first) / period_length);
}

} // namespace

std::vector<TemporalProfile> cluster_temporal_profile(std::span<DocumentRecord const> records,
                                                      std::vector<SubjectCluster> const &clusters, int period_length)
{
  check_period(period_length);
  auto const periods = period_axis(records, period_length);
  if (periods.empty()) { return {}; }

  std::unordered_map<std::string, std::size_t> cluster_of;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (auto const &m : clusters[c].members) { cluster_of.emplace(m, c); }
  }

  std::vector<std::int64_t> resolutions(periods.size(), 0);
  // subject counts per (period, cluster)
  std::vector<std::vector<std::map<std::string, std::int64_t>>> counts(
    periods.size(), std::vector<std::map<std::string, std::int64_t>>(clusters.size()));
  for (auto const &r : records) {
    auto const p = period_slot(r.date.year, periods.front(), period_length);
    ++resolutions[p];
    for (auto const &s : r.subjects) {
      if (auto it = cluster_of.find(s); it != cluster_of.end()) { ++counts[p][it->second][s]; }
    }
  }

  std::vector<TemporalProfile> out;
  out.reserve(periods.size() * clusters.size());
  for (std::size_t p = 0; p < periods.size(); ++p) {
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      TemporalProfile t;
      t.period_start = periods[p];
      t.period_length = period_length;
      t.resolution_count = resolutions[p];
      t.cluster_id = clusters[c].cluster_id;
      t.empty_period = resolutions[p] == 0;
      t.subject_counts = std::move(counts[p][c]);
      for (auto const &[s, n] : t.subject_counts) { t.mentions += n; }
      if (!t.empty_period && !clusters[c].members.empty()) {
        t.normalized_freq = static_cast<double>(t.mentions) / static_cast<double>(t.resolution_count) * 100.0 /
                            static_cast<double>(clusters[c].members.size());
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

SubjectHeatmap subject_heatmap(SubjectCluster const &cluster, std::span<DocumentRecord const> records,
                               int period_length)
{
  check_period(period_length);
  if (cluster.members.empty()) { throw EmptyInputError("cluster has no members"); }
  SubjectHeatmap h;
  h.period_length = period_length;
  h.subjects = cluster.members;
  h.period_starts = period_axis(records, period_length);
  auto const rows = static_cast<Index>(h.subjects.size());
  auto const cols = static_cast<Index>(h.period_starts.size());
  h.counts = RowMatrix<std::int64_t>::Zero(rows, cols);
  h.proportion = RowMatrixd::Zero(rows, cols);
  h.resolution_totals.assign(h.period_starts.size(), 0);
  h.cluster_totals.assign(h.period_starts.size(), 0);

  std::unordered_map<std::string, Index> row_of;
  for (Index i = 0; i < rows; ++i) { row_of.emplace(h.subjects[static_cast<std::size_t>(i)], i); }
  for (auto const &r : records) {
    auto const p = period_slot(r.date.year, h.period_starts.front(), period_length);
    ++h.resolution_totals[p];
    bool any = false;
    for (auto const &s : r.subjects) {
      if (auto it = row_of.find(s); it != row_of.end()) {
        ++h.counts(it->second, static_cast<Index>(p));
        any = true;
      }
    }
    if (any) { ++h.cluster_totals[p]; }
  }
  for (Index c = 0; c < cols; ++c) {
    auto const total = h.resolution_totals[static_cast<std::size_t>(c)];
    if (total > 0) { h.proportion.col(c) = h.counts.col(c).cast<double>() / static_cast<double>(total); }
  }
  return h;
}

std::vector<std::string> tags_from_json(std::string_view json_text)
{
  try {
    auto j = json::parse(json_text);
    if (j.is_object()) { j = j.at("tags"); }
    auto tags = j.get<std::vector<std::string>>();
    std::sort(tags.begin(), tags.end());
    tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
    return tags;
  } catch (json::exception const &e) {
    throw SchemaError(std::string("tag file must hold a JSON array of strings: ") + e.what());
  }
}

std::string clusters_to_json(std::vector<SubjectCluster> const &clusters)
{
  auto arr = nlohmann::ordered_json::array();
  for (auto const &c : clusters) {
    arr.push_back({{"cluster_id", c.cluster_id}, {"label", c.label}, {"members", c.members}});
  }
  return nlohmann::ordered_json{{"clusters", arr}}.dump(2) + "\n";
}

std::vector<SubjectCluster> clusters_from_json(std::string_view json_text)
{
  try {
    auto j = json::parse(json_text);
    if (j.is_object()) { j = j.at("clusters"); }
    std::vector<SubjectCluster> out;
    std::set<std::string> seen;
    for (auto const &c : j) {
      SubjectCluster sc;
      sc.cluster_id = c.at("cluster_id").get<int>();
      sc.members = c.at("members").get<std::vector<std::string>>();
      sc.label = c.value("label", "");
      if (sc.members.empty()) { throw SchemaError("cluster " + std::to_string(sc.cluster_id) + " has no members"); }
      for (auto const &m : sc.members) {
        if (!seen.insert(m).second) { throw SchemaError("tag '" + m + "' appears in more than one cluster"); }
      }
      out.push_back(std::move(sc));
    }
    return out;
  } catch (json::exception const &e) {
    throw SchemaError(std::string("malformed cluster file: ") + e.what());
  }
}

std::string profile_to_csv(std::vector<TemporalProfile> const &profile)
{
  std::ostringstream os;
  os << "period_start,cluster_id,resolution_count,normalized_freq\n";
  for (auto const &t : profile) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", t.normalized_freq);
    os << t.period_start << ',' << t.cluster_id << ',' << t.resolution_count << ',' << buf << '\n';
  }
  return os.str();
}

std::string heatmap_to_csv(SubjectHeatmap const &h)
{
  std::ostringstream os;
  os << "subject,period_start,count,proportion\n";
  for (std::size_t i = 0; i < h.subjects.size(); ++i) {
    auto const &s = h.subjects[i];
    bool const quote = s.find_first_of(",\"\n") != std::string::npos;
    std::string cell = s;
    if (quote) {
      cell.clear();
      for (char ch : s) { cell += ch == '"' ? std::string("\"\"") : std::string(1, ch); }
      cell = "\"" + cell + "\"";
    }
    for (std::size_t p = 0; p < h.period_starts.size(); ++p) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", h.proportion(static_cast<Index>(i), static_cast<Index>(p)));
      os << cell << ',' << h.period_starts[p] << ',' << h.counts(static_cast<Index>(i), static_cast<Index>(p)) << ','
         << buf << '\n';
    }
  }
  return os.str();
}

} // namespace resrag
