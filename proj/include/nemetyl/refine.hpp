#pragma once

// Cluster refinement: split clusters on a field with few, frequent values and
// merge clusters whose abstracted structures are compatible.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nemetyl/align.hpp"
#include "nemetyl/cluster.hpp"

namespace nemetyl {

struct FieldCandidateClass {
  enum class Kind { Static, Dynamic, Gap };
  Kind kind = Kind::Dynamic;
  Bytes value;  // only for Static

  static FieldCandidateClass make_static(Bytes v) { return {Kind::Static, std::move(v)}; }
  static FieldCandidateClass dynamic() { return {Kind::Dynamic, {}}; }
  static FieldCandidateClass gap() { return {Kind::Gap, {}}; }

  friend bool operator==(const FieldCandidateClass&, const FieldCandidateClass&) = default;
};

inline std::string to_string(FieldCandidateClass::Kind kind) {
  switch (kind) {
    case FieldCandidateClass::Kind::Static: return "STATIC";
    case FieldCandidateClass::Kind::Dynamic: return "DYNAMIC";
    case FieldCandidateClass::Kind::Gap: return "GAP";
  }
  return "?";
}

/// A column's class together with the distinct values observed in it.
struct ColumnProfile {
  FieldCandidateClass cls;
  std::set<Bytes> values;
};

inline std::vector<ColumnProfile> column_profiles(const AlignmentTable& table) {
  std::vector<ColumnProfile> out(table.columns());
  for (std::size_t c = 0; c < out.size(); ++c) {
    bool gap = false;
    for (const auto& row : table.rows) {
      if (row.cells[c])
        out[c].values.insert(row.cells[c]->bytes);
      else
        gap = true;
    }
    if (gap)
      out[c].cls = FieldCandidateClass::gap();
    else if (out[c].values.size() == 1)
      out[c].cls = FieldCandidateClass::make_static(*out[c].values.begin());
    else
      out[c].cls = FieldCandidateClass::dynamic();
  }
  return out;
}

inline std::vector<FieldCandidateClass> abstract_structure(const AlignmentTable& table) {
  std::vector<FieldCandidateClass> out;
  for (auto& p : column_profiles(table)) out.push_back(std::move(p.cls));
  return out;
}

/// Leftmost gap-free column whose distinct values all occur frequently:
/// with a the value counts and t = floor(ln |c|), min(a) > t >= |a| and |a| >= 2.
inline std::optional<std::size_t> find_distinguishing_field(const AlignmentTable& table) {
  const std::size_t size = table.rows.size();
  if (size < 2) return std::nullopt;
  const auto t = static_cast<std::size_t>(std::floor(std::log(static_cast<double>(size))));
  for (std::size_t c = 0; c < table.columns(); ++c) {
    std::map<Bytes, std::size_t> counts;
    bool gap = false;
    for (const auto& row : table.rows) {
      if (!row.cells[c]) {
        gap = true;
        break;
      }
      ++counts[row.cells[c]->bytes];
    }
    if (gap || counts.size() < 2) continue;
    std::size_t min_count = size;
    for (const auto& [value, n] : counts) min_count = std::min(min_count, n);
    if (min_count > t && t >= counts.size()) return c;
  }
  return std::nullopt;
}

/// Partitions a cluster by its distinguishing field, if any. Sub-clusters keep
/// the parent's alignment restricted to their rows (all-GAP columns removed)
/// and are ordered by their first row.
inline std::vector<AlignmentTable> split_cluster(const AlignmentTable& table) {
  const auto column = find_distinguishing_field(table);
  if (!column) return {table};
  std::map<Bytes, AlignmentTable> parts;
  std::vector<Bytes> order;
  for (const auto& row : table.rows) {
    const Bytes& value = row.cells[*column]->bytes;
    auto [it, fresh] = parts.try_emplace(value, AlignmentTable{table.cluster, {}});
    if (fresh) order.push_back(value);
    it->second.rows.push_back(row);
  }
  std::vector<AlignmentTable> out;
  for (const auto& value : order) out.push_back(drop_gap_columns(std::move(parts[value])));
  return out;
}

namespace detail {

inline bool all_zero(const Bytes& b) {
  return std::all_of(b.begin(), b.end(), [](Byte x) { return x == 0; });
}

inline bool zero_only(const ColumnProfile& p) {
  using K = FieldCandidateClass::Kind;
  if (p.cls.kind == K::Static) return all_zero(p.cls.value);
  if (p.cls.kind == K::Dynamic)
    return !p.values.empty() && std::all_of(p.values.begin(), p.values.end(), all_zero);
  return false;
}

inline bool static_in_dynamic(const ColumnProfile& s, const ColumnProfile& d) {
  using K = FieldCandidateClass::Kind;
  return s.cls.kind == K::Static && d.cls.kind == K::Dynamic && d.values.count(s.cls.value) > 0;
}

}  // namespace detail

/// True when two aligned field candidates may belong to the same message type.
inline bool compatible(const ColumnProfile& x, const ColumnProfile& y) {
  using K = FieldCandidateClass::Kind;
  if (x.cls.kind == K::Gap || y.cls.kind == K::Gap) return true;
  if (x.cls.kind == K::Static && y.cls.kind == K::Static && x.cls.value == y.cls.value) return true;
  if (x.cls.kind == K::Dynamic && y.cls.kind == K::Dynamic) return true;
  if (detail::zero_only(x) || detail::zero_only(y)) return true;
  return detail::static_in_dynamic(x, y) || detail::static_in_dynamic(y, x);
}

/// Aligns the abstracted structures of two clusters (score 1 for compatible
/// candidates, 0 otherwise, gap -1) and accepts when every aligned pair is
/// compatible.
inline bool mergeable(const std::vector<ColumnProfile>& a, const std::vector<ColumnProfile>& b) {
  if (a.empty() || b.empty()) return true;
  auto sim = [&](std::size_t i, std::size_t j) { return compatible(a[i], b[j]) ? 1.0 : 0.0; };
  const auto steps = nw_align_steps(a.size(), b.size(), sim, -1.0);
  std::size_t i = 0, j = 0;
  for (Step s : steps) {
    switch (s) {
      case Step::Match:
        if (!compatible(a[i], b[j])) return false;
        ++i, ++j;
        break;
      case Step::GapInSecond: ++i; break;
      case Step::GapInFirst: ++j; break;
    }
  }
  return true;
}

inline bool mergeable(const AlignmentTable& a, const AlignmentTable& b) {
  return mergeable(column_profiles(a), column_profiles(b));
}

struct AlignmentContext {
  const Segmentation& segmentation;
  const SegmentDissimilarityMatrix& seg_matrix;
  const MessageDissimilarityMatrix& matrix;
  const AnalysisConfig& cfg;
};

/// Merges every transitively mergeable group of clusters; merged groups are
/// re-aligned around the medoid of their union. Groups appear in order of
/// their first member table.
inline std::vector<AlignmentTable> merge_clusters(const std::vector<AlignmentTable>& tables,
                                                  const AlignmentContext& ctx) {
  const std::size_t n = tables.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::vector<ColumnProfile>> profiles;
  for (const auto& t : tables) profiles.push_back(column_profiles(t));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t ri = find(i), rj = find(j);
      // the smaller index stays root so each group is keyed by its first table
      if (ri != rj && mergeable(profiles[i], profiles[j])) parent[std::max(ri, rj)] = std::min(ri, rj);
    }

  std::vector<AlignmentTable> out;
  for (std::size_t root = 0; root < n; ++root) {
    if (find(root) != root) continue;
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < n; ++i)
      if (find(i) == root) group.push_back(i);
    if (group.size() == 1) {
      out.push_back(tables[root]);
      continue;
    }
    std::vector<MessageId> members;
    for (std::size_t g : group)
      for (const auto& row : tables[g].rows) members.push_back(row.message);
    std::sort(members.begin(), members.end());
    out.push_back(progressive_align_cluster(members, ctx.segmentation, ctx.seg_matrix, ctx.matrix,
                                            ctx.cfg, tables[root].cluster));
  }
  return out;
}

/// Progressive alignment of every cluster of a clustering, in label order.
inline std::vector<AlignmentTable> align_clusters(const ClusterSet& clusters, const AlignmentContext& ctx,
                                                  unsigned workers = 1) {
  const auto members = clusters.clusters();
  std::vector<AlignmentTable> tables(members.size());
  parallel_rows(members.size(), workers, [&](std::size_t c) {
    tables[c] = progressive_align_cluster(members[c], ctx.segmentation, ctx.seg_matrix, ctx.matrix,
                                          ctx.cfg, static_cast<int>(c));
  });
  return tables;
}

struct RefinedClusters {
  ClusterSet clusters;
  std::vector<AlignmentTable> tables;  // tables[label]
};

/// Splits each cluster once, then merges compatible clusters. Noise stays
/// noise. Output clusters are labeled in order of their smallest message id.
inline RefinedClusters refine(const ClusterSet& clusters, const std::vector<AlignmentTable>& tables,
                              const AlignmentContext& ctx) {
  std::vector<AlignmentTable> split;
  for (const auto& t : tables)
    for (auto& part : split_cluster(t)) split.push_back(std::move(part));
  auto merged = merge_clusters(split, ctx);

  auto first_member = [](const AlignmentTable& t) {
    const auto m = t.members();
    return *std::min_element(m.begin(), m.end());
  };
  std::sort(merged.begin(), merged.end(), [&](const AlignmentTable& a, const AlignmentTable& b) {
    return first_member(a) < first_member(b);
  });

  RefinedClusters out;
  out.clusters.labels.assign(clusters.labels.size(), kNoise);
  out.clusters.epsilon_used = clusters.epsilon_used;
  out.clusters.k_chosen = clusters.k_chosen;
  for (std::size_t label = 0; label < merged.size(); ++label) {
    merged[label].cluster = static_cast<int>(label);
    for (const auto& row : merged[label].rows) {
      require(out.clusters.labels.at(row.message) == kNoise, "message assigned to two clusters");
      out.clusters.labels[row.message] = static_cast<int>(label);
    }
  }
  out.clusters.noise_count = static_cast<std::size_t>(
      std::count(out.clusters.labels.begin(), out.clusters.labels.end(), kNoise));
  out.tables = std::move(merged);
  return out;
}

inline nlohmann::json structure_to_json(const std::vector<FieldCandidateClass>& structure) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : structure) {
    nlohmann::json item{{"class", to_string(c.kind)}};
    if (c.kind == FieldCandidateClass::Kind::Static) item["value"] = to_hex(c.value);
    out.push_back(std::move(item));
  }
  return out;
}

inline nlohmann::json structures_to_json(const std::vector<AlignmentTable>& tables) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : tables)
    out.push_back({{"label", t.cluster}, {"size", t.rows.size()},
                   {"structure", structure_to_json(abstract_structure(t))}});
  return out;
}

}  // namespace nemetyl
