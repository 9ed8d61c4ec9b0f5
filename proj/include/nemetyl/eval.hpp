#pragma once

// Pairwise confusion-matrix scoring of clusterings against type labels, and
// run reports.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nemetyl/cluster.hpp"
#include "nemetyl/ingest.hpp"

namespace nemetyl {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline std::uint64_t pairs_of(std::uint64_t n) noexcept { return n < 2 ? 0 : n * (n - 1) / 2; }

/// Counts over all unordered pairs of clustered messages: positives share a
/// cluster, true ones share a type. Noise must be excluded by the caller.
inline ConfusionCounts confusion_counts(const std::vector<std::vector<MessageId>>& clusters,
                                        const std::map<MessageId, std::string>& labels) {
  std::vector<std::map<std::string, std::uint64_t>> per_cluster;
  per_cluster.reserve(clusters.size());
  for (const auto& c : clusters) {
    auto& counts = per_cluster.emplace_back();
    for (MessageId id : c) {
      auto it = labels.find(id);
      if (it == labels.end())
        throw Error(ErrorKind::MissingTruth, "message " + std::to_string(id) + " has no type label");
      ++counts[it->second];
    }
  }
  ConfusionCounts out;
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    positives += pairs_of(clusters[i].size());
    for (const auto& [type, n] : per_cluster[i]) out.tp += pairs_of(n);
  }
  std::uint64_t negatives = 0;
  for (std::size_t i = 0; i < clusters.size(); ++i)
    for (std::size_t j = i + 1; j < clusters.size(); ++j) {
      negatives += static_cast<std::uint64_t>(clusters[i].size()) * clusters[j].size();
      for (const auto& [type, n] : per_cluster[i]) {
        auto other = per_cluster[j].find(type);
        if (other != per_cluster[j].end()) out.fn += n * other->second;
      }
    }
  out.fp = positives - out.tp;
  out.tn = negatives - out.fn;
  return out;
}

struct PrecisionRecall {
  std::optional<double> precision;
  std::optional<double> recall;
};

inline PrecisionRecall precision_recall(const ConfusionCounts& c) {
  PrecisionRecall out;
  if (c.tp + c.fp > 0) out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return out;
}

struct ClusterComposition {
  int label = 0;
  std::size_t size = 0;
  std::map<std::string, std::size_t> types;
};

struct QualityReport {
  std::string protocol;
  std::string segmenter;
  nlohmann::json config;
  double epsilon = 0.0;
  std::optional<int> k;
  std::size_t noise_count = 0;
  std::size_t cluster_count = 0;
  std::vector<ClusterComposition> clusters;
  std::optional<double> precision;
  std::optional<double> recall;
};

inline nlohmann::json config_to_json(const AnalysisConfig& cfg) {
  return {{"penalty_f", cfg.penalty_f},
          {"gap_penalty", cfg.gap_penalty},
          {"match_bound", cfg.match_bound},
          {"mismatch_bound", cfg.mismatch_bound},
          {"min_samples", cfg.min_samples},
          {"epsilon_factor", cfg.epsilon_factor},
          {"char_mean_min", cfg.char_mean_min},
          {"char_mean_max", cfg.char_mean_max},
          {"char_min_len", cfg.char_min_len},
          {"char_nonprintable_ratio", cfg.char_nonprintable_ratio},
          {"char_byte_max", cfg.char_byte_max},
          {"trace_limit", cfg.trace_limit},
          {"frequent_top_k", cfg.frequent_top_k}};
}

/// Summarizes a clustering; precision and recall are filled only when every
/// message carries a type label.
inline QualityReport make_report(const Trace& trace, const ClusterSet& clusters, std::string segmenter,
                                 const AnalysisConfig& cfg) {
  QualityReport r;
  r.protocol = trace.protocol_name;
  r.segmenter = std::move(segmenter);
  r.config = config_to_json(cfg);
  r.epsilon = clusters.epsilon_used;
  r.k = clusters.k_chosen;
  r.noise_count = clusters.noise_count;
  const auto members = clusters.clusters();
  r.cluster_count = members.size();
  for (std::size_t c = 0; c < members.size(); ++c) {
    ClusterComposition comp{static_cast<int>(c), members[c].size(), {}};
    for (MessageId id : members[c])
      if (const auto& t = trace.messages.at(id).true_type()) ++comp.types[*t];
    r.clusters.push_back(std::move(comp));
  }
  if (trace.has_types()) {
    std::map<MessageId, std::string> labels;
    for (const auto& m : trace.messages) labels.emplace(m.id(), *m.true_type());
    const auto pr = precision_recall(confusion_counts(members, labels));
    r.precision = pr.precision;
    r.recall = pr.recall;
  }
  return r;
}

inline nlohmann::json report_to_json(const QualityReport& r) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : r.clusters)
    clusters.push_back({{"label", c.label}, {"size", c.size}, {"types", c.types}});
  nlohmann::json out{{"protocol", r.protocol},
                     {"segmenter", r.segmenter},
                     {"config", r.config},
                     {"epsilon", r.epsilon},
                     {"k", r.k ? nlohmann::json(*r.k) : nlohmann::json(nullptr)},
                     {"clusters", std::move(clusters)},
                     {"cluster_count", r.cluster_count},
                     {"noise", r.noise_count}};
  if (r.precision) out["precision"] = *r.precision;
  if (r.recall) out["recall"] = *r.recall;
  return out;
}

/// One row per cluster; type composition as "type:count" pairs joined by ';'.
inline void write_report_csv(std::ostream& out, const QualityReport& r) {
  out << "label,size,types\n";
  for (const auto& c : r.clusters) {
    out << c.label << ',' << c.size << ',';
    bool first = true;
    for (const auto& [type, n] : c.types) {
      out << (first ? "" : ";") << type << ':' << n;
      first = false;
    }
    out << '\n';
  }
}

}  // namespace nemetyl
