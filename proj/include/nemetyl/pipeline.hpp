#pragma once

// End-to-end orchestration: full runs and single stages over on-disk
// intermediate artifacts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nemetyl/align.hpp"
#include "nemetyl/cluster.hpp"
#include "nemetyl/dissim.hpp"
#include "nemetyl/eval.hpp"
#include "nemetyl/ingest.hpp"
#include "nemetyl/refine.hpp"
#include "nemetyl/segmenter.hpp"

namespace nemetyl {

enum class InputFormat { Auto, Pcap, Json };
enum class SegmenterKind { Fixed, Boundaries, Refined };
enum class BaseSegmentation { Auto, Fixed, Boundaries };

struct RunSpec {
  std::filesystem::path input;
  InputFormat format = InputFormat::Auto;
  SegmenterKind segmenter = SegmenterKind::Fixed;
  BaseSegmentation base = BaseSegmentation::Auto;  // for the refined segmenter
  std::size_t chunk_len = 4;
  int udp_port = -1;
  AnalysisConfig config;
  std::optional<double> epsilon_factor;  // default: 0.8 for refined, else 1.0
  std::optional<double> epsilon;         // manual epsilon skips auto-configuration
  std::filesystem::path out_dir = "nemetyl-out";
  unsigned workers = 1;

  AnalysisConfig effective_config() const {
    AnalysisConfig cfg = config;
    cfg.epsilon_factor = epsilon_factor.value_or(segmenter == SegmenterKind::Refined ? 0.8 : 1.0);
    cfg.validate();
    return cfg;
  }

  std::string segmenter_name() const {
    switch (segmenter) {
      case SegmenterKind::Fixed: return "fixed" + std::to_string(chunk_len);
      case SegmenterKind::Boundaries: return "boundaries";
      case SegmenterKind::Refined: return "refined";
    }
    return "?";
  }
};

/// File names of the intermediate artifacts inside RunSpec::out_dir.
namespace artifact {
inline constexpr const char* trace = "trace.json";
inline constexpr const char* segmentation = "segmentation.json";
inline constexpr const char* segment_matrix = "segment_matrix.csv";
inline constexpr const char* message_matrix = "message_matrix.csv";
inline constexpr const char* clusters = "clusters.csv";
inline constexpr const char* clustering = "clustering.json";
inline constexpr const char* alignments = "alignments";
inline constexpr const char* refined_clusters = "refined_clusters.csv";
inline constexpr const char* refined_alignments = "refined_alignments";
inline constexpr const char* structures = "structures.json";
inline constexpr const char* report_json = "report.json";
inline constexpr const char* report_csv = "report.csv";
}  // namespace artifact

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest", "segment", "dissim", "matrix",
                                              "cluster", "align", "refine", "report"};
  return names;
}

namespace io {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::Dependency, "missing intermediate artifact " + path.string() +
                                           " (run the preceding stage first)");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  return in;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

inline void write_message_matrix_csv(std::ostream& out, const MessageDissimilarityMatrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) out << (j ? "," : "") << detail::format_real(m(i, j));
    out << '\n';
  }
}

inline MessageDissimilarityMatrix read_message_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : detail::split_csv_line(line)) row.push_back(detail::parse_real(cell));
    rows.push_back(std::move(row));
  }
  MessageDissimilarityMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw Error(ErrorKind::Format, "message matrix is not square");
    for (std::size_t j = i + 1; j < rows.size(); ++j) m.set(i, j, rows[i][j]);
  }
  return m;
}

inline void write_labels_csv(std::ostream& out, const ClusterSet& clusters) {
  out << "message_id,label\n";
  for (std::size_t id = 0; id < clusters.labels.size(); ++id) {
    out << id << ',';
    if (clusters.labels[id] == kNoise)
      out << "NOISE";
    else
      out << clusters.labels[id];
    out << '\n';
  }
}

inline std::vector<int> read_labels_csv(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2 || cells[0] != std::to_string(labels.size()))
      throw Error(ErrorKind::Format, "cluster CSV rows must be \"id,label\" in id order");
    if (cells[1] == "NOISE") {
      labels.push_back(kNoise);
      continue;
    }
    try {
      labels.push_back(std::stoi(cells[1]));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Format, "cluster CSV: bad label \"" + cells[1] + "\"");
    }
  }
  return labels;
}

inline nlohmann::json clustering_to_json(const ClusterSet& c) {
  return {{"epsilon", c.epsilon_used},
          {"k", c.k_chosen ? nlohmann::json(*c.k_chosen) : nlohmann::json(nullptr)},
          {"noise", c.noise_count},
          {"cluster_count", c.cluster_count()}};
}

inline ClusterSet read_clusters(const std::filesystem::path& labels_csv,
                                const std::filesystem::path& clustering_json) {
  ClusterSet c;
  auto in = open_in(labels_csv);
  c.labels = read_labels_csv(in);
  const auto meta = read_json(clustering_json);
  c.epsilon_used = meta.at("epsilon").get<double>();
  if (!meta.at("k").is_null()) c.k_chosen = meta.at("k").get<int>();
  c.noise_count = static_cast<std::size_t>(std::count(c.labels.begin(), c.labels.end(), kNoise));
  return c;
}

inline std::string table_file_name(int label) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cluster_%03d.csv", label);
  return buf;
}

inline void write_tables(const std::filesystem::path& dir, const std::vector<AlignmentTable>& tables) {
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  std::filesystem::create_directories(dir, ec);
  for (const auto& t : tables) {
    auto out = open_out(dir / table_file_name(t.cluster));
    write_alignment_csv(out, t);
  }
}

inline std::vector<AlignmentTable> read_tables(const std::filesystem::path& dir, int count,
                                               const Segmentation& segmentation) {
  std::vector<AlignmentTable> tables;
  for (int label = 0; label < count; ++label) {
    auto in = open_in(dir / table_file_name(label));
    tables.push_back(read_alignment_csv(in, segmentation, label));
  }
  return tables;
}

}  // namespace io

// ---------------------------------------------------------------------------
// Stage computations (in memory)

inline Trace load_input(const RunSpec& spec, const AnalysisConfig& cfg) {
  InputFormat format = spec.format;
  if (format == InputFormat::Auto) {
    const auto ext = spec.input.extension().string();
    format = (ext == ".pcap" || ext == ".cap") ? InputFormat::Pcap : InputFormat::Json;
  }
  Trace raw;
  if (format == InputFormat::Pcap) {
    if (spec.udp_port < 0)
      throw Error(ErrorKind::Precondition, "pcap input requires --port to select the protocol");
    raw = read_pcap(spec.input, spec.udp_port, std::numeric_limits<std::size_t>::max());
  } else {
    raw = read_trace_json(spec.input);
  }
  return preprocess(raw, cfg.trace_limit);
}

inline Segmentation segment_trace(const Trace& trace, const RunSpec& spec, const AnalysisConfig& cfg) {
  switch (spec.segmenter) {
    case SegmenterKind::Fixed:
      return segment_trace_fixed(trace, spec.chunk_len);
    case SegmenterKind::Boundaries:
      if (!trace.has_boundaries())
        throw Error(ErrorKind::Precondition,
                    "the boundaries segmenter needs \"fields\" for every message of a JSON trace");
      return mark_char_segments(segment_trace_boundaries(trace), cfg);
    case SegmenterKind::Refined: {
      bool use_fields = spec.base == BaseSegmentation::Boundaries ||
                        (spec.base == BaseSegmentation::Auto && trace.has_boundaries());
      if (use_fields && !trace.has_boundaries())
        throw Error(ErrorKind::Precondition, "base segmentation from fields, but fields are missing");
      Segmentation base = use_fields ? segment_trace_boundaries(trace)
                                     : segment_trace_fixed(trace, spec.chunk_len);
      return refine_heuristic(base, cfg);
    }
  }
  return {};
}

/// Runs every stage in memory and writes all artifacts; returns the report.
inline QualityReport run_pipeline(const RunSpec& spec, std::ostream* log = nullptr) {
  const AnalysisConfig cfg = spec.effective_config();
  const auto& out = spec.out_dir;
  auto note = [&](const std::string& what) {
    if (log) *log << what << '\n';
  };

  const Trace trace = load_input(spec, cfg);
  io::write_json(out / artifact::trace, trace_to_json(trace));
  note("ingest: " + std::to_string(trace.size()) + " messages");

  const Segmentation segmentation = segment_trace(trace, spec, cfg);
  validate_segmentation(trace, segmentation);
  io::write_json(out / artifact::segmentation, segmentation_to_json(segmentation));

  const auto seg_matrix = build_segment_matrix(segmentation, cfg, spec.workers);
  {
    auto f = io::open_out(out / artifact::segment_matrix);
    write_segment_matrix_csv(f, seg_matrix);
  }
  note("dissim: " + std::to_string(seg_matrix.size()) + " distinct segment values");

  if (trace.size() < 2) throw Error(ErrorKind::Config, "at least two messages are required");
  const auto matrix = build_message_matrix(segmentation, seg_matrix, cfg, spec.workers);
  {
    auto f = io::open_out(out / artifact::message_matrix);
    io::write_message_matrix_csv(f, matrix);
  }

  const ClusterSet clusters = cluster_messages(matrix, cfg, spec.epsilon);
  {
    auto f = io::open_out(out / artifact::clusters);
    io::write_labels_csv(f, clusters);
  }
  io::write_json(out / artifact::clustering, io::clustering_to_json(clusters));
  note("cluster: " + std::to_string(clusters.cluster_count()) + " clusters, " +
       std::to_string(clusters.noise_count) + " noise, epsilon " + detail::format_real(clusters.epsilon_used));

  const AlignmentContext ctx{segmentation, seg_matrix, matrix, cfg};
  const auto tables = align_clusters(clusters, ctx, spec.workers);
  io::write_tables(out / artifact::alignments, tables);

  const auto refined = refine(clusters, tables, ctx);
  {
    auto f = io::open_out(out / artifact::refined_clusters);
    io::write_labels_csv(f, refined.clusters);
  }
  io::write_tables(out / artifact::refined_alignments, refined.tables);
  io::write_json(out / artifact::structures, structures_to_json(refined.tables));
  note("refine: " + std::to_string(refined.clusters.cluster_count()) + " clusters");

  const auto report = make_report(trace, refined.clusters, spec.segmenter_name(), cfg);
  io::write_json(out / artifact::report_json, report_to_json(report));
  {
    auto f = io::open_out(out / artifact::report_csv);
    write_report_csv(f, report);
  }
  return report;
}

/// Runs one stage from the artifacts of the preceding stages.
inline void run_stage(const std::string& stage, const RunSpec& spec) {
  const auto& known = stage_names();
  if (std::find(known.begin(), known.end(), stage) == known.end())
    throw Error(ErrorKind::Precondition, "unknown stage \"" + stage + "\"");
  const AnalysisConfig cfg = spec.effective_config();
  const auto& out = spec.out_dir;

  if (stage == "ingest") {
    io::write_json(out / artifact::trace, trace_to_json(load_input(spec, cfg)));
    return;
  }
  const Trace trace = trace_from_json(io::read_json(out / artifact::trace));
  if (stage == "segment") {
    const auto segmentation = segment_trace(trace, spec, cfg);
    validate_segmentation(trace, segmentation);
    io::write_json(out / artifact::segmentation, segmentation_to_json(segmentation));
    return;
  }
  const Segmentation segmentation = segmentation_from_json(io::read_json(out / artifact::segmentation), trace);
  if (stage == "dissim") {
    auto f = io::open_out(out / artifact::segment_matrix);
    write_segment_matrix_csv(f, build_segment_matrix(segmentation, cfg, spec.workers));
    return;
  }
  SegmentDissimilarityMatrix seg_matrix;
  {
    auto in = io::open_in(out / artifact::segment_matrix);
    seg_matrix = read_segment_matrix_csv(in);
  }
  if (stage == "matrix") {
    if (trace.size() < 2) throw Error(ErrorKind::Config, "at least two messages are required");
    auto f = io::open_out(out / artifact::message_matrix);
    io::write_message_matrix_csv(f, build_message_matrix(segmentation, seg_matrix, cfg, spec.workers));
    return;
  }
  MessageDissimilarityMatrix matrix;
  {
    auto in = io::open_in(out / artifact::message_matrix);
    matrix = io::read_message_matrix_csv(in);
  }
  if (matrix.size() != trace.size())
    throw Error(ErrorKind::Format, "message matrix size does not match the trace");
  if (stage == "cluster") {
    const auto clusters = cluster_messages(matrix, cfg, spec.epsilon);
    auto f = io::open_out(out / artifact::clusters);
    io::write_labels_csv(f, clusters);
    io::write_json(out / artifact::clustering, io::clustering_to_json(clusters));
    return;
  }
  const ClusterSet clusters = io::read_clusters(out / artifact::clusters, out / artifact::clustering);
  if (clusters.labels.size() != trace.size())
    throw Error(ErrorKind::Format, "cluster labels do not match the trace");
  const AlignmentContext ctx{segmentation, seg_matrix, matrix, cfg};
  if (stage == "align") {
    io::write_tables(out / artifact::alignments, align_clusters(clusters, ctx, spec.workers));
    return;
  }
  if (stage == "refine") {
    const auto tables = io::read_tables(out / artifact::alignments, clusters.cluster_count(), segmentation);
    const auto refined = refine(clusters, tables, ctx);
    auto f = io::open_out(out / artifact::refined_clusters);
    io::write_labels_csv(f, refined.clusters);
    io::write_tables(out / artifact::refined_alignments, refined.tables);
    io::write_json(out / artifact::structures, structures_to_json(refined.tables));
    return;
  }
  // report
  ClusterSet refined = clusters;
  {
    auto in = io::open_in(out / artifact::refined_clusters);
    refined.labels = io::read_labels_csv(in);
    refined.noise_count =
        static_cast<std::size_t>(std::count(refined.labels.begin(), refined.labels.end(), kNoise));
  }
  const auto report = make_report(trace, refined, spec.segmenter_name(), cfg);
  io::write_json(out / artifact::report_json, report_to_json(report));
  auto f = io::open_out(out / artifact::report_csv);
  write_report_csv(f, report);
}

}  // namespace nemetyl
