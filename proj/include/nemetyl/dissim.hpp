#pragma once

// Canberra-based dissimilarity between segments of possibly different length
// and the trace-wide store of segment dissimilarities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nemetyl/model.hpp"
#include "nemetyl/segmenter.hpp"

namespace nemetyl {

/// Canberra distance of two equal-dimension vectors. A term whose components
/// are both zero contributes 0.
template <typename T>
double canberra(std::span<const T> u, std::span<const T> v) {
  require(u.size() == v.size() && !u.empty(), "canberra requires equal, non-zero dimensions");
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = static_cast<double>(u[i]);
    const double b = static_cast<double>(v[i]);
    const double denom = std::fabs(a) + std::fabs(b);
    if (denom > 0.0) sum += std::fabs(a - b) / denom;
  }
  return sum;
}

inline double canberra(const FeatureVector& u, const FeatureVector& v) {
  return canberra(u.components(), v.components());
}

struct SlidingMatch {
  double value;        // normalized by the shorter dimension, in [0, 1]
  std::size_t offset;  // smallest offset attaining the minimum
};

/// Minimum Canberra distance of `shorter` against every window of `longer`
/// with the same dimension, normalized by that dimension.
template <typename T>
SlidingMatch sliding_min_canberra(std::span<const T> shorter, std::span<const T> longer) {
  require(!shorter.empty() && shorter.size() <= longer.size(),
          "sliding_min_canberra requires dim(short) <= dim(long)");
  SlidingMatch best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t o = 0; o + shorter.size() <= longer.size(); ++o) {
    const double d = canberra(longer.subspan(o, shorter.size()), shorter);
    if (d < best.value) best = {d, o};
  }
  best.value /= static_cast<double>(shorter.size());
  return best;
}

inline SlidingMatch sliding_min_canberra(const FeatureVector& shorter, const FeatureVector& longer) {
  return sliding_min_canberra(shorter.components(), longer.components());
}

/// Length-generalized Canberra dissimilarity d_m in [0, 1].
///
/// Equal lengths: the Canberra distance divided by the length. Otherwise,
/// with x the sliding minimum of the shorter s within the longer t,
/// r = (|t| - |s|) / |t| and F = penalty_f:
///
///   d_m = (|s|/|t|) x + r + (1 - x) r (|s|/|t|^2 - F)
///
/// Arguments are canonicalized so the result is exactly symmetric.
inline double mixed_dissimilarity(ByteView a, ByteView b, double penalty_f) {
  require(!a.empty() && !b.empty(), "mixed_dissimilarity requires non-empty segments");
  if (a.size() > b.size() ||
      (a.size() == b.size() && std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end())))
    std::swap(a, b);
  const double s = static_cast<double>(a.size());
  const double t = static_cast<double>(b.size());
  if (a.size() == b.size()) return canberra(a, b) / s;
  const double x = sliding_min_canberra(a, b).value;
  const double r = (t - s) / t;
  return (s / t) * x + r + (1.0 - x) * r * (s / (t * t) - penalty_f);
}

inline double mixed_dissimilarity(const Segment& a, const Segment& b, const AnalysisConfig& cfg) {
  return mixed_dissimilarity(ByteView(a.bytes), ByteView(b.bytes), cfg.penalty_f);
}

/// d_m, halved when both segments are char sequences.
inline double pair_dissimilarity(ByteView a, bool a_char, ByteView b, bool b_char,
                                 const AnalysisConfig& cfg) {
  const double d = mixed_dissimilarity(a, b, cfg.penalty_f);
  return a_char && b_char ? d * 0.5 : d;
}

inline double pair_dissimilarity(const Segment& a, const Segment& b, const AnalysisConfig& cfg) {
  return pair_dissimilarity(a.bytes, a.is_char, b.bytes, b.is_char, cfg);
}

struct SegmentValue {
  Bytes bytes;
  bool is_char = false;

  friend auto operator<=>(const SegmentValue&, const SegmentValue&) = default;
};

/// Symmetric dissimilarity matrix over the distinct segment values of a
/// trace. Stored as the condensed upper triangle.
class SegmentDissimilarityMatrix {
 public:
  SegmentDissimilarityMatrix() = default;

  explicit SegmentDissimilarityMatrix(std::vector<SegmentValue> values)
      : values_(std::move(values)), condensed_(pair_count(values_.size()), 0.0) {
    for (std::size_t i = 0; i < values_.size(); ++i) index_.emplace(values_[i], i);
    require(index_.size() == values_.size(), "segment values must be distinct");
  }

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<SegmentValue>& values() const noexcept { return values_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return condensed_[slot(i, j)];
  }
  void set(std::size_t i, std::size_t j, double d) {
    require(i != j, "diagonal is fixed at zero");
    condensed_[slot(i, j)] = d;
  }

  std::size_t index_of(const Segment& seg) const {
    auto it = index_.find(SegmentValue{seg.bytes, seg.is_char});
    if (it == index_.end())
      throw Error(ErrorKind::Contract, "segment value " + to_hex(seg.bytes) + " not in matrix");
    return it->second;
  }

  double dissimilarity(const Segment& a, const Segment& b) const {
    return (*this)(index_of(a), index_of(b));
  }

  /// Per message, the matrix index of each segment.
  std::vector<std::vector<std::uint32_t>> index_segmentation(const Segmentation& segmentation) const {
    std::vector<std::vector<std::uint32_t>> out;
    out.reserve(segmentation.size());
    for (const auto& segments : segmentation) {
      std::vector<std::uint32_t> ids;
      ids.reserve(segments.size());
      for (const auto& seg : segments) ids.push_back(static_cast<std::uint32_t>(index_of(seg)));
      out.push_back(std::move(ids));
    }
    return out;
  }

 private:
  static std::size_t pair_count(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }
  std::size_t slot(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    // row i holds columns i+1..n-1
    return i * values_.size() - i * (i + 1) / 2 + (j - i - 1);
  }

  std::vector<SegmentValue> values_;
  std::vector<double> condensed_;
  std::map<SegmentValue, std::size_t> index_;
};

/// Distinct (bytes, is_char) values of a segmentation in sorted order.
inline std::vector<SegmentValue> distinct_segment_values(const Segmentation& segmentation) {
  std::vector<SegmentValue> values;
  for (const auto& segments : segmentation)
    for (const auto& seg : segments) values.push_back({seg.bytes, seg.is_char});
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

/// Runs body(row) for rows 0..n-1 over `workers` threads (row-interleaved).
template <typename Body>
void parallel_rows(std::size_t n, unsigned workers, Body&& body) {
  workers = std::max(1u, workers);
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
}

inline SegmentDissimilarityMatrix build_segment_matrix(const Segmentation& segmentation,
                                                       const AnalysisConfig& cfg,
                                                       unsigned workers = 1) {
  SegmentDissimilarityMatrix matrix(distinct_segment_values(segmentation));
  const auto& values = matrix.values();
  parallel_rows(values.size(), workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < values.size(); ++j)
      matrix.set(i, j, pair_dissimilarity(values[i].bytes, values[i].is_char, values[j].bytes,
                                          values[j].is_char, cfg));
  });
  return matrix;
}

namespace detail {
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_real(const std::string& text) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Format, "not a number: \"" + text + "\"");
  }
}
}  // namespace detail

/// CSV dump: header row of hex values, a row of char flags, then one row per
/// value. Reals use round-trip precision.
inline void write_segment_matrix_csv(std::ostream& out, const SegmentDissimilarityMatrix& m) {
  out << "segment";
  for (const auto& v : m.values()) out << ',' << to_hex(v.bytes);
  out << "\nis_char";
  for (const auto& v : m.values()) out << ',' << (v.is_char ? 1 : 0);
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << to_hex(m.values()[i].bytes);
    for (std::size_t j = 0; j < m.size(); ++j) out << ',' << detail::format_real(m(i, j));
    out << '\n';
  }
}

inline SegmentDissimilarityMatrix read_segment_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, "segment matrix CSV is empty");
  auto header = detail::split_csv_line(line);
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, "segment matrix CSV lacks is_char row");
  auto flags = detail::split_csv_line(line);
  if (header.empty() || flags.size() != header.size())
    throw Error(ErrorKind::Format, "segment matrix CSV header malformed");
  std::vector<SegmentValue> values;
  for (std::size_t c = 1; c < header.size(); ++c)
    values.push_back({from_hex(header[c]), flags[c] == "1"});
  SegmentDissimilarityMatrix m(std::move(values));
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::getline(in, line)) throw Error(ErrorKind::Format, "segment matrix CSV truncated");
    auto cells = detail::split_csv_line(line);
    if (cells.size() != m.size() + 1) throw Error(ErrorKind::Format, "segment matrix row width");
    for (std::size_t j = i + 1; j < m.size(); ++j) m.set(i, j, detail::parse_real(cells[j + 1]));
  }
  return m;
}

}  // namespace nemetyl
