#pragma once

// Needleman-Wunsch over segment sequences with continuous substitution
// scores: linear-space scoring, Hirschberg alignment, message
// dissimilarities and progressive per-cluster alignment.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nemetyl/dissim.hpp"
#include "nemetyl/segmenter.hpp"

namespace nemetyl {

/// One column of a pairwise alignment.
enum class Step : std::uint8_t {
  Match,        // consume one element of each sequence
  GapInSecond,  // consume from the first sequence only
  GapInFirst,   // consume from the second sequence only
};

namespace detail {

// One DP cell; the three candidates are always evaluated in this order so
// that every DP variant produces bit-identical values.
inline double nw_cell(double diag, double up, double left, double sim, double gap) {
  double best = diag + sim;
  best = std::max(best, up + gap);
  best = std::max(best, left + gap);
  return best;
}

// Last DP row of first[a0,a1) against second[b0,b1); row has b1-b0+1 entries.
// Border cells are accumulated one gap at a time, like a path would be.
template <typename Sim>
std::vector<double> nw_last_row(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1,
                                const Sim& sim, double gap) {
  const std::size_t m = b1 - b0;
  std::vector<double> row(m + 1, 0.0);
  for (std::size_t j = 1; j <= m; ++j) row[j] = row[j - 1] + gap;
  for (std::size_t i = a0; i < a1; ++i) {
    double diag = row[0];
    row[0] += gap;
    for (std::size_t j = 1; j <= m; ++j) {
      const double up = row[j];
      row[j] = nw_cell(diag, up, row[j - 1], sim(i, b0 + j - 1), gap);
      diag = up;
    }
  }
  return row;
}

// Last DP row of the reversed problem: entry j scores first[a0,a1) against
// second[b0+j, b1).
template <typename Sim>
std::vector<double> nw_last_row_reversed(std::size_t a0, std::size_t a1, std::size_t b0,
                                         std::size_t b1, const Sim& sim, double gap) {
  const std::size_t m = b1 - b0;
  std::vector<double> row(m + 1, 0.0);  // row[j] refers to suffix starting at b1 - j
  for (std::size_t j = 1; j <= m; ++j) row[j] = row[j - 1] + gap;
  for (std::size_t i = a1; i-- > a0;) {
    double diag = row[0];
    row[0] += gap;
    for (std::size_t j = 1; j <= m; ++j) {
      const double up = row[j];
      row[j] = nw_cell(diag, up, row[j - 1], sim(i, b1 - j), gap);
      diag = up;
    }
  }
  std::reverse(row.begin(), row.end());
  return row;
}

// DP with traceback on a sub-problem, keeping two score rows and one
// direction byte per cell; appends steps to `out`. A step's score is added
// in path order, so rescoring the steps reproduces the DP value exactly.
template <typename Sim>
void nw_traceback(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1, const Sim& sim,
                  double gap, std::vector<Step>& out) {
  const std::size_t n = a1 - a0, m = b1 - b0;
  std::vector<Step> dir((n + 1) * (m + 1), Step::Match);
  auto at = [&](std::size_t i, std::size_t j) -> Step& { return dir[i * (m + 1) + j]; };
  std::vector<double> row(m + 1, 0.0);
  for (std::size_t j = 1; j <= m; ++j) row[j] = row[j - 1] + gap, at(0, j) = Step::GapInFirst;
  for (std::size_t i = 1; i <= n; ++i) {
    double diag = row[0];
    row[0] += gap;
    at(i, 0) = Step::GapInSecond;
    for (std::size_t j = 1; j <= m; ++j) {
      const double up = row[j];
      // same comparisons as nw_cell; ties keep the earlier candidate
      double best = diag + sim(a0 + i - 1, b0 + j - 1);
      Step step = Step::Match;
      if (up + gap > best) best = up + gap, step = Step::GapInSecond;
      if (row[j - 1] + gap > best) best = row[j - 1] + gap, step = Step::GapInFirst;
      row[j] = best;
      at(i, j) = step;
      diag = up;
    }
  }
  std::vector<Step> rev;
  rev.reserve(n + m);
  for (std::size_t i = n, j = m; i > 0 || j > 0;) {
    const Step s = at(i, j);
    rev.push_back(s);
    if (s != Step::GapInFirst) --i;
    if (s != Step::GapInSecond) --j;
  }
  out.insert(out.end(), rev.rbegin(), rev.rend());
}

template <typename Sim>
void hirschberg(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1, const Sim& sim,
                double gap, std::size_t dp_cell_limit, std::vector<Step>& out) {
  const std::size_t n = a1 - a0, m = b1 - b0;
  if (n == 0) {
    out.insert(out.end(), m, Step::GapInFirst);
    return;
  }
  if (m == 0) {
    out.insert(out.end(), n, Step::GapInSecond);
    return;
  }
  if (n == 1 || m == 1 || (n + 1) * (m + 1) <= dp_cell_limit) {
    nw_traceback(a0, a1, b0, b1, sim, gap, out);
    return;
  }
  const std::size_t mid = a0 + n / 2;
  const auto forward = nw_last_row(a0, mid, b0, b1, sim, gap);
  const auto backward = nw_last_row_reversed(mid, a1, b0, b1, sim, gap);
  std::size_t split = 0;
  double best = forward[0] + backward[0];
  for (std::size_t j = 1; j <= m; ++j) {
    const double total = forward[j] + backward[j];
    if (total > best) best = total, split = j;
  }
  hirschberg(a0, mid, b0, b0 + split, sim, gap, dp_cell_limit, out);
  hirschberg(mid, a1, b0 + split, b1, sim, gap, dp_cell_limit, out);
}

}  // namespace detail

/// Global alignment score of sequences of length n and m, where sim(i, j)
/// scores element i of the first against element j of the second. Memory
/// is linear in min(n, m).
template <typename Sim>
double nw_score(std::size_t n, std::size_t m, const Sim& sim, double gap) {
  require(n > 0 && m > 0, "alignment requires non-empty sequences");
  if (m <= n) return detail::nw_last_row(0, n, 0, m, sim, gap).back();
  auto transposed = [&](std::size_t i, std::size_t j) { return sim(j, i); };
  return detail::nw_last_row(0, m, 0, n, transposed, gap).back();
}

/// Direction bytes allowed for a direct traceback (4 MiB) before the
/// alignment falls back to Hirschberg's linear-space recursion.
inline constexpr std::size_t kDirectTracebackCells = std::size_t{1} << 22;

/// Optimal global alignment as a step sequence. Problems of at most
/// `dp_cell_limit` cells get a direct traceback preferring Match, then
/// GapInSecond, then GapInFirst; its rescored steps equal nw_score exactly.
/// Larger problems are split Hirschberg style, which keeps the path optimal
/// but may change the summed score in the last bits.
template <typename Sim>
std::vector<Step> nw_align_steps(std::size_t n, std::size_t m, const Sim& sim, double gap,
                                 std::size_t dp_cell_limit = kDirectTracebackCells) {
  require(n > 0 && m > 0, "alignment requires non-empty sequences");
  std::vector<Step> steps;
  steps.reserve(n + m);
  detail::hirschberg(0, n, 0, m, sim, gap, dp_cell_limit, steps);
  return steps;
}

/// Sum of the step scores in alignment order.
template <typename Sim>
double score_steps(std::span<const Step> steps, const Sim& sim, double gap) {
  double total = 0.0;
  std::size_t i = 0, j = 0;
  for (Step s : steps) {
    switch (s) {
      case Step::Match: total += sim(i++, j++); break;
      case Step::GapInSecond: total += gap, ++i; break;
      case Step::GapInFirst: total += gap, ++j; break;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Message level

using SegmentIds = std::vector<std::uint32_t>;

/// Similarity 1 - d between two segment-matrix entries.
inline auto segment_similarity(const SegmentDissimilarityMatrix& matrix, std::span<const std::uint32_t> a,
                               std::span<const std::uint32_t> b) {
  return [&matrix, a, b](std::size_t i, std::size_t j) { return 1.0 - matrix(a[i], b[j]); };
}

inline double nw_score(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b,
                       const SegmentDissimilarityMatrix& matrix, const AnalysisConfig& cfg) {
  return nw_score(a.size(), b.size(), segment_similarity(matrix, a, b), cfg.gap_penalty);
}

inline double nw_score(const std::vector<Segment>& a, const std::vector<Segment>& b,
                       const SegmentDissimilarityMatrix& matrix, const AnalysisConfig& cfg) {
  const auto ids = matrix.index_segmentation({a, b});
  return nw_score(ids[0], ids[1], matrix, cfg);
}

/// Cell of an alignment row: a segment, or nullopt for GAP.
using Cell = std::optional<Segment>;

struct AlignmentRow {
  MessageId message = 0;
  std::vector<Cell> cells;

  std::vector<Segment> degapped() const {
    std::vector<Segment> out;
    for (const auto& c : cells)
      if (c) out.push_back(*c);
    return out;
  }
};

struct AlignedPair {
  std::vector<Cell> first;
  std::vector<Cell> second;
  double score = 0.0;
};

inline AlignedPair nw_align(const std::vector<Segment>& a, const std::vector<Segment>& b,
                            const SegmentDissimilarityMatrix& matrix, const AnalysisConfig& cfg) {
  const auto ids = matrix.index_segmentation({a, b});
  const auto sim = segment_similarity(matrix, ids[0], ids[1]);
  const auto steps = nw_align_steps(a.size(), b.size(), sim, cfg.gap_penalty);
  AlignedPair out;
  out.score = score_steps(std::span<const Step>(steps), sim, cfg.gap_penalty);
  std::size_t i = 0, j = 0;
  for (Step s : steps) {
    out.first.push_back(s == Step::GapInFirst ? Cell{} : Cell{a[i++]});
    out.second.push_back(s == Step::GapInSecond ? Cell{} : Cell{b[j++]});
  }
  return out;
}

/// Normalizes an alignment score into a dissimilarity in [0, 1], given the
/// shorter segment count of the two messages.
inline double score_to_dissimilarity(double score, std::size_t min_len, const AnalysisConfig& cfg) {
  const double n = static_cast<double>(min_len);
  const double lo = n * std::min({cfg.gap_penalty, cfg.match_bound, cfg.mismatch_bound});
  const double hi = n * std::max({cfg.gap_penalty, cfg.match_bound, cfg.mismatch_bound});
  const double d = 1.0 - (score - lo) / (hi - lo);
  return std::clamp(d, 0.0, 1.0);
}

inline double message_dissimilarity(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b,
                                    const SegmentDissimilarityMatrix& matrix, const AnalysisConfig& cfg) {
  return score_to_dissimilarity(nw_score(a, b, matrix, cfg), std::min(a.size(), b.size()), cfg);
}

inline double message_dissimilarity(const std::vector<Segment>& a, const std::vector<Segment>& b,
                                    const SegmentDissimilarityMatrix& matrix, const AnalysisConfig& cfg) {
  const auto ids = matrix.index_segmentation({a, b});
  return message_dissimilarity(ids[0], ids[1], matrix, cfg);
}

/// Dense symmetric n x n matrix of message dissimilarities.
class MessageDissimilarityMatrix {
 public:
  MessageDissimilarityMatrix() = default;
  explicit MessageDissimilarityMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double d) {
    require(i != j || d == 0.0, "message matrix diagonal must be zero");
    values_[i * n_ + j] = d;
    values_[j * n_ + i] = d;
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * n_, n_);
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

inline MessageDissimilarityMatrix build_message_matrix(const Segmentation& segmentation,
                                                       const SegmentDissimilarityMatrix& seg_matrix,
                                                       const AnalysisConfig& cfg, unsigned workers = 1) {
  require(segmentation.size() >= 2, "message matrix needs at least two messages");
  const auto ids = seg_matrix.index_segmentation(segmentation);
  MessageDissimilarityMatrix matrix(segmentation.size());
  parallel_rows(ids.size(), workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      matrix.set(i, j, message_dissimilarity(ids[i], ids[j], seg_matrix, cfg));
  });
  return matrix;
}

/// Member with the smallest summed dissimilarity to the other members
/// (lowest id on ties).
inline MessageId medoid(std::span<const MessageId> cluster, const MessageDissimilarityMatrix& matrix) {
  require(!cluster.empty(), "medoid of an empty cluster");
  std::vector<MessageId> members(cluster.begin(), cluster.end());
  std::sort(members.begin(), members.end());
  MessageId best = members.front();
  double best_sum = std::numeric_limits<double>::infinity();
  for (MessageId m : members) {
    double sum = 0.0;
    for (MessageId o : members) sum += matrix(m, o);
    if (sum < best_sum) best_sum = sum, best = m;
  }
  return best;
}

struct AlignmentTable {
  int cluster = 0;
  std::vector<AlignmentRow> rows;

  std::size_t columns() const noexcept { return rows.empty() ? 0 : rows.front().cells.size(); }
  std::vector<MessageId> members() const {
    std::vector<MessageId> out;
    for (const auto& r : rows) out.push_back(r.message);
    return out;
  }
};

/// Aligns a cluster progressively: the medoid first, then the remaining
/// members in ascending dissimilarity to it. Each message is aligned to the
/// medoid's current gapped row (a GAP cell scores mismatch_bound against any
/// segment); gaps opened in that row are propagated to all aligned rows.
inline AlignmentTable progressive_align_cluster(std::span<const MessageId> cluster,
                                                const Segmentation& segmentation,
                                                const SegmentDissimilarityMatrix& seg_matrix,
                                                const MessageDissimilarityMatrix& matrix,
                                                const AnalysisConfig& cfg, int cluster_label = 0) {
  require(!cluster.empty(), "cannot align an empty cluster");
  const MessageId center = medoid(cluster, matrix);
  std::vector<MessageId> order(cluster.begin(), cluster.end());
  std::sort(order.begin(), order.end());
  order.erase(std::remove(order.begin(), order.end(), center), order.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](MessageId a, MessageId b) { return matrix(center, a) < matrix(center, b); });

  AlignmentTable table{cluster_label, {}};
  {
    AlignmentRow first{center, {}};
    for (const auto& seg : segmentation.at(center)) first.cells.emplace_back(seg);
    table.rows.push_back(std::move(first));
  }
  std::vector<std::uint32_t> profile_ids;
  for (MessageId next : order) {
    const auto& profile = table.rows.front().cells;
    profile_ids.assign(profile.size(), 0);
    for (std::size_t c = 0; c < profile.size(); ++c)
      if (profile[c]) profile_ids[c] = static_cast<std::uint32_t>(seg_matrix.index_of(*profile[c]));
    const auto& segs = segmentation.at(next);
    SegmentIds next_ids;
    for (const auto& s : segs) next_ids.push_back(static_cast<std::uint32_t>(seg_matrix.index_of(s)));

    auto sim = [&](std::size_t i, std::size_t j) {
      if (!profile[i]) return cfg.mismatch_bound;
      return 1.0 - seg_matrix(profile_ids[i], next_ids[j]);
    };
    const auto steps = nw_align_steps(profile.size(), segs.size(), sim, cfg.gap_penalty);

    std::vector<AlignmentRow> rows;
    rows.reserve(table.rows.size());
    for (const auto& r : table.rows) rows.push_back(AlignmentRow{r.message, {}});
    AlignmentRow added{next, {}};
    std::size_t i = 0, j = 0;
    for (Step s : steps) {
      switch (s) {
        case Step::Match:
          for (std::size_t r = 0; r < rows.size(); ++r) rows[r].cells.push_back(table.rows[r].cells[i]);
          added.cells.emplace_back(segs[j]);
          ++i, ++j;
          break;
        case Step::GapInSecond:
          for (std::size_t r = 0; r < rows.size(); ++r) rows[r].cells.push_back(table.rows[r].cells[i]);
          added.cells.emplace_back();
          ++i;
          break;
        case Step::GapInFirst:
          for (auto& row : rows) row.cells.emplace_back();
          added.cells.emplace_back(segs[j]);
          ++j;
          break;
      }
    }
    rows.push_back(std::move(added));
    table.rows = std::move(rows);
  }
  return table;
}

/// Removes columns in which every row holds GAP.
inline AlignmentTable drop_gap_columns(AlignmentTable table) {
  const std::size_t cols = table.columns();
  std::vector<bool> keep(cols, false);
  for (const auto& r : table.rows)
    for (std::size_t c = 0; c < cols; ++c)
      if (r.cells[c]) keep[c] = true;
  for (auto& r : table.rows) {
    std::vector<Cell> cells;
    for (std::size_t c = 0; c < cols; ++c)
      if (keep[c]) cells.push_back(std::move(r.cells[c]));
    r.cells = std::move(cells);
  }
  return table;
}

/// CSV dump: message id followed by one hex value or GAP per column.
inline void write_alignment_csv(std::ostream& out, const AlignmentTable& table) {
  for (const auto& row : table.rows) {
    out << row.message;
    for (const auto& c : row.cells) out << ',' << (c ? to_hex(c->bytes) : std::string("GAP"));
    out << '\n';
  }
}

/// Parses an alignment dump, re-attaching each non-GAP cell to the message's
/// segments in order.
inline AlignmentTable read_alignment_csv(std::istream& in, const Segmentation& segmentation,
                                         int cluster_label) {
  AlignmentTable table{cluster_label, {}};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    AlignmentRow row;
    try {
      row.message = std::stoul(cells.at(0));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Format, "alignment CSV: bad message id \"" + cells.at(0) + "\"");
    }
    if (row.message >= segmentation.size())
      throw Error(ErrorKind::Format, "alignment CSV: unknown message " + cells[0]);
    const auto& segs = segmentation[row.message];
    std::size_t next = 0;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (cells[c] == "GAP") {
        row.cells.emplace_back();
        continue;
      }
      if (next >= segs.size() || to_hex(segs[next].bytes) != cells[c])
        throw Error(ErrorKind::Format,
                    "alignment CSV: row of message " + cells[0] + " does not match its segments");
      row.cells.emplace_back(segs[next++]);
    }
    if (next != segs.size())
      throw Error(ErrorKind::Format, "alignment CSV: row of message " + cells[0] + " is incomplete");
    if (!table.rows.empty() && row.cells.size() != table.columns())
      throw Error(ErrorKind::Format, "alignment CSV: ragged rows");
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace nemetyl
