#pragma once

// DBSCAN over a precomputed message dissimilarity matrix and automatic
// epsilon selection from the k-nearest-neighbor distance profile.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nemetyl/align.hpp"

namespace nemetyl {

constexpr int kNoise = -1;

struct ClusterSet {
  std::vector<int> labels;  // cluster index >= 0 or kNoise, per message id
  double epsilon_used = 0.0;
  std::optional<int> k_chosen;  // empty when epsilon was given manually
  std::size_t noise_count = 0;

  int cluster_count() const {
    int top = -1;
    for (int l : labels) top = std::max(top, l);
    return top + 1;
  }

  /// Message ids per cluster label, ascending.
  std::vector<std::vector<MessageId>> clusters() const {
    std::vector<std::vector<MessageId>> out(static_cast<std::size_t>(cluster_count()));
    for (std::size_t id = 0; id < labels.size(); ++id)
      if (labels[id] != kNoise) out[static_cast<std::size_t>(labels[id])].push_back(id);
    return out;
  }
};

struct KDistanceProfile {
  int k = 1;
  std::vector<double> values;  // ascending
};

/// Per message, the dissimilarity to its k-th nearest other message; sorted
/// ascending.
inline KDistanceProfile knn_profile(const MessageDissimilarityMatrix& matrix, int k) {
  const std::size_t n = matrix.size();
  if (k < 1 || static_cast<std::size_t>(k) > n - 1)
    throw Error(ErrorKind::Contract, "k must lie in [1, n-1], got " + std::to_string(k));
  KDistanceProfile profile{k, {}};
  profile.values.reserve(n);
  std::vector<double> others;
  for (std::size_t i = 0; i < n; ++i) {
    others.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(matrix(i, j));
    std::nth_element(others.begin(), others.begin() + (k - 1), others.end());
    profile.values.push_back(others[static_cast<std::size_t>(k - 1)]);
  }
  std::sort(profile.values.begin(), profile.values.end());
  return profile;
}

/// Convolution with a normalized Gaussian kernel (radius ceil(4 sigma)),
/// mirroring the signal at its edges (half-sample symmetric: d c b a | a b c d).
inline std::vector<double> gaussian_smooth(std::span<const double> values, double sigma) {
  require(sigma > 0.0 && !values.empty(), "gaussian_smooth needs sigma > 0 and input");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t x = -radius; x <= radius; ++x) {
    const double w = std::exp(-0.5 * static_cast<double>(x * x) / (sigma * sigma));
    kernel[static_cast<std::size_t>(x + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const auto n = static_cast<std::ptrdiff_t>(values.size());
  auto reflect = [n](std::ptrdiff_t i) {
    const std::ptrdiff_t period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };
  std::vector<double> out(values.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t x = -radius; x <= radius; ++x)
      acc += kernel[static_cast<std::size_t>(x + radius)] * values[static_cast<std::size_t>(reflect(i + x))];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

struct EpsilonChoice {
  double epsilon;     // already scaled by epsilon_factor
  int k;
  std::size_t index;  // position in the ascending k-distance profile
};

/// Picks epsilon at the point of strongest relative curvature of the smoothed
/// k-distance profiles, k = 1 .. max(1, floor(n/10)).
///
/// sigma = ln(n). For every k the ascending profile f is smoothed, its second
/// forward difference is smoothed as well, and index m scores
/// G(f'')(m) / G(f)(m). Only indices whose whole difference stencil
/// m, m+1, m+2 lies strictly between 2 sigma and n - 2 sigma are considered.
/// The winner is the maximal score (ties: smaller k, then smaller m) and
/// epsilon is the unsmoothed f_k(m) times epsilon_factor.
inline EpsilonChoice autoconfigure_epsilon(const MessageDissimilarityMatrix& matrix,
                                           const AnalysisConfig& cfg) {
  const std::size_t n = matrix.size();
  if (n < 4)
    throw Error(ErrorKind::Config, "trace of " + std::to_string(n) +
                                       " messages is too small to configure epsilon; set it manually");
  const double sigma = std::log(static_cast<double>(n));
  const double lo = 2.0 * sigma, hi = static_cast<double>(n) - 2.0 * sigma;
  std::size_t first = static_cast<std::size_t>(std::floor(lo)) + 1;
  bool window = false;
  for (std::size_t m = first; static_cast<double>(m + 2) < hi && m + 2 < n; ++m) window = true;
  if (!window)
    throw Error(ErrorKind::Config,
                "trace of " + std::to_string(n) +
                    " messages is too small to configure epsilon automatically; set it manually");

  const int k_max = std::max(1, static_cast<int>(std::floor(0.1 * static_cast<double>(n))));
  std::optional<EpsilonChoice> best;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> curvature;
  for (int k = 1; k <= std::min<int>(k_max, static_cast<int>(n) - 1); ++k) {
    const auto profile = knn_profile(matrix, k);
    const auto& f = profile.values;
    const auto smooth = gaussian_smooth(f, sigma);
    curvature.assign(n - 2, 0.0);
    for (std::size_t x = 0; x + 2 < n; ++x) curvature[x] = (f[x + 2] - f[x + 1]) - (f[x + 1] - f[x]);
    const auto smooth_curv = gaussian_smooth(curvature, sigma);
    for (std::size_t m = first; static_cast<double>(m + 2) < hi && m + 2 < n; ++m) {
      if (!(smooth[m] > 0.0)) continue;
      const double score = smooth_curv[m] / smooth[m];
      if (score > best_score) {
        best_score = score;
        best = EpsilonChoice{f[m] * cfg.epsilon_factor, k, m};
      }
    }
  }
  if (!best)
    throw Error(ErrorKind::Degenerate,
                "k-distance profiles show no upward curvature; set epsilon manually");
  return *best;
}

/// DBSCAN over precomputed distances. A point is core when at least
/// min_samples points (itself included) lie within epsilon. Points are
/// visited in ascending id order, so labels are deterministic.
inline ClusterSet dbscan(const MessageDissimilarityMatrix& matrix, double epsilon, int min_samples) {
  require(epsilon >= 0.0 && min_samples >= 2, "dbscan needs epsilon >= 0 and min_samples >= 2");
  const std::size_t n = matrix.size();
  constexpr int unvisited = -2;
  ClusterSet result;
  result.epsilon_used = epsilon;
  result.labels.assign(n, unvisited);

  auto neighbors = [&](std::size_t p) {
    std::vector<std::size_t> out;
    const auto row = matrix.row(p);
    for (std::size_t q = 0; q < n; ++q)
      if (row[q] <= epsilon) out.push_back(q);
    return out;
  };

  int next_label = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (result.labels[p] != unvisited) continue;
    auto seeds = neighbors(p);
    if (seeds.size() < static_cast<std::size_t>(min_samples)) {
      result.labels[p] = kNoise;
      continue;
    }
    const int label = next_label++;
    result.labels[p] = label;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (result.labels[q] == kNoise) result.labels[q] = label;
      if (result.labels[q] != unvisited) continue;
      result.labels[q] = label;
      auto reach = neighbors(q);
      if (reach.size() >= static_cast<std::size_t>(min_samples))
        queue.insert(queue.end(), reach.begin(), reach.end());
    }
  }
  result.noise_count =
      static_cast<std::size_t>(std::count(result.labels.begin(), result.labels.end(), kNoise));
  return result;
}

/// Auto-configured epsilon followed by DBSCAN.
inline ClusterSet cluster_messages(const MessageDissimilarityMatrix& matrix, const AnalysisConfig& cfg,
                                   std::optional<double> manual_epsilon = std::nullopt) {
  if (manual_epsilon) return dbscan(matrix, *manual_epsilon, cfg.min_samples);
  const auto choice = autoconfigure_epsilon(matrix, cfg);
  auto result = dbscan(matrix, choice.epsilon, cfg.min_samples);
  result.k_chosen = choice.k;
  return result;
}

}  // namespace nemetyl
