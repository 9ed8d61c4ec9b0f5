#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nemetyl/dissim.hpp"
#include "oracles.hpp"

using namespace nemetyl;
using nemetyl::testing::canberra_oracle;
using nemetyl::testing::segments_of;

namespace {

FeatureVector fv(const std::string& hex) {
  const Bytes b = from_hex(hex);
  return FeatureVector(ByteView(b));
}

double mixed(const std::string& a, const std::string& b, double f = 0.33) {
  return mixed_dissimilarity(ByteView(from_hex(a)), ByteView(from_hex(b)), f);
}

}  // namespace

TEST(Canberra, SingleComponentExamples) {
  EXPECT_DOUBLE_EQ(canberra(fv("08"), fv("07")), 1.0 / 15.0);
  EXPECT_DOUBLE_EQ(canberra(fv("00"), fv("00")), 0.0);
}

TEST(Canberra, TwoComponentsHandEvaluated) {
  EXPECT_NEAR(canberra(fv("5706"), fv("2700")), 48.0 / 126.0 + 1.0, 1e-12);
  EXPECT_NEAR(canberra(fv("5706"), fv("2700")), 1.381, 0.001);
}

TEST(Canberra, DimensionMismatchIsContractViolation) {
  EXPECT_THROW(canberra(fv("0102"), fv("01")), Error);
}

TEST(SlidingMinCanberra, TableExamples) {
  auto r1 = sliding_min_canberra(fv("00"), fv("0008"));
  EXPECT_NEAR(r1.value, 0.000, 0.0005);
  EXPECT_EQ(r1.offset, 0u);

  auto r2 = sliding_min_canberra(fv("07"), fv("0208"));
  EXPECT_NEAR(r2.value, 0.067, 0.0005);
  EXPECT_EQ(r2.offset, 1u);

  auto r3 = sliding_min_canberra(fv("2700"), fv("5706906e"));
  EXPECT_NEAR(r3.value, 0.690, 0.0005);
  EXPECT_EQ(r3.offset, 0u);
}

TEST(SlidingMinCanberra, TiesResolveToSmallestOffset) {
  auto r = sliding_min_canberra(fv("05"), fv("050505"));
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.offset, 0u);
}

TEST(SlidingMinCanberra, NeverAboveAnyOffsetProperty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    Bytes a = nemetyl::testing::random_segment_bytes(rng, 1, 16);
    Bytes b = nemetyl::testing::random_segment_bytes(rng, 1, 16);
    if (a.size() > b.size()) std::swap(a, b);
    const auto got = sliding_min_canberra(ByteView(a), ByteView(b));
    for (std::size_t o = 0; o + a.size() <= b.size(); ++o) {
      const Bytes window(b.begin() + o, b.begin() + o + a.size());
      EXPECT_LE(got.value, canberra_oracle(window, a) / static_cast<double>(a.size()) + 1e-15);
    }
    const auto want = nemetyl::testing::sliding_min_oracle(a, b);
    EXPECT_NEAR(got.value, want.value, 1e-12);
    EXPECT_EQ(got.offset, want.offset);
  }
}

// The length penalty F is not given numerically; recover it from the
// published table before relying on the 0.33 default.
TEST(MixedDissimilarity, PenaltyDerivedFromTableRows) {
  // example 1: x = 0, |s|/|t| = 1/2 -> d = 0.625 - 0.5 F = 0.460
  const double f_from_row1 = (0.625 - 0.460) / 0.5;
  EXPECT_NEAR(f_from_row1, 0.33, 1e-9);

  double best_f = -1.0, best_err = 1e9;
  for (int step = 0; step < 1000; ++step) {
    const double f = step / 1000.0;
    const double err = std::max({std::fabs(mixed("00", "0008", f) - 0.460),
                                 std::fabs(mixed("07", "0208", f) - 0.496),
                                 std::fabs(mixed("2700", "5706906e", f) - 0.814)});
    if (err < best_err) best_err = err, best_f = f;
  }
  EXPECT_NEAR(best_f, 0.33, 0.002);
  EXPECT_LT(best_err, 0.001);
}

TEST(MixedDissimilarity, TableExamples) {
  EXPECT_NEAR(mixed("00", "0008"), 0.460, 0.001);
  EXPECT_NEAR(mixed("07", "0208"), 0.496, 0.001);
  EXPECT_NEAR(mixed("2700", "5706906e"), 0.814, 0.001);
  EXPECT_DOUBLE_EQ(mixed("0208", "0008"), 0.5);
}

TEST(MixedDissimilarity, ArgumentOrderIrrelevant) {
  EXPECT_EQ(mixed("0008", "00"), mixed("00", "0008"));
  EXPECT_EQ(mixed("5706906e", "2700"), mixed("2700", "5706906e"));
}

TEST(MixedDissimilarity, ReachesOneWhenNoWindowMatches) {
  // every window differs in each component from a non-zero value to zero
  EXPECT_DOUBLE_EQ(mixed("01", "0000"), 1.0);
  EXPECT_DOUBLE_EQ(mixed("0101", "000000"), 1.0);
}

TEST(MixedDissimilarity, ZeroPenaltyEqualLengthIsNormalizedCanberra) {
  EXPECT_DOUBLE_EQ(mixed("5706", "2700", 0.0), (48.0 / 126.0 + 1.0) / 2.0);
}

TEST(MixedDissimilarity, ContinuousInPenalty) {
  const double a = mixed("07", "02081234", 0.33);
  const double b = mixed("07", "02081234", 0.33 + 1e-9);
  EXPECT_NEAR(a, b, 1e-8);
}

TEST(MixedDissimilarity, ZeroOnlyForIdenticalEqualLength) {
  EXPECT_EQ(mixed("abcd", "abcd"), 0.0);
  EXPECT_GT(mixed("ab", "abcd"), 0.0);
}

TEST(MixedDissimilarity, SymmetryAndRangeProperty) {
  std::mt19937_64 rng(11);
  AnalysisConfig cfg;
  for (int trial = 0; trial < 10000; ++trial) {
    Segment a{0, 0, nemetyl::testing::random_segment_bytes(rng, 1, 64), trial % 3 == 0};
    Segment b{1, 0, nemetyl::testing::random_segment_bytes(rng, 1, 64), trial % 5 == 0};
    const double ab = pair_dissimilarity(a, b, cfg);
    const double ba = pair_dissimilarity(b, a, cfg);
    ASSERT_EQ(ab, ba);
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 1.0);
  }
}

TEST(PairDissimilarity, CharPairsAreHalved) {
  AnalysisConfig cfg;
  Segment a{0, 0, from_hex("666f6f626172"), true};
  Segment b{1, 0, from_hex("62617a717578"), true};
  Segment b_bin = b;
  b_bin.is_char = false;
  const double raw = mixed_dissimilarity(a, b, cfg);
  EXPECT_DOUBLE_EQ(pair_dissimilarity(a, b, cfg), raw * 0.5);
  EXPECT_DOUBLE_EQ(pair_dissimilarity(a, b_bin, cfg), raw);
  EXPECT_EQ(pair_dissimilarity(a, a, cfg), 0.0);
}

TEST(SegmentMatrix, ReproducesWorkedSimilarityMatrix) {
  AnalysisConfig cfg;
  Segmentation segmentation{segments_of(nemetyl::testing::example_m0(), 0),
                            segments_of(nemetyl::testing::example_m1(), 1)};
  const auto m = build_segment_matrix(segmentation, cfg);
  EXPECT_EQ(m.size(), 5u);
  auto sim = [&](const std::string& a, const std::string& b) {
    return 1.0 - m.dissimilarity(Segment{0, 0, from_hex(a), false}, Segment{0, 0, from_hex(b), false});
  };
  const std::vector<std::tuple<std::string, std::string, double>> printed{
      {"07", "2700", 0.16}, {"07", "2317", 0.25}, {"07", "0208", 0.50},   {"07", "0008", 0.50},
      {"2700", "2317", 0.47}, {"2700", "0208", 0.05}, {"2700", "0008", 0.00}, {"2317", "0208", 0.31},
      {"2317", "0008", 0.26}, {"0208", "0008", 0.50}};
  for (const auto& [a, b, s] : printed) {
    EXPECT_NEAR(sim(a, b), s, 0.01) << a << " vs " << b;
    EXPECT_EQ(sim(a, b), sim(b, a));
  }
  EXPECT_EQ(sim("07", "07"), 1.0);
}

TEST(SegmentMatrix, SingleDistinctValue) {
  Segmentation segmentation{segments_of({"aa", "aa"}, 0)};
  const auto m = build_segment_matrix(segmentation, AnalysisConfig{});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m(0, 0), 0.0);
}

TEST(SegmentMatrix, MatchesBruteForceAndIsWorkerIndependent) {
  std::mt19937_64 rng(3);
  AnalysisConfig cfg;
  Segmentation segmentation;
  for (MessageId id = 0; id < 20; ++id) {
    std::vector<Segment> segs;
    std::size_t offset = 0;
    for (int k = 0; k < 6; ++k) {
      Bytes b = nemetyl::testing::random_segment_bytes(rng, 1, 8);
      segs.push_back(Segment{id, offset, b, k % 4 == 0});
      offset += b.size();
    }
    segmentation.push_back(std::move(segs));
  }
  const auto serial = build_segment_matrix(segmentation, cfg, 1);
  const auto threaded = build_segment_matrix(segmentation, cfg, 4);
  ASSERT_EQ(serial.size(), threaded.size());
  const auto& values = serial.values();
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < values.size(); ++j) {
      Segment a{0, 0, values[i].bytes, values[i].is_char};
      Segment b{0, 0, values[j].bytes, values[j].is_char};
      const double expect = i == j ? 0.0 : pair_dissimilarity(a, b, cfg);
      ASSERT_EQ(serial(i, j), expect);
      ASSERT_EQ(serial(i, j), threaded(i, j));
      ASSERT_EQ(serial(i, j), serial(j, i));
    }
}

TEST(SegmentMatrix, CsvRoundTripIsExact) {
  std::mt19937_64 rng(5);
  Segmentation segmentation;
  for (MessageId id = 0; id < 6; ++id) {
    std::vector<Segment> segs;
    std::size_t offset = 0;
    for (int k = 0; k < 4; ++k) {
      Bytes b = nemetyl::testing::random_segment_bytes(rng, 1, 6);
      segs.push_back(Segment{id, offset, b, k == 1});
      offset += b.size();
    }
    segmentation.push_back(std::move(segs));
  }
  const auto m = build_segment_matrix(segmentation, AnalysisConfig{});
  std::stringstream csv;
  write_segment_matrix_csv(csv, m);
  const auto back = read_segment_matrix_csv(csv);
  ASSERT_EQ(back.values(), m.values());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) ASSERT_EQ(back(i, j), m(i, j));
}

TEST(SegmentMatrix, UnknownSegmentIsRejected) {
  Segmentation segmentation{segments_of({"aa"}, 0)};
  const auto m = build_segment_matrix(segmentation, AnalysisConfig{});
  EXPECT_THROW(m.index_of(Segment{0, 0, from_hex("bb"), false}), Error);
}
