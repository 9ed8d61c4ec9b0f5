#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "nemetyl/align.hpp"
#include "oracles.hpp"

using namespace nemetyl;
using nemetyl::testing::example_m0;
using nemetyl::testing::example_m1;
using nemetyl::testing::full_dp_score;
using nemetyl::testing::random_message;
using nemetyl::testing::segments_of;

namespace {

struct Fixture {
  Segmentation segmentation;
  SegmentDissimilarityMatrix matrix;
};

Fixture worked_example() {
  Segmentation s{segments_of(example_m0(), 0), segments_of(example_m1(), 1)};
  auto m = build_segment_matrix(s, AnalysisConfig{});
  return {std::move(s), std::move(m)};
}

std::size_t gap_count(const std::vector<Cell>& row) {
  return static_cast<std::size_t>(std::count(row.begin(), row.end(), std::nullopt));
}

}  // namespace

TEST(NwScore, WorkedExampleScore) {
  const auto f = worked_example();
  EXPECT_NEAR(nw_score(f.segmentation[0], f.segmentation[1], f.matrix, AnalysisConfig{}), 0.76, 0.01);
}

TEST(NwScore, SelfScoreEqualsSegmentCount) {
  const auto f = worked_example();
  EXPECT_EQ(nw_score(f.segmentation[1], f.segmentation[1], f.matrix, AnalysisConfig{}), 4.0);
}

TEST(NwScore, SingleCellKeepsSimilarity) {
  Segmentation s{segments_of({"01"}, 0), segments_of({"0000"}, 1)};
  const auto m = build_segment_matrix(s, AnalysisConfig{});
  const double score = nw_score(s[0], s[1], m, AnalysisConfig{});
  EXPECT_EQ(score, 0.0);
  EXPECT_GE(score, -2.0);
}

TEST(NwScore, LinearSpaceEqualsFullDpOracle) {
  std::mt19937_64 rng(21);
  AnalysisConfig cfg;
  for (int trial = 0; trial < 250; ++trial) {
    Segmentation s{random_message(rng, 0, 1, 30), random_message(rng, 1, 1, 30)};
    const auto m = build_segment_matrix(s, cfg);
    const auto ids = m.index_segmentation(s);
    const auto sim = segment_similarity(m, ids[0], ids[1]);
    const double oracle = full_dp_score(s[0].size(), s[1].size(), sim, cfg.gap_penalty);
    ASSERT_EQ(nw_score(ids[0], ids[1], m, cfg), oracle) << "trial " << trial;
  }
}

TEST(NwAlign, RescoredAlignmentEqualsScore) {
  std::mt19937_64 rng(22);
  AnalysisConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    Segmentation s{random_message(rng, 0, 1, 30), random_message(rng, 1, 1, 30)};
    const auto m = build_segment_matrix(s, cfg);
    const auto ids = m.index_segmentation(s);
    const auto sim = segment_similarity(m, ids[0], ids[1]);
    const double score = nw_score(ids[0], ids[1], m, cfg);
    const auto direct = nw_align_steps(s[0].size(), s[1].size(), sim, cfg.gap_penalty);
    ASSERT_EQ(score_steps(std::span<const Step>(direct), sim, cfg.gap_penalty), score) << "trial " << trial;
    // forced recursion stays optimal; its sum may differ by rounding only
    const auto split = nw_align_steps(s[0].size(), s[1].size(), sim, cfg.gap_penalty, 0);
    ASSERT_NEAR(score_steps(std::span<const Step>(split), sim, cfg.gap_penalty), score, 1e-9) << "trial " << trial;
    const auto pair = nw_align(s[0], s[1], m, cfg);
    ASSERT_EQ(pair.score, score);
    ASSERT_EQ(pair.first.size(), pair.second.size());
    double rescored = 0.0;
    for (std::size_t c = 0; c < pair.first.size(); ++c) {
      ASSERT_TRUE(pair.first[c] || pair.second[c]);
      if (pair.first[c] && pair.second[c]) {
        rescored += 1.0 - m.dissimilarity(*pair.first[c], *pair.second[c]);
      } else {
        rescored += cfg.gap_penalty;
      }
    }
    ASSERT_EQ(rescored, score);
  }
}

TEST(NwAlign, WorkedExampleGapsOppositeSegment2700) {
  const auto f = worked_example();
  const auto pair = nw_align(f.segmentation[0], f.segmentation[1], f.matrix, AnalysisConfig{});
  ASSERT_EQ(pair.first.size(), 4u);
  EXPECT_EQ(gap_count(pair.first), 1u);
  EXPECT_EQ(gap_count(pair.second), 0u);
  for (std::size_t c = 0; c < 4; ++c) {
    if (!pair.first[c]) {
      EXPECT_EQ(to_hex(pair.second[c]->bytes), "2700");
    }
  }
  EXPECT_EQ(to_hex(pair.first.back()->bytes), "07");
  EXPECT_EQ(to_hex(pair.second.back()->bytes), "2317");
}

TEST(NwAlign, IdenticalSequencesAreGapFree) {
  const auto f = worked_example();
  const auto pair = nw_align(f.segmentation[1], f.segmentation[1], f.matrix, AnalysisConfig{});
  ASSERT_EQ(pair.first.size(), 4u);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(pair.first[c], pair.second[c]);
}

TEST(NwAlign, LengthOneAgainstThreeInsertsTwoGaps) {
  Segmentation s{segments_of({"07"}, 0), segments_of({"2700", "0008", "2317"}, 1)};
  const auto m = build_segment_matrix(s, AnalysisConfig{});
  const auto pair = nw_align(s[0], s[1], m, AnalysisConfig{});
  EXPECT_EQ(pair.first.size(), 3u);
  EXPECT_EQ(gap_count(pair.first), 2u);
  EXPECT_EQ(gap_count(pair.second), 0u);
}

TEST(MessageDissimilarity, WorkedExample) {
  const auto f = worked_example();
  const AnalysisConfig cfg;
  const double score = nw_score(f.segmentation[0], f.segmentation[1], f.matrix, cfg);
  // shorter message has 3 segments, bounds -3 and 3
  EXPECT_DOUBLE_EQ(message_dissimilarity(f.segmentation[0], f.segmentation[1], f.matrix, cfg),
                   1.0 - (score + 3.0) / 6.0);
  EXPECT_NEAR(message_dissimilarity(f.segmentation[0], f.segmentation[1], f.matrix, cfg), 0.373, 0.002);
}

TEST(MessageDissimilarity, BoundsMapToZeroAndOne) {
  const AnalysisConfig cfg;
  EXPECT_EQ(score_to_dissimilarity(3.0, 3, cfg), 0.0);
  EXPECT_EQ(score_to_dissimilarity(-3.0, 3, cfg), 1.0);
  EXPECT_EQ(score_to_dissimilarity(-7.0, 3, cfg), 1.0);
  const auto f = worked_example();
  EXPECT_EQ(message_dissimilarity(f.segmentation[0], f.segmentation[0], f.matrix, cfg), 0.0);
}

TEST(MessageMatrix, SymmetricRangeAndMatchesPairwise) {
  std::mt19937_64 rng(23);
  const AnalysisConfig cfg;
  Segmentation s;
  for (MessageId id = 0; id < 15; ++id) s.push_back(random_message(rng, id, 1, 12));
  const auto seg = build_segment_matrix(s, cfg);
  const auto serial = build_message_matrix(s, seg, cfg, 1);
  const auto threaded = build_message_matrix(s, seg, cfg, 3);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(serial(i, i), 0.0);
    for (std::size_t j = 0; j < s.size(); ++j) {
      ASSERT_EQ(serial(i, j), serial(j, i));
      ASSERT_EQ(serial(i, j), threaded(i, j));
      ASSERT_GE(serial(i, j), 0.0);
      ASSERT_LE(serial(i, j), 1.0);
      if (i < j) {
        ASSERT_EQ(serial(i, j), message_dissimilarity(s[i], s[j], seg, cfg));
      }
    }
  }
}

TEST(MessageMatrix, NeedsTwoMessages) {
  Segmentation s{segments_of({"01"}, 0)};
  const auto seg = build_segment_matrix(s, AnalysisConfig{});
  EXPECT_THROW(build_message_matrix(s, seg, AnalysisConfig{}), Error);
}

TEST(Medoid, MinimalDistanceSum) {
  MessageDissimilarityMatrix m(3);
  m.set(0, 1, 0.1);
  m.set(0, 2, 0.1);
  m.set(1, 2, 0.5);
  const std::vector<MessageId> all{2, 1, 0};
  EXPECT_EQ(medoid(all, m), 0u);
}

TEST(Medoid, TiesGoToLowestId) {
  MessageDissimilarityMatrix m(3);
  m.set(0, 1, 0.3);
  m.set(0, 2, 0.3);
  m.set(1, 2, 0.3);
  const std::vector<MessageId> all{2, 1, 0};
  EXPECT_EQ(medoid(all, m), 0u);
  const std::vector<MessageId> one{1};
  EXPECT_EQ(medoid(one, m), 1u);
}

TEST(ProgressiveAlignment, IdenticalMessagesNeedNoGaps) {
  Segmentation s;
  for (MessageId id = 0; id < 3; ++id) s.push_back(segments_of({"0208", "0008", "07"}, id));
  const AnalysisConfig cfg;
  const auto seg = build_segment_matrix(s, cfg);
  const auto msg = build_message_matrix(s, seg, cfg);
  const std::vector<MessageId> cluster{0, 1, 2};
  const auto table = progressive_align_cluster(cluster, s, seg, msg, cfg);
  EXPECT_EQ(table.columns(), 3u);
  for (const auto& r : table.rows) EXPECT_EQ(gap_count(r.cells), 0u);
}

TEST(ProgressiveAlignment, WorkedExamplePair) {
  const auto f = worked_example();
  const AnalysisConfig cfg;
  const auto msg = build_message_matrix(f.segmentation, f.matrix, cfg);
  const std::vector<MessageId> cluster{0, 1};
  const auto table = progressive_align_cluster(cluster, f.segmentation, f.matrix, msg, cfg);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.columns(), 4u);
  for (const auto& r : table.rows) EXPECT_EQ(gap_count(r.cells), r.message == 0 ? 1u : 0u);
}

TEST(ProgressiveAlignment, RowOrderFollowsDistanceToMedoid) {
  Segmentation s{segments_of({"0208", "0008", "07"}, 0), segments_of({"0208", "0008", "07"}, 1),
                 segments_of({"0208", "0008", "08"}, 2), segments_of({"ffff", "0008", "07", "aa"}, 3)};
  const AnalysisConfig cfg;
  const auto seg = build_segment_matrix(s, cfg);
  const auto msg = build_message_matrix(s, seg, cfg);
  const std::vector<MessageId> cluster{3, 2, 1, 0};
  const auto table = progressive_align_cluster(cluster, s, seg, msg, cfg);
  const MessageId center = medoid(cluster, msg);
  ASSERT_EQ(table.rows.front().message, center);
  for (std::size_t r = 2; r < table.rows.size(); ++r) {
    const auto prev = table.rows[r - 1].message, cur = table.rows[r].message;
    EXPECT_TRUE(msg(center, prev) < msg(center, cur) || (msg(center, prev) == msg(center, cur) && prev < cur));
  }
}

TEST(ProgressiveAlignment, DegappingRoundTripProperty) {
  std::mt19937_64 rng(24);
  const AnalysisConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    Segmentation s;
    const std::size_t n = 2 + rng() % 8;
    for (MessageId id = 0; id < n; ++id) s.push_back(random_message(rng, id, 1, 10));
    const auto seg = build_segment_matrix(s, cfg);
    const auto msg = build_message_matrix(s, seg, cfg);
    std::vector<MessageId> cluster(n);
    std::iota(cluster.begin(), cluster.end(), MessageId{0});
    const auto table = progressive_align_cluster(cluster, s, seg, msg, cfg);
    std::size_t widest = 0;
    for (const auto& row : table.rows) {
      ASSERT_EQ(row.cells.size(), table.columns());
      ASSERT_EQ(row.degapped(), s[row.message]);
      widest = std::max(widest, s[row.message].size());
    }
    ASSERT_GE(table.columns(), widest);
    auto members = table.members();
    std::sort(members.begin(), members.end());
    ASSERT_EQ(members, cluster);
  }
}

TEST(AlignmentCsv, RoundTrip) {
  const auto f = worked_example();
  const AnalysisConfig cfg;
  const auto msg = build_message_matrix(f.segmentation, f.matrix, cfg);
  const std::vector<MessageId> cluster{0, 1};
  const auto table = progressive_align_cluster(cluster, f.segmentation, f.matrix, msg, cfg, 7);
  std::stringstream csv;
  write_alignment_csv(csv, table);
  EXPECT_NE(csv.str().find("GAP"), std::string::npos);
  const auto back = read_alignment_csv(csv, f.segmentation, 7);
  ASSERT_EQ(back.rows.size(), table.rows.size());
  for (std::size_t r = 0; r < back.rows.size(); ++r) {
    EXPECT_EQ(back.rows[r].message, table.rows[r].message);
    EXPECT_EQ(back.rows[r].cells, table.rows[r].cells);
  }
}

TEST(AlignmentCsv, RejectsCellsThatDoNotMatchTheMessage) {
  const auto f = worked_example();
  std::stringstream csv("0,0208,ffff,07\n");
  EXPECT_THROW(read_alignment_csv(csv, f.segmentation, 0), Error);
}

TEST(DropGapColumns, RemovesOnlyAllGapColumns) {
  AlignmentTable t{0, {}};
  const auto segs = segments_of({"01", "02"}, 0);
  t.rows.push_back(AlignmentRow{0, {segs[0], std::nullopt, segs[1]}});
  t.rows.push_back(AlignmentRow{1, {std::nullopt, std::nullopt, segs[1]}});
  const auto out = drop_gap_columns(t);
  EXPECT_EQ(out.columns(), 2u);
  EXPECT_EQ(gap_count(out.rows[1].cells), 1u);
}
