#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mcdet/errors.hpp"
#include "mcdet/mc_aggregation.hpp"
#include "oracles.hpp"

namespace {

using namespace mcdet;

Detection det(BBox b, int cls, double score) { return {b, cls, score, std::nullopt}; }

McDump dump_of(std::vector<std::vector<Detection>> passes, ImageSize img = {100, 100}) {
  return {"img", img, std::move(passes)};
}

std::size_t total_in_clusters(const std::vector<Cluster>& clusters) {
  std::size_t n = 0;
  for (const auto& c : clusters) n += static_cast<std::size_t>(c.consistency());
  return n;
}

TEST(BuildClusters, ShiftedBoxJoinsAnchor) {
  const auto d = dump_of({{det({10, 10, 30, 30}, 1, 0.9)}, {det({11, 10, 31, 30}, 1, 0.8)}});
  const auto c = build_clusters(d, 0.5);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].consistency(), 2);
  EXPECT_EQ(c[0].anchor.ref, (DetectionRef{0, 0}));
  EXPECT_EQ(c[0].members[0].ref, (DetectionRef{1, 0}));
}

TEST(BuildClusters, DifferentClassesStaySeparate) {
  const auto d = dump_of({{det({10, 10, 30, 30}, 1, 0.9)}, {det({11, 10, 31, 30}, 2, 0.8)}});
  const auto c = build_clusters(d, 0.5);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].consistency(), 1);
  EXPECT_EQ(c[1].consistency(), 1);
}

TEST(BuildClusters, PerfectConsistency) {
  const Detection x = det({10, 10, 30, 30}, 0, 0.7);
  const auto c = build_clusters(dump_of({{x}, {x}, {x}}), 0.5);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].consistency(), 3);
}

TEST(BuildClusters, IouMustStrictlyExceedGamma) {
  // IoU exactly 0.5: (0,0,10,10) vs (0,0,10,5) -> 50 / 100.
  const auto d = dump_of({{det({0, 0, 10, 10}, 0, 0.9)}, {det({0, 0, 10, 5}, 0, 0.8)}});
  EXPECT_EQ(build_clusters(d, 0.5).size(), 2u);
  EXPECT_EQ(build_clusters(d, 0.49).size(), 1u);
}

TEST(BuildClusters, AnchorOrderFollowsScore) {
  const auto d = dump_of({{det({0, 0, 10, 10}, 0, 0.3)}, {det({0, 0, 10, 10}, 0, 0.8)}});
  const auto c = build_clusters(d, 0.5);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].anchor.ref, (DetectionRef{1, 0}));
  EXPECT_EQ(c[0].members[0].ref, (DetectionRef{0, 0}));
}

TEST(BuildClusters, ScoreTiesBreakByPassThenIndex) {
  const Detection x = det({0, 0, 10, 10}, 0, 0.5);
  const Detection y = det({50, 50, 60, 60}, 0, 0.5);
  const auto c = build_clusters(dump_of({{y, x}, {x}}), 0.5);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].anchor.ref, (DetectionRef{0, 0}));
  EXPECT_EQ(c[1].anchor.ref, (DetectionRef{0, 1}));
  EXPECT_EQ(c[1].members[0].ref, (DetectionRef{1, 0}));
}

TEST(BuildClusters, BestIouWinsAndTiesTakeLowerIndex) {
  const auto d = dump_of({{det({0, 0, 10, 10}, 0, 0.9)},
                          {det({1, 0, 11, 10}, 0, 0.6), det({0, 0, 10, 10}, 0, 0.5), det({0, 0, 10, 10}, 0, 0.4)}});
  const auto c = build_clusters(d, 0.5);
  ASSERT_EQ(c[0].members.size(), 1u);
  EXPECT_EQ(c[0].members[0].ref, (DetectionRef{1, 1}));
}

TEST(BuildClusters, DuplicateBoxesInOnePassAreBothConsumed) {
  const Detection x = det({10, 10, 30, 30}, 0, 0.6);
  const auto c = build_clusters(dump_of({{x, x}, {x}}), 0.5);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(total_in_clusters(c), 3u);
  EXPECT_EQ(c[0].consistency(), 2);
  EXPECT_EQ(c[1].consistency(), 1);
}

TEST(BuildClusters, EmptyDumpAndBadGamma) {
  EXPECT_TRUE(build_clusters(dump_of({{}, {}}), 0.5).empty());
  EXPECT_THROW(build_clusters(dump_of({{}}), 1.0), PreconditionError);
  EXPECT_THROW(build_clusters(dump_of({{}}), -0.1), PreconditionError);
}

TEST(BuildClusters, MatchesBruteForceOnRandomDumps) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 300; ++t) {
    const McDump d = mcdet::testing::random_dump(rng);
    const double gamma = mcdet::testing::uniform(rng, 0.0, 0.9);
    const auto got = build_clusters(d, gamma);
    ASSERT_EQ(got, mcdet::testing::brute_force_clusters(d, gamma)) << "case " << t;
    EXPECT_EQ(total_in_clusters(got), d.detection_count());
    for (const auto& c : got) {
      std::vector<int> passes;
      for (const auto& m : c.members) {
        EXPECT_EQ(m.detection.class_id, c.anchor.detection.class_id);
        EXPECT_GT(iou(c.anchor.detection.bbox, m.detection.bbox), gamma);
        EXPECT_NE(m.ref.pass, c.anchor.ref.pass);
        passes.push_back(m.ref.pass);
      }
      EXPECT_TRUE(std::is_sorted(passes.begin(), passes.end()));
      EXPECT_EQ(std::adjacent_find(passes.begin(), passes.end()), passes.end());
    }
  }
}

TEST(BuildClusters, RaisingGammaCanRegroupUnderGreedyConsumption) {
  // A (0.9) and B (0.8) share pass 0; D sits in pass 1 with IoU 0.55 to A and
  // 0.7 to B. At gamma 0.5 A claims D; at gamma 0.6 A cannot, so B does and
  // B's member count grows. Pointwise monotonicity in gamma does not hold.
  const Detection a = det({0, 0, 10, 5.5}, 0, 0.9);
  const Detection b = det({0, 0, 10, 7}, 0, 0.8);
  const Detection d = det({0, 0, 10, 10}, 0, 0.7);
  const auto dump = dump_of({{a, b}, {d}});
  const auto low = build_clusters(dump, 0.5);
  const auto high = build_clusters(dump, 0.6);
  ASSERT_EQ(low.size(), 2u);
  ASSERT_EQ(high.size(), 2u);
  EXPECT_EQ(low[1].anchor.ref, (DetectionRef{0, 1}));
  EXPECT_EQ(low[1].members.size(), 0u);
  EXPECT_EQ(high[1].anchor.ref, (DetectionRef{0, 1}));
  EXPECT_EQ(high[1].members.size(), 1u);
}

TEST(BuildClusters, RaisingGammaShrinksCandidatesAndFirstCluster) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 300; ++t) {
    const McDump d = mcdet::testing::random_dump(rng);
    if (d.detection_count() == 0) continue;
    std::size_t prev_first = SIZE_MAX;
    for (double gamma = 0.0; gamma < 0.95; gamma += 0.1) {
      const auto c = build_clusters(d, gamma);
      // The first anchor sees every detection unconsumed.
      EXPECT_LE(c[0].members.size(), prev_first);
      prev_first = c[0].members.size();
      // No cluster can exceed the passes holding an eligible candidate.
      for (const auto& cl : c) {
        int eligible = 0;
        for (int k = 0; k < d.n_passes(); ++k) {
          if (k == cl.anchor.ref.pass) continue;
          for (const auto& x : d.passes[k]) {
            if (x.class_id == cl.anchor.detection.class_id && iou(x.bbox, cl.anchor.detection.bbox) > gamma) {
              ++eligible;
              break;
            }
          }
        }
        EXPECT_LE(static_cast<int>(cl.members.size()), eligible);
      }
    }
  }
}

TEST(Uncertainty, SingletonIsAnchorScore) {
  const Cluster c{{{0, 0}, det({0, 0, 1, 1}, 0, 0.9)}, {}, 0.5};
  EXPECT_EQ(uncertainty(c), 0.9);
  EXPECT_EQ(uncertainty(c, UncertaintyMode::AnchorExclusive), 0.9);
}

TEST(Uncertainty, AnchorInclusiveMean) {
  const Cluster c{{{0, 0}, det({0, 0, 1, 1}, 0, 0.9)},
                  {{{1, 0}, det({0, 0, 1, 1}, 0, 0.8)}, {{2, 0}, det({0, 0, 1, 1}, 0, 0.7)}},
                  0.5};
  EXPECT_NEAR(uncertainty(c), 0.8, 1e-15);
  EXPECT_NEAR(uncertainty(c, UncertaintyMode::AnchorExclusive), 0.75, 1e-15);
}

TEST(Uncertainty, ConstantScoresAreExact) {
  const double s = 0.123456789;
  Cluster c{{{0, 0}, det({0, 0, 1, 1}, 0, s)}, {}, 0.5};
  for (int k = 1; k < 10; ++k) c.members.push_back({{k, 0}, det({0, 0, 1, 1}, 0, s)});
  EXPECT_DOUBLE_EQ(uncertainty(c), s);
}

TEST(Uncertainty, WithinScoreRangeOnRandomDumps) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const McDump d = mcdet::testing::random_dump(rng);
    for (const auto& c : build_clusters(d, 0.5)) {
      double lo = c.anchor.detection.score, hi = lo;
      for (const auto& m : c.members) {
        lo = std::min(lo, m.detection.score);
        hi = std::max(hi, m.detection.score);
      }
      for (auto mode : {UncertaintyMode::AnchorInclusive, UncertaintyMode::AnchorExclusive}) {
        const double u = uncertainty(c, mode);
        EXPECT_GE(u, lo - 1e-15);
        EXPECT_LE(u, hi + 1e-15);
      }
    }
  }
}

TEST(UncertaintyMode, Names) {
  UncertaintyMode m{};
  ASSERT_TRUE(parse_uncertainty_mode("anchor-exclusive", m));
  EXPECT_EQ(m, UncertaintyMode::AnchorExclusive);
  EXPECT_EQ(to_string(m), "anchor-exclusive");
  EXPECT_FALSE(parse_uncertainty_mode("both", m));
}

TEST(Consolidate, MeanBox) {
  const Cluster c{{{0, 0}, det({0, 0, 10, 10}, 3, 0.9)}, {{{1, 0}, det({2, 0, 12, 10}, 3, 0.7)}}, 0.5};
  const auto out = consolidate({c}, 2);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].bbox, (BBox{1, 0, 11, 10}));
  EXPECT_EQ(out[0].class_id, 3);
  EXPECT_EQ(out[0].consistency, 2);
  EXPECT_NEAR(out[0].uncertainty, 0.8, 1e-15);
  EXPECT_EQ(out[0].anchor, (DetectionRef{0, 0}));
}

TEST(Consolidate, EmptyAndSingletons) {
  EXPECT_TRUE(consolidate({}, 10).empty());
  std::vector<Cluster> cs;
  for (int m = 0; m < 5; ++m) cs.push_back({{{0, m}, det({0, 0, 1, 1}, m, 0.1 * m)}, {}, 0.5});
  const auto out = consolidate(cs, 10);
  ASSERT_EQ(out.size(), 5u);
  for (const auto& d : out) EXPECT_EQ(d.consistency, 1);
}

TEST(Consolidate, OrderingIsScoreThenClassThenAnchor) {
  std::vector<Cluster> cs{{{{0, 2}, det({0, 0, 1, 1}, 1, 0.5)}, {}, 0.5},
                          {{{0, 1}, det({0, 0, 1, 1}, 0, 0.5)}, {}, 0.5},
                          {{{0, 0}, det({0, 0, 1, 1}, 1, 0.5)}, {}, 0.5},
                          {{{1, 0}, det({0, 0, 1, 1}, 2, 0.7)}, {}, 0.5}};
  const auto out = consolidate(cs, 2);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0].anchor, (DetectionRef{1, 0}));
  EXPECT_EQ(out[1].anchor, (DetectionRef{0, 1}));
  EXPECT_EQ(out[2].anchor, (DetectionRef{0, 0}));
  EXPECT_EQ(out[3].anchor, (DetectionRef{0, 2}));
}

TEST(Consolidate, RejectsClusterLargerThanN) {
  const Cluster c{{{0, 0}, det({0, 0, 1, 1}, 0, 0.9)}, {{{1, 0}, det({0, 0, 1, 1}, 0, 0.9)}}, 0.5};
  EXPECT_THROW(consolidate({c}, 1), PreconditionError);
}

TEST(Aggregate, DeterministicAndBounded) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const McDump d = mcdet::testing::random_dump(rng);
    const auto a = aggregate(d, 0.5);
    EXPECT_EQ(a, aggregate(d, 0.5));
    std::size_t total = 0;
    for (const auto& c : a) {
      EXPECT_GE(c.consistency, 1);
      EXPECT_LE(c.consistency, d.n_passes());
      EXPECT_GE(c.uncertainty, 0.0);
      EXPECT_LE(c.uncertainty, 1.0);
      total += static_cast<std::size_t>(c.consistency);
    }
    EXPECT_EQ(total, d.detection_count());
  }
}

TEST(Validate, DetectionInvariants) {
  EXPECT_NO_THROW(validate(det({0, 0, 1, 1}, 0, 1.0)));
  EXPECT_THROW(validate(det({0, 0, 1, 1}, 0, 1.1)), PreconditionError);
  EXPECT_THROW(validate(det({0, 0, 1, 1}, -1, 0.5)), PreconditionError);
  EXPECT_THROW(validate(det({0, 0, 0, 1}, 0, 0.5)), PreconditionError);
  Detection p = det({0, 0, 1, 1}, 1, 0.6);
  p.probs = std::vector<double>{0.3, 0.6};
  EXPECT_NO_THROW(validate(p));
  p.probs = std::vector<double>{0.6, 0.3};
  EXPECT_THROW(validate(p), PreconditionError);
  p.probs = std::vector<double>{0.5, 0.6};
  EXPECT_THROW(validate(p), PreconditionError);
}

TEST(Validate, DumpInvariants) {
  EXPECT_THROW(validate(dump_of({})), PreconditionError);
  EXPECT_THROW(validate(dump_of({{det({90, 90, 110, 100}, 0, 0.5)}})), PreconditionError);
  EXPECT_NO_THROW(validate(dump_of({{det({90, 90, 100, 100}, 0, 0.5)}})));
}

}  // namespace
