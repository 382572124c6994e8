#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "metric_oracle.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/metrics.hpp"

namespace zsmad {
namespace {

const LabeledScores kNine{{0.1, 0.4, 0.35, 0.8}, {0.3, 0.6, 0.9, 0.95, 0.2}};

TEST(RatesAt, ClosedForms) {
    EXPECT_EQ(rates_at({{0, 0}, {1, 1}}, 0.5), (DetPoint{0.5, 0, 0}));
    EXPECT_EQ(rates_at({{1}, {0}}, 0.5), (DetPoint{0.5, 1, 1}));
    const auto p = rates_at(kNine, 0.5);
    EXPECT_DOUBLE_EQ(p.macer, 2.0 / 5.0);
    EXPECT_DOUBLE_EQ(p.bpcer, 1.0 / 4.0);
}

TEST(RatesAt, TieCountsAsMorph) {
    const auto p = rates_at({{0.5}, {0.5}}, 0.5);
    EXPECT_EQ(p.macer, 0.0);
    EXPECT_EQ(p.bpcer, 1.0);
}

TEST(DetCurve, DistinctScoresGiveNPlusTwoMonotonePoints) {
    const auto curve = det_curve(kNine);
    ASSERT_EQ(curve.size(), 11u);
    for (size_t i = 1; i < curve.size(); ++i) {
        EXPECT_LT(curve[i - 1].threshold, curve[i].threshold);
        EXPECT_LE(curve[i - 1].macer, curve[i].macer);
        EXPECT_GE(curve[i - 1].bpcer, curve[i].bpcer);
    }
    EXPECT_EQ(curve.front().macer, 0.0);
    EXPECT_EQ(curve.front().bpcer, 1.0);
    EXPECT_EQ(curve.back().macer, 1.0);
    EXPECT_EQ(curve.back().bpcer, 0.0);
    EXPECT_TRUE(det_curve({}).empty());
}

TEST(DetCurve, SinglePairPassesThroughOriginIffSeparated) {
    auto has_origin = [](const LabeledScores& s) {
        const auto c = det_curve(s);
        return std::any_of(c.begin(), c.end(), [](const DetPoint& p) { return p.macer == 0 && p.bpcer == 0; });
    };
    EXPECT_TRUE(has_origin({{0.2}, {0.7}}));
    EXPECT_FALSE(has_origin({{0.7}, {0.2}}));
    EXPECT_FALSE(has_origin({{0.4}, {0.4}}));
}

TEST(BpcerAtMacer, NineScoreFixture) {
    const auto op = bpcer_at_macer(kNine, 0.10);
    EXPECT_EQ(op.bpcer, 0.75);
    EXPECT_EQ(op.achieved_macer, 0.0);
    EXPECT_EQ(op.threshold, 0.2);
    EXPECT_TRUE(op.reached);
    EXPECT_EQ(op.target_macer, 0.10);
}

TEST(BpcerAtMacer, PerfectSeparationIsZeroAtAnyTarget) {
    for (double target : {0.01, 0.1, 0.5, 0.99}) EXPECT_EQ(bpcer_at_macer({{0.1, 0.2}, {0.8, 0.9}}, target).bpcer, 0.0);
}

TEST(BpcerAtMacer, Errors) {
    EXPECT_THROW(bpcer_at_macer({{0.1}, {}}, 0.1), DegenerateError);
    EXPECT_THROW(bpcer_at_macer({{}, {0.1}}, 0.1), DegenerateError);
    EXPECT_THROW(bpcer_at_macer(kNine, 0.0), ConstraintError);
    EXPECT_THROW(bpcer_at_macer(kNine, 1.0), ConstraintError);
}

TEST(Eer, ClosedForms) {
    EXPECT_EQ(eer({{0.1, 0.2}, {0.8, 0.9}}), 0.0);
    EXPECT_EQ(eer({{1}, {0}}), 1.0);  // t = 1: macer 1, bpcer 1
    EXPECT_EQ(eer({{0.5, 0.5}, {0.5, 0.5}}), 0.5);
    EXPECT_DOUBLE_EQ(eer(kNine), 0.45);  // t = 0.4: macer 2/5, bpcer 2/4
    EXPECT_THROW(eer({{}, {0.3}}), DegenerateError);
}

TEST(Eer, IdenticalDistributionsNearHalf) {
    LabeledScores s;
    for (int i = 0; i < 100; ++i) {
        s.bonafide.push_back(i / 100.0);
        s.morph.push_back(i / 100.0);
    }
    EXPECT_NEAR(eer(s), 0.5, 0.01);
}

TEST(Metrics, MatchBruteForceSweep) {
    std::mt19937_64 rng(11);
    for (int n = 0; n < 300; ++n) {
        const auto s = testing::random_scores(rng);
        const auto sweep = testing::sweep(s);
        const auto curve = det_curve(s);
        ASSERT_EQ(curve.size(), sweep.size());
        for (size_t i = 0; i < curve.size(); ++i) {
            ASSERT_EQ(curve[i].threshold, sweep[i].t);
            ASSERT_EQ(curve[i].macer, sweep[i].macer);
            ASSERT_EQ(curve[i].bpcer, sweep[i].bpcer);
        }
        for (double target : {0.05, 0.1, 0.3}) {
            const auto op = bpcer_at_macer(s, target);
            const auto want = testing::oracle_bpcer_at_macer(s, target);
            ASSERT_EQ(op.threshold, want.t);
            ASSERT_EQ(op.bpcer, want.bpcer);
            ASSERT_EQ(op.achieved_macer, want.macer);
        }
        ASSERT_EQ(eer(s), testing::oracle_eer(s));
    }
}

TEST(Metrics, PermutationInvariant) {
    std::mt19937_64 rng(5);
    for (int n = 0; n < 100; ++n) {
        auto s = testing::random_scores(rng);
        const auto op = bpcer_at_macer(s, 0.1);
        const double e = eer(s);
        const auto curve = det_curve(s);
        std::shuffle(s.bonafide.begin(), s.bonafide.end(), rng);
        std::shuffle(s.morph.begin(), s.morph.end(), rng);
        EXPECT_EQ(bpcer_at_macer(s, 0.1), op);
        EXPECT_EQ(eer(s), e);
        EXPECT_EQ(det_curve(s), curve);
    }
}

TEST(Metrics, AddingCertainMorphNeverRaisesMacer) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int n = 0; n < 100; ++n) {
        auto s = testing::random_scores(rng);
        auto more = s;
        more.morph.push_back(1.0);
        for (int k = 0; k < 20; ++k) {
            const double t = unit(rng) * (1.0 - 1e-9);
            EXPECT_LE(rates_at(more, t).macer, rates_at(s, t).macer);
        }
    }
}

}  // namespace
}  // namespace zsmad
