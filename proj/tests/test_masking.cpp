#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "p3p/masking.hpp"

using namespace p3p;

namespace {

void expect_partition(const MaskPlan& plan, std::size_t p, double ratio) {
    std::vector<int> seen(p, 0);
    for (std::size_t i : plan.visible) ++seen.at(i);
    for (std::size_t i : plan.masked) ++seen.at(i);
    for (int s : seen) EXPECT_EQ(s, 1);
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(std::llround(ratio * p)), p - 1);
    EXPECT_EQ(plan.masked.size(), want);
    EXPECT_GE(plan.visible.size(), 1u);
    EXPECT_TRUE(std::is_sorted(plan.visible.begin(), plan.visible.end()));
    EXPECT_TRUE(std::is_sorted(plan.masked.begin(), plan.masked.end()));
}

}  // namespace

TEST(RandomMask, ZeroRatio) {
    const MaskPlan plan = random_mask(7, 0.0, 1);
    EXPECT_TRUE(plan.masked.empty());
    EXPECT_EQ(plan.visible.size(), 7u);
}

TEST(RandomMask, TenAtSixty) {
    const MaskPlan plan = random_mask(10, 0.6, 42);
    EXPECT_EQ(plan.masked.size(), 6u);
    EXPECT_EQ(plan.visible.size(), 4u);
}

TEST(RandomMask, KeepsOneVisible) {
    EXPECT_EQ(random_mask(1, 0.9, 3).visible.size(), 1u);
    EXPECT_EQ(random_mask(2, 0.8, 3).masked.size(), 1u);
}

TEST(RandomMask, Deterministic) {
    const MaskPlan a = random_mask(50, 0.6, 9), b = random_mask(50, 0.6, 9);
    EXPECT_EQ(a.masked, b.masked);
    EXPECT_EQ(a.visible, b.visible);
    EXPECT_NE(random_mask(50, 0.6, 10).masked, a.masked);
}

TEST(RandomMask, Errors) {
    EXPECT_THROW(random_mask(0, 0.5, 1), std::invalid_argument);
    EXPECT_THROW(random_mask(5, 1.0, 1), std::invalid_argument);
    EXPECT_THROW(random_mask(5, -0.1, 1), std::invalid_argument);
}

TEST(RandomMaskProperty, PartitionHoldsForRandomPairs) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> pd(1, 300);
    std::uniform_real_distribution<double> rd(0.0, 0.999);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t p = pd(rng);
        const double r = rd(rng);
        expect_partition(random_mask(p, r, rng()), p, r);
    }
}

TEST(AttentionMaskTest, NoPadding) {
    const AttentionMask m = build_attention_mask({3}, 3);
    EXPECT_EQ(m.row(0), (std::vector<std::uint8_t>{1, 1, 1}));
}

TEST(AttentionMaskTest, Padding) {
    const AttentionMask m = build_attention_mask({2, 3}, 3);
    EXPECT_EQ(m.row(0), (std::vector<std::uint8_t>{1, 1, 0}));
    EXPECT_EQ(m.row(1), (std::vector<std::uint8_t>{1, 1, 1}));
    EXPECT_TRUE(m.allow(0, 0, 1));
    EXPECT_FALSE(m.allow(0, 0, 2));
    EXPECT_FALSE(m.allow(0, 2, 0));
}

TEST(AttentionMaskTest, Errors) {
    EXPECT_THROW(build_attention_mask({0}, 3), std::invalid_argument);
    EXPECT_THROW(build_attention_mask({4}, 3), std::invalid_argument);
}

TEST(Augment, UnitRatioIsIdentity) {
    std::mt19937_64 rng(4);
    const PointCloud pc = oracle::random_cloud(100, rng);
    const PointCloud out = augment(pc, {1.0, true, true}, 77);
    ASSERT_EQ(out.size(), pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i) {
        EXPECT_DOUBLE_EQ(out.points[i].x, pc.points[i].x);
        EXPECT_DOUBLE_EQ(out.points[i].y, pc.points[i].y);
        EXPECT_DOUBLE_EQ(out.points[i].z, pc.points[i].z);
    }
}

TEST(Augment, ScaleAboutCenter) {
    EXPECT_DOUBLE_EQ(scale_about_center(0.75, 2.0), 1.0);
    EXPECT_DOUBLE_EQ(scale_about_center(0.5, 3.0), 0.5);
}

TEST(Augment, DeterministicAndBounded) {
    std::mt19937_64 rng(5);
    const PointCloud pc = oracle::random_cloud(500, rng);
    const PointCloud a = augment(pc, {0.5, true, true}, 3);
    const PointCloud b = augment(pc, {0.5, true, true}, 3);
    for (std::size_t i = 0; i < pc.size(); ++i) {
        EXPECT_EQ(a.points[i].x, b.points[i].x);
        for (double v : {a.points[i].x, a.points[i].y, a.points[i].z}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_EQ(a.points[i].r, pc.points[i].r);
    }
}

TEST(AugmentProperty, AffinePerAxisWithinRange) {
    // Unclamped points must follow one affine map per axis with slope in [r, 1/r].
    PointCloud pc;
    for (int i = 0; i < 5; ++i) {
        const double v = 0.45 + 0.025 * i;
        pc.points.push_back({v, v, v, 0, 0, 0});
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const PointCloud out = augment(pc, {0.5, true, true}, seed);
        for (int axis = 0; axis < 3; ++axis) {
            auto get = [axis](const Point& p) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; };
            const double slope = (get(out.points[4]) - get(out.points[0])) / 0.1;
            EXPECT_GE(slope, 0.5 - 1e-12);
            EXPECT_LE(slope, 2.0 + 1e-12);
            const double shift = get(out.points[2]) - 0.5;
            EXPECT_LE(std::abs(shift), 0.25 + 1e-12);
        }
    }
}

TEST(Augment, Errors) {
    EXPECT_THROW(augment({}, {0.0, true, true}, 1), std::invalid_argument);
    EXPECT_THROW(augment({}, {1.5, true, true}, 1), std::invalid_argument);
}
