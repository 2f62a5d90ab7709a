#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "p3p/lift.hpp"

using namespace p3p;

namespace {

DepthImage image(int w, int h, std::vector<double> depth) {
    DepthImage img{w, h, {}, std::move(depth)};
    for (int i = 0; i < w * h; ++i) img.rgb.push_back({0.1 * (i % 10), 0.5, 1.0});
    return img;
}

}  // namespace

TEST(Lift, SinglePixelCollapsesToCenter) {
    DepthImage img{1, 1, {{0.2, 0.4, 0.6}}, {5.0}};
    const PointCloud pc = lift(img);
    ASSERT_EQ(pc.size(), 1u);
    EXPECT_EQ(pc.points[0], (Point{0.5, 0.5, 0.5, 0.2, 0.4, 0.6}));
}

TEST(Lift, TwoByTwoWorkedExample) {
    const PointCloud pc = lift(image(2, 2, {0, 1, 2, 3}));
    ASSERT_EQ(pc.size(), 4u);
    // pixel (r=0, c=0)
    EXPECT_EQ(pc.points[0].x, 0.0);
    EXPECT_EQ(pc.points[0].y, 0.0);
    EXPECT_EQ(pc.points[0].z, 1.0);
    // pixel (r=1, c=1)
    EXPECT_EQ(pc.points[3].x, 1.0);
    EXPECT_EQ(pc.points[3].y, 1.0);
    EXPECT_EQ(pc.points[3].z, 0.0);
    EXPECT_EQ(pc.points[1].y, 1.0 / 3.0);
}

TEST(Lift, OnePointPerPixelAndValid) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 40.0);
    for (auto [w, h] : {std::pair{7, 3}, std::pair{1, 9}, std::pair{16, 1}, std::pair{13, 11}}) {
        std::vector<double> depth(static_cast<std::size_t>(w * h));
        for (double& d : depth) d = u(rng);
        const PointCloud pc = lift(image(w, h, depth));
        EXPECT_EQ(pc.size(), static_cast<std::size_t>(w * h));
        EXPECT_TRUE(validate_cloud(pc).ok());
    }
}

TEST(Lift, DepthMonotonicity) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> depth(60);
    for (double& d : depth) d = u(rng);
    const PointCloud pc = lift(image(10, 6, depth));
    for (std::size_t i = 0; i < depth.size(); ++i)
        for (std::size_t j = 0; j < depth.size(); ++j)
            if (depth[i] < depth[j]) EXPECT_LT(pc.points[i].y, pc.points[j].y);
}

TEST(Lift, Errors) {
    EXPECT_THROW(lift(DepthImage{}), std::invalid_argument);
    EXPECT_THROW(lift(image(2, 1, {0.0, std::nan("")})), std::invalid_argument);
    EXPECT_THROW(lift(image(2, 1, {0.0, std::numeric_limits<double>::infinity()})), std::invalid_argument);
    DepthImage bad = image(2, 2, {0, 1, 2, 3});
    bad.depth.pop_back();
    EXPECT_THROW(lift(bad), std::invalid_argument);
}

TEST(RotateZ, ZeroAngleIsIdentity) {
    const PointCloud pc = lift(image(5, 4, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20}));
    const PointCloud out = rotate_z(pc, 0.0);
    for (std::size_t i = 0; i < pc.size(); ++i) {
        EXPECT_NEAR(out.points[i].x, pc.points[i].x, 1e-12);
        EXPECT_NEAR(out.points[i].y, pc.points[i].y, 1e-12);
        EXPECT_EQ(out.points[i].z, pc.points[i].z);
    }
}

TEST(RotateZ, HalfTurnSwapsEnds) {
    const PointCloud pc{{Point{0, 0.5, 0.2, 0, 0, 0}, Point{1, 0.5, 0.8, 0, 0, 0}}};
    const PointCloud out = rotate_z(pc, std::numbers::pi);
    EXPECT_NEAR(out.points[0].x, 1.0, 1e-12);
    EXPECT_NEAR(out.points[1].x, 0.0, 1e-12);
    EXPECT_NEAR(out.points[0].y, 0.5, 1e-12);
    EXPECT_NEAR(out.points[1].y, 0.5, 1e-12);
}

TEST(RotateZProperty, IsometryAndOrdering) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        PointCloud pc;
        for (int i = 0; i < 30; ++i) pc.points.push_back({u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
        const double angle = 2 * std::numbers::pi * u(rng);
        const PointCloud raw = rotate_z_raw(pc, angle);
        const PointCloud norm = rotate_z(pc, angle);
        for (std::size_t i = 0; i < pc.size(); ++i) {
            EXPECT_EQ(raw.points[i].z, pc.points[i].z);
            EXPECT_EQ(raw.points[i].r, pc.points[i].r);
            for (std::size_t j = i + 1; j < pc.size(); ++j) {
                const double d0 = std::hypot(pc.points[i].x - pc.points[j].x, pc.points[i].y - pc.points[j].y);
                const double d1 = std::hypot(raw.points[i].x - raw.points[j].x, raw.points[i].y - raw.points[j].y);
                EXPECT_NEAR(d0, d1, 1e-9);
                if (raw.points[i].x < raw.points[j].x) EXPECT_LE(norm.points[i].x, norm.points[j].x);
            }
        }
        EXPECT_TRUE(validate_cloud(norm).ok());
    }
}
