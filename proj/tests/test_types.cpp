#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "p3p/types.hpp"

using namespace p3p;

TEST(ValidateCloud, BoundaryPointIsValid) {
    EXPECT_TRUE(validate_cloud(PointCloud{{Point{}}}).ok());
}

TEST(ValidateCloud, CoordinateOutOfRange) {
    const auto report = validate_cloud(PointCloud{{Point{1.5, 0, 0, 0, 0, 0}}});
    ASSERT_EQ(report.violations.size(), 1u);
    EXPECT_EQ(report.violations[0].message, "coordinate out of range");
    EXPECT_EQ(report.violations[0].point_index, 0u);
}

TEST(ValidateCloud, EmptyCloud) {
    const auto report = validate_cloud(PointCloud{});
    ASSERT_EQ(report.violations.size(), 1u);
    EXPECT_EQ(report.violations[0].message, "N must be >= 1");
}

TEST(ValidateCloud, ColorOutOfRangeAndNaN) {
    PointCloud pc{{Point{0, 0, 0, -0.1, 0, 0}, Point{std::nan(""), 0, 0, 0, 0, 0}}};
    const auto report = validate_cloud(pc);
    ASSERT_EQ(report.violations.size(), 2u);
    EXPECT_EQ(report.violations[0].message, "color out of range");
    EXPECT_EQ(report.violations[1].point_index, 1u);
}

TEST(ValidateCloud, ReportsAtMostTen) {
    PointCloud pc;
    for (int i = 0; i < 25; ++i) pc.points.push_back({2, 0, 0, 0, 0, 0});
    const auto report = validate_cloud(pc);
    EXPECT_EQ(report.violations.size(), ValidationReport::kMaxReported);
    EXPECT_EQ(report.violations.back().point_index, 9u);
}

TEST(Renormalize, SpanningCloudUnchanged) {
    PointCloud pc{{Point{0, 0, 0, 0.1, 0.2, 0.3}, Point{1, 1, 1, 0.4, 0.5, 0.6}, Point{0.25, 0.5, 0.75, 0, 0, 0}}};
    const PointCloud out = renormalize_cloud(pc);
    for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_EQ(out.points[i], pc.points[i]);
}

TEST(Renormalize, MinMax) {
    const PointCloud out = renormalize_cloud(PointCloud{{Point{2, 0, 7, 0, 0, 0}, Point{4, 1, 7, 0, 0, 0}}});
    EXPECT_DOUBLE_EQ(out.points[0].x, 0.0);
    EXPECT_DOUBLE_EQ(out.points[1].x, 1.0);
    EXPECT_DOUBLE_EQ(out.points[0].z, 0.5);
    EXPECT_DOUBLE_EQ(out.points[1].z, 0.5);
}

TEST(Renormalize, ColorsUntouched) {
    const PointCloud out = renormalize_cloud(PointCloud{{Point{-3, 5, 2, 0.9, 0.1, 0.3}, Point{3, 9, 4, 0.2, 0.8, 0.7}}});
    EXPECT_EQ(out.points[0].r, 0.9);
    EXPECT_EQ(out.points[1].b, 0.7);
}

TEST(RenormalizeProperty, IdempotentAndValid) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 50.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        PointCloud pc;
        const int count = 1 + trial % 40;
        for (int i = 0; i < count; ++i) pc.points.push_back({n(rng), n(rng), trial % 7 == 0 ? 3.0 : n(rng), u(rng), u(rng), u(rng)});
        const PointCloud once = renormalize_cloud(pc);
        const PointCloud twice = renormalize_cloud(once);
        ASSERT_TRUE(validate_cloud(once).ok());
        for (std::size_t i = 0; i < pc.size(); ++i) {
            EXPECT_NEAR(once.points[i].x, twice.points[i].x, 1e-12);
            EXPECT_NEAR(once.points[i].y, twice.points[i].y, 1e-12);
            EXPECT_NEAR(once.points[i].z, twice.points[i].z, 1e-12);
            if (count > 1 && trial % 7 != 0) EXPECT_EQ(once.points[i], twice.points[i]);
        }
    }
}

TEST(WeightTableShape, CellsAreTwelveByC) {
    const WeightTable w(16, 384);
    EXPECT_EQ(w.cell_count(), 4096);
    EXPECT_EQ(w.stacked().rows(), 4096 * 12);
    EXPECT_EQ(w.cell(4095).rows(), 12);
    EXPECT_EQ(w.cell(0).cols(), 384);
    EXPECT_THROW(WeightTable(2, 3, Matrix::Zero(95, 3)), std::invalid_argument);
    EXPECT_THROW(WeightTable(0, 3), std::invalid_argument);
}
