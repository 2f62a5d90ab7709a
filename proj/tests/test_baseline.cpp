#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "p3p/baseline.hpp"
#include "p3p/op_counter.hpp"

using namespace p3p;

namespace {

PointCloud line(std::initializer_list<double> xs) {
    PointCloud pc;
    for (double x : xs) pc.points.push_back({x, 0, 0, 0, 0, 0});
    return pc;
}

FKPConfig small_config() {
    FKPConfig cfg;
    cfg.num_centers = 8;
    cfg.neighbors = 6;
    cfg.embed_dim = 5;
    cfg.point_dims = {3, 8, 12};
    cfg.global_dims = {24, 16, 5};
    return cfg;
}

}  // namespace

TEST(Fps, LineExample) {
    EXPECT_EQ(fps(line({0, 0.1, 1.0}), 2), (std::vector<std::size_t>{0, 2}));
}

TEST(Fps, SingleCenterIsStart) {
    EXPECT_EQ(fps(line({0, 0.1, 1.0}), 1, 1), (std::vector<std::size_t>{1}));
}

TEST(Fps, AllPointsInRuleOrder) {
    // 0 first, then 1.0 (farthest), then 0.4 (0.16 from 0 vs 0.01 for 0.1), then 0.1
    EXPECT_EQ(fps(line({0, 0.1, 0.4, 1.0}), 4), (std::vector<std::size_t>{0, 3, 2, 1}));
}

TEST(Fps, TiesToSmallestIndex) {
    EXPECT_EQ(fps(line({0.5, 0.0, 1.0}), 2), (std::vector<std::size_t>{0, 1}));
}

TEST(Fps, DuplicatePointsAreNotReselected) {
    const auto sel = fps(line({0.2, 0.2, 0.2}), 3);
    EXPECT_EQ(sel, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Fps, Errors) {
    EXPECT_THROW(fps(line({0, 1}), 3), std::invalid_argument);
    EXPECT_THROW(fps(line({0, 1}), 1, 2), std::invalid_argument);
}

TEST(FpsProperty, SelectionIsFarthestEachStep) {
    std::mt19937_64 rng(3);
    const PointCloud pc = oracle::random_cloud(300, rng);
    const auto sel = fps(pc, 40);
    std::vector<oracle::Vec3> pts;
    for (const Point& p : pc.points) pts.push_back({p.x, p.y, p.z});
    for (std::size_t s = 1; s < sel.size(); ++s) {
        auto mind = [&](std::size_t i) {
            double best = 1e300;
            for (std::size_t t = 0; t < s; ++t) best = std::min(best, oracle::sq(pts[i], pts[sel[t]]));
            return best;
        };
        const double chosen = mind(sel[s]);
        for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_LE(mind(i), chosen);
    }
}

TEST(Knn, SelfIsNearest) {
    std::mt19937_64 rng(1);
    const PointCloud pc = oracle::random_cloud(50, rng);
    const auto groups = knn_group(pc, {3, 17}, 1);
    EXPECT_EQ(groups[0].members, (std::vector<std::size_t>{3}));
    EXPECT_EQ(groups[1].members, (std::vector<std::size_t>{17}));
    EXPECT_EQ(groups[1].offsets.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Knn, LineExample) {
    const auto groups = knn_group(line({0, 0.1, 1.0}), {0}, 2);
    EXPECT_EQ(groups[0].members, (std::vector<std::size_t>{0, 1}));
    EXPECT_DOUBLE_EQ(groups[0].offsets(1, 0), 0.1);
}

TEST(Knn, AllPoints) {
    const auto groups = knn_group(line({0, 0.1, 1.0, 0.5}), {2, 0}, 4);
    for (const auto& g : groups) {
        auto m = g.members;
        std::sort(m.begin(), m.end());
        EXPECT_EQ(m, (std::vector<std::size_t>{0, 1, 2, 3}));
    }
}

TEST(Knn, TiesToSmallestIndex) {
    const auto groups = knn_group(line({0.5, 0.6, 0.4, 0.6}), {0}, 2);
    EXPECT_EQ(groups[0].members, (std::vector<std::size_t>{0, 1}));
}

TEST(Knn, Errors) {
    EXPECT_THROW(knn_group(line({0, 1}), {0}, 3), std::invalid_argument);
    EXPECT_THROW(knn_group(line({0, 1}), {5}, 1), std::invalid_argument);
}

TEST(KnnProperty, MatchesSortOracle) {
    std::mt19937_64 rng(7);
    const PointCloud pc = oracle::random_cloud(400, rng);
    const auto groups = knn_group(pc, {0, 99, 250}, 12);
    for (const auto& g : groups) {
        std::vector<std::pair<double, std::size_t>> all;
        const Point& c = pc.points[g.center];
        for (std::size_t i = 0; i < pc.size(); ++i)
            all.push_back({oracle::sq({pc.points[i].x, pc.points[i].y, pc.points[i].z}, {c.x, c.y, c.z}), i});
        std::sort(all.begin(), all.end());
        for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(g.members[j], all[j].second);
    }
}

TEST(FkpTokenize, ZeroParamsGiveZeroTokens) {
    std::mt19937_64 rng(2);
    const FKPConfig cfg = small_config();
    const TokenSet ts = fkp_tokenize(oracle::random_cloud(100, rng), cfg, PointNetParams::zeros(cfg));
    EXPECT_EQ(ts.size(), 8u);
    EXPECT_EQ(ts.tokens.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FkpTokenize, SinglePointTracesZeroInput) {
    std::mt19937_64 rng(2);
    FKPConfig cfg = small_config();
    cfg.num_centers = 1;
    cfg.neighbors = 1;
    PointNetParams params = PointNetParams::random(cfg, rng);
    std::normal_distribution<double> nd;
    for (auto* layers : {&params.point_layers, &params.global_layers})
        for (auto& l : *layers)
            for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = nd(rng);
    const TokenSet ts = fkp_tokenize(PointCloud{{Point{0.3, 0.6, 0.9, 0.1, 0.2, 0.3}}}, cfg, params);
    ASSERT_EQ(ts.size(), 1u);
    // Zero coordinates: every point layer reduces to its bias.
    RowVector h = params.point_layers[0].bias.cwiseMax(0.0);
    h = (h * params.point_layers[1].weight + params.point_layers[1].bias).eval();
    RowVector x(2 * h.size());
    x << h, h;
    x = (x * params.global_layers[0].weight + params.global_layers[0].bias).cwiseMax(0.0).eval();
    x = (x * params.global_layers[1].weight + params.global_layers[1].bias).eval();
    EXPECT_LT((ts.tokens.row(0) - x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(ts.positions[0], (PatchPosition{67, 134, 201}));
}

TEST(FkpTokenize, PermutationGivesSameTokenMultiset) {
    std::mt19937_64 rng(5);
    const FKPConfig cfg = small_config();
    const PointNetParams params = PointNetParams::random(cfg, rng);
    const PointCloud pc = oracle::random_cloud(200, rng);
    std::vector<std::size_t> perm(pc.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    PointCloud shuffled;
    std::size_t start = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.points.push_back(pc.points[perm[i]]);
        if (perm[i] == 0) start = i;
    }
    const TokenSet a = fkp_tokenize(pc, cfg, params, 0);
    const TokenSet b = fkp_tokenize(shuffled, cfg, params, start);
    auto rows = [](const Matrix& m) {
        std::vector<std::vector<double>> r;
        for (Eigen::Index i = 0; i < m.rows(); ++i) r.emplace_back(m.row(i).data(), m.row(i).data() + m.cols());
        std::sort(r.begin(), r.end());
        return r;
    };
    const auto ra = rows(a.tokens), rb = rows(b.tokens);
    ASSERT_EQ(ra.size(), rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i)
        for (std::size_t c = 0; c < ra[i].size(); ++c) EXPECT_NEAR(ra[i][c], rb[i][c], 1e-6);
}

TEST(FkpTokenize, ProportionalCenters) {
    FKPConfig cfg;
    cfg.center_ratio = 32;
    EXPECT_EQ(cfg.centers_for(64000), 2000u);
    EXPECT_EQ(cfg.centers_for(10), 1u);
    cfg.center_ratio = 0;
    EXPECT_EQ(cfg.centers_for(10), 64u);
}

TEST(FkpTokenize, CountersFollowCostModel) {
    std::mt19937_64 rng(9);
    const FKPConfig cfg = small_config();
    const PointCloud pc = oracle::random_cloud(120, rng);
    OpCounter ops;
    {
        ScopedOpCounter scope(ops);
        (void)fkp_tokenize(pc, cfg, PointNetParams::random(cfg, rng));
    }
    EXPECT_EQ(ops.fps, 7u * 120 * 9);  // the start center needs no sweep
    EXPECT_EQ(ops.knn, 8u * 120 * 9);
    const std::uint64_t rows = 8 * 6;
    EXPECT_EQ(ops.pointnet, rows * (2 * 3 * 8 + 8) + rows * (2 * 8 * 12 + 12) + rows * (2 * 24 * 16 + 16) + 8 * (2 * 16 * 5 + 5));
    EXPECT_EQ(ops.vps_total(), 0u);
}

TEST(FkpConfig, Validation) {
    FKPConfig cfg = small_config();
    EXPECT_NO_THROW(cfg.validate());
    cfg.neighbors = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = small_config();
    cfg.global_dims = {20, 16, 5};
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
