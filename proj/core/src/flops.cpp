#include "p3p/flops.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "p3p/op_counter.hpp"
#include "p3p/synthetic.hpp"

namespace p3p {

std::uint64_t FlopReport::stage(const std::string& name) const {
    for (const auto& [k, v] : stages)
        if (k == name) return v;
    throw std::out_of_range("no stage named '" + name + "'");
}

FlopReport vps_flops(std::uint64_t n, std::uint64_t m, std::uint64_t p, std::uint64_t a, std::uint64_t c,
                     std::uint64_t h) {
    if (n == 0) throw std::invalid_argument("vps_flops: N must be >= 1");
    if (m > n) throw std::invalid_argument("vps_flops: M must not exceed N");
    if (p > m) throw std::invalid_argument("vps_flops: P must not exceed M");
    if (a == 0 || c == 0 || h == 0) throw std::invalid_argument("vps_flops: a, C and h must be >= 1");
    FlopReport r;
    r.stages = {{"voxelize", 6 * n},
                {"graph", 6 * m + 3 * p},
                {"swi", 24 * m * c + p * c},
                {"posembed", p * (2 * 3 * h + 2 * h * c)}};
    r.parameters = {{"N", n}, {"M", m}, {"P", p}, {"a", a}, {"C", c}, {"h", h}};
    for (const auto& [name, v] : r.stages) r.total += v;
    return r;
}

FlopReport fkp_flops(std::uint64_t n, std::uint64_t g, std::uint64_t k, std::uint64_t c,
                     const std::vector<int>& point_dims, const std::vector<int>& global_dims) {
    if (n == 0 || g == 0 || k == 0 || c == 0) throw std::invalid_argument("fkp_flops: N, G, k, C must be >= 1");
    if (g > n) throw std::invalid_argument("fkp_flops: G must not exceed N");
    if (k > n) throw std::invalid_argument("fkp_flops: k must not exceed N");
    if (point_dims.size() < 2 || global_dims.size() < 2) throw std::invalid_argument("fkp_flops: bad MLP dims");

    std::uint64_t per_point = 0;
    for (std::size_t i = 0; i + 1 < point_dims.size(); ++i)
        per_point += static_cast<std::uint64_t>(point_dims[i]) * static_cast<std::uint64_t>(point_dims[i + 1]);
    for (std::size_t i = 0; i + 2 < global_dims.size(); ++i)
        per_point += static_cast<std::uint64_t>(global_dims[i]) * static_cast<std::uint64_t>(global_dims[i + 1]);
    const std::uint64_t per_group = static_cast<std::uint64_t>(global_dims[global_dims.size() - 2]) * c;

    FlopReport r;
    r.stages = {{"fps", 9 * g * n}, {"knn", 9 * g * n}, {"pointnet", g * k * 2 * per_point + g * 2 * per_group}};
    r.parameters = {{"N", n}, {"G", g}, {"k", k}, {"C", c}};
    for (const auto& [name, v] : r.stages) r.total += v;
    return r;
}

FlopReport fkp_flops(std::uint64_t n, std::uint64_t g, std::uint64_t k, std::uint64_t c) {
    return fkp_flops(n, g, k, c, {3, 128, 256}, {512, 512, static_cast<int>(c)});
}

BenchConfig BenchConfig::defaults() {
    BenchConfig cfg;
    cfg.fkp.center_ratio = 32;
    cfg.fkp.neighbors = 32;
    cfg.fkp.embed_dim = cfg.vps.embed_dim;
    cfg.fkp.global_dims.back() = cfg.vps.embed_dim;
    return cfg;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("loglog_slope: size mismatch");
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / sxx;
}

BenchResult scaling_bench(const std::vector<std::uint64_t>& sizes, const BenchConfig& cfg) {
    cfg.vps.validate();
    cfg.fkp.validate();
    using Clock = std::chrono::steady_clock;
    auto ms_since = [](Clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    };

    std::mt19937_64 rng(cfg.seed);
    const WeightTable table = random_weight_table(cfg.vps.patch_size, cfg.vps.embed_dim, rng);
    const PosEmbedParams pos = PosEmbedParams::random(cfg.vps.posembed_hidden, cfg.vps.embed_dim, rng);
    const PointNetParams pointnet = PointNetParams::random(cfg.fkp, rng);

    BenchResult result;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const std::uint64_t n = sizes[i];
        if (i > 0 && n <= sizes[i - 1]) throw std::invalid_argument("scaling_bench: sizes must be ascending");
        const PointCloud pc = uniform_cube_cloud(n, cfg.seed + n);

        BenchRow row;
        row.n = n;
        OpCounter vps_ops;
        auto t0 = Clock::now();
        VpsResult vps;
        {
            ScopedOpCounter scope(vps_ops);
            vps = vps_tokenize(pc, cfg.vps, table, pos);
        }
        row.vps_ms = ms_since(t0);
        row.voxels = vps.grid.size();
        row.patches = vps.tokens.size();
        row.vps_measured = vps_ops.vps_total();
        row.vps_embed_measured = vps_ops.voxelize + vps_ops.graph + vps_ops.swi;
        row.vps_formula = vps_flops(n, row.voxels, row.patches, static_cast<std::uint64_t>(cfg.vps.patch_size),
                                    static_cast<std::uint64_t>(cfg.vps.embed_dim),
                                    static_cast<std::uint64_t>(cfg.vps.posembed_hidden))
                              .total;

        OpCounter fkp_ops;
        t0 = Clock::now();
        {
            ScopedOpCounter scope(fkp_ops);
            (void)fkp_tokenize(pc, cfg.fkp, pointnet);
        }
        row.fkp_ms = ms_since(t0);
        row.centers = cfg.fkp.centers_for(n);
        row.fkp_measured = fkp_ops.fkp_total();
        row.fkp_cluster_measured = fkp_ops.fps + fkp_ops.knn;
        row.fkp_formula = fkp_flops(n, row.centers, cfg.fkp.neighbors, static_cast<std::uint64_t>(cfg.fkp.embed_dim),
                                    cfg.fkp.point_dims, cfg.fkp.global_dims)
                              .total;
        result.rows.push_back(row);
    }

    std::vector<double> xs, vps, fkp, embed, cluster;
    for (const BenchRow& r : result.rows) {
        xs.push_back(static_cast<double>(r.n));
        vps.push_back(static_cast<double>(r.vps_measured));
        fkp.push_back(static_cast<double>(r.fkp_measured));
        embed.push_back(static_cast<double>(r.vps_embed_measured));
        cluster.push_back(static_cast<double>(r.fkp_cluster_measured));
    }
    result.vps_slope = loglog_slope(xs, vps);
    result.fkp_slope = loglog_slope(xs, fkp);
    result.vps_embed_slope = loglog_slope(xs, embed);
    result.fkp_cluster_slope = loglog_slope(xs, cluster);
    return result;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool timings) {
    out << kBenchCsvHeader << '\n';
    char buf[64];
    for (const BenchRow& r : rows) {
        out << r.n << ',' << r.vps_measured << ',' << r.vps_formula << ',' << r.fkp_measured << ','
            << r.fkp_formula << ',';
        std::snprintf(buf, sizeof buf, "%.3f,%.3f", timings ? r.vps_ms : 0.0, timings ? r.fkp_ms : 0.0);
        out << buf << '\n';
    }
}

}  // namespace p3p
