#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "p3p/baseline.hpp"
#include "p3p/tokenizer.hpp"

namespace p3p {

struct FlopReport {
    std::vector<std::pair<std::string, std::uint64_t>> stages;
    std::vector<std::pair<std::string, std::uint64_t>> parameters;
    std::uint64_t total = 0;

    std::uint64_t stage(const std::string& name) const;
};

// Analytic accounting. V-P-S: voxelize 6N, graph 6M + 3P, swi 24MC + PC,
// posembed P(6h + 2hC). F-K-P: fps 9GN, knn 9GN, pointnet 2 FLOPs per MAC
// with the last global layer applied once per group. Hashing, comparisons
// in V-P-S, pooling and activations count zero.
FlopReport vps_flops(std::uint64_t n, std::uint64_t m, std::uint64_t p, std::uint64_t a, std::uint64_t c,
                     std::uint64_t h);
FlopReport fkp_flops(std::uint64_t n, std::uint64_t g, std::uint64_t k, std::uint64_t c,
                     const std::vector<int>& point_dims, const std::vector<int>& global_dims);
FlopReport fkp_flops(std::uint64_t n, std::uint64_t g, std::uint64_t k, std::uint64_t c);

struct BenchRow {
    std::uint64_t n = 0;
    std::uint64_t vps_measured = 0, vps_formula = 0;
    std::uint64_t fkp_measured = 0, fkp_formula = 0;
    double vps_ms = 0, fkp_ms = 0;
    // Shape of the run, kept for diagnostics.
    std::uint64_t voxels = 0, patches = 0, centers = 0;
    std::uint64_t vps_embed_measured = 0;   // voxelize + graph + swi
    std::uint64_t fkp_cluster_measured = 0; // fps + knn
};

struct BenchConfig {
    TokenizerConfig vps;
    FKPConfig fkp;  // center_ratio drives G
    std::uint64_t seed = 0;

    static BenchConfig defaults();  // full-scale tokenizer, G = N/32, k = 32
};

struct BenchResult {
    std::vector<BenchRow> rows;
    double vps_slope = 0, fkp_slope = 0;
    double vps_embed_slope = 0, fkp_cluster_slope = 0;
};

BenchResult scaling_bench(const std::vector<std::uint64_t>& sizes, const BenchConfig& cfg);

/// Least-squares slope of log(y) against log(x); NaN for fewer than two points.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

inline constexpr const char* kBenchCsvHeader = "n,vps_measured,vps_formula,fkp_measured,fkp_formula,vps_ms,fkp_ms";

/// CSV with LF endings. With `timings` off the millisecond columns are 0 so
/// reruns are byte-identical.
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool timings = true);

}  // namespace p3p
