#include "p3p/types.hpp"

#include <algorithm>
#include <cmath>

namespace p3p {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

ValidationReport validate_cloud(const PointCloud& pc) {
    ValidationReport report;
    if (pc.empty()) {
        report.violations.push_back({0, "N must be >= 1"});
        return report;
    }
    auto add = [&](std::size_t i, const char* what) {
        if (report.violations.size() < ValidationReport::kMaxReported)
            report.violations.push_back({i, what});
    };
    for (std::size_t i = 0; i < pc.size(); ++i) {
        const Point& p = pc.points[i];
        if (!in_unit(p.x) || !in_unit(p.y) || !in_unit(p.z)) add(i, "coordinate out of range");
        if (!in_unit(p.r) || !in_unit(p.g) || !in_unit(p.b)) add(i, "color out of range");
        if (report.violations.size() >= ValidationReport::kMaxReported) break;
    }
    return report;
}

PointCloud renormalize_cloud(const PointCloud& pc) {
    PointCloud out = pc;
    if (pc.empty()) return out;

    auto rescale = [&](double Point::*axis) {
        auto [lo_it, hi_it] = std::minmax_element(
            pc.points.begin(), pc.points.end(),
            [axis](const Point& a, const Point& b) { return a.*axis < b.*axis; });
        const double lo = (*lo_it).*axis;
        const double hi = (*hi_it).*axis;
        const double span = hi - lo;
        // Rounding noise on a flat axis (e.g. after a rotation) is not extent.
        const bool flat = span <= 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
        for (Point& p : out.points) {
            if (!flat) {
                // Endpoints are pinned so a second pass reproduces them bitwise.
                const double v = p.*axis;
                p.*axis = v == hi ? 1.0 : (v - lo) / span;
            } else {
                p.*axis = 0.5;
            }
        }
    };
    rescale(&Point::x);
    rescale(&Point::y);
    rescale(&Point::z);
    return out;
}

WeightTable::WeightTable(int patch_size, int embed_dim)
    : WeightTable(patch_size, embed_dim,
                  Matrix::Zero(static_cast<Eigen::Index>(patch_size) * patch_size * patch_size *
                                   kPatchFeatures,
                               embed_dim)) {}

WeightTable::WeightTable(int patch_size, int embed_dim, Matrix stacked)
    : patch_size_(patch_size), embed_dim_(embed_dim), stacked_(std::move(stacked)) {
    if (patch_size < 1 || embed_dim < 1)
        throw std::invalid_argument("WeightTable: patch size and embed dim must be >= 1");
    if (stacked_.rows() != cell_count() * kPatchFeatures || stacked_.cols() != embed_dim)
        throw std::invalid_argument("WeightTable: stacked matrix must be (a^3*12) x C");
}

}  // namespace p3p
