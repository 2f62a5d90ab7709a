#include "p3p/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>

#include "p3p/op_counter.hpp"

namespace p3p {

namespace {

double squared_distance(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

std::vector<DenseLayer> make_layers(const std::vector<int>& dims) {
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        layers.push_back({Matrix::Zero(dims[i], dims[i + 1]), RowVector::Zero(dims[i + 1])});
    return layers;
}

void count_dense(std::uint64_t rows, const DenseLayer& layer) {
    if (OpCounter* c = active_op_counter()) {
        const auto in = static_cast<std::uint64_t>(layer.weight.rows());
        const auto out = static_cast<std::uint64_t>(layer.weight.cols());
        c->pointnet += rows * (ops::kMac * in * out + out);
    }
}

Matrix dense(const Matrix& x, const DenseLayer& layer, bool relu) {
    Matrix y = x * layer.weight;
    y.rowwise() += layer.bias;
    if (relu) y = y.cwiseMax(0.0);
    count_dense(static_cast<std::uint64_t>(x.rows()), layer);
    return y;
}

// Max over consecutive blocks of `group` rows.
Matrix group_max(const Matrix& x, Eigen::Index group) {
    const Eigen::Index groups = x.rows() / group;
    Matrix out(groups, x.cols());
    for (Eigen::Index g = 0; g < groups; ++g)
        out.row(g) = x.middleRows(g * group, group).colwise().maxCoeff();
    return out;
}

// Rows are G blocks of k re-centered points; returns one token per block.
Matrix pointnet_groups(const Matrix& offsets, Eigen::Index k, const PointNetParams& params) {
    Matrix h = offsets;
    for (std::size_t i = 0; i < params.point_layers.size(); ++i)
        h = dense(h, params.point_layers[i], i + 1 < params.point_layers.size());

    const Matrix pooled = group_max(h, k);
    Matrix joined(h.rows(), pooled.cols() + h.cols());
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
        joined.row(r).head(pooled.cols()) = pooled.row(r / k);
        joined.row(r).tail(h.cols()) = h.row(r);
    }

    const std::size_t last = params.global_layers.size() - 1;
    for (std::size_t i = 0; i < last; ++i) joined = dense(joined, params.global_layers[i], true);
    return dense(group_max(joined, k), params.global_layers[last], false);
}

}  // namespace

std::size_t FKPConfig::centers_for(std::size_t n) const {
    if (center_ratio > 0) return std::max<std::size_t>(1, n / center_ratio);
    return num_centers;
}

void FKPConfig::validate() const {
    if (center_ratio == 0 && num_centers < 1) throw std::invalid_argument("fkp: G must be >= 1");
    if (neighbors < 1) throw std::invalid_argument("fkp: k must be >= 1");
    if (point_dims.size() < 2 || point_dims.front() != 3)
        throw std::invalid_argument("fkp: point stage must start at 3 inputs");
    if (global_dims.size() < 2 || global_dims.front() != 2 * point_dims.back())
        throw std::invalid_argument("fkp: global stage input must be twice the point stage output");
    if (global_dims.back() != embed_dim)
        throw std::invalid_argument("fkp: global stage must end at embed dim");
}

PointNetParams PointNetParams::zeros(const FKPConfig& cfg) {
    cfg.validate();
    return {make_layers(cfg.point_dims), make_layers(cfg.global_dims)};
}

PointNetParams PointNetParams::random(const FKPConfig& cfg, std::mt19937_64& rng) {
    PointNetParams p = zeros(cfg);
    auto fill = [&](DenseLayer& layer) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    };
    for (auto& l : p.point_layers) fill(l);
    for (auto& l : p.global_layers) fill(l);
    return p;
}

std::vector<std::size_t> fps(const PointCloud& pc, std::size_t count, std::size_t start_index) {
    const std::size_t n = pc.size();
    if (count > n)
        throw std::invalid_argument("fps: requested " + std::to_string(count) + " centers from " +
                                    std::to_string(n) + " points");
    if (count == 0) return {};
    if (start_index >= n) throw std::invalid_argument("fps: start index out of range");

    std::vector<std::size_t> selected{start_index};
    selected.reserve(count);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::vector<std::uint8_t> taken(n, 0);
    taken[start_index] = 1;
    std::uint64_t visits = 0;
    while (selected.size() < count) {
        const Point& last = pc.points[selected.back()];
        std::size_t best = 0;
        double best_dist = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = squared_distance(pc.points[i], last);
            if (d < nearest[i]) nearest[i] = d;
            // Strict > keeps the smallest index among equally far points.
            if (!taken[i] && nearest[i] > best_dist) {
                best_dist = nearest[i];
                best = i;
            }
        }
        visits += n;
        taken[best] = 1;
        selected.push_back(best);
    }
    if (OpCounter* c = active_op_counter()) c->fps += visits * (ops::kSquaredDistance3 + ops::kCompare);
    return selected;
}

std::vector<KnnGroup> knn_group(const PointCloud& pc, const std::vector<std::size_t>& centers,
                                std::size_t k) {
    const std::size_t n = pc.size();
    if (k > n)
        throw std::invalid_argument("knn_group: k = " + std::to_string(k) + " exceeds N = " +
                                    std::to_string(n));
    if (k == 0) throw std::invalid_argument("knn_group: k must be >= 1");

    using Entry = std::pair<double, std::size_t>;
    std::vector<KnnGroup> groups;
    groups.reserve(centers.size());
    for (std::size_t center : centers) {
        if (center >= n) throw std::invalid_argument("knn_group: center index out of range");
        const Point& c = pc.points[center];
        // Max-heap on (distance, index) holding the k best seen so far.
        std::priority_queue<Entry> heap;
        for (std::size_t i = 0; i < n; ++i) {
            const Entry e{squared_distance(pc.points[i], c), i};
            if (heap.size() < k) {
                heap.push(e);
            } else if (e < heap.top()) {
                heap.pop();
                heap.push(e);
            }
        }
        std::vector<Entry> picked;
        picked.reserve(k);
        while (!heap.empty()) {
            picked.push_back(heap.top());
            heap.pop();
        }
        std::reverse(picked.begin(), picked.end());

        KnnGroup g;
        g.center = center;
        g.offsets.resize(static_cast<Eigen::Index>(k), 3);
        for (std::size_t j = 0; j < k; ++j) {
            const Point& p = pc.points[picked[j].second];
            g.members.push_back(picked[j].second);
            g.offsets(static_cast<Eigen::Index>(j), 0) = p.x - c.x;
            g.offsets(static_cast<Eigen::Index>(j), 1) = p.y - c.y;
            g.offsets(static_cast<Eigen::Index>(j), 2) = p.z - c.z;
        }
        groups.push_back(std::move(g));
    }
    if (OpCounter* c = active_op_counter())
        c->knn += static_cast<std::uint64_t>(centers.size()) * n * (ops::kSquaredDistance3 + ops::kCompare);
    return groups;
}

RowVector pointnet_embed(const Matrix& offsets, const PointNetParams& params) {
    if (offsets.cols() != 3 || offsets.rows() < 1)
        throw std::invalid_argument("pointnet_embed: expected a k x 3 group");
    return pointnet_groups(offsets, offsets.rows(), params).row(0);
}

TokenSet fkp_tokenize(const PointCloud& pc, const FKPConfig& cfg, const PointNetParams& params,
                      std::size_t start_index) {
    cfg.validate();
    const std::size_t g = cfg.centers_for(pc.size());
    const std::size_t k = cfg.neighbors;
    const auto centers = fps(pc, g, start_index);
    const auto groups = knn_group(pc, centers, k);

    Matrix stacked(static_cast<Eigen::Index>(g * k), 3);
    for (std::size_t i = 0; i < groups.size(); ++i)
        stacked.middleRows(static_cast<Eigen::Index>(i * k), static_cast<Eigen::Index>(k)) = groups[i].offsets;

    TokenSet ts;
    ts.tokens = pointnet_groups(stacked, static_cast<Eigen::Index>(k), params);
    for (std::size_t center : centers) {
        const Point& p = pc.points[center];
        auto cell = [&](double v) {
            const double f = std::floor(v / cfg.voxel_size);
            return static_cast<std::int32_t>(std::clamp(f, 0.0, static_cast<double>(cfg.space_size - 1)));
        };
        ts.positions.push_back({cell(p.x), cell(p.y), cell(p.z)});
        ts.patch_sizes.push_back(static_cast<std::int32_t>(k));
    }
    ts.valid_mask.assign(g, 1);
    return ts;
}

}  // namespace p3p
