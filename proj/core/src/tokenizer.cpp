#include "p3p/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "p3p/op_counter.hpp"

namespace p3p {

namespace {

void xavier_fill(Matrix& m, std::int64_t fan_in, std::int64_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

std::int32_t discretize(double v, double voxel_size, int space_size) {
    const double cell = std::floor(v / voxel_size);
    if (!(cell > 0.0)) return 0;  // also maps NaN to 0
    if (cell >= space_size - 1) return space_size - 1;
    return static_cast<std::int32_t>(cell);
}

std::int32_t floor_to_multiple(std::int32_t v, std::int32_t a) { return (v / a) * a; }

}  // namespace

void TokenizerConfig::validate() const {
    if (!(voxel_size > 0.0)) throw std::invalid_argument("tokenizer: voxel size must be positive");
    if (space_size < 1) throw std::invalid_argument("tokenizer: space size must be >= 1");
    if (patch_size < 1) throw std::invalid_argument("tokenizer: patch size must be >= 1");
    if (embed_dim < 1) throw std::invalid_argument("tokenizer: embed dim must be >= 1");
    if (posembed_hidden < 1) throw std::invalid_argument("tokenizer: posembed hidden must be >= 1");
    if (space_size % patch_size != 0)
        throw std::invalid_argument("tokenizer: space size " + std::to_string(space_size) +
                                    " not divisible by patch size " + std::to_string(patch_size));
    if (std::abs(voxel_size * space_size - 1.0) > 1e-9)
        throw std::invalid_argument("tokenizer: voxel size * space size must equal 1");
}

PosEmbedParams PosEmbedParams::zeros(int hidden, int embed_dim) {
    return {Matrix::Zero(3, hidden), RowVector::Zero(hidden), Matrix::Zero(hidden, embed_dim),
            RowVector::Zero(embed_dim)};
}

PosEmbedParams PosEmbedParams::random(int hidden, int embed_dim, std::mt19937_64& rng) {
    PosEmbedParams p = zeros(hidden, embed_dim);
    xavier_fill(p.w1, 3, hidden, rng);
    xavier_fill(p.w2, hidden, embed_dim, rng);
    return p;
}

namespace {
constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
constexpr double kInvSqrt2Pi = std::numbers::inv_sqrtpi * kInvSqrt2;
}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

VoxelGrid voxelize(const PointCloud& pc, double voxel_size, int space_size) {
    VoxelGrid grid;
    grid.voxel_size = voxel_size;
    grid.space_size = space_size;
    grid.voxels.reserve(pc.size());

    std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot;
    slot.reserve(pc.size());
    std::vector<double> best_sum;
    best_sum.reserve(pc.size());

    for (std::size_t i = 0; i < pc.size(); ++i) {
        const Point& p = pc.points[i];
        const VoxelKey key{discretize(p.x, voxel_size, space_size),
                           discretize(p.y, voxel_size, space_size),
                           discretize(p.z, voxel_size, space_size)};
        const double sum = p.feature_sum();
        auto [it, inserted] = slot.try_emplace(key, grid.voxels.size());
        if (inserted) {
            grid.voxels.push_back({key, p, i});
            best_sum.push_back(sum);
        } else if (sum > best_sum[it->second]) {
            // Strict comparison keeps the earliest index on ties.
            grid.voxels[it->second].feature = p;
            grid.voxels[it->second].source_index = i;
            best_sum[it->second] = sum;
        }
    }
    if (OpCounter* c = active_op_counter()) {
        // divide + floor per axis, five adds for the feature sum
        c->voxelize += static_cast<std::uint64_t>(pc.size()) * (3 * 2 + 5);
    }
    return grid;
}

VoxelGrid voxelize(const PointCloud& pc, const TokenizerConfig& cfg) {
    return voxelize(pc, cfg.voxel_size, cfg.space_size);
}

PatchSet partition(const VoxelGrid& grid, int patch_size) {
    if (patch_size < 1) throw std::invalid_argument("partition: patch size must be >= 1");
    const std::int32_t a = patch_size;

    std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot;
    PatchSet patches;
    for (const Voxel& v : grid.voxels) {
        const VoxelKey corner{floor_to_multiple(v.key.m, a), floor_to_multiple(v.key.n, a),
                              floor_to_multiple(v.key.q, a)};
        auto [it, inserted] = slot.try_emplace(corner, patches.size());
        if (inserted) patches.push_back({{corner.m, corner.n, corner.q}, {}, {}});
        VoxelPatch& patch = patches[it->second];
        patch.voxels.push_back(v.feature);
        patch.cell_indices.push_back(static_cast<std::int32_t>(swi_index(v.key.m, v.key.n, v.key.q, a)));
    }

    std::sort(patches.begin(), patches.end(),
              [](const VoxelPatch& l, const VoxelPatch& r) { return l.position < r.position; });
    for (VoxelPatch& patch : patches) {
        std::vector<std::size_t> order(patch.voxels.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
            return patch.cell_indices[l] < patch.cell_indices[r];
        });
        VoxelPatch sorted{patch.position, {}, {}};
        sorted.voxels.reserve(order.size());
        sorted.cell_indices.reserve(order.size());
        for (std::size_t i : order) {
            sorted.voxels.push_back(patch.voxels[i]);
            sorted.cell_indices.push_back(patch.cell_indices[i]);
        }
        patch = std::move(sorted);
    }
    return patches;
}

Patch graph_features(const VoxelPatch& patch) {
    const std::size_t count = patch.voxels.size();
    if (count == 0) throw std::invalid_argument("graph_features: empty patch");

    double cx = 0, cy = 0, cz = 0;
    for (const Point& p : patch.voxels) {
        cx += p.x;
        cy += p.y;
        cz += p.z;
    }
    cx /= static_cast<double>(count);
    cy /= static_cast<double>(count);
    cz /= static_cast<double>(count);

    Patch out;
    out.position = patch.position;
    out.cell_indices = patch.cell_indices;
    out.voxels.reserve(count);
    for (const Point& p : patch.voxels) {
        out.voxels.push_back({p.x, p.y, p.z, p.r, p.g, p.b, p.x - cx, p.y - cy, p.z - cz, cx, cy, cz});
    }
    if (OpCounter* c = active_op_counter()) c->graph += 6 * count + 3;
    return out;
}

std::vector<Patch> graph_features(const PatchSet& patches) {
    std::vector<Patch> out;
    out.reserve(patches.size());
    for (const VoxelPatch& p : patches) out.push_back(graph_features(p));
    return out;
}

namespace {

// Scatter-mean over segments: row s of the result is the mean of
// features[i] * W[cells[i]] over all i with segment[i] == s. Rows are
// accumulated in input order.
Matrix scatter_mean_embed(const std::vector<const PatchFeatures*>& features,
                          const std::vector<std::int32_t>& cells,
                          const std::vector<std::size_t>& segment, std::size_t segments,
                          const WeightTable& w) {
    const int embed = w.embed_dim();
    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(segments), embed);
    std::vector<std::int64_t> counts(segments, 0);
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::int64_t d = cells[i];
        if (d < 0 || d >= w.cell_count())
            throw std::out_of_range("embed_tokens: cell index " + std::to_string(d) +
                                    " outside [0, a^3)");
        Eigen::Map<const Eigen::Matrix<double, 1, kPatchFeatures>> v(features[i]->data());
        sums.row(static_cast<Eigen::Index>(segment[i])).noalias() += v * w.cell(d);
        ++counts[segment[i]];
    }
    for (std::size_t s = 0; s < segments; ++s) {
        if (counts[s] > 0) sums.row(static_cast<Eigen::Index>(s)) /= static_cast<double>(counts[s]);
    }
    if (OpCounter* c = active_op_counter()) {
        c->swi += static_cast<std::uint64_t>(features.size()) * kPatchFeatures * embed * ops::kMac +
                  static_cast<std::uint64_t>(segments) * embed;
    }
    return sums;
}

// Queues one patch for the scatter in ascending cell-index order.
void append_patch(const Patch& patch, std::size_t seg, std::vector<const PatchFeatures*>& features,
                  std::vector<std::int32_t>& cells, std::vector<std::size_t>& segment) {
    if (patch.size() == 0) throw std::invalid_argument("embed_tokens: empty patch");
    if (patch.cell_indices.size() != patch.size())
        throw std::invalid_argument("embed_tokens: cell index count does not match voxel count");
    std::vector<std::size_t> order(patch.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!std::is_sorted(patch.cell_indices.begin(), patch.cell_indices.end())) {
        std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
            return patch.cell_indices[l] < patch.cell_indices[r];
        });
    }
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t i = order[k];
        if (k > 0 && patch.cell_indices[i] == cells.back())
            throw std::invalid_argument("embed_tokens: duplicate cell index in patch");
        features.push_back(&patch.voxels[i]);
        cells.push_back(patch.cell_indices[i]);
        segment.push_back(seg);
    }
}

TokenSet token_shell(std::span<const Patch> patches, int embed_dim) {
    TokenSet ts;
    ts.tokens = Matrix::Zero(static_cast<Eigen::Index>(patches.size()), embed_dim);
    ts.positions.reserve(patches.size());
    ts.patch_sizes.reserve(patches.size());
    for (const Patch& p : patches) {
        ts.positions.push_back(p.position);
        ts.patch_sizes.push_back(static_cast<std::int32_t>(p.size()));
    }
    ts.valid_mask.assign(patches.size(), 1);
    return ts;
}

}  // namespace

TokenSet embed_tokens(std::span<const Patch> patches, const WeightTable& w) {
    std::vector<const PatchFeatures*> features;
    std::vector<std::int32_t> cells;
    std::vector<std::size_t> segment;
    for (std::size_t p = 0; p < patches.size(); ++p)
        append_patch(patches[p], p, features, cells, segment);
    TokenSet ts = token_shell(patches, w.embed_dim());
    ts.tokens = scatter_mean_embed(features, cells, segment, patches.size(), w);
    return ts;
}

std::vector<TokenSet> embed_tokens_batched(std::span<const std::vector<Patch>> samples,
                                           const WeightTable& w) {
    std::vector<const PatchFeatures*> features;
    std::vector<std::int32_t> cells;
    std::vector<std::size_t> segment;
    std::vector<std::size_t> offsets;
    std::size_t segments = 0;
    for (const auto& patches : samples) {
        offsets.push_back(segments);
        for (std::size_t p = 0; p < patches.size(); ++p)
            append_patch(patches[p], segments + p, features, cells, segment);
        segments += patches.size();
    }
    const Matrix all = scatter_mean_embed(features, cells, segment, segments, w);

    std::vector<TokenSet> out;
    out.reserve(samples.size());
    for (std::size_t b = 0; b < samples.size(); ++b) {
        TokenSet ts = token_shell(samples[b], w.embed_dim());
        ts.tokens = all.middleRows(static_cast<Eigen::Index>(offsets[b]),
                                   static_cast<Eigen::Index>(samples[b].size()));
        out.push_back(std::move(ts));
    }
    return out;
}

RowVector positional_embed(const PatchPosition& position, const PosEmbedParams& params,
                           int space_size) {
    const PatchPosition one[1] = {position};
    return positional_embed(std::span<const PatchPosition>(one), params, space_size).row(0);
}

Matrix positional_embed(std::span<const PatchPosition> positions, const PosEmbedParams& params,
                        int space_size) {
    const auto count = static_cast<Eigen::Index>(positions.size());
    Matrix coords(count, 3);
    for (Eigen::Index i = 0; i < count; ++i)
        for (int k = 0; k < 3; ++k)
            coords(i, k) = static_cast<double>(positions[static_cast<std::size_t>(i)][k]) / space_size;

    Matrix hidden = coords * params.w1;
    hidden.rowwise() += params.b1;
    hidden = hidden.unaryExpr([](double v) { return gelu(v); });
    Matrix out = hidden * params.w2;
    out.rowwise() += params.b2;

    if (OpCounter* c = active_op_counter()) {
        const std::uint64_t h = static_cast<std::uint64_t>(params.hidden());
        const std::uint64_t e = static_cast<std::uint64_t>(params.embed_dim());
        c->posembed += static_cast<std::uint64_t>(count) * (ops::kMac * 3 * h + ops::kMac * h * e + h + e);
    }
    return out;
}

RowVector dense_reference_embed(const Matrix& dense_features, std::span<const std::uint8_t> occupied,
                                const WeightTable& w) {
    const std::int64_t cells = w.cell_count();
    if (dense_features.rows() != cells || dense_features.cols() != kPatchFeatures)
        throw std::invalid_argument("dense_reference_embed: features must be a^3 x 12");
    if (static_cast<std::int64_t>(occupied.size()) != cells)
        throw std::invalid_argument("dense_reference_embed: occupancy must have a^3 entries");
    for (std::int64_t d = 0; d < cells; ++d)
        if (!occupied[static_cast<std::size_t>(d)])
            throw std::invalid_argument("dense_reference_embed: cell " + std::to_string(d) +
                                        " unoccupied; oracle needs a full patch");

    // Row-major storage makes the a^3 x 12 block one contiguous vector in d order.
    Eigen::Map<const RowVector> flat(dense_features.data(), cells * kPatchFeatures);
    RowVector token = flat * w.stacked();
    return token / static_cast<double>(cells);
}

VpsResult vps_tokenize(const PointCloud& pc, const TokenizerConfig& cfg, const WeightTable& w,
                       const PosEmbedParams& pos) {
    cfg.validate();
    if (w.patch_size() != cfg.patch_size || w.embed_dim() != cfg.embed_dim)
        throw std::invalid_argument("vps_tokenize: weight table does not match config");
    VpsResult r;
    r.grid = voxelize(pc, cfg);
    r.patches = graph_features(partition(r.grid, cfg.patch_size));
    r.tokens = embed_tokens(r.patches, w);
    r.tokens.pos_embeddings = positional_embed(r.tokens.positions, pos, cfg.space_size);
    return r;
}

WeightTable random_weight_table(int patch_size, int embed_dim, std::mt19937_64& rng) {
    WeightTable w(patch_size, embed_dim);
    xavier_fill(w.stacked(), kPatchFeatures, embed_dim, rng);
    return w;
}

}  // namespace p3p
