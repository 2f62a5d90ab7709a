#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "p3p/types.hpp"

namespace p3p {

struct TokenizerConfig {
    double voxel_size = 1.0 / 224.0;
    int space_size = 224;
    int patch_size = 16;
    int embed_dim = 384;
    int posembed_hidden = 128;

    int patches_per_axis() const { return space_size / patch_size; }
    // Throws std::invalid_argument when an invariant is broken.
    void validate() const;
};

// Linear(3 -> h), GELU, Linear(h -> C), applied to the min corner scaled by 1/S.
struct PosEmbedParams {
    Matrix w1;     // 3 x h
    RowVector b1;  // h
    Matrix w2;     // h x C
    RowVector b2;  // C

    static PosEmbedParams zeros(int hidden, int embed_dim);
    static PosEmbedParams random(int hidden, int embed_dim, std::mt19937_64& rng);
    int hidden() const { return static_cast<int>(w1.cols()); }
    int embed_dim() const { return static_cast<int>(w2.cols()); }
};

double gelu(double x);
double gelu_grad(double x);

/// floor(x / s) per axis, clamped to [0, S-1]. One representative per voxel: the point
/// with the largest feature sum, ties to the smallest source index.
VoxelGrid voxelize(const PointCloud& pc, double voxel_size, int space_size);
VoxelGrid voxelize(const PointCloud& pc, const TokenizerConfig& cfg);

/// Groups voxels into a^3 blocks keyed by their min corner. Patches come out
/// sorted by position, voxels inside a patch sorted by cell index.
PatchSet partition(const VoxelGrid& grid, int patch_size);

/// Appends the patch centroid and per-voxel offsets from it.
Patch graph_features(const VoxelPatch& patch);
std::vector<Patch> graph_features(const PatchSet& patches);

/// Sparse weight index of a voxel inside its patch.
constexpr std::int64_t swi_index(std::int64_t m, std::int64_t n, std::int64_t q, std::int64_t a) {
    return (m % a) + (n % a) * a + (q % a) * a * a;
}

/// Mean of v'_i W[d_i] over each patch. Positions and patch sizes are filled,
/// pos_embeddings left empty, valid_mask all true.
TokenSet embed_tokens(std::span<const Patch> patches, const WeightTable& w);

/// Same embedding for several samples at once: (sample, patch) is the scatter
/// key, so every sample comes back identical to a one-at-a-time call.
std::vector<TokenSet> embed_tokens_batched(std::span<const std::vector<Patch>> samples,
                                           const WeightTable& w);

RowVector positional_embed(const PatchPosition& position, const PosEmbedParams& params,
                           int space_size);
Matrix positional_embed(std::span<const PatchPosition> positions, const PosEmbedParams& params,
                        int space_size);

/// Dense-patch oracle: features indexed by cell d (a^3 x 12), every cell must
/// be occupied. Computes the token as one flattened product, the way a ViT
/// patch embedding does on a full patch.
RowVector dense_reference_embed(const Matrix& dense_features,
                                std::span<const std::uint8_t> occupied, const WeightTable& w);

/// voxelize -> partition -> graph_features -> embed_tokens -> positional_embed.
struct VpsResult {
    VoxelGrid grid;
    std::vector<Patch> patches;
    TokenSet tokens;
};
VpsResult vps_tokenize(const PointCloud& pc, const TokenizerConfig& cfg, const WeightTable& w,
                       const PosEmbedParams& pos);

WeightTable random_weight_table(int patch_size, int embed_dim, std::mt19937_64& rng);

}  // namespace p3p
