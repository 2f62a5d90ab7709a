#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "p3p/types.hpp"

namespace p3p {

// Farthest-point-sampling + KNN + mini-PointNet tokenizer used as the
// comparison baseline.
struct FKPConfig {
    std::size_t num_centers = 64;   // G, used when center_ratio == 0
    std::size_t center_ratio = 0;   // when > 0, G = max(1, N / center_ratio)
    std::size_t neighbors = 32;     // k
    int embed_dim = 384;
    std::vector<int> point_dims{3, 128, 256};
    std::vector<int> global_dims{512, 512, 384};
    double voxel_size = 1.0 / 224.0;  // discretizes center positions
    int space_size = 224;

    std::size_t centers_for(std::size_t n) const;
    void validate() const;
};

struct DenseLayer {
    Matrix weight;  // in x out
    RowVector bias;
};

// Point stage: every layer per point, ReLU between layers. The group max of
// the last point layer is concatenated in front of each point feature. Global
// stage: all but its last layer per point, max-pool, then the last layer once
// per group.
struct PointNetParams {
    std::vector<DenseLayer> point_layers;
    std::vector<DenseLayer> global_layers;

    static PointNetParams zeros(const FKPConfig& cfg);
    static PointNetParams random(const FKPConfig& cfg, std::mt19937_64& rng);
};

/// Greedy farthest point sampling on (x,y,z). Throws if count > N or
/// start_index >= N.
std::vector<std::size_t> fps(const PointCloud& pc, std::size_t count, std::size_t start_index = 0);

struct KnnGroup {
    std::size_t center = 0;                // point index of the center
    std::vector<std::size_t> members;      // ascending (distance, index)
    Matrix offsets;                        // k x 3, member xyz minus center xyz
};

std::vector<KnnGroup> knn_group(const PointCloud& pc, const std::vector<std::size_t>& centers,
                                std::size_t k);

RowVector pointnet_embed(const Matrix& offsets, const PointNetParams& params);

TokenSet fkp_tokenize(const PointCloud& pc, const FKPConfig& cfg, const PointNetParams& params,
                      std::size_t start_index = 0);

}  // namespace p3p
