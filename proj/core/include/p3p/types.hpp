#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace p3p {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr int kPointFeatures = 6;
inline constexpr int kPatchFeatures = 12;

/// One canonical point: coordinates and color, all expected in [0,1].
struct Point {
    double x = 0, y = 0, z = 0;
    double r = 0, g = 0, b = 0;

    double feature_sum() const { return x + y + z + r + g + b; }
    friend bool operator==(const Point&, const Point&) = default;
};

struct PointCloud {
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

struct Violation {
    std::size_t point_index = 0;  // meaningless for cloud-level violations
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;  // at most kMaxReported entries
    bool ok() const { return violations.empty(); }

    static constexpr std::size_t kMaxReported = 10;
};

ValidationReport validate_cloud(const PointCloud& pc);

// Min-max rescales each coordinate axis independently to [0,1]. Constant
// axes collapse to 0.5. Colors pass through untouched.
PointCloud renormalize_cloud(const PointCloud& pc);

/// Discrete voxel coordinate (m, n, q).
struct VoxelKey {
    std::int32_t m = 0, n = 0, q = 0;
    friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
    friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const noexcept {
        std::uint64_t h = static_cast<std::uint32_t>(k.m);
        h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.n);
        h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.q);
        return static_cast<std::size_t>(h ^ (h >> 29));
    }
};

struct Voxel {
    VoxelKey key;
    Point feature;              // representative point
    std::size_t source_index;   // index of the representative in the source cloud
};

struct VoxelGrid {
    std::vector<Voxel> voxels;  // one entry per occupied key
    double voxel_size = 1.0 / 224.0;
    int space_size = 224;

    std::size_t size() const { return voxels.size(); }
};

using PatchPosition = std::array<std::int32_t, 3>;
using PatchFeatures = std::array<double, kPatchFeatures>;

/// Voxels of one a*a*a block before graph augmentation.
struct VoxelPatch {
    PatchPosition position{};        // min corner, multiple of a
    std::vector<Point> voxels;
    std::vector<std::int32_t> cell_indices;  // parallel to voxels
};

using PatchSet = std::vector<VoxelPatch>;

/// Graph-augmented patch: [x,y,z,r,g,b,x',y',z',cx,cy,cz] per voxel.
struct Patch {
    PatchPosition position{};
    std::vector<PatchFeatures> voxels;
    std::vector<std::int32_t> cell_indices;

    std::size_t size() const { return voxels.size(); }
};

struct TokenSet {
    Matrix tokens;                       // P x C
    std::vector<PatchPosition> positions;
    Matrix pos_embeddings;               // P x C, empty when not computed
    std::vector<std::uint8_t> valid_mask;
    std::vector<std::int32_t> patch_sizes;

    std::size_t size() const { return positions.size(); }
};

/// a^3 weight matrices of shape 12 x C stacked row-wise: cell d occupies
/// rows [12 d, 12 d + 12).
class WeightTable {
public:
    WeightTable() = default;
    WeightTable(int patch_size, int embed_dim);
    WeightTable(int patch_size, int embed_dim, Matrix stacked);

    int patch_size() const { return patch_size_; }
    int embed_dim() const { return embed_dim_; }
    std::int64_t cell_count() const {
        return static_cast<std::int64_t>(patch_size_) * patch_size_ * patch_size_;
    }

    auto cell(std::int64_t d) const { return stacked_.middleRows(d * kPatchFeatures, kPatchFeatures); }
    auto cell(std::int64_t d) { return stacked_.middleRows(d * kPatchFeatures, kPatchFeatures); }

    const Matrix& stacked() const { return stacked_; }
    Matrix& stacked() { return stacked_; }

private:
    int patch_size_ = 0;
    int embed_dim_ = 0;
    Matrix stacked_;
};

}  // namespace p3p
