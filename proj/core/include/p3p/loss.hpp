#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "p3p/types.hpp"

namespace p3p {

inline constexpr int kErrorFeatures = 9;   // r,g,b,x',y',z',cx,cy,cz
inline constexpr int kHeadChannels = 13;   // x,y,z | 9 error features | occupancy logit
inline constexpr double kOccupancyClamp = 1e-7;

/// Reconstruction target for one masked patch.
struct PatchTarget {
    int patch_size = 0;
    std::vector<std::int32_t> cells;  // occupied cell indices, ascending
    Matrix coords;                    // L x 3, absolute x,y,z
    Matrix errors;                    // L x 9, the relative features e
    std::vector<std::uint8_t> occupancy;  // a^3 flags

    std::int64_t cell_count() const {
        return static_cast<std::int64_t>(patch_size) * patch_size * patch_size;
    }
};

PatchTarget make_patch_target(const Patch& patch, int patch_size);

/// Decoder prediction for one masked patch, one row per cell d:
/// [x, y, z, e (9), occupancy logit].
struct HeadOutput {
    Matrix values;  // a^3 x 13

    auto coords() const { return values.leftCols(3); }
    auto errors() const { return values.middleCols(3, kErrorFeatures); }
    auto logits() const { return values.col(kHeadChannels - 1); }
};

double sigmoid(double x);

double mse_loss(const PatchTarget& target, const HeadOutput& pred);
double chamfer_loss(const Matrix& gt, const Matrix& pred);
double occupancy_loss(std::span<const std::uint8_t> occupancy, std::span<const double> logits);
inline double total_loss(double mse, double chamfer, double occupancy) { return mse + chamfer + occupancy; }

/// Cells whose predicted occupancy exceeds 0.5; the single highest logit
/// when none does (ties to the lowest cell).
std::vector<std::int32_t> predicted_cells(const HeadOutput& pred);

struct LossWeights {
    double mse = 1.0;
    double chamfer = 1.0;
    double occupancy = 1.0;
};

/// Discrete choices behind one patch's Chamfer term: the decoded prediction
/// set and both nearest-neighbour assignments.
struct ChamferDecision {
    std::vector<std::int32_t> cells;
    std::vector<Eigen::Index> gt_to_pred;  // per target point, index into cells
    std::vector<Eigen::Index> pred_to_gt;  // per predicted point, target row
};

struct PatchLoss {
    double mse = 0, chamfer = 0, occupancy = 0;
    double total = 0;   // weighted sum
    Matrix grad;        // d total / d head values, a^3 x 13
};

/// All three terms of one patch plus the gradient with respect to the head
/// output. The Chamfer prediction set is chosen by predicted_cells and held
/// fixed while differentiating. With `frozen` the decision is replayed
/// instead of recomputed, making the loss smooth in `pred`; `record`
/// receives the decision actually used.
PatchLoss patch_loss(const PatchTarget& target, const HeadOutput& pred, const LossWeights& weights = {},
                     const ChamferDecision* frozen = nullptr, ChamferDecision* record = nullptr);

}  // namespace p3p
