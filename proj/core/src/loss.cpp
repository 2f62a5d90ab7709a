#include "p3p/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace p3p {

namespace {

void check_head(const PatchTarget& target, const HeadOutput& pred) {
    if (pred.values.rows() != target.cell_count() || pred.values.cols() != kHeadChannels)
        throw std::invalid_argument("loss: head output must be a^3 x 13, got " +
                                    std::to_string(pred.values.rows()) + " x " +
                                    std::to_string(pred.values.cols()));
}

double clamped_probability(double logit) {
    return std::clamp(sigmoid(logit), kOccupancyClamp, 1.0 - kOccupancyClamp);
}

// Index into `set` of the row nearest to `p`; ties to the lower index.
Eigen::Index nearest_row(const Matrix& set, const Eigen::Ref<const RowVector>& p, double& dist) {
    Eigen::Index best = 0;
    dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < set.rows(); ++j) {
        const double d = (set.row(j) - p).squaredNorm();
        if (d < dist) {
            dist = d;
            best = j;
        }
    }
    return best;
}

}  // namespace

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

PatchTarget make_patch_target(const Patch& patch, int patch_size) {
    if (patch.size() == 0) throw std::invalid_argument("make_patch_target: empty patch");
    PatchTarget t;
    t.patch_size = patch_size;
    t.occupancy.assign(static_cast<std::size_t>(t.cell_count()), 0);
    const auto count = static_cast<Eigen::Index>(patch.size());
    t.coords.resize(count, 3);
    t.errors.resize(count, kErrorFeatures);

    std::vector<std::size_t> order(patch.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t l, std::size_t r) { return patch.cell_indices[l] < patch.cell_indices[r]; });
    for (Eigen::Index k = 0; k < count; ++k) {
        const std::size_t i = order[static_cast<std::size_t>(k)];
        const std::int32_t d = patch.cell_indices[i];
        if (d < 0 || d >= t.cell_count()) throw std::out_of_range("make_patch_target: cell index out of range");
        t.cells.push_back(d);
        t.occupancy[static_cast<std::size_t>(d)] = 1;
        const PatchFeatures& f = patch.voxels[i];
        for (int c = 0; c < 3; ++c) t.coords(k, c) = f[static_cast<std::size_t>(c)];
        for (int c = 0; c < kErrorFeatures; ++c) t.errors(k, c) = f[static_cast<std::size_t>(3 + c)];
    }
    return t;
}

double mse_loss(const PatchTarget& target, const HeadOutput& pred) {
    check_head(target, pred);
    if (target.cells.empty()) throw std::invalid_argument("mse_loss: target has no occupied cells");
    double sum = 0;
    for (std::size_t i = 0; i < target.cells.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        sum += (target.errors.row(row) - pred.errors().row(target.cells[i])).squaredNorm();
    }
    return sum / static_cast<double>(target.cells.size());
}

double chamfer_loss(const Matrix& gt, const Matrix& pred) {
    if (gt.rows() == 0 || pred.rows() == 0) throw std::invalid_argument("chamfer_loss: empty point set");
    if (gt.cols() != 3 || pred.cols() != 3) throw std::invalid_argument("chamfer_loss: points must be 3-vectors");
    double forward = 0, backward = 0, d = 0;
    for (Eigen::Index i = 0; i < gt.rows(); ++i) {
        nearest_row(pred, gt.row(i), d);
        forward += d;
    }
    for (Eigen::Index j = 0; j < pred.rows(); ++j) {
        nearest_row(gt, pred.row(j), d);
        backward += d;
    }
    return forward / static_cast<double>(gt.rows()) + backward / static_cast<double>(pred.rows());
}

double occupancy_loss(std::span<const std::uint8_t> occupancy, std::span<const double> logits) {
    if (occupancy.size() != logits.size() || occupancy.empty())
        throw std::invalid_argument("occupancy_loss: length mismatch");
    double sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = clamped_probability(logits[i]);
        sum += occupancy[i] ? std::log(p) : std::log(1.0 - p);
    }
    return -sum / static_cast<double>(logits.size());
}

std::vector<std::int32_t> predicted_cells(const HeadOutput& pred) {
    std::vector<std::int32_t> cells;
    const auto logits = pred.logits();
    Eigen::Index best = 0;
    for (Eigen::Index d = 0; d < logits.size(); ++d) {
        // sigmoid(l) > 0.5 exactly when l > 0
        if (logits(d) > 0.0) cells.push_back(static_cast<std::int32_t>(d));
        if (logits(d) > logits(best)) best = d;
    }
    if (cells.empty()) cells.push_back(static_cast<std::int32_t>(best));
    return cells;
}

PatchLoss patch_loss(const PatchTarget& target, const HeadOutput& pred, const LossWeights& weights,
                     const ChamferDecision* frozen, ChamferDecision* record) {
    check_head(target, pred);
    const auto occupied = static_cast<Eigen::Index>(target.cells.size());
    if (occupied == 0) throw std::invalid_argument("patch_loss: target has no occupied cells");

    PatchLoss out;
    out.grad = Matrix::Zero(pred.values.rows(), kHeadChannels);

    // Relative features, read at the ground-truth cells.
    for (Eigen::Index i = 0; i < occupied; ++i) {
        const Eigen::Index d = target.cells[static_cast<std::size_t>(i)];
        const RowVector diff = pred.errors().row(d) - target.errors.row(i);
        out.mse += diff.squaredNorm();
        out.grad.row(d).segment(3, kErrorFeatures) += (2.0 * weights.mse / static_cast<double>(occupied)) * diff;
    }
    out.mse /= static_cast<double>(occupied);

    // Absolute coordinates over the decoded prediction set.
    ChamferDecision decision;
    if (frozen) {
        if (frozen->gt_to_pred.size() != static_cast<std::size_t>(occupied) || frozen->cells.empty() ||
            frozen->pred_to_gt.size() != frozen->cells.size())
            throw std::invalid_argument("patch_loss: frozen decision does not fit the target");
        decision = *frozen;
        for (std::int32_t c : decision.cells)
            if (c < 0 || c >= target.cell_count()) throw std::out_of_range("patch_loss: frozen cell out of range");
        for (Eigen::Index j : decision.gt_to_pred)
            if (j < 0 || j >= static_cast<Eigen::Index>(decision.cells.size()))
                throw std::out_of_range("patch_loss: frozen assignment out of range");
        for (Eigen::Index i : decision.pred_to_gt)
            if (i < 0 || i >= occupied) throw std::out_of_range("patch_loss: frozen assignment out of range");
    } else {
        decision.cells = predicted_cells(pred);
    }
    const auto& cells = decision.cells;
    const auto predicted = static_cast<Eigen::Index>(cells.size());
    Matrix pred_coords(predicted, 3);
    for (Eigen::Index j = 0; j < predicted; ++j) pred_coords.row(j) = pred.coords().row(cells[static_cast<std::size_t>(j)]);
    if (!frozen) {
        decision.gt_to_pred.resize(static_cast<std::size_t>(occupied));
        decision.pred_to_gt.resize(static_cast<std::size_t>(predicted));
        double unused = 0;
        for (Eigen::Index i = 0; i < occupied; ++i)
            decision.gt_to_pred[static_cast<std::size_t>(i)] = nearest_row(pred_coords, target.coords.row(i), unused);
        for (Eigen::Index j = 0; j < predicted; ++j)
            decision.pred_to_gt[static_cast<std::size_t>(j)] = nearest_row(target.coords, pred_coords.row(j), unused);
    }
    double forward = 0, backward = 0;
    for (Eigen::Index i = 0; i < occupied; ++i) {
        const Eigen::Index j = decision.gt_to_pred[static_cast<std::size_t>(i)];
        const RowVector diff = pred_coords.row(j) - target.coords.row(i);
        forward += diff.squaredNorm();
        out.grad.row(cells[static_cast<std::size_t>(j)]).head(3) +=
            (2.0 * weights.chamfer / static_cast<double>(occupied)) * diff;
    }
    for (Eigen::Index j = 0; j < predicted; ++j) {
        const Eigen::Index i = decision.pred_to_gt[static_cast<std::size_t>(j)];
        const RowVector diff = pred_coords.row(j) - target.coords.row(i);
        backward += diff.squaredNorm();
        out.grad.row(cells[static_cast<std::size_t>(j)]).head(3) +=
            (2.0 * weights.chamfer / static_cast<double>(predicted)) * diff;
    }
    out.chamfer = forward / static_cast<double>(occupied) + backward / static_cast<double>(predicted);

    // Occupancy over every cell of the patch.
    const Eigen::Index all = pred.values.rows();
    double bce = 0;
    for (Eigen::Index c = 0; c < all; ++c) {
        const double logit = pred.values(c, kHeadChannels - 1);
        const double raw = sigmoid(logit);
        const double p = std::clamp(raw, kOccupancyClamp, 1.0 - kOccupancyClamp);
        const bool o = target.occupancy[static_cast<std::size_t>(c)] != 0;
        bce += o ? std::log(p) : std::log(1.0 - p);
        // The clamp has zero slope where it is active.
        if (raw == p) out.grad(c, kHeadChannels - 1) = weights.occupancy * (raw - (o ? 1.0 : 0.0)) / static_cast<double>(all);
    }
    out.occupancy = -bce / static_cast<double>(all);

    if (record) *record = std::move(decision);
    out.total = weights.mse * out.mse + weights.chamfer * out.chamfer + weights.occupancy * out.occupancy;
    return out;
}

}  // namespace p3p
