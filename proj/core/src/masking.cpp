#include "p3p/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace p3p {

MaskPlan random_mask(std::size_t token_count, double ratio, std::uint64_t seed) {
    if (token_count < 1) throw std::invalid_argument("random_mask: need at least one token");
    if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("random_mask: ratio must be in [0, 1)");

    std::size_t masked = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(token_count)));
    masked = std::min(masked, token_count - 1);

    std::vector<std::size_t> order(token_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `masked` slots become a uniform subset.
    for (std::size_t i = 0; i < masked; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, token_count - 1);
        std::swap(order[i], order[pick(rng)]);
    }

    MaskPlan plan;
    plan.ratio = ratio;
    plan.masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(masked));
    plan.visible.assign(order.begin() + static_cast<std::ptrdiff_t>(masked), order.end());
    std::sort(plan.masked.begin(), plan.masked.end());
    std::sort(plan.visible.begin(), plan.visible.end());
    return plan;
}

AttentionMask::AttentionMask(const std::vector<std::size_t>& lengths, std::size_t max_len)
    : lengths_(lengths), max_len_(max_len), valid_(lengths.size() * max_len, 0) {
    for (std::size_t b = 0; b < lengths.size(); ++b) {
        if (lengths[b] == 0)
            throw std::invalid_argument("attention mask: sample " + std::to_string(b) + " is empty");
        if (lengths[b] > max_len)
            throw std::invalid_argument("attention mask: sample " + std::to_string(b) + " length " +
                                        std::to_string(lengths[b]) + " exceeds " + std::to_string(max_len));
        std::fill_n(valid_.begin() + static_cast<std::ptrdiff_t>(b * max_len), lengths[b], std::uint8_t{1});
    }
}

std::vector<std::uint8_t> AttentionMask::row(std::size_t b) const {
    const auto begin = valid_.begin() + static_cast<std::ptrdiff_t>(b * max_len_);
    return {begin, begin + static_cast<std::ptrdiff_t>(max_len_)};
}

PointCloud augment(const PointCloud& pc, const AugmentOptions& opts, std::uint64_t seed) {
    const double r = opts.ratio;
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("augment: ratio must be in (0, 1]");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale_dist(r, 1.0 / r);
    const double shift = (1.0 - r) / 2.0;
    std::uniform_real_distribution<double> shift_dist(-shift, shift);

    double factor[3] = {1.0, 1.0, 1.0};
    double offset[3] = {0.0, 0.0, 0.0};
    if (opts.scale)
        for (double& f : factor) f = scale_dist(rng);
    if (opts.translate)
        for (double& o : offset) o = shift_dist(rng);

    PointCloud out = pc;
    for (Point& p : out.points) {
        p.x = std::clamp(scale_about_center(p.x, factor[0]) + offset[0], 0.0, 1.0);
        p.y = std::clamp(scale_about_center(p.y, factor[1]) + offset[1], 0.0, 1.0);
        p.z = std::clamp(scale_about_center(p.z, factor[2]) + offset[2], 0.0, 1.0);
    }
    return out;
}

}  // namespace p3p
