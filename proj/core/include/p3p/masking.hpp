#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "p3p/types.hpp"

namespace p3p {

struct MaskPlan {
    std::vector<std::size_t> visible;  // ascending
    std::vector<std::size_t> masked;   // ascending
    double ratio = 0.0;

    std::size_t token_count() const { return visible.size() + masked.size(); }
};

/// Masks round(ratio * P) tokens chosen uniformly at random, keeping at least
/// one visible. Requires P >= 1 and 0 <= ratio < 1.
MaskPlan random_mask(std::size_t token_count, double ratio, std::uint64_t seed);

/// Validity of a padded batch: row b holds lengths[b] leading valid slots.
class AttentionMask {
public:
    AttentionMask(const std::vector<std::size_t>& lengths, std::size_t max_len);

    std::size_t batch() const { return lengths_.size(); }
    std::size_t max_len() const { return max_len_; }
    std::size_t length(std::size_t b) const { return lengths_[b]; }
    bool valid(std::size_t b, std::size_t t) const { return valid_[b * max_len_ + t] != 0; }
    // Query slot i may attend to key slot j.
    bool allow(std::size_t b, std::size_t i, std::size_t j) const { return valid(b, i) && valid(b, j); }
    std::vector<std::uint8_t> row(std::size_t b) const;

private:
    std::vector<std::size_t> lengths_;
    std::size_t max_len_ = 0;
    std::vector<std::uint8_t> valid_;
};

inline AttentionMask build_attention_mask(const std::vector<std::size_t>& lengths, std::size_t max_len) {
    return AttentionMask(lengths, max_len);
}

struct AugmentOptions {
    double ratio = 0.5;   // r in (0, 1]
    bool scale = true;
    bool translate = true;
};

/// Independent per-axis scale in [r, 1/r] about the cube center, then a
/// global translation in [-(1-r)/2, (1-r)/2] per axis, clamped to [0,1].
PointCloud augment(const PointCloud& pc, const AugmentOptions& opts, std::uint64_t seed);

// Written as an offset so factor 1 returns v bitwise.
inline double scale_about_center(double v, double factor) { return v + (factor - 1.0) * (v - 0.5); }

}  // namespace p3p
