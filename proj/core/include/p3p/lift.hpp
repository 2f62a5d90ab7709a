#pragma once

#include <array>
#include <vector>

#include "p3p/types.hpp"

namespace p3p {

/// RGB image with a dense per-pixel depth map. Storage is row-major, row 0
/// at the top of the image.
struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<std::array<double, 3>> rgb;  // colors in [0,1]
    std::vector<double> depth;               // larger = farther, any scale

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(col);
    }
};

// One point per pixel: column -> x, depth -> y, image height -> z (up).
// Throws std::invalid_argument on empty images, size mismatch or
// non-finite depth.
PointCloud lift(const DepthImage& img);

// Rotates (x, y) by `angle` radians about (0.5, 0.5), then renormalizes.
PointCloud rotate_z(const PointCloud& pc, double angle);

// The rotation without the final renormalization; exposed for isometry checks.
PointCloud rotate_z_raw(const PointCloud& pc, double angle);

}  // namespace p3p
