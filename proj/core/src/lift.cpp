#include "p3p/lift.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace p3p {

PointCloud lift(const DepthImage& img) {
    if (img.width <= 0 || img.height <= 0)
        throw std::invalid_argument("lift: image must have at least one pixel");
    const std::size_t count = img.pixel_count();
    if (img.rgb.size() != count || img.depth.size() != count)
        throw std::invalid_argument("lift: rgb/depth size does not match width*height");

    double dmin = 0, dmax = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const double d = img.depth[i];
        if (!std::isfinite(d)) throw std::invalid_argument("lift: non-finite depth at pixel " + std::to_string(i));
        if (i == 0 || d < dmin) dmin = d;
        if (i == 0 || d > dmax) dmax = d;
    }
    const double dspan = dmax - dmin;
    const double xden = std::max(img.width - 1, 1);
    const double zden = std::max(img.height - 1, 1);

    PointCloud pc;
    pc.points.reserve(count);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const std::size_t i = img.index(r, c);
            Point p;
            p.x = c / xden;
            p.z = (img.height - 1 - r) / zden;
            p.y = dspan > 0.0 ? (img.depth[i] - dmin) / dspan : 0.5;
            p.r = img.rgb[i][0];
            p.g = img.rgb[i][1];
            p.b = img.rgb[i][2];
            pc.points.push_back(p);
        }
    }
    // Single-row or single-column images leave an axis constant; the
    // canonical rule puts it at 0.5.
    return renormalize_cloud(pc);
}

PointCloud rotate_z_raw(const PointCloud& pc, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    PointCloud out = pc;
    for (Point& p : out.points) {
        const double dx = p.x - 0.5;
        const double dy = p.y - 0.5;
        p.x = 0.5 + c * dx - s * dy;
        p.y = 0.5 + s * dx + c * dy;
    }
    return out;
}

PointCloud rotate_z(const PointCloud& pc, double angle) {
    return renormalize_cloud(rotate_z_raw(pc, angle));
}

}  // namespace p3p
