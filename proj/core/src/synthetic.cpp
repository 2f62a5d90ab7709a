#include "p3p/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

namespace p3p {

PointCloud uniform_cube_cloud(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PointCloud pc;
    pc.points.resize(n);
    for (Point& p : pc.points) {
        p.x = u(rng);
        p.y = u(rng);
        p.z = u(rng);
        p.r = u(rng);
        p.g = u(rng);
        p.b = u(rng);
    }
    return pc;
}

PointCloud primitive_cloud(Primitive kind, std::size_t n, std::uint64_t seed) {
    constexpr double kPi = std::numbers::pi;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    const Eigen::Vector3d axis = Eigen::Vector3d(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5).normalized();
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(2 * kPi * u(rng), axis).toRotationMatrix();
    const Eigen::Vector3d extent(0.5 + u(rng), 0.5 + u(rng), 0.5 + u(rng));
    const Eigen::Vector3d grad_dir = Eigen::Vector3d(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5).normalized();
    const Eigen::Vector3d c0(u(rng), u(rng), u(rng));
    const Eigen::Vector3d c1(u(rng), u(rng), u(rng));

    std::vector<Eigen::Vector3d> raw;
    raw.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = u(rng), t = u(rng), w = u(rng);
        Eigen::Vector3d p;
        switch (kind) {
            case Primitive::Sphere: {
                const double zc = 2 * s - 1, phi = 2 * kPi * t, rr = std::sqrt(1 - zc * zc);
                p = {rr * std::cos(phi), rr * std::sin(phi), zc};
                break;
            }
            case Primitive::Box: {
                const int face = static_cast<int>(w * 6) % 6;
                const double a = 2 * s - 1, b = 2 * t - 1, sign = face % 2 ? 1.0 : -1.0;
                if (face < 2) p = {sign, a, b};
                else if (face < 4) p = {a, sign, b};
                else p = {a, b, sign};
                break;
            }
            case Primitive::Cylinder: {
                const double phi = 2 * kPi * s;
                p = {std::cos(phi), std::sin(phi), 2 * t - 1};
                break;
            }
            case Primitive::Torus: {
                const double phi = 2 * kPi * s, theta = 2 * kPi * t, minor = 0.35;
                p = {(1 + minor * std::cos(theta)) * std::cos(phi), (1 + minor * std::cos(theta)) * std::sin(phi),
                     minor * std::sin(theta)};
                break;
            }
            case Primitive::Plane: {
                // Gently curved sheet so the cloud is not degenerate in any axis.
                const double a = 2 * s - 1, b = 2 * t - 1;
                p = {a, b, 0.3 * std::sin(kPi * a) * std::cos(kPi * b)};
                break;
            }
        }
        raw.push_back(rot * p.cwiseProduct(extent));
    }

    PointCloud pc;
    pc.points.reserve(n);
    double lo = 0, hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad_dir.dot(raw[i]);
        lo = i == 0 ? g : std::min(lo, g);
        hi = i == 0 ? g : std::max(hi, g);
    }
    for (const Eigen::Vector3d& p : raw) {
        const double g = hi > lo ? (grad_dir.dot(p) - lo) / (hi - lo) : 0.5;
        const Eigen::Vector3d color = ((1 - g) * c0 + g * c1).cwiseMax(0.0).cwiseMin(1.0);
        pc.points.push_back({p.x(), p.y(), p.z(), color.x(), color.y(), color.z()});
    }
    return renormalize_cloud(pc);
}

PointCloud random_primitive_cloud(std::size_t min_points, std::size_t max_points, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> kind(0, 4);
    std::uniform_int_distribution<std::size_t> count(min_points, max_points);
    const auto k = static_cast<Primitive>(kind(rng));
    const std::size_t n = count(rng);
    return primitive_cloud(k, n, rng());
}

}  // namespace p3p
