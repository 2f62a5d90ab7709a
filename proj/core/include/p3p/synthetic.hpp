#pragma once

#include <cstddef>
#include <cstdint>

#include "p3p/types.hpp"

namespace p3p {

/// Points uniform in the unit cube with uniform random colors.
PointCloud uniform_cube_cloud(std::size_t n, std::uint64_t seed);

enum class Primitive { Sphere, Box, Cylinder, Torus, Plane };

/// Surface samples of a randomly posed primitive, colored by a linear
/// gradient along a random direction, renormalized to the canonical cube.
PointCloud primitive_cloud(Primitive kind, std::size_t n, std::uint64_t seed);

/// Primitive kind and point count in [min_points, max_points] both drawn
/// from `seed`.
PointCloud random_primitive_cloud(std::size_t min_points, std::size_t max_points, std::uint64_t seed);

}  // namespace p3p
