#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "p3p/lift.hpp"
#include "p3p/types.hpp"

namespace p3p::io {

// The file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The file was readable but its contents are malformed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::filesystem::path& path, const std::string& what, std::uint64_t offset)
        : std::runtime_error(path.string() + ": " + what + " at byte " + std::to_string(offset)),
          offset_(offset) {}
    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

struct RgbImage {
    int width = 0, height = 0;
    std::vector<std::array<double, 3>> rgb;  // row-major, [0,1]
};

struct GrayImage {
    int width = 0, height = 0;
    std::vector<double> values;  // row-major
};

RgbImage read_ppm(const std::filesystem::path& path);        // P6, maxval <= 255
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

// PFM "Pf" with a negative scale (little-endian), bottom-to-top rows as the
// format prescribes. Returned rows are top-to-bottom.
GrayImage read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const GrayImage& img);

GrayImage read_pgm16(const std::filesystem::path& path);     // P5, maxval > 255, big-endian samples
void write_pgm16(const std::filesystem::path& path, const GrayImage& img);

// Dispatches on the magic bytes: "Pf" -> PFM, "P5" -> PGM.
GrayImage read_depth(const std::filesystem::path& path);

DepthImage make_depth_image(const RgbImage& rgb, const GrayImage& depth);

// ASCII PLY: float x y z, uchar red green blue.
void write_ply(const std::filesystem::path& path, const PointCloud& pc);
PointCloud read_ply(const std::filesystem::path& path);

}  // namespace p3p::io
