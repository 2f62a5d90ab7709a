#include "p3p_tools/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace p3p::io {

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + path.string());
    return data;
}

void spill(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failure on " + path.string());
}

// Netpbm-style header scanner: whitespace separated tokens, '#' comments.
class HeaderScanner {
public:
    HeaderScanner(const std::filesystem::path& path, const std::string& data) : path_(path), data_(data) {}

    std::string magic() {
        if (data_.size() < 2) fail("missing magic", 0);
        pos_ = 2;
        return data_.substr(0, 2);
    }

    long long integer(const char* what) {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) ++pos_;
        if (start == pos_) fail(std::string("expected ") + what, start);
        if (pos_ - start > 9) fail(std::string(what) + " too large", start);
        return std::stoll(data_.substr(start, pos_ - start));
    }

    double real(const char* what) {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
        const std::string tok = data_.substr(start, pos_ - start);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
            fail(std::string("expected ") + what, start);
        return v;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_start() {
        if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_])))
            fail("expected whitespace before raster", pos_);
        return pos_ + 1;
    }

    [[noreturn]] void fail(const std::string& what, std::size_t offset) const { throw ParseError(path_, what, offset); }

private:
    void skip_space() {
        while (pos_ < data_.size()) {
            const char c = data_[pos_];
            if (c == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::filesystem::path& path_;
    const std::string& data_;
    std::size_t pos_ = 0;
};

void check_dims(const HeaderScanner& h, long long w, long long hgt) {
    if (w < 1 || hgt < 1) h.fail("image dimensions must be positive", 2);
}

void check_raster(const HeaderScanner& h, const std::string& data, std::size_t start, std::size_t bytes) {
    if (data.size() - std::min(start, data.size()) < bytes)
        h.fail("raster truncated: expected " + std::to_string(bytes) + " bytes", data.size());
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
    const std::string data = slurp(path);
    HeaderScanner h(path, data);
    if (h.magic() != "P6") h.fail("not a binary PPM (P6)", 0);
    const long long w = h.integer("width"), hgt = h.integer("height"), maxval = h.integer("maxval");
    check_dims(h, w, hgt);
    if (maxval < 1 || maxval > 255) h.fail("only 8-bit PPM is supported", 0);
    const std::size_t start = h.raster_start();
    const auto count = static_cast<std::size_t>(w * hgt);
    check_raster(h, data, start, count * 3);

    RgbImage img{static_cast<int>(w), static_cast<int>(hgt), {}};
    img.rgb.resize(count);
    const auto* px = reinterpret_cast<const unsigned char*>(data.data() + start);
    for (std::size_t i = 0; i < count; ++i)
        for (int c = 0; c < 3; ++c) img.rgb[i][static_cast<std::size_t>(c)] = px[3 * i + static_cast<std::size_t>(c)] / static_cast<double>(maxval);
    return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    for (const auto& px : img.rgb)
        for (double c : px) out.push_back(static_cast<char>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)));
    spill(path, out);
}

GrayImage read_pfm(const std::filesystem::path& path) {
    const std::string data = slurp(path);
    HeaderScanner h(path, data);
    if (h.magic() != "Pf") h.fail("not a grayscale PFM (Pf)", 0);
    const long long w = h.integer("width"), hgt = h.integer("height");
    check_dims(h, w, hgt);
    const double scale = h.real("scale");
    if (scale >= 0) h.fail("big-endian PFM is not supported", 0);
    const std::size_t start = h.raster_start();
    const auto width = static_cast<std::size_t>(w), height = static_cast<std::size_t>(hgt);
    check_raster(h, data, start, width * height * 4);

    GrayImage img{static_cast<int>(w), static_cast<int>(hgt), std::vector<double>(width * height)};
    for (std::size_t file_row = 0; file_row < height; ++file_row) {
        const std::size_t row = height - 1 - file_row;
        for (std::size_t c = 0; c < width; ++c) {
            unsigned char b[4];
            std::memcpy(b, data.data() + start + 4 * (file_row * width + c), 4);
            if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
            float v;
            std::memcpy(&v, b, 4);
            img.values[row * width + c] = v;
        }
    }
    return img;
}

void write_pfm(const std::filesystem::path& path, const GrayImage& img) {
    std::string out = "Pf\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
    const auto width = static_cast<std::size_t>(img.width), height = static_cast<std::size_t>(img.height);
    for (std::size_t file_row = 0; file_row < height; ++file_row) {
        const std::size_t row = height - 1 - file_row;
        for (std::size_t c = 0; c < width; ++c) {
            const auto v = static_cast<float>(img.values[row * width + c]);
            unsigned char b[4];
            std::memcpy(b, &v, 4);
            if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
            out.append(reinterpret_cast<const char*>(b), 4);
        }
    }
    spill(path, out);
}

GrayImage read_pgm16(const std::filesystem::path& path) {
    const std::string data = slurp(path);
    HeaderScanner h(path, data);
    if (h.magic() != "P5") h.fail("not a binary PGM (P5)", 0);
    const long long w = h.integer("width"), hgt = h.integer("height"), maxval = h.integer("maxval");
    check_dims(h, w, hgt);
    if (maxval < 256 || maxval > 65535) h.fail("only 16-bit PGM is supported for depth", 0);
    const std::size_t start = h.raster_start();
    const auto count = static_cast<std::size_t>(w * hgt);
    check_raster(h, data, start, count * 2);

    GrayImage img{static_cast<int>(w), static_cast<int>(hgt), std::vector<double>(count)};
    const auto* px = reinterpret_cast<const unsigned char*>(data.data() + start);
    for (std::size_t i = 0; i < count; ++i) img.values[i] = static_cast<double>((px[2 * i] << 8) | px[2 * i + 1]);
    return img;
}

void write_pgm16(const std::filesystem::path& path, const GrayImage& img) {
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
    for (double v : img.values) {
        const auto s = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 65535L));
        out.push_back(static_cast<char>(s >> 8));
        out.push_back(static_cast<char>(s & 0xFF));
    }
    spill(path, out);
}

GrayImage read_depth(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[2] = {0, 0};
    in.read(magic, 2);
    in.close();
    if (magic[0] == 'P' && magic[1] == 'f') return read_pfm(path);
    if (magic[0] == 'P' && magic[1] == '5') return read_pgm16(path);
    throw ParseError(path, "unrecognized depth format (expected PFM or 16-bit PGM)", 0);
}

DepthImage make_depth_image(const RgbImage& rgb, const GrayImage& depth) {
    if (rgb.width != depth.width || rgb.height != depth.height)
        throw std::invalid_argument("image is " + std::to_string(rgb.width) + "x" + std::to_string(rgb.height) +
                                    " but depth is " + std::to_string(depth.width) + "x" +
                                    std::to_string(depth.height));
    return DepthImage{rgb.width, rgb.height, rgb.rgb, depth.values};
}

void write_ply(const std::filesystem::path& path, const PointCloud& pc) {
    std::string out;
    out += "ply\nformat ascii 1.0\nelement vertex " + std::to_string(pc.size()) + "\n";
    out += "property float x\nproperty float y\nproperty float z\n";
    out += "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    char line[128];
    auto byte = [](double c) { return static_cast<int>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); };
    for (const Point& p : pc.points) {
        std::snprintf(line, sizeof line, "%.9g %.9g %.9g %d %d %d\n", static_cast<double>(static_cast<float>(p.x)),
                      static_cast<double>(static_cast<float>(p.y)), static_cast<double>(static_cast<float>(p.z)),
                      byte(p.r), byte(p.g), byte(p.b));
        out += line;
    }
    spill(path, out);
}

PointCloud read_ply(const std::filesystem::path& path) {
    const std::string data = slurp(path);
    std::size_t pos = 0;
    auto next_line = [&](std::string& line) {
        if (pos >= data.size()) return false;
        std::size_t end = data.find('\n', pos);
        if (end == std::string::npos) end = data.size();
        line = data.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = end + 1;
        return true;
    };
    auto fail = [&](const std::string& what, std::size_t at) { throw ParseError(path, what, at); };

    std::string line;
    std::size_t at = pos;
    if (!next_line(line) || line != "ply") fail("missing 'ply' magic", 0);
    at = pos;
    if (!next_line(line) || line != "format ascii 1.0") fail("only 'format ascii 1.0' is supported", at);

    std::size_t vertices = 0;
    bool have_vertex = false, in_vertex = false;
    std::vector<std::string> props;
    for (;;) {
        at = pos;
        if (!next_line(line)) fail("unterminated header", at);
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "end_header") break;
        if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "element") {
            std::string name;
            long long count = -1;
            ls >> name >> count;
            if (count < 0) fail("bad element line", at);
            in_vertex = name == "vertex";
            if (in_vertex) {
                if (have_vertex) fail("duplicate vertex element", at);
                have_vertex = true;
                vertices = static_cast<std::size_t>(count);
            } else if (count > 0) {
                fail("unsupported element '" + name + "'", at);
            }
        } else if (kw == "property") {
            std::string type, name;
            ls >> type >> name;
            if (type == "list") fail("list properties are not supported", at);
            if (in_vertex) props.push_back(name);
        } else {
            fail("unexpected header keyword '" + kw + "'", at);
        }
    }
    if (!have_vertex) fail("missing vertex element", pos);

    auto find = [&](const char* name) -> int {
        const auto it = std::find(props.begin(), props.end(), name);
        return it == props.end() ? -1 : static_cast<int>(it - props.begin());
    };
    const int ix = find("x"), iy = find("y"), iz = find("z");
    const int ir = find("red"), ig = find("green"), ib = find("blue");
    if (ix < 0 || iy < 0 || iz < 0) fail("vertex element lacks x, y or z", 0);

    PointCloud pc;
    pc.points.reserve(vertices);
    std::vector<double> vals(props.size());
    for (std::size_t v = 0; v < vertices; ++v) {
        at = pos;
        if (!next_line(line)) fail("expected " + std::to_string(vertices) + " vertices, got " + std::to_string(v), at);
        const char* s = line.c_str();
        for (std::size_t k = 0; k < props.size(); ++k) {
            char* end = nullptr;
            vals[k] = std::strtod(s, &end);
            if (end == s || !std::isfinite(vals[k])) fail("malformed vertex " + std::to_string(v), at);
            s = end;
        }
        Point p;
        p.x = vals[static_cast<std::size_t>(ix)];
        p.y = vals[static_cast<std::size_t>(iy)];
        p.z = vals[static_cast<std::size_t>(iz)];
        p.r = ir >= 0 ? vals[static_cast<std::size_t>(ir)] / 255.0 : 0.0;
        p.g = ig >= 0 ? vals[static_cast<std::size_t>(ig)] / 255.0 : 0.0;
        p.b = ib >= 0 ? vals[static_cast<std::size_t>(ib)] / 255.0 : 0.0;
        pc.points.push_back(p);
    }
    return pc;
}

}  // namespace p3p::io
