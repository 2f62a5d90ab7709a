#include "p3p/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace p3p {

namespace {

template <class T>
void put(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <class T>
    T get(const char* what) {
        unsigned char bytes[sizeof(T)];
        if (!in_.read(reinterpret_cast<char*>(bytes), sizeof(T)))
            throw FormatError(std::string("truncated ") + what, offset_);
        if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
        T value;
        std::memcpy(&value, bytes, sizeof(T));
        offset_ += sizeof(T);
        return value;
    }

    std::string bytes(std::size_t n, const char* what) {
        std::string s(n, '\0');
        if (n > 0 && !in_.read(s.data(), static_cast<std::streamsize>(n)))
            throw FormatError(std::string("truncated ") + what, offset_);
        offset_ += n;
        return s;
    }

    std::uint64_t offset() const { return offset_; }

private:
    std::istream& in_;
    std::uint64_t offset_ = 0;
};

// Guards against absurd sizes in corrupt headers before allocating.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxName = 4096;

}  // namespace

void write_tables(std::ostream& out, const std::vector<Table>& tables) {
    out.write(kTableMagic, 4);
    put<std::uint32_t>(out, kTableVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tables.size()));
    for (const Table& t : tables) {
        std::uint64_t count = 1;
        for (std::uint64_t d : t.dims) count *= d;
        if (count != t.data.size()) throw std::invalid_argument("table '" + t.name + "': dims do not match data");
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
        for (std::uint64_t d : t.dims) put<std::uint64_t>(out, d);
        for (double v : t.data) put<double>(out, v);
    }
    if (!out) throw std::runtime_error("write_tables: stream failure");
}

std::vector<Table> read_tables(std::istream& in) {
    Reader r(in);
    const std::string magic = r.bytes(4, "magic");
    if (std::memcmp(magic.data(), kTableMagic, 4) != 0) throw FormatError("bad magic, expected P3PC", 0);
    const auto version_at = r.offset();
    const auto version = r.get<std::uint32_t>("version");
    if (version != kTableVersion)
        throw FormatError("unsupported format version " + std::to_string(version), version_at);
    const auto count = r.get<std::uint32_t>("table count");

    std::vector<Table> tables;
    for (std::uint32_t i = 0; i < count; ++i) {
        Table t;
        const auto name_at = r.offset();
        const auto name_len = r.get<std::uint32_t>("name length");
        if (name_len > kMaxName) throw FormatError("name length too large", name_at);
        t.name = r.bytes(name_len, "name");
        const auto rank_at = r.offset();
        const auto rank = r.get<std::uint32_t>("rank");
        if (rank > kMaxRank) throw FormatError("rank too large", rank_at);
        std::uint64_t elements = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            const auto dim_at = r.offset();
            t.dims.push_back(r.get<std::uint64_t>("dimension"));
            if (t.dims.back() != 0 && elements > kMaxElements / t.dims.back())
                throw FormatError("table too large", dim_at);
            elements *= t.dims.back();
        }
        t.data.reserve(elements);
        for (std::uint64_t k = 0; k < elements; ++k) t.data.push_back(r.get<double>("data"));
        tables.push_back(std::move(t));
    }
    return tables;
}

void write_tables(const std::filesystem::path& path, const std::vector<Table>& tables) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_tables(out, tables);
}

std::vector<Table> read_tables(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_tables(in);
}

Table matrix_table(std::string name, const Matrix& m) {
    Table t{std::move(name), {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, {}};
    t.data.assign(m.data(), m.data() + m.size());
    return t;
}

Matrix table_matrix(const Table& t) {
    Eigen::Index rows = 1, cols = 1;
    if (t.dims.size() == 1) {
        cols = static_cast<Eigen::Index>(t.dims[0]);
    } else if (t.dims.size() == 2) {
        rows = static_cast<Eigen::Index>(t.dims[0]);
        cols = static_cast<Eigen::Index>(t.dims[1]);
    } else if (!t.dims.empty()) {
        throw std::invalid_argument("table '" + t.name + "' has rank > 2");
    }
    return Eigen::Map<const Matrix>(t.data.data(), rows, cols);
}

std::vector<Table> checkpoint_tables(const ParameterStore& store) {
    std::vector<Table> tables;
    for (const Parameter& p : store) tables.push_back(matrix_table(p.name, p.value));
    return tables;
}

ParameterStore store_from_tables(const std::vector<Table>& tables) {
    ParameterStore store;
    for (const Table& t : tables) store.add(t.name, table_matrix(t));
    return store;
}

}  // namespace p3p
