#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "p3p/autograd.hpp"

namespace p3p {

// Binary table container shared by checkpoints and token dumps. All
// integers and floats are little-endian:
//
//   "P3PC" | u32 version | u32 table count
//   per table: u32 name length | name (UTF-8) | u32 rank | rank x u64 dims |
//              prod(dims) x f64, row-major
inline constexpr char kTableMagic[4] = {'P', '3', 'P', 'C'};
inline constexpr std::uint32_t kTableVersion = 1;

struct Table {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
};

class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

void write_tables(std::ostream& out, const std::vector<Table>& tables);
std::vector<Table> read_tables(std::istream& in);

void write_tables(const std::filesystem::path& path, const std::vector<Table>& tables);
std::vector<Table> read_tables(const std::filesystem::path& path);

Table matrix_table(std::string name, const Matrix& m);
Matrix table_matrix(const Table& t);

std::vector<Table> checkpoint_tables(const ParameterStore& store);
ParameterStore store_from_tables(const std::vector<Table>& tables);

}  // namespace p3p
