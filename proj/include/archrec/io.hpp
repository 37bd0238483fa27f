#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace archrec::io {

namespace fs = std::filesystem;

// Line-oriented matrix text format:
//   line 1: "<rows> <cols>"
//   then one line per row of space-separated decimals (%.17g, round-trips).
void write_matrix_text(const fs::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_text(const fs::path& path);

// Portable binary layout for a list of named matrices:
//   8 bytes magic "ARCHREC1"
//   u64 count
//   per matrix: u64 name length, name bytes, u64 rows, u64 cols,
//               rows*cols little-endian IEEE-754 f64 in row-major order.
// All integers are little-endian.
struct NamedMatrix {
  std::string name;
  Eigen::MatrixXd value;
};
void write_matrices_binary(const fs::path& path, const std::vector<NamedMatrix>& mats);
std::vector<NamedMatrix> read_matrices_binary(const fs::path& path);

// Flat "key = value" files; '#' starts a comment line.
using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(const fs::path& path);
void write_key_values(const fs::path& path, const KeyValues& kv);

std::vector<std::string> read_lines(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

// FNV-1a of the file contents; 0 when the file is missing.
std::uint64_t hash_file(const fs::path& path);

std::string format_double(double v);

}  // namespace archrec::io
