#include "archrec/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "archrec/common.hpp"

namespace archrec::io {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'C', 'H', 'R', 'E', 'C', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error("io", "truncated binary file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw Error("io", "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error("io", "cannot read " + path.string());
  return in;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix_text(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
  write_text(path, out.str());
}

Eigen::MatrixXd read_matrix_text(const fs::path& path) {
  auto in = open_in(path);
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) {
    throw Error("io", "bad matrix header in " + path.string());
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::string tok;
      if (!(in >> tok)) throw Error("io", "truncated matrix in " + path.string());
      m(r, c) = std::strtod(tok.c_str(), nullptr);
    }
  }
  return m;
}

void write_matrices_binary(const fs::path& path, const std::vector<NamedMatrix>& mats) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(kMagic, sizeof kMagic);
  put_u64(out, mats.size());
  for (const auto& nm : mats) {
    put_u64(out, nm.name.size());
    out.write(nm.name.data(), static_cast<std::streamsize>(nm.name.size()));
    put_u64(out, static_cast<std::uint64_t>(nm.value.rows()));
    put_u64(out, static_cast<std::uint64_t>(nm.value.cols()));
    for (Eigen::Index r = 0; r < nm.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < nm.value.cols(); ++c) {
        const double v = nm.value(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
  }
  if (!out) throw Error("io", "write failed for " + path.string());
}

std::vector<NamedMatrix> read_matrices_binary(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error("io", "bad magic in " + path.string());
  }
  const std::uint64_t count = get_u64(in);
  std::vector<NamedMatrix> mats;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedMatrix nm;
    nm.name.resize(get_u64(in));
    in.read(nm.name.data(), static_cast<std::streamsize>(nm.name.size()));
    const auto rows = static_cast<Eigen::Index>(get_u64(in));
    const auto cols = static_cast<Eigen::Index>(get_u64(in));
    nm.value.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        double v;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
          throw Error("io", "truncated matrix data in " + path.string());
        }
        nm.value(r, c) = v;
      }
    }
    mats.push_back(std::move(nm));
  }
  return mats;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

KeyValues read_key_values(const fs::path& path) {
  KeyValues kv;
  for (const auto& raw : read_lines(path)) {
    const auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("io", "expected key = value in " + path.string() + ": " + line);
    kv[trim(std::string_view(line).substr(0, eq))] = trim(std::string_view(line).substr(eq + 1));
  }
  return kv;
}

void write_key_values(const fs::path& path, const KeyValues& kv) {
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
  write_text(path, out.str());
}

std::vector<std::string> read_lines(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_text(const fs::path& path, std::string_view text) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("io", "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t hash_file(const fs::path& path) {
  if (!fs::exists(path)) return 0;
  return fnv1a64(read_text(path));
}

}  // namespace archrec::io
