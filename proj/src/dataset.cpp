#include "mml/dataset.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mml {

namespace {

constexpr char kMatMagic[8] = {'M', 'M', 'L', 'M', 'A', 'T', '1', '\0'};
constexpr char kLabMagic[8] = {'M', 'M', 'L', 'L', 'A', 'B', '1', '\0'};

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  return f;
}

void write_u64(std::ostream& f, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  f.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& f) {
  unsigned char buf[8];
  f.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_matrix(const Matrix& m, const std::string& path) {
  std::ofstream f = open_out(path);
  f.write(kMatMagic, 8);
  write_u64(f, m.rows());
  write_u64(f, m.cols());
  f.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
  if (!f) throw std::runtime_error("write failed: " + path);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream f = open_in(path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMatMagic, 8) != 0)
    throw std::runtime_error("not a matrix file: " + path);
  const std::uint64_t rows = read_u64(f), cols = read_u64(f);
  Matrix m(rows, cols);
  f.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
  if (!f) throw std::runtime_error("truncated matrix file: " + path);
  return m;
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
  std::ofstream f = open_out(path);
  f.write(kLabMagic, 8);
  write_u64(f, labels.size());
  for (int v : labels) write_u64(f, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<int> load_labels(const std::string& path) {
  std::ifstream f = open_in(path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kLabMagic, 8) != 0)
    throw std::runtime_error("not a label file: " + path);
  const std::uint64_t n = read_u64(f);
  std::vector<int> labels(n);
  for (auto& v : labels) v = static_cast<int>(static_cast<std::int64_t>(read_u64(f)));
  if (!f) throw std::runtime_error("truncated label file: " + path);
  return labels;
}

}  // namespace mml
