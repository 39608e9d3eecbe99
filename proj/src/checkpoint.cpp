#include "taxovis/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "taxovis/common.hpp"

namespace taxovis {

namespace {

constexpr char kMagic[8] = {'T', 'V', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_i32(std::ostream& out, int32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(static_cast<uint32_t>(v) >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put_i32(out, static_cast<int32_t>(m.rows()));
  put_i32(out, static_cast<int32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      uint64_t bits;
      const double v = m(r, c);
      std::memcpy(&bits, &v, 8);
      put_u64(out, bits);
    }
  }
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

int32_t get_i32(std::istream& in) {
  unsigned char b[4] = {};
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return static_cast<int32_t>(v);
}

std::string get_string(std::istream& in) {
  const uint64_t n = get_u64(in);
  if (n > (1u << 30)) throw std::runtime_error("checkpoint: corrupt string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

Matrix get_matrix(std::istream& in) {
  const int32_t rows = get_i32(in);
  const int32_t cols = get_i32(in);
  if (rows < 0 || cols < 0 ||
      static_cast<int64_t>(rows) * cols > (int64_t{1} << 28)) {
    throw std::runtime_error("checkpoint: corrupt matrix header");
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const uint64_t bits = get_u64(in);
      double v;
      std::memcpy(&v, &bits, 8);
      m(r, c) = v;
    }
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, 8);
  put_u64(out, ck.config_hash);
  put_u64(out, ck.taxonomy_hash);
  put_i32(out, ck.iteration);
  put_i32(out, ck.store.step_count());
  put_u64(out, ck.store.seed());
  put_string(out, ck.config_json);
  put_string(out, ck.space_json);
  put_u64(out, ck.store.entries().size());
  for (const auto& [name, entry] : ck.store.entries()) {
    put_string(out, name);
    put_matrix(out, entry.value);
    put_matrix(out, entry.m);
    put_matrix(out, entry.v);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  Checkpoint ck;
  ck.config_hash = get_u64(in);
  ck.taxonomy_hash = get_u64(in);
  ck.iteration = get_i32(in);
  const int32_t steps = get_i32(in);
  const uint64_t seed = get_u64(in);
  ck.config_json = get_string(in);
  ck.space_json = get_string(in);
  ck.store = ParamStore(seed);
  ck.store.set_step_count(steps);
  const uint64_t n = get_u64(in);
  for (uint64_t i = 0; i < n; ++i) {
    const std::string name = get_string(in);
    ParamStore::Entry entry;
    entry.value = get_matrix(in);
    entry.m = get_matrix(in);
    entry.v = get_matrix(in);
    ck.store.entries().emplace(name, std::move(entry));
  }
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  return ck;
}

uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_hash: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return fnv1a64(bytes);
}

}  // namespace taxovis
