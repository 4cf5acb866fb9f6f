#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "drape/check.hpp"
#include "drape/common.hpp"

namespace drape {

// Little-endian binary writer for the versioned container files (body-model
// assets, avatar checkpoints). Doubles are written bit-exactly.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : os_(path, std::ios::binary), path_(path) {
    DRAPE_REQUIRE(os_, "cannot open file for writing: ", path);
  }

  void magic(const char (&tag)[9]) { os_.write(tag, 8); }
  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i32(int32_t v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }

  void str(const std::string& s) {
    u64(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  template <typename Derived>
  void matrix(const Eigen::MatrixBase<Derived>& m) {
    u64(static_cast<uint64_t>(m.rows()));
    u64(static_cast<uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(static_cast<double>(m(r, c)));
  }

  void close() {
    os_.flush();
    DRAPE_REQUIRE(os_.good(), "write failed: ", path_);
    os_.close();
  }

 private:
  void raw(const void* p, size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  std::ofstream os_;
  std::string path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : is_(path, std::ios::binary), path_(path) {
    DRAPE_REQUIRE(is_, "cannot open file: ", path);
  }

  void expect_magic(const char (&tag)[9]) {
    char buf[8];
    raw(buf, 8);
    DRAPE_REQUIRE(std::memcmp(buf, tag, 8) == 0, "bad magic in ", path_, " (expected ", tag, ")");
  }
  uint8_t u8() { uint8_t v; raw(&v, 1); return v; }
  uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
  uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
  int32_t i32() { int32_t v; raw(&v, 4); return v; }
  double f64() { double v; raw(&v, 8); return v; }

  std::string str() {
    const uint64_t n = u64();
    DRAPE_REQUIRE(n < (1ull << 32), "string too large in ", path_);
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  MatX matrix() {
    const uint64_t rows = u64();
    const uint64_t cols = u64();
    DRAPE_REQUIRE(rows * cols < (1ull << 31), "matrix too large in ", path_);
    MatX m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    return m;
  }

  const std::string& path() const { return path_; }

 private:
  void raw(void* p, size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    DRAPE_REQUIRE(is_.gcount() == static_cast<std::streamsize>(n), "truncated file: ", path_);
  }
  std::ifstream is_;
  std::string path_;
};

// FNV-1a over a byte buffer; used for config/asset fingerprints in manifests.
uint64_t fnv1a(const void* data, size_t n);
uint64_t fnv1a_file(const std::string& path);
std::string hex64(uint64_t v);

// Write-to-temp-then-rename so readers never observe a half-written file.
void atomic_replace(const std::string& tmp_path, const std::string& final_path);

}  // namespace drape
