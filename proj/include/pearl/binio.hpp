#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "pearl/common.hpp"

// Little-endian binary encoding helpers shared by the persisted formats.
namespace pearl::io {

class ByteWriter {
 public:
  void raw(const void* data, std::size_t n) {
    buf_.append(static_cast<const char*>(data), n);
  }
  void u8(std::uint8_t v) { buf_.push_back(char(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str16(const std::string& s) {
    if (s.empty() || s.size() > 0xffff) {
      throw ValidationError("serialized string length out of range");
    }
    u16(std::uint16_t(s.size()));
    buf_.append(s);
  }
  // Long-form string; may be empty.
  void str32(const std::string& s) {
    if (s.size() > 0xffffffffu) {
      throw ValidationError("serialized string length out of range");
    }
    u32(std::uint32_t(s.size()));
    buf_.append(s);
  }
  void mat(const Eigen::MatrixXd& m) {
    u32(std::uint32_t(m.rows()));
    u32(std::uint32_t(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }

  const std::string& bytes() const { return buf_; }
  void write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.write(buf_.data(), std::streamsize(buf_.size()))) {
      throw IoError("cannot write '" + path + "'");
    }
  }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string source_name, std::string bytes)
      : name_(std::move(source_name)), bytes_(std::move(bytes)) {}

  static ByteReader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return ByteReader(path, std::string((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>()));
  }

  std::uint8_t u8() { return std::uint8_t(byte()); }
  std::uint16_t u16() { return std::uint16_t(byte() | (byte() << 8)); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(byte()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(byte()) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    if (pos_ + n > bytes_.size()) fail("truncated");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str16() { return raw(u16()); }
  std::string str32() { return raw(u32()); }
  Eigen::MatrixXd mat() {
    const auto rows = Eigen::Index(u32());
    const auto cols = Eigen::Index(u32());
    if (rows < 0 || cols < 0 || double(rows) * double(cols) > 1e9) {
      fail("implausible matrix shape");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f64();
    return m;
  }

  void expect_magic(const char* magic4, std::uint8_t version,
                    const std::string& kind) {
    if (raw(4) != std::string(magic4, 4)) {
      fail("not a " + kind + " file (bad magic)");
    }
    if (u8() != version) fail("unsupported " + kind + " format version");
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  void expect_end() {
    if (!at_end()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("'" + name_ + "': " + what);
  }

 private:
  unsigned byte() {
    if (pos_ >= bytes_.size()) fail("truncated");
    return static_cast<unsigned char>(bytes_[pos_++]);
  }
  std::string name_;
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace pearl::io
