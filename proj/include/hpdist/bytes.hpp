// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_BYTES_HPP
#define HPDIST_BYTES_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hpdist {

// All wire and file formats are little-endian, written byte by byte so the
// encoding does not depend on host endianness.

using ByteBuffer = std::vector<std::uint8_t>;

inline void append_u8(ByteBuffer& buf, std::uint8_t v) { buf.push_back(v); }

inline void append_u32(ByteBuffer& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void append_u64(ByteBuffer& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const ByteBuffer& buf) : ByteReader(buf.data(), buf.size()) {}

  std::uint8_t read_u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t read_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t read_u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_++]) << (8 * i);
    return v;
  }
  void read_raw(std::uint8_t* out, std::size_t n) {
    need(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = data_[pos_++];
  }
  std::size_t remaining() const { return size_ - pos_; }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw std::runtime_error("unexpected end of buffer");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace hpdist

#endif
