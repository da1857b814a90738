#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace quicfec {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Big-endian writer used by every wire format in the project.
class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { uint_be(v, 2); }
  void u32(std::uint32_t v) { uint_be(v, 4); }
  void u64(std::uint64_t v) { uint_be(v, 8); }

  void uint_be(std::uint64_t v, std::size_t width) {
    for (std::size_t i = width; i-- > 0;) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  void raw(ByteView data) { out_.insert(out_.end(), data.begin(), data.end()); }

 private:
  Bytes& out_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteView in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(uint_be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(uint_be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint_be(4)); }
  std::uint64_t u64() { return uint_be(8); }

  std::uint64_t uint_be(std::size_t width) {
    need(width);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += width;
    return v;
  }

  ByteView raw(std::size_t n) {
    need(n);
    auto view = in_.subspan(pos_, n);
    pos_ += n;
    return view;
  }

  std::uint8_t peek() const {
    if (pos_ >= in_.size()) throw DecodeError("truncated input");
    return in_[pos_];
  }

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool empty() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw DecodeError("truncated input: need " + std::to_string(n) + " bytes, have " +
                        std::to_string(in_.size() - pos_));
    }
  }

  ByteView in_;
  std::size_t pos_ = 0;
};

}  // namespace quicfec
