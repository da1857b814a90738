#pragma once

// Packet and frame encoding. All multi-byte integers are big-endian.
//
// Public header:
//   flags (8)               F = bit 7, CID present = bit 6, packet number length = bits 5-4
//                           (00 -> 1 byte, 01 -> 2, 10 -> 4, 11 -> 6); bits 3-0 are zero
//   connection id (64)      if CID present
//   packet number (8..48)
//   source FEC payload id (32)  iff F is set
//
// Frames (type byte, then body):
//   0x00 PADDING            no body
//   0x20 FEC                repair_id (64) symbol_length (16) fragment_offset (16)
//                           scheme_byte (8) data_length (16) data
//   0x21 STREAM_UNRELIABLE  stream_id (32) offset (64) data_length (16) data
//   0x22 ACK                largest_acked (64) ack_delay_us (32) range_count (8)
//                           range_count x [smallest (64) largest (64)]
//   0x23 WINDOW_UPDATE      byte_offset (64)
//   0x24 STREAM             same body as STREAM_UNRELIABLE, reliable delivery

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "quicfec/bytes.hpp"
#include "quicfec/codec/scheme.hpp"

namespace quicfec::wire {

enum class PnLength : std::uint8_t { one = 0, two = 1, four = 2, six = 3 };

inline constexpr std::size_t pn_bytes(PnLength l) {
  constexpr std::size_t widths[] = {1, 2, 4, 6};
  return widths[static_cast<std::uint8_t>(l)];
}

struct PublicHeader {
  std::optional<std::uint64_t> connection_id;
  PnLength pn_length = PnLength::four;
  std::uint64_t packet_number = 0;
  std::optional<codec::SourceFecPayloadId> source_fec_payload_id;  // present iff F is set

  bool f_flag() const { return source_fec_payload_id.has_value(); }
  bool operator==(const PublicHeader&) const = default;
};

inline constexpr std::uint8_t kFlagF = 0x80;
inline constexpr std::uint8_t kFlagCid = 0x40;
inline constexpr std::uint8_t kFlagReservedMask = 0x0F;

enum class FrameType : std::uint8_t {
  padding = 0x00,
  fec = 0x20,
  stream_unreliable = 0x21,
  ack = 0x22,
  window_update = 0x23,
  stream = 0x24,
};

struct PaddingFrame {
  bool operator==(const PaddingFrame&) const = default;
};

struct StreamFrame {
  bool reliable = false;
  std::uint32_t stream_id = 0;
  std::uint64_t offset = 0;
  Bytes data;

  bool operator==(const StreamFrame&) const = default;
};

struct AckRange {
  std::uint64_t smallest = 0;
  std::uint64_t largest = 0;
  bool operator==(const AckRange&) const = default;
};

struct AckFrame {
  std::uint64_t largest_acked = 0;
  std::uint32_t ack_delay_us = 0;
  std::vector<AckRange> ranges;

  bool operator==(const AckFrame&) const = default;
};

// One fragment of a Repair Symbol.
struct FecFrame {
  codec::RepairFecPayloadId repair_id;
  std::uint16_t symbol_length = 0;
  std::uint16_t fragment_offset = 0;
  std::uint8_t scheme_byte = 0;
  Bytes data;

  bool operator==(const FecFrame&) const = default;
};

struct WindowUpdateFrame {
  std::uint64_t byte_offset = 0;
  bool operator==(const WindowUpdateFrame&) const = default;
};

using Frame = std::variant<PaddingFrame, StreamFrame, AckFrame, FecFrame, WindowUpdateFrame>;

struct Packet {
  PublicHeader header;
  std::vector<Frame> frames;

  bool operator==(const Packet&) const = default;
};

inline constexpr std::size_t kStreamFrameOverhead = 1 + 4 + 8 + 2;
inline constexpr std::size_t kFecFrameOverhead = 1 + 8 + 2 + 2 + 1 + 2;

inline std::size_t header_size(const PublicHeader& h) {
  return 1 + (h.connection_id ? 8 : 0) + pn_bytes(h.pn_length) + (h.f_flag() ? 4 : 0);
}

inline void write_header(ByteWriter& w, const PublicHeader& h) {
  const std::size_t width = pn_bytes(h.pn_length);
  if (width < 8 && (h.packet_number >> (8 * width)) != 0) {
    throw std::invalid_argument("packet number " + std::to_string(h.packet_number) + " does not fit in " +
                                std::to_string(width) + " bytes");
  }
  std::uint8_t flags = static_cast<std::uint8_t>(static_cast<std::uint8_t>(h.pn_length) << 4);
  if (h.f_flag()) flags |= kFlagF;
  if (h.connection_id) flags |= kFlagCid;
  w.u8(flags);
  if (h.connection_id) w.u64(*h.connection_id);
  w.uint_be(h.packet_number, width);
  if (h.source_fec_payload_id) w.u32(h.source_fec_payload_id->raw);
}

inline PublicHeader read_header(ByteReader& r) {
  const std::uint8_t flags = r.u8();
  if (flags & kFlagReservedMask) throw DecodeError("reserved header flag bits set");
  PublicHeader h;
  h.pn_length = static_cast<PnLength>((flags >> 4) & 0x3);
  if (flags & kFlagCid) h.connection_id = r.u64();
  h.packet_number = r.uint_be(pn_bytes(h.pn_length));
  if (flags & kFlagF) h.source_fec_payload_id = codec::SourceFecPayloadId{r.u32()};
  return h;
}

inline void write_frame(ByteWriter& w, const Frame& frame) {
  std::visit(
      [&w](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PaddingFrame>) {
          w.u8(static_cast<std::uint8_t>(FrameType::padding));
        } else if constexpr (std::is_same_v<T, StreamFrame>) {
          if (f.data.size() > 0xFFFF) throw std::invalid_argument("stream frame data longer than 65535 bytes");
          w.u8(static_cast<std::uint8_t>(f.reliable ? FrameType::stream : FrameType::stream_unreliable));
          w.u32(f.stream_id);
          w.u64(f.offset);
          w.u16(static_cast<std::uint16_t>(f.data.size()));
          w.raw(f.data);
        } else if constexpr (std::is_same_v<T, AckFrame>) {
          if (f.ranges.size() > 0xFF) throw std::invalid_argument("ack frame carries more than 255 ranges");
          w.u8(static_cast<std::uint8_t>(FrameType::ack));
          w.u64(f.largest_acked);
          w.u32(f.ack_delay_us);
          w.u8(static_cast<std::uint8_t>(f.ranges.size()));
          for (const auto& range : f.ranges) {
            w.u64(range.smallest);
            w.u64(range.largest);
          }
        } else if constexpr (std::is_same_v<T, FecFrame>) {
          if (f.data.size() > 0xFFFF) throw std::invalid_argument("FEC frame data longer than 65535 bytes");
          w.u8(static_cast<std::uint8_t>(FrameType::fec));
          w.u64(f.repair_id.raw);
          w.u16(f.symbol_length);
          w.u16(f.fragment_offset);
          w.u8(f.scheme_byte);
          w.u16(static_cast<std::uint16_t>(f.data.size()));
          w.raw(f.data);
        } else {
          w.u8(static_cast<std::uint8_t>(FrameType::window_update));
          w.u64(f.byte_offset);
        }
      },
      frame);
}

inline Frame read_frame(ByteReader& r) {
  const auto type = r.u8();
  switch (static_cast<FrameType>(type)) {
    case FrameType::padding: return PaddingFrame{};
    case FrameType::stream:
    case FrameType::stream_unreliable: {
      StreamFrame f;
      f.reliable = static_cast<FrameType>(type) == FrameType::stream;
      f.stream_id = r.u32();
      f.offset = r.u64();
      const auto len = r.u16();
      if (r.remaining() < len) throw DecodeError("stream frame data_length overruns packet");
      auto data = r.raw(len);
      f.data.assign(data.begin(), data.end());
      return f;
    }
    case FrameType::ack: {
      AckFrame f;
      f.largest_acked = r.u64();
      f.ack_delay_us = r.u32();
      const auto count = r.u8();
      f.ranges.resize(count);
      for (auto& range : f.ranges) {
        range.smallest = r.u64();
        range.largest = r.u64();
      }
      return f;
    }
    case FrameType::fec: {
      FecFrame f;
      f.repair_id = codec::RepairFecPayloadId{r.u64()};
      f.symbol_length = r.u16();
      f.fragment_offset = r.u16();
      f.scheme_byte = r.u8();
      const auto len = r.u16();
      if (r.remaining() < len) throw DecodeError("FEC frame data_length overruns packet");
      auto data = r.raw(len);
      f.data.assign(data.begin(), data.end());
      return f;
    }
    case FrameType::window_update: return WindowUpdateFrame{r.u64()};
  }
  throw DecodeError("unknown frame type 0x" + std::to_string(type));
}

inline Bytes serialize_packet(const Packet& p) {
  Bytes out;
  ByteWriter w(out);
  write_header(w, p.header);
  for (const auto& f : p.frames) write_frame(w, f);
  return out;
}

inline Packet parse_packet(ByteView bytes) {
  ByteReader r(bytes);
  Packet p;
  p.header = read_header(r);
  while (!r.empty()) p.frames.push_back(read_frame(r));
  return p;
}

inline std::size_t serialized_size(const Frame& frame) {
  return std::visit(
      [](const auto& f) -> std::size_t {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PaddingFrame>) return 1;
        else if constexpr (std::is_same_v<T, StreamFrame>) return kStreamFrameOverhead + f.data.size();
        else if constexpr (std::is_same_v<T, AckFrame>) return 1 + 8 + 4 + 1 + 16 * f.ranges.size();
        else if constexpr (std::is_same_v<T, FecFrame>) return kFecFrameOverhead + f.data.size();
        else return 1 + 8;
      },
      frame);
}

}  // namespace quicfec::wire
