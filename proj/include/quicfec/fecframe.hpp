#pragma once

// FEC framework: turns outgoing packets into source symbols, packages repair symbols
// into FEC frames, and runs recovery on the receiving side.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "quicfec/bytes.hpp"
#include "quicfec/codec/scheme.hpp"
#include "quicfec/wire.hpp"

namespace quicfec::fec {

using codec::RepairFecPayloadId;
using codec::SourceFecPayloadId;
using wire::FecFrame;

struct OversizeError : std::length_error {
  using std::length_error::length_error;
};

struct ProtectedPacket {
  Bytes wire;    // F set, source FEC payload id inserted after the packet number
  Bytes symbol;  // wire image zero-padded to the symbol size
};

inline ProtectedPacket protect_packet(ByteView plain_packet, SourceFecPayloadId id, std::size_t symbol_size) {
  ByteReader r(plain_packet);
  wire::PublicHeader header = wire::read_header(r);
  if (header.f_flag()) throw std::invalid_argument("protect_packet: packet already carries a source FEC id");
  header.source_fec_payload_id = id;

  ProtectedPacket out;
  ByteWriter w(out.wire);
  wire::write_header(w, header);
  w.raw(plain_packet.subspan(r.position()));
  if (out.wire.size() > symbol_size) {
    throw OversizeError("protected packet is " + std::to_string(out.wire.size()) + " bytes, symbol size is " +
                        std::to_string(symbol_size));
  }
  out.symbol = out.wire;
  out.symbol.resize(symbol_size, 0);
  return out;
}

inline std::vector<FecFrame> fragment_repair(const codec::RepairSymbol& repair, std::size_t max_frame_payload) {
  if (repair.payload.empty()) throw std::invalid_argument("fragment_repair: empty repair symbol");
  if (max_frame_payload == 0) throw std::invalid_argument("fragment_repair: max_frame_payload must be >= 1");
  if (repair.payload.size() > 0xFFFF) throw std::invalid_argument("fragment_repair: repair longer than 65535 bytes");
  std::vector<FecFrame> out;
  const std::size_t total = repair.payload.size();
  for (std::size_t off = 0; off < total; off += max_frame_payload) {
    const std::size_t len = std::min(max_frame_payload, total - off);
    FecFrame f;
    f.repair_id = repair.id;
    f.symbol_length = static_cast<std::uint16_t>(total);
    f.fragment_offset = static_cast<std::uint16_t>(off);
    f.scheme_byte = repair.scheme_byte;
    f.data.assign(repair.payload.begin() + static_cast<std::ptrdiff_t>(off),
                  repair.payload.begin() + static_cast<std::ptrdiff_t>(off + len));
    out.push_back(std::move(f));
  }
  return out;
}

// Sending half of the framework for one connection direction.
class FecSender {
 public:
  struct Output {
    Bytes wire;
    std::vector<FecFrame> repair_frames;  // due right after this packet
  };

  FecSender(const codec::SchemeConfig& scheme, std::size_t symbol_size, std::size_t max_frame_payload)
      : encoder_(codec::make_encoder(scheme)), symbol_size_(symbol_size), max_frame_payload_(max_frame_payload) {}

  SourceFecPayloadId next_source_id() const { return encoder_->next_source_id(); }
  std::size_t symbol_size() const { return symbol_size_; }

  Output protect(ByteView plain_packet) {
    auto protected_packet = protect_packet(plain_packet, encoder_->next_source_id(), symbol_size_);
    Output out;
    out.wire = std::move(protected_packet.wire);
    for (const auto& repair : encoder_->add_source(std::move(protected_packet.symbol))) {
      auto frames = fragment_repair(repair, max_frame_payload_);
      out.repair_frames.insert(out.repair_frames.end(), std::make_move_iterator(frames.begin()),
                               std::make_move_iterator(frames.end()));
    }
    return out;
  }

 private:
  std::unique_ptr<codec::SchemeEncoder> encoder_;
  std::size_t symbol_size_;
  std::size_t max_frame_payload_;
};

// Receiving half: reassembles repairs, feeds the scheme, and hands back recovered
// packets. Each source id reaches the transport at most once.
class RecoveryBuffer {
 public:
  struct Outcome {
    std::vector<Bytes> recovered;  // packet images, trailing zero padding retained
    bool duplicate = false;
    bool corrupted = false;
  };

  RecoveryBuffer(const codec::SchemeConfig& scheme, std::size_t symbol_size)
      : decoder_(codec::make_decoder(scheme)), symbol_size_(symbol_size) {}

  // `wire_packet` must carry the F flag. duplicate is set when the id was already
  // delivered, in which case the caller drops the packet.
  Outcome on_source_symbol(ByteView wire_packet) {
    ByteReader r(wire_packet);
    const auto header = wire::read_header(r);
    if (!header.f_flag()) throw std::invalid_argument("on_source_symbol: packet lacks the F flag");
    const auto id = *header.source_fec_payload_id;
    Outcome out;
    if (!mark_delivered(id)) {
      out.duplicate = true;
      return out;
    }
    Bytes symbol(wire_packet.begin(), wire_packet.end());
    symbol.resize(std::max(symbol_size_, symbol.size()), 0);
    collect(decoder_->on_source(id, std::move(symbol)), out);
    return out;
  }

  Outcome on_fec_frame(const FecFrame& frame) {
    Outcome out;
    if (completed_.contains(frame.repair_id.raw)) {
      out.duplicate = true;
      return out;
    }
    if (frame.symbol_length == 0 ||
        static_cast<std::size_t>(frame.fragment_offset) + frame.data.size() > frame.symbol_length) {
      out.corrupted = true;
      ++corrupted_;
      return out;
    }

    auto [it, inserted] = partial_.try_emplace(frame.repair_id.raw);
    Partial& p = it->second;
    if (inserted) {
      p.symbol_length = frame.symbol_length;
      p.scheme_byte = frame.scheme_byte;
      p.data.assign(frame.symbol_length, 0);
      p.have.assign(frame.symbol_length, false);
    } else if (p.symbol_length != frame.symbol_length || p.scheme_byte != frame.scheme_byte) {
      drop_corrupted(it, out);
      return out;
    }

    bool added = false;
    for (std::size_t i = 0; i < frame.data.size(); ++i) {
      const std::size_t pos = frame.fragment_offset + i;
      if (p.have[pos]) {
        if (p.data[pos] != frame.data[i]) {
          drop_corrupted(it, out);
          return out;
        }
        continue;
      }
      p.have[pos] = true;
      p.data[pos] = frame.data[i];
      ++p.filled;
      added = true;
    }
    if (!added && !frame.data.empty()) {
      out.duplicate = true;
      return out;
    }
    if (p.filled < p.symbol_length) return out;

    codec::RepairSymbol repair{frame.repair_id, p.scheme_byte, std::move(p.data)};
    partial_.erase(it);
    remember_completed(frame.repair_id.raw);
    collect(decoder_->on_repair(repair), out);
    return out;
  }

  std::size_t corrupted_repairs() const { return corrupted_; }
  std::size_t pending_reassemblies() const { return partial_.size(); }

 private:
  struct Partial {
    std::uint16_t symbol_length = 0;
    std::uint8_t scheme_byte = 0;
    Bytes data;
    std::vector<bool> have;
    std::size_t filled = 0;
  };

  static constexpr std::size_t kMemory = 1 << 14;

  void drop_corrupted(std::map<std::uint64_t, Partial>::iterator it, Outcome& out) {
    remember_completed(it->first);
    partial_.erase(it);
    out.corrupted = true;
    ++corrupted_;
  }

  void collect(codec::RecoveredSymbols recovered, Outcome& out) {
    for (auto& [id, symbol] : recovered) {
      if (mark_delivered(id)) out.recovered.push_back(std::move(symbol));
    }
  }

  bool mark_delivered(SourceFecPayloadId id) {
    if (!delivered_.insert(id.raw).second) return false;
    while (delivered_.size() > kMemory) delivered_.erase(delivered_.begin());
    return true;
  }

  void remember_completed(std::uint64_t raw) {
    completed_.insert(raw);
    while (completed_.size() > kMemory) completed_.erase(completed_.begin());
    while (partial_.size() > kMemory) partial_.erase(partial_.begin());
  }

  std::unique_ptr<codec::SchemeDecoder> decoder_;
  std::size_t symbol_size_;
  std::set<std::uint32_t> delivered_;
  std::set<std::uint64_t> completed_;
  std::map<std::uint64_t, Partial> partial_;
  std::size_t corrupted_ = 0;
};

}  // namespace quicfec::fec
