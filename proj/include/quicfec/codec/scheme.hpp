#pragma once

// Scheme-neutral contract between the FEC framework and the three FEC schemes.
//
// Source FEC Payload ID (32 bits):
//   block schemes  : block_id (24) | offset_in_block (8)
//   convolutional  : flat source symbol sequence number (32)
// Repair FEC Payload ID (64 bits):
//   first (32) | symbol_index (8) | size (8) | low (16)
//   Reed-Solomon : first = block_id, size = k, low = n - k
//   XOR          : first = interleaving group, symbol_index = lane, size = k, low = 1
//   RLC          : first = window_first_id, size = window_size, low = seed
// The RLC density threshold byte travels in the FEC frame, not in the id.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "quicfec/bytes.hpp"
#include "quicfec/codec/reed_solomon.hpp"
#include "quicfec/codec/rlc.hpp"
#include "quicfec/codec/xor.hpp"

namespace quicfec::codec {

enum class SchemeId : std::uint8_t { none = 0x00, xor_interleaved = 0x01, reed_solomon = 0x02, rlc = 0x03 };

inline std::string_view to_string(SchemeId id) {
  switch (id) {
    case SchemeId::none: return "none";
    case SchemeId::xor_interleaved: return "xor";
    case SchemeId::reed_solomon: return "rs";
    case SchemeId::rlc: return "rlc";
  }
  return "unknown";
}

inline SchemeId scheme_from_string(std::string_view s) {
  if (s == "xor") return SchemeId::xor_interleaved;
  if (s == "rs") return SchemeId::reed_solomon;
  if (s == "rlc") return SchemeId::rlc;
  if (s == "none") return SchemeId::none;
  throw std::invalid_argument("unknown FEC scheme '" + std::string(s) + "'");
}

struct SourceFecPayloadId {
  std::uint32_t raw = 0;

  static SourceFecPayloadId block(std::uint32_t block_id, std::uint8_t offset) {
    return {((block_id & 0xFFFFFFu) << 8) | offset};
  }
  std::uint32_t block_id() const { return raw >> 8; }
  std::uint8_t offset() const { return static_cast<std::uint8_t>(raw); }

  auto operator<=>(const SourceFecPayloadId&) const = default;
};

struct RepairFecPayloadId {
  std::uint64_t raw = 0;

  static RepairFecPayloadId make(std::uint32_t first, std::uint8_t symbol_index, std::uint8_t size,
                                 std::uint16_t low) {
    return {(static_cast<std::uint64_t>(first) << 32) | (static_cast<std::uint64_t>(symbol_index) << 24) |
            (static_cast<std::uint64_t>(size) << 16) | low};
  }
  std::uint32_t first() const { return static_cast<std::uint32_t>(raw >> 32); }
  std::uint8_t symbol_index() const { return static_cast<std::uint8_t>(raw >> 24); }
  std::uint8_t size() const { return static_cast<std::uint8_t>(raw >> 16); }
  std::uint16_t low() const { return static_cast<std::uint16_t>(raw); }

  auto operator<=>(const RepairFecPayloadId&) const = default;
};

struct RepairSymbol {
  RepairFecPayloadId id;
  std::uint8_t scheme_byte = 0;  // RLC density threshold; zero for block schemes
  Bytes payload;
};

struct SchemeConfig {
  SchemeId id = SchemeId::none;
  unsigned n = 0;
  unsigned k = 0;
  unsigned window = 0;            // RLC L
  unsigned interleave_depth = 1;  // XOR D
  double density = 1.0;           // RLC density threshold

  BlockCodeParams block() const { return {n, k}; }
  ConvCodeParams conv() const { return {n, k, window, density}; }

  static SchemeConfig reed_solomon(unsigned n, unsigned k) { return {SchemeId::reed_solomon, n, k, 0, 1, 1.0}; }
  static SchemeConfig xor_interleaved(unsigned n, unsigned k, unsigned depth) {
    return {SchemeId::xor_interleaved, n, k, 0, depth, 1.0};
  }
  static SchemeConfig rlc(unsigned n, unsigned k, unsigned window, double density = 1.0) {
    return {SchemeId::rlc, n, k, window, 1, density};
  }
};

inline void validate(const SchemeConfig& c) {
  switch (c.id) {
    case SchemeId::reed_solomon: validate(c.block()); break;
    case SchemeId::xor_interleaved:
      if (c.k == 0 || c.n != c.k + 1) throw std::invalid_argument("XOR scheme needs n = k + 1");
      if (c.interleave_depth == 0 || c.interleave_depth * c.k > 256) {
        throw std::invalid_argument("XOR interleaving needs 1 <= depth * k <= 256");
      }
      break;
    case SchemeId::rlc: validate(c.conv()); break;
    case SchemeId::none: throw std::invalid_argument("no FEC scheme configured");
  }
}

using RecoveredSymbols = std::vector<std::pair<SourceFecPayloadId, Bytes>>;

class SchemeEncoder {
 public:
  virtual ~SchemeEncoder() = default;
  // Id the next protected symbol will carry.
  virtual SourceFecPayloadId next_source_id() const = 0;
  // Consumes the symbol that carries next_source_id(); returns the repairs due now.
  virtual std::vector<RepairSymbol> add_source(Bytes symbol) = 0;
};

class SchemeDecoder {
 public:
  virtual ~SchemeDecoder() = default;
  virtual RecoveredSymbols on_source(SourceFecPayloadId id, Bytes symbol) = 0;
  virtual RecoveredSymbols on_repair(const RepairSymbol& repair) = 0;
};

namespace detail {

// Block id space is 24 bits; blocks farther than this behind the newest are dropped.
inline constexpr std::uint32_t kBlockHorizon = 64;

class ReedSolomonEncoder final : public SchemeEncoder {
 public:
  explicit ReedSolomonEncoder(const SchemeConfig& c) : code_(c.block()) {}

  SourceFecPayloadId next_source_id() const override {
    return SourceFecPayloadId::block(block_id_, static_cast<std::uint8_t>(pending_.size()));
  }

  std::vector<RepairSymbol> add_source(Bytes symbol) override {
    pending_.push_back(std::move(symbol));
    if (pending_.size() < code_.params().k) return {};
    const auto payloads = code_.encode(pending_);
    std::vector<RepairSymbol> out;
    for (std::size_t r = 0; r < payloads.size(); ++r) {
      out.push_back({RepairFecPayloadId::make(block_id_, static_cast<std::uint8_t>(r),
                                              static_cast<std::uint8_t>(code_.params().k),
                                              static_cast<std::uint16_t>(code_.params().repair_count())),
                     0, payloads[r]});
    }
    pending_.clear();
    block_id_ = (block_id_ + 1) & 0xFFFFFFu;
    return out;
  }

 private:
  ReedSolomonCode code_;
  std::uint32_t block_id_ = 0;
  std::vector<Bytes> pending_;
};

class ReedSolomonDecoder final : public SchemeDecoder {
 public:
  explicit ReedSolomonDecoder(const SchemeConfig& c) : code_(c.block()) {}

  RecoveredSymbols on_source(SourceFecPayloadId id, Bytes symbol) override {
    if (id.offset() >= code_.params().k) return {};
    Block* b = block(id.block_id());
    if (b == nullptr || b->done || b->sources[id.offset()]) return {};
    b->sources[id.offset()] = std::move(symbol);
    return try_decode(id.block_id(), *b);
  }

  RecoveredSymbols on_repair(const RepairSymbol& repair) override {
    const auto& p = code_.params();
    if (repair.id.size() != p.k || repair.id.low() != p.repair_count() || repair.id.symbol_index() >= p.repair_count()) {
      return {};
    }
    Block* b = block(repair.id.first());
    if (b == nullptr || b->done || b->repairs[repair.id.symbol_index()]) return {};
    b->repairs[repair.id.symbol_index()] = repair.payload;
    return try_decode(repair.id.first(), *b);
  }

 private:
  struct Block {
    std::vector<std::optional<Bytes>> sources;
    std::vector<std::optional<Bytes>> repairs;
    bool done = false;
  };

  Block* block(std::uint32_t id) {
    if (id > newest_) {
      newest_ = id;
      std::erase_if(blocks_, [this](const auto& kv) { return kv.first + kBlockHorizon < newest_; });
    }
    if (id + kBlockHorizon < newest_) return nullptr;
    auto [it, inserted] = blocks_.try_emplace(id);
    if (inserted) {
      it->second.sources.resize(code_.params().k);
      it->second.repairs.resize(code_.params().repair_count());
    }
    return &it->second;
  }

  RecoveredSymbols try_decode(std::uint32_t block_id, Block& b) {
    std::size_t have = 0;
    std::size_t missing = 0;
    for (const auto& s : b.sources) s ? ++have : ++missing;
    if (missing == 0) {
      b.done = true;
      return {};
    }
    for (const auto& r : b.repairs) have += r.has_value();
    if (have < code_.params().k) return {};

    auto result = code_.recover(b.sources, b.repairs);
    RecoveredSymbols out;
    if (auto* rec = std::get_if<Recovered>(&result)) {
      for (auto& [pos, value] : rec->symbols) {
        out.emplace_back(SourceFecPayloadId::block(block_id, static_cast<std::uint8_t>(pos)), std::move(value));
      }
      b.done = true;
    }
    return out;
  }

  ReedSolomonCode code_;
  std::uint32_t newest_ = 0;
  std::map<std::uint32_t, Block> blocks_;
};

class XorEncoder final : public SchemeEncoder {
 public:
  explicit XorEncoder(const SchemeConfig& c) : k_(c.k), depth_(c.interleave_depth), lanes_(depth_) {}

  SourceFecPayloadId next_source_id() const override {
    return SourceFecPayloadId::block(group_, static_cast<std::uint8_t>(offset_));
  }

  std::vector<RepairSymbol> add_source(Bytes symbol) override {
    const auto pos = interleave_block_index(offset_, depth_);
    auto& lane = lanes_[pos.lane];
    if (lane.empty()) {
      lane = std::move(symbol);
    } else {
      gf::mul_add_region(lane, symbol, 1);
    }
    std::vector<RepairSymbol> out;
    if (pos.index + 1 == k_) {
      out.push_back({RepairFecPayloadId::make(group_, static_cast<std::uint8_t>(pos.lane),
                                              static_cast<std::uint8_t>(k_), 1),
                     0, std::move(lane)});
      lane.clear();
    }
    if (++offset_ == depth_ * k_) {
      offset_ = 0;
      group_ = (group_ + 1) & 0xFFFFFFu;
    }
    return out;
  }

 private:
  unsigned k_;
  unsigned depth_;
  std::vector<Bytes> lanes_;  // running XOR per open block
  std::uint32_t group_ = 0;
  unsigned offset_ = 0;
};

class XorDecoder final : public SchemeDecoder {
 public:
  explicit XorDecoder(const SchemeConfig& c) : k_(c.k), depth_(c.interleave_depth) {}

  RecoveredSymbols on_source(SourceFecPayloadId id, Bytes symbol) override {
    if (id.offset() >= depth_ * k_) return {};
    const auto pos = interleave_block_index(id.offset(), depth_);
    Block* b = block(id.block_id(), pos.lane);
    if (b == nullptr || b->done || b->sources[pos.index]) return {};
    b->sources[pos.index] = std::move(symbol);
    return try_decode(id.block_id(), pos.lane, *b);
  }

  RecoveredSymbols on_repair(const RepairSymbol& repair) override {
    if (repair.id.size() != k_ || repair.id.symbol_index() >= depth_) return {};
    Block* b = block(repair.id.first(), repair.id.symbol_index());
    if (b == nullptr || b->done || b->repair) return {};
    b->repair = repair.payload;
    return try_decode(repair.id.first(), repair.id.symbol_index(), *b);
  }

 private:
  struct Block {
    std::vector<std::optional<Bytes>> sources;
    std::optional<Bytes> repair;
    bool done = false;
  };

  Block* block(std::uint32_t group, std::uint32_t lane) {
    if (group > newest_) {
      newest_ = group;
      std::erase_if(blocks_, [this](const auto& kv) { return kv.first.first + kBlockHorizon < newest_; });
    }
    if (group + kBlockHorizon < newest_) return nullptr;
    auto [it, inserted] = blocks_.try_emplace({group, lane});
    if (inserted) it->second.sources.resize(k_);
    return &it->second;
  }

  RecoveredSymbols try_decode(std::uint32_t group, std::uint32_t lane, Block& b) {
    if (!b.repair) return {};
    auto result = xor_recover(b.sources, *b.repair);
    RecoveredSymbols out;
    if (auto* rec = std::get_if<Recovered>(&result)) {
      for (auto& [index, value] : rec->symbols) {
        const auto offset = static_cast<std::uint8_t>(index * depth_ + lane);
        out.emplace_back(SourceFecPayloadId::block(group, offset), std::move(value));
      }
      b.done = true;
    }
    return out;
  }

  unsigned k_;
  unsigned depth_;
  std::uint32_t newest_ = 0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Block> blocks_;
};

class RlcEncoder final : public SchemeEncoder {
 public:
  explicit RlcEncoder(const SchemeConfig& c)
      : params_(c.conv()), density_byte_(density_threshold_byte(c.density)) {}

  SourceFecPayloadId next_source_id() const override { return {next_id_}; }

  std::vector<RepairSymbol> add_source(Bytes symbol) override {
    window_.push_back(std::move(symbol));
    if (window_.size() > params_.window) window_.pop_front();
    ++next_id_;
    if (++since_step_ < params_.k) return {};
    since_step_ = 0;

    std::vector<Bytes> window(window_.begin(), window_.end());
    std::vector<RepairSymbol> out;
    const std::uint32_t first = next_id_ - static_cast<std::uint32_t>(window.size());
    for (unsigned i = 0; i < params_.repair_count(); ++i) {
      SchemeSpecificValue ssv{next_seed(), density_byte_, first, static_cast<std::uint8_t>(window.size())};
      auto coefficients = rlc_coefficients(ssv, window.size());
      out.push_back({RepairFecPayloadId::make(first, static_cast<std::uint8_t>(i), ssv.window_size, ssv.seed),
                     density_byte_, rlc_combine(window, coefficients)});
    }
    return out;
  }

 private:
  // Seeds 0 and 1 produce the same generator state, so 0 is skipped.
  std::uint16_t next_seed() {
    if (seed_ == 0) seed_ = 1;
    return seed_++;
  }

  ConvCodeParams params_;
  std::uint8_t density_byte_;
  std::deque<Bytes> window_;
  std::uint32_t next_id_ = 0;
  unsigned since_step_ = 0;
  std::uint16_t seed_ = 1;
};

class RlcDecoder final : public SchemeDecoder {
 public:
  explicit RlcDecoder(const SchemeConfig& c) : receiver_(4 * c.window) {}

  RecoveredSymbols on_source(SourceFecPayloadId id, Bytes symbol) override {
    return wrap(receiver_.on_source(id.raw, std::move(symbol)));
  }

  RecoveredSymbols on_repair(const RepairSymbol& repair) override {
    SchemeSpecificValue ssv{repair.id.low(), repair.scheme_byte, repair.id.first(), repair.id.size()};
    return wrap(receiver_.on_repair(ssv, repair.payload));
  }

 private:
  static RecoveredSymbols wrap(RlcReceiver::RecoveredSources in) {
    RecoveredSymbols out;
    out.reserve(in.size());
    for (auto& [id, value] : in) out.emplace_back(SourceFecPayloadId{id}, std::move(value));
    return out;
  }

  RlcReceiver receiver_;
};

}  // namespace detail

inline std::unique_ptr<SchemeEncoder> make_encoder(const SchemeConfig& c) {
  validate(c);
  switch (c.id) {
    case SchemeId::reed_solomon: return std::make_unique<detail::ReedSolomonEncoder>(c);
    case SchemeId::xor_interleaved: return std::make_unique<detail::XorEncoder>(c);
    case SchemeId::rlc: return std::make_unique<detail::RlcEncoder>(c);
    case SchemeId::none: break;
  }
  throw std::invalid_argument("make_encoder: no scheme");
}

inline std::unique_ptr<SchemeDecoder> make_decoder(const SchemeConfig& c) {
  validate(c);
  switch (c.id) {
    case SchemeId::reed_solomon: return std::make_unique<detail::ReedSolomonDecoder>(c);
    case SchemeId::xor_interleaved: return std::make_unique<detail::XorDecoder>(c);
    case SchemeId::rlc: return std::make_unique<detail::RlcDecoder>(c);
    case SchemeId::none: break;
  }
  throw std::invalid_argument("make_decoder: no scheme");
}

}  // namespace quicfec::codec
