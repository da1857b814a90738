#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "quicfec/bytes.hpp"
#include "quicfec/gf256.hpp"

namespace quicfec::codec {

// Sources rebuilt by a block decoder, keyed by position inside the block.
struct Recovered {
  std::vector<std::pair<std::size_t, Bytes>> symbols;
};

// Positions that could not be rebuilt.
struct Unrecoverable {
  std::vector<std::size_t> missing;
};

using RecoverResult = std::variant<Recovered, Unrecoverable>;

inline Bytes xor_encode(std::span<const Bytes> block) {
  if (block.empty()) throw std::invalid_argument("xor_encode: empty block");
  Bytes out = block.front();
  for (std::size_t i = 1; i < block.size(); ++i) {
    if (block[i].size() != out.size()) throw std::invalid_argument("xor_encode: symbol sizes differ");
    gf::mul_add_region(out, block[i], 1);
  }
  return out;
}

// `sources` has one slot per source position; nullopt marks an erasure.
inline RecoverResult xor_recover(std::span<const std::optional<Bytes>> sources, ByteView repair) {
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (!sources[i]) missing.push_back(i);
  }
  if (missing.empty()) return Recovered{};
  if (missing.size() > 1) return Unrecoverable{std::move(missing)};

  Bytes rebuilt(repair.begin(), repair.end());
  for (const auto& s : sources) {
    if (s) gf::mul_add_region(rebuilt, *s, 1);
  }
  Recovered out;
  out.symbols.emplace_back(missing.front(), std::move(rebuilt));
  return out;
}

struct InterleavePosition {
  std::uint32_t lane = 0;   // which of the D concurrently open blocks
  std::uint32_t index = 0;  // how many symbols this lane has received before
};

inline InterleavePosition interleave_block_index(std::uint32_t symbol_seq, std::uint32_t depth) {
  if (depth == 0) throw std::invalid_argument("interleave_block_index: depth must be >= 1");
  return {symbol_seq % depth, symbol_seq / depth};
}

}  // namespace quicfec::codec
