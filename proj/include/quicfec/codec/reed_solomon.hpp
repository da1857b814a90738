#pragma once

// Systematic Reed-Solomon erasure code over GF(2^8).
//
// The generator is a Vandermonde matrix on evaluation points 0..n-1 right-multiplied
// by the inverse of its top k x k block, so the first k rows are the identity and any
// k rows stay invertible (MDS). Distinct evaluation points cap n at 256.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "quicfec/bytes.hpp"
#include "quicfec/codec/xor.hpp"
#include "quicfec/gf256.hpp"

namespace quicfec::codec {

struct CapacityError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct BlockCodeParams {
  unsigned n = 0;
  unsigned k = 0;

  unsigned repair_count() const { return n - k; }
  double code_rate() const { return static_cast<double>(k) / n; }
};

inline constexpr unsigned kMaxReedSolomonSymbols = 256;

inline void validate(const BlockCodeParams& p) {
  if (p.k == 0 || p.k >= p.n) {
    throw std::invalid_argument("block code needs 0 < k < n, got (" + std::to_string(p.n) + ", " +
                                std::to_string(p.k) + ")");
  }
  if (p.k > kMaxReedSolomonSymbols || p.n - p.k > kMaxReedSolomonSymbols || p.n > kMaxReedSolomonSymbols) {
    throw CapacityError("Reed-Solomon over GF(2^8) supports at most 256 symbols per block, got n=" +
                        std::to_string(p.n));
  }
}

inline gf::Matrix rs_generator_matrix(const BlockCodeParams& params) {
  validate(params);
  const std::size_t n = params.n;
  const std::size_t k = params.k;

  gf::Matrix vandermonde(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      vandermonde(i, j) = gf::pow(static_cast<gf::Element>(i), static_cast<unsigned>(j));
    }
  }

  // Invert the top block by solving top * X = I row-symbol-wise.
  std::vector<std::size_t> top_rows(k);
  for (std::size_t i = 0; i < k; ++i) top_rows[i] = i;
  const gf::Matrix top = vandermonde.select_rows(top_rows);
  std::vector<Bytes> identity(k, Bytes(k, 0));
  for (std::size_t i = 0; i < k; ++i) identity[i][i] = 1;
  auto solved = gf::solve_linear_system(top, identity);
  auto* rows = std::get_if<std::vector<Bytes>>(&solved);
  if (rows == nullptr) throw std::logic_error("rs_generator_matrix: Vandermonde block is singular");

  gf::Matrix top_inverse(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) top_inverse(i, j) = (*rows)[i][j];
  }
  return vandermonde * top_inverse;
}

// Precomputed generator; what the block scheme keeps per connection.
class ReedSolomonCode {
 public:
  explicit ReedSolomonCode(BlockCodeParams params) : params_(params), generator_(rs_generator_matrix(params)) {}

  const BlockCodeParams& params() const { return params_; }
  const gf::Matrix& generator() const { return generator_; }

  std::vector<Bytes> encode(std::span<const Bytes> sources) const {
    if (sources.size() != params_.k) {
      throw std::invalid_argument("rs_encode: expected " + std::to_string(params_.k) + " sources, got " +
                                  std::to_string(sources.size()));
    }
    const std::size_t len = sources.front().size();
    for (const auto& s : sources) {
      if (s.size() != len) throw std::invalid_argument("rs_encode: source lengths differ");
    }
    std::vector<Bytes> repairs(params_.repair_count(), Bytes(len, 0));
    for (std::size_t r = 0; r < repairs.size(); ++r) {
      auto row = generator_.row(params_.k + r);
      for (std::size_t j = 0; j < params_.k; ++j) gf::mul_add_region(repairs[r], sources[j], row[j]);
    }
    return repairs;
  }

  // One slot per source position and per repair index; nullopt marks an erasure.
  RecoverResult recover(std::span<const std::optional<Bytes>> sources,
                        std::span<const std::optional<Bytes>> repairs) const {
    if (sources.size() != params_.k || repairs.size() != params_.repair_count()) {
      throw std::invalid_argument("rs_recover: slot counts do not match code parameters");
    }
    std::vector<std::size_t> missing;
    std::size_t symbol_len = 0;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      if (!sources[j]) {
        missing.push_back(j);
      } else {
        symbol_len = sources[j]->size();
      }
    }
    if (missing.empty()) return Recovered{};

    std::vector<std::size_t> repair_rows;
    for (std::size_t r = 0; r < repairs.size(); ++r) {
      if (repairs[r]) {
        repair_rows.push_back(r);
        symbol_len = repairs[r]->size();
      }
    }
    if (repair_rows.size() < missing.size()) return Unrecoverable{std::move(missing)};
    repair_rows.resize(missing.size());

    // Move the received sources to the right-hand side; the unknowns are the erasures.
    const std::size_t m = missing.size();
    gf::Matrix coeffs(m, m);
    std::vector<Bytes> rhs(m);
    for (std::size_t e = 0; e < m; ++e) {
      const std::size_t r = repair_rows[e];
      auto row = generator_.row(params_.k + r);
      rhs[e] = *repairs[r];
      if (rhs[e].size() != symbol_len) throw std::invalid_argument("rs_recover: symbol lengths differ");
      for (std::size_t j = 0; j < params_.k; ++j) {
        if (sources[j]) gf::mul_add_region(rhs[e], *sources[j], row[j]);
      }
      for (std::size_t u = 0; u < m; ++u) coeffs(e, u) = row[missing[u]];
    }

    auto solved = gf::solve_linear_system(coeffs, rhs);
    auto* values = std::get_if<std::vector<Bytes>>(&solved);
    if (values == nullptr) return Unrecoverable{std::move(missing)};  // unreachable for an MDS code
    Recovered out;
    for (std::size_t u = 0; u < m; ++u) out.symbols.emplace_back(missing[u], std::move((*values)[u]));
    return out;
  }

 private:
  BlockCodeParams params_;
  gf::Matrix generator_;
};

inline std::vector<Bytes> rs_encode(std::span<const Bytes> sources, const BlockCodeParams& params) {
  return ReedSolomonCode(params).encode(sources);
}

inline RecoverResult rs_recover(std::span<const std::optional<Bytes>> sources,
                                std::span<const std::optional<Bytes>> repairs, const BlockCodeParams& params) {
  return ReedSolomonCode(params).recover(sources, repairs);
}

}  // namespace quicfec::codec
