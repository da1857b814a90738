#pragma once

// Convolutional (sliding-window) Random Linear Code over GF(2^8).
//
// Each repair is a random linear combination of the source symbols in the current
// encoding window. Coefficients are drawn from a Park-Miller generator seeded with
// the 16-bit seed carried in the repair id, so the receiver rebuilds the equation
// from (seed, density threshold, window) alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "quicfec/bytes.hpp"
#include "quicfec/codec/prng.hpp"
#include "quicfec/gf256.hpp"

namespace quicfec::codec {

struct ConvCodeParams {
  unsigned n = 0;         // symbols out per window step
  unsigned k = 0;         // window shift, in source symbols
  unsigned window = 0;    // L, window length in source symbols
  double density = 1.0;   // expected fraction of nonzero coefficients, in (0, 1]

  unsigned repair_count() const { return n - k; }
};

inline void validate(const ConvCodeParams& p) {
  if (p.k == 0 || p.k >= p.n) throw std::invalid_argument("convolutional code needs 0 < k < n");
  if (p.window < p.k) throw std::invalid_argument("convolutional code needs k <= L");
  if (p.window > 255) throw std::invalid_argument("convolutional code window must fit in 8 bits");
  if (!(p.density > 0.0 && p.density <= 1.0)) throw std::invalid_argument("density threshold must be in (0, 1]");
}

// A slot is nonzero when (draw mod 256) <= byte, so density = (byte + 1) / 256.
inline std::uint8_t density_threshold_byte(double density) {
  const double scaled = std::ceil(density * 256.0) - 1.0;
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

inline double density_from_byte(std::uint8_t b) { return (b + 1) / 256.0; }

struct SchemeSpecificValue {
  std::uint16_t seed = 0;
  std::uint8_t density_threshold_byte = 255;
  std::uint32_t window_first_id = 0;
  std::uint8_t window_size = 0;

  bool operator==(const SchemeSpecificValue&) const = default;
};

inline std::vector<gf::Element> rlc_coefficients(const SchemeSpecificValue& ssv, std::size_t window_size) {
  if (window_size > 255) throw std::invalid_argument("rlc_coefficients: window larger than 255");
  PrngState state = seed_prng_16(ssv.seed);
  std::vector<gf::Element> coefficients(window_size, 0);
  // Two draws per slot whether or not it is selected, so slot j's draws do not
  // depend on the density.
  for (auto& c : coefficients) {
    const std::uint32_t select = prng_next(state);
    const std::uint32_t value = prng_next(state);
    if ((select % 256u) <= ssv.density_threshold_byte) c = static_cast<gf::Element>(1u + value % 255u);
  }
  return coefficients;
}

inline Bytes rlc_combine(std::span<const Bytes> window, std::span<const gf::Element> coefficients) {
  if (window.size() != coefficients.size()) throw std::invalid_argument("rlc_combine: size mismatch");
  const std::size_t len = window.empty() ? 0 : window.front().size();
  Bytes out(len, 0);
  for (std::size_t j = 0; j < window.size(); ++j) {
    if (window[j].size() != len) throw std::invalid_argument("rlc_combine: symbol sizes differ");
    gf::mul_add_region(out, window[j], coefficients[j]);
  }
  return out;
}

struct RlcRepair {
  SchemeSpecificValue ssv;
  Bytes payload;
};

// Repair i of one window step uses seed + i; `ssv` names the window and the first seed.
inline std::vector<RlcRepair> rlc_encode(std::span<const Bytes> window, const ConvCodeParams& params,
                                         const SchemeSpecificValue& ssv) {
  validate(params);
  if (window.size() > params.window) throw std::invalid_argument("rlc_encode: window longer than L");
  std::vector<RlcRepair> out;
  for (unsigned i = 0; i < params.repair_count(); ++i) {
    SchemeSpecificValue s = ssv;
    s.seed = static_cast<std::uint16_t>(ssv.seed + i);
    s.window_size = static_cast<std::uint8_t>(window.size());
    const auto coefficients = rlc_coefficients(s, window.size());
    out.push_back({s, rlc_combine(window, coefficients)});
  }
  return out;
}

// Receiver-side equation system. Received or rebuilt sources are substituted into
// pending equations; Gaussian elimination only runs once a run of consecutive
// unknowns (in id order) is covered by at least as many equations confined to it.
class RlcReceiver {
 public:
  using SourceId = std::uint32_t;
  using RecoveredSources = std::vector<std::pair<SourceId, Bytes>>;

  // Unknowns more than `horizon` ids behind the newest id are abandoned.
  explicit RlcReceiver(std::uint32_t horizon = 4 * 255) : horizon_(horizon) {}

  RecoveredSources on_source(SourceId id, Bytes payload) {
    RecoveredSources out;
    if (!learn(id, std::move(payload))) return out;
    solve_pending(out);
    return out;
  }

  RecoveredSources on_repair(const SchemeSpecificValue& ssv, Bytes payload) {
    RecoveredSources out;
    note_id(ssv.window_first_id + (ssv.window_size == 0 ? 0 : ssv.window_size - 1u));
    if (ssv.window_size == 0 || ssv.window_first_id < floor_id()) return out;

    const auto coefficients = rlc_coefficients(ssv, ssv.window_size);
    Equation eq;
    eq.rhs = std::move(payload);
    for (std::size_t j = 0; j < coefficients.size(); ++j) {
      if (coefficients[j] == 0) continue;
      const SourceId id = ssv.window_first_id + static_cast<SourceId>(j);
      if (auto it = known_.find(id); it != known_.end()) {
        gf::mul_add_region(eq.rhs, it->second, coefficients[j]);
      } else {
        eq.terms.emplace_back(id, coefficients[j]);
      }
    }
    if (eq.terms.empty()) return out;
    equations_.push_back(std::move(eq));
    solve_pending(out);
    return out;
  }

  bool is_known(SourceId id) const { return known_.contains(id); }
  std::size_t pending_equations() const { return equations_.size(); }

 private:
  struct Equation {
    std::vector<std::pair<SourceId, gf::Element>> terms;  // sorted by id
    Bytes rhs;
  };

  SourceId floor_id() const { return newest_ > horizon_ ? newest_ - horizon_ : 0; }

  void note_id(SourceId id) {
    if (id <= newest_) return;
    newest_ = id;
    const SourceId floor = floor_id();
    known_.erase(known_.begin(), known_.lower_bound(floor));
    std::erase_if(equations_, [floor](const Equation& e) { return e.terms.front().first < floor; });
  }

  // Returns false for a source we already hold.
  bool learn(SourceId id, Bytes payload) {
    note_id(id);
    if (id < floor_id()) return false;
    auto [it, inserted] = known_.emplace(id, std::move(payload));
    if (!inserted) return false;
    substitute(id, it->second);
    return true;
  }

  void substitute(SourceId id, const Bytes& value) {
    for (auto& eq : equations_) {
      auto it = std::find_if(eq.terms.begin(), eq.terms.end(), [id](const auto& t) { return t.first == id; });
      if (it == eq.terms.end()) continue;
      gf::mul_add_region(eq.rhs, value, it->second);
      eq.terms.erase(it);
    }
    std::erase_if(equations_, [](const Equation& e) { return e.terms.empty(); });
  }

  void solve_pending(RecoveredSources& out) {
    while (try_one_subsystem(out)) {
    }
  }

  // Finds the first square (or over-determined) subsystem over a run of consecutive
  // unknowns and solves it. Returns true when at least one source was rebuilt.
  bool try_one_subsystem(RecoveredSources& out) {
    if (equations_.empty()) return false;
    std::vector<SourceId> unknowns;
    for (const auto& eq : equations_) {
      for (const auto& t : eq.terms) unknowns.push_back(t.first);
    }
    std::sort(unknowns.begin(), unknowns.end());
    unknowns.erase(std::unique(unknowns.begin(), unknowns.end()), unknowns.end());
    const std::size_t m = unknowns.size();
    auto index_of = [&](SourceId id) {
      return static_cast<std::size_t>(std::lower_bound(unknowns.begin(), unknowns.end(), id) - unknowns.begin());
    };

    std::vector<std::pair<std::size_t, std::size_t>> span_of(equations_.size());
    for (std::size_t e = 0; e < equations_.size(); ++e) {
      span_of[e] = {index_of(equations_[e].terms.front().first), index_of(equations_[e].terms.back().first)};
    }

    std::vector<std::size_t> ending_at(m);
    for (std::size_t lo = 0; lo < m; ++lo) {
      std::fill(ending_at.begin(), ending_at.end(), 0);
      for (const auto& [first, last] : span_of) {
        if (first >= lo) ++ending_at[last];
      }
      std::size_t covered = 0;
      for (std::size_t hi = lo; hi < m; ++hi) {
        covered += ending_at[hi];
        if (covered < hi - lo + 1) continue;
        if (solve_range(unknowns, lo, hi, span_of, out)) return true;
      }
    }
    return false;
  }

  bool solve_range(const std::vector<SourceId>& unknowns, std::size_t lo, std::size_t hi,
                   const std::vector<std::pair<std::size_t, std::size_t>>& span_of, RecoveredSources& out) {
    std::vector<std::size_t> rows;
    for (std::size_t e = 0; e < equations_.size(); ++e) {
      if (span_of[e].first >= lo && span_of[e].second <= hi) rows.push_back(e);
    }
    const std::size_t cols = hi - lo + 1;
    gf::Matrix coeffs(rows.size(), cols);
    std::vector<Bytes> rhs;
    rhs.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& eq = equations_[rows[i]];
      for (const auto& [id, c] : eq.terms) {
        const auto col = static_cast<std::size_t>(
            std::lower_bound(unknowns.begin() + lo, unknowns.begin() + hi + 1, id) - (unknowns.begin() + lo));
        coeffs(i, col) = c;
      }
      rhs.push_back(eq.rhs);
    }

    std::vector<std::pair<std::size_t, Bytes>> solved;
    auto result = gf::solve_linear_system(coeffs, rhs);
    if (auto* full = std::get_if<std::vector<Bytes>>(&result)) {
      for (std::size_t c = 0; c < cols; ++c) solved.emplace_back(c, std::move((*full)[c]));
    } else {
      solved = std::move(std::get<gf::RankDeficiency>(result).determined);
    }
    if (solved.empty()) return false;

    for (auto& [col, value] : solved) {
      const SourceId id = unknowns[lo + col];
      if (learn(id, value)) out.emplace_back(id, std::move(value));
    }
    return true;
  }

  std::uint32_t horizon_;
  SourceId newest_ = 0;
  std::map<SourceId, Bytes> known_;
  std::vector<Equation> equations_;
};

}  // namespace quicfec::codec
