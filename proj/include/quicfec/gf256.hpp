#pragma once

// Arithmetic over GF(2^8) with the primitive polynomial x^8+x^4+x^3+x^2+1 (0x11D),
// plus the dense linear algebra shared by the Reed-Solomon and RLC schemes.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "quicfec/bytes.hpp"

namespace quicfec::gf {

using Element = std::uint8_t;

inline constexpr unsigned kPrimitivePoly = 0x11D;

namespace detail {

struct Tables {
  std::array<Element, 512> exp{};
  std::array<int, 256> log{};
  std::array<std::array<Element, 256>, 256> mul{};
  std::array<Element, 256> inv{};

  Tables() {
    unsigned x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = static_cast<Element>(x);
      log[x] = i;
      x <<= 1;
      if (x & 0x100) x ^= kPrimitivePoly;
    }
    for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
    log[0] = -1;
    for (int a = 1; a < 256; ++a) {
      for (int b = 1; b < 256; ++b) mul[a][b] = exp[log[a] + log[b]];
      inv[a] = exp[255 - log[a]];
    }
  }
};

inline const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace detail

inline constexpr Element add(Element a, Element b) { return a ^ b; }

inline Element mul(Element a, Element b) { return detail::tables().mul[a][b]; }

inline Element inv(Element a) {
  if (a == 0) throw std::domain_error("gf256: zero has no multiplicative inverse");
  return detail::tables().inv[a];
}

inline Element div(Element a, Element b) { return mul(a, inv(b)); }

inline Element pow(Element a, unsigned e) {
  Element r = 1;
  for (; e != 0; e >>= 1) {
    if (e & 1u) r = mul(r, a);
    a = mul(a, a);
  }
  return r;
}

// dst[i] ^= c * src[i]
inline void mul_add_region(std::span<std::uint8_t> dst, ByteView src, Element c) {
  if (c == 0) return;
  const std::size_t n = std::min(dst.size(), src.size());
  if (c == 1) {
    for (std::size_t i = 0; i < n; ++i) dst[i] ^= src[i];
    return;
  }
  const auto& row = detail::tables().mul[c];
  for (std::size_t i = 0; i < n; ++i) dst[i] ^= row[src[i]];
}

// dst[i] = c * dst[i]
inline void mul_region(std::span<std::uint8_t> dst, Element c) {
  if (c == 1) return;
  const auto& row = detail::tables().mul[c];
  for (auto& b : dst) b = row[b];
}

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols, 0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<Element> cells)
      : rows_(rows), cols_(cols), cells_(std::move(cells)) {
    if (cells_.size() != rows_ * cols_) throw std::invalid_argument("gf256::Matrix: cell count mismatch");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Element& operator()(std::size_t r, std::size_t c) { return cells_[r * cols_ + c]; }
  Element operator()(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }

  std::span<Element> row(std::size_t r) { return {cells_.data() + r * cols_, cols_}; }
  std::span<const Element> row(std::size_t r) const { return {cells_.data() + r * cols_, cols_}; }

  Matrix select_rows(std::span<const std::size_t> which) const {
    Matrix out(which.size(), cols_);
    for (std::size_t i = 0; i < which.size(); ++i) {
      auto src = row(which[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("gf256::Matrix: product dimension mismatch");
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const Element c = a(i, k);
        if (c == 0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) ^= mul(c, b(k, j));
      }
    }
    return out;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Element> cells_;
};

// Unknowns that the equations do not pin down. `determined` carries the
// unknowns that are fixed regardless (their row in reduced form has no free term).
struct RankDeficiency {
  std::vector<std::size_t> undetermined;
  std::vector<std::pair<std::size_t, Bytes>> determined;
};

using SolveResult = std::variant<std::vector<Bytes>, RankDeficiency>;

// Solves coeffs * x = rhs where each x_j and rhs_i is a byte vector and row
// operations act on every byte position at once. Gauss-Jordan with the first
// nonzero entry (lowest row index) as pivot.
inline SolveResult solve_linear_system(const Matrix& coeffs, std::span<const Bytes> rhs) {
  if (coeffs.rows() != rhs.size()) {
    throw std::invalid_argument("solve_linear_system: coefficient rows do not match rhs count");
  }
  const std::size_t symbol_len = rhs.empty() ? 0 : rhs.front().size();
  for (const auto& v : rhs) {
    if (v.size() != symbol_len) throw std::invalid_argument("solve_linear_system: rhs lengths differ");
  }

  Matrix a = coeffs;
  std::vector<Bytes> b(rhs.begin(), rhs.end());
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();

  std::vector<std::size_t> pivot_row_of(cols, rows);
  std::vector<bool> is_free(cols, true);
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t p = r;
    while (p < rows && a(p, c) == 0) ++p;
    if (p == rows) continue;
    if (p != r) {
      for (std::size_t j = 0; j < cols; ++j) std::swap(a(p, j), a(r, j));
      std::swap(b[p], b[r]);
    }
    const Element scale = inv(a(r, c));
    mul_region(a.row(r), scale);
    mul_region(b[r], scale);
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r) continue;
      const Element f = a(i, c);
      if (f == 0) continue;
      mul_add_region(a.row(i), a.row(r), f);
      mul_add_region(b[i], b[r], f);
    }
    pivot_row_of[c] = r;
    is_free[c] = false;
    ++r;
  }

  bool any_free = false;
  for (std::size_t c = 0; c < cols; ++c) any_free = any_free || is_free[c];

  if (!any_free) {
    std::vector<Bytes> x(cols);
    for (std::size_t c = 0; c < cols; ++c) x[c] = std::move(b[pivot_row_of[c]]);
    return x;
  }

  RankDeficiency report;
  for (std::size_t c = 0; c < cols; ++c) {
    if (is_free[c]) {
      report.undetermined.push_back(c);
      continue;
    }
    const std::size_t pr = pivot_row_of[c];
    bool pinned = true;
    for (std::size_t j = 0; j < cols && pinned; ++j) pinned = !(is_free[j] && a(pr, j) != 0);
    if (pinned) {
      report.determined.emplace_back(c, b[pr]);
    } else {
      report.undetermined.push_back(c);
    }
  }
  return report;
}

}  // namespace quicfec::gf
