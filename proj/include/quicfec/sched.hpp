#pragma once

// Multipath packet schedulers (single path, round-robin, HighRB) and the per-path
// loss-based congestion window that HighRB reads.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "quicfec/codec/reed_solomon.hpp"
#include "quicfec/netem.hpp"
#include "quicfec/rng.hpp"

namespace quicfec::sched {

using netem::SimTime;

enum class SchedulerKind { single_path, round_robin, high_rb };

inline std::string_view to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::single_path: return "single";
    case SchedulerKind::round_robin: return "round_robin";
    case SchedulerKind::high_rb: return "highrb";
  }
  return "unknown";
}

inline SchedulerKind scheduler_from_string(std::string_view s) {
  if (s == "single" || s == "single_path") return SchedulerKind::single_path;
  if (s == "round_robin" || s == "rr") return SchedulerKind::round_robin;
  if (s == "highrb" || s == "high_rb") return SchedulerKind::high_rb;
  throw std::invalid_argument("unknown scheduler '" + std::string(s) + "'");
}

inline constexpr std::uint64_t kDefaultPacketSize = 1350;
inline constexpr std::uint64_t kDefaultInitialWindowPackets = 10;

struct PathState {
  std::size_t path_id = 0;
  double cwin = kDefaultInitialWindowPackets * kDefaultPacketSize;  // bytes
  std::uint64_t bytes_in_flight = 0;
  SimTime srtt = 0;
  std::uint64_t packet_size = kDefaultPacketSize;
  SimTime last_reduction = -1;  // no reduction yet
};

// Remaining bytes of the congestion window, clamped at zero because congestion
// control does not gate sending and in-flight bytes can exceed the window.
inline std::uint64_t rb(const PathState& p) {
  const double room = p.cwin - static_cast<double>(p.bytes_in_flight);
  return room > 0.0 ? static_cast<std::uint64_t>(room) : 0;
}

inline std::vector<double> highrb_weights(std::span<const PathState> paths) {
  if (paths.empty()) throw std::invalid_argument("highrb_weights: no paths");
  std::vector<double> w(paths.size());
  double total = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) total += static_cast<double>(w[i] = static_cast<double>(rb(paths[i])));
  for (auto& x : w) x = total != 0.0 ? x / total : 1.0 / static_cast<double>(paths.size());
  return w;
}

// Returns an index into `paths`.
inline std::size_t highrb_pick(std::span<const PathState> paths, Rng& rng) {
  const auto w = highrb_weights(paths);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  // Rounding left u above the running sum; take the last path with weight.
  for (std::size_t i = w.size(); i-- > 0;) {
    if (w[i] > 0.0) return i;
  }
  return w.size() - 1;
}

struct RoundRobin {
  std::size_t next = 0;

  std::size_t pick(std::size_t n_paths) {
    if (n_paths == 0) throw std::invalid_argument("round_robin_pick: no paths");
    const std::size_t p = next % n_paths;
    next = p + 1;
    return p;
  }
};

class Scheduler {
 public:
  Scheduler(SchedulerKind kind, std::uint64_t seed) : kind_(kind), rng_(seed) {}

  SchedulerKind kind() const { return kind_; }

  std::size_t pick(std::span<const PathState> paths) {
    if (paths.empty()) throw std::invalid_argument("Scheduler: no paths");
    switch (kind_) {
      case SchedulerKind::single_path: return 0;
      case SchedulerKind::round_robin: return rr_.pick(paths.size());
      case SchedulerKind::high_rb: return highrb_pick(paths, rng_);
    }
    return 0;
  }

 private:
  SchedulerKind kind_;
  RoundRobin rr_;
  Rng rng_;
};

// Single-path AIMD, used only as a signal.
inline void cwnd_on_send(PathState& p, std::uint64_t bytes) { p.bytes_in_flight += bytes; }

inline void cwnd_on_ack(PathState& p, std::uint64_t bytes) {
  p.bytes_in_flight -= std::min(p.bytes_in_flight, bytes);
  p.cwin += static_cast<double>(p.packet_size) * static_cast<double>(bytes) / p.cwin;
}

// Removes the lost bytes from flight; halves the window at most once per srtt.
inline void cwnd_on_loss(PathState& p, std::uint64_t bytes, SimTime now) {
  p.bytes_in_flight -= std::min(p.bytes_in_flight, bytes);
  if (p.last_reduction >= 0 && now - p.last_reduction < p.srtt) return;
  p.cwin = std::max(p.cwin / 2.0, 2.0 * static_cast<double>(p.packet_size));
  p.last_reduction = now;
}

struct BurstEnumeration {
  std::size_t recoverable = 0;
  std::size_t total = 0;

  double fraction() const { return total == 0 ? 1.0 : static_cast<double>(recoverable) / total; }
};

// Symbols s = 0, 1, 2, ... are sent back to back; symbol s belongs to block s / n
// and, under round-robin, to path s mod n_paths. A burst of `burst_len` consecutive
// losses hits path 0 only. Every start position on path 0 within one schedule period
// lcm(n, n_paths) is tried; a start is recoverable when no block loses more than
// n - k symbols.
inline BurstEnumeration burst_recovery_enumeration(const codec::BlockCodeParams& block, std::size_t burst_len,
                                                   std::size_t n_paths) {
  if (block.k == 0 || block.k >= block.n) throw std::invalid_argument("burst_recovery_enumeration: need 0 < k < n");
  if (n_paths == 0) throw std::invalid_argument("burst_recovery_enumeration: need at least one path");
  const std::size_t n = block.n;
  const std::size_t period = std::lcm(n, n_paths);
  BurstEnumeration out;
  for (std::size_t start = 0; start < period; start += n_paths) {
    ++out.total;
    std::vector<std::size_t> lost_in_block;
    bool ok = true;
    for (std::size_t i = 0; i < burst_len && ok; ++i) {
      const std::size_t b = (start + i * n_paths) / n;
      if (b >= lost_in_block.size()) lost_in_block.resize(b + 1, 0);
      ok = ++lost_in_block[b] <= block.repair_count();
    }
    out.recoverable += ok;
  }
  return out;
}

}  // namespace quicfec::sched
