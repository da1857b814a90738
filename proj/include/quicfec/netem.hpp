#pragma once

// Discrete-event network simulator: virtual clock, lossy fixed-delay links and the
// one- and two-path topologies used by the experiments.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "quicfec/rng.hpp"

namespace quicfec::netem {

using SimTime = std::int64_t;  // microseconds

inline constexpr SimTime kMillisecond = 1000;
inline constexpr SimTime kSecond = 1000000;

inline SimTime from_ms(double ms) { return static_cast<SimTime>(std::llround(ms * 1000.0)); }
inline double to_ms(SimTime t) { return static_cast<double>(t) / 1000.0; }

// Within one timestamp, `normal` events run before `end_of_instant` events; the
// application reads at its deadline in the latter so same-instant arrivals count.
enum class Phase : int { normal = 0, end_of_instant = 1 };

struct SimulationAborted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class EventQueue {
 public:
  using Handler = std::function<void()>;

  SimTime now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t processed() const { return processed_; }

  void schedule(SimTime at, Handler handler, Phase phase = Phase::normal) {
    if (at < now_) throw std::logic_error("EventQueue: event scheduled in the past");
    heap_.push(Entry{at, static_cast<int>(phase), seq_++, std::move(handler)});
  }

  void schedule_in(SimTime delay, Handler handler, Phase phase = Phase::normal) {
    schedule(now_ + delay, std::move(handler), phase);
  }

  // Runs every event with timestamp <= t_end in (time, phase, insertion) order.
  void run_until(SimTime t_end) {
    while (!heap_.empty() && heap_.top().at <= t_end) {
      Entry e = std::move(const_cast<Entry&>(heap_.top()));
      heap_.pop();
      now_ = e.at;
      ++processed_;
      try {
        e.handler();
      } catch (const std::exception& ex) {
        throw SimulationAborted("t=" + std::to_string(now_) + "us: " + ex.what());
      }
    }
    if (t_end > now_) now_ = t_end;
  }

  // Runs until the queue drains or `t_limit` passes.
  void run_all(SimTime t_limit) {
    while (!heap_.empty() && heap_.top().at <= t_limit) run_until(heap_.top().at);
  }

 private:
  struct Entry {
    SimTime at;
    int phase;
    std::uint64_t seq;
    Handler handler;

    bool operator>(const Entry& o) const {
      if (at != o.at) return at > o.at;
      if (phase != o.phase) return phase > o.phase;
      return seq > o.seq;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap_;
  SimTime now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t processed_ = 0;
};

struct GEParams {
  double p = 0.0;       // Good -> Bad per packet
  double r = 1.0;       // Bad -> Good per packet
  double k_good = 1.0;  // delivery probability in Good
  double h_bad = 0.0;   // delivery probability in Bad

  static GEParams simplified(double p, double r) { return {p, r, 1.0, 0.0}; }

  void validate() const {
    for (double v : {p, r, k_good, h_bad}) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("Gilbert-Elliott parameters must lie in [0, 1]");
    }
  }

  double stationary_bad() const { return p + r == 0.0 ? 0.0 : p / (p + r); }

  double stationary_loss() const {
    const double bad = stationary_bad();
    return (1.0 - bad) * (1.0 - k_good) + bad * (1.0 - h_bad);
  }

  bool operator==(const GEParams&) const = default;
};

enum class ChannelState { good, bad };

struct GEOutcome {
  bool delivered;
  ChannelState next;
};

// Samples delivery from the current state, then transitions.
inline GEOutcome ge_step(ChannelState state, const GEParams& g, Rng& rng) {
  const bool good = state == ChannelState::good;
  const bool delivered = rng.uniform() < (good ? g.k_good : g.h_bad);
  ChannelState next = state;
  if (good && rng.uniform() < g.p) next = ChannelState::bad;
  if (!good && rng.uniform() < g.r) next = ChannelState::good;
  return {delivered, next};
}

inline bool uniform_step(double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("uniform loss rate must lie in [0, 1]");
  return !(rng.uniform() < rate);
}

struct NoLoss {
  bool operator==(const NoLoss&) const = default;
};

struct UniformLoss {
  double rate = 0.0;
  bool operator==(const UniformLoss&) const = default;
};

using LossModel = std::variant<NoLoss, GEParams, UniformLoss>;

inline double stationary_loss(const LossModel& m) {
  if (const auto* g = std::get_if<GEParams>(&m)) return g->stationary_loss();
  if (const auto* u = std::get_if<UniformLoss>(&m)) return u->rate;
  return 0.0;
}

// One direction of one path. Packets that carry stream data clock the loss process:
// they sample the current state and advance it. Other packets (repairs, control)
// sample the current state from a side stream without advancing it, so two runs
// that differ only in their non-data traffic see the same data erasure pattern.
class Link {
 public:
  Link(SimTime owd, LossModel model, std::uint64_t seed)
      : owd_(owd), model_(std::move(model)), chain_rng_(derive_seed({seed, 1})), side_rng_(derive_seed({seed, 2})) {
    if (owd_ < 0) throw std::invalid_argument("link delay must be non-negative");
    if (const auto* g = std::get_if<GEParams>(&model_)) g->validate();
    if (const auto* u = std::get_if<UniformLoss>(&model_)) {
      if (!(u->rate >= 0.0 && u->rate <= 1.0)) throw std::invalid_argument("uniform loss rate must lie in [0, 1]");
    }
  }

  SimTime owd() const { return owd_; }
  const LossModel& model() const { return model_; }
  ChannelState state() const { return state_; }

  bool admit(bool clocked) {
    bool delivered = true;
    if (const auto* g = std::get_if<GEParams>(&model_)) {
      if (clocked) {
        const auto out = ge_step(state_, *g, chain_rng_);
        delivered = out.delivered;
        state_ = out.next;
      } else {
        const bool good = state_ == ChannelState::good;
        delivered = side_rng_.uniform() < (good ? g->k_good : g->h_bad);
      }
    } else if (const auto* u = std::get_if<UniformLoss>(&model_)) {
      delivered = uniform_step(u->rate, clocked ? chain_rng_ : side_rng_);
    }
    ++sent_;
    if (!delivered) ++dropped_;
    if (clocked) clocked_hash_ = fnv_step(clocked_hash_, delivered ? 1 : 2);
    return delivered;
  }

  std::uint64_t sent() const { return sent_; }
  std::uint64_t dropped() const { return dropped_; }
  // Hash of the delivery decisions for clocked packets, in order.
  std::uint64_t clocked_hash() const { return clocked_hash_; }

 private:
  static std::uint64_t fnv_step(std::uint64_t h, std::uint8_t byte) { return (h ^ byte) * 0x100000001B3ull; }

  SimTime owd_;
  LossModel model_;
  ChannelState state_ = ChannelState::good;
  Rng chain_rng_;
  Rng side_rng_;
  std::uint64_t sent_ = 0;
  std::uint64_t dropped_ = 0;
  std::uint64_t clocked_hash_ = 0xCBF29CE484222325ull;
};

// Line-oriented event trace: time_us,event,path,pn,dropped
class Trace {
 public:
  explicit Trace(std::ostream* out = nullptr) : out_(out) {}

  void record(SimTime t, std::string_view event, int path, std::uint64_t pn, bool dropped) {
    std::string line = std::to_string(t) + "," + std::string(event) + "," + std::to_string(path) + "," +
                       std::to_string(pn) + "," + (dropped ? "1" : "0");
    for (char c : line) hash_ = (hash_ ^ static_cast<std::uint8_t>(c)) * 0x100000001B3ull;
    hash_ = (hash_ ^ '\n') * 0x100000001B3ull;
    ++lines_;
    if (out_ != nullptr) *out_ << line << '\n';
  }

  std::uint64_t hash() const { return hash_; }
  std::uint64_t lines() const { return lines_; }

 private:
  std::ostream* out_;
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
  std::uint64_t lines_ = 0;
};

// Consults the loss model once; a surviving packet runs `on_arrival` one delay later.
inline std::optional<SimTime> send_over(EventQueue& q, Link& link, bool clocked, EventQueue::Handler on_arrival) {
  if (!link.admit(clocked)) return std::nullopt;
  const SimTime at = q.now() + link.owd();
  q.schedule(at, std::move(on_arrival));
  return at;
}

struct PathSpec {
  SimTime owd = 0;
  LossModel forward = NoLoss{};  // client -> server (data direction)
  LossModel reverse = NoLoss{};  // server -> client (acknowledgements)
};

inline std::vector<PathSpec> single_path(SimTime owd, LossModel loss) { return {PathSpec{owd, std::move(loss), NoLoss{}}}; }

inline std::vector<PathSpec> two_path(SimTime owd, LossModel loss1, LossModel loss2) {
  return {PathSpec{owd, std::move(loss1), NoLoss{}}, PathSpec{owd, std::move(loss2), NoLoss{}}};
}

// Client and server joined by one or more independent paths. Each link draws from
// its own stream derived from (seed, path, direction), so paths never perturb
// each other's draws.
class Network {
 public:
  Network(EventQueue& q, const std::vector<PathSpec>& paths, std::uint64_t seed, Trace* trace = nullptr)
      : q_(q), trace_(trace) {
    if (paths.empty()) throw std::invalid_argument("Network needs at least one path");
    for (std::size_t i = 0; i < paths.size(); ++i) {
      forward_.emplace_back(paths[i].owd, paths[i].forward, derive_seed({seed, i, 0}));
      reverse_.emplace_back(paths[i].owd, paths[i].reverse, derive_seed({seed, i, 1}));
    }
  }

  std::size_t path_count() const { return forward_.size(); }
  const Link& forward(std::size_t path) const { return forward_.at(path); }
  const Link& reverse(std::size_t path) const { return reverse_.at(path); }

  bool send_forward(std::size_t path, std::uint64_t pn, bool clocked, EventQueue::Handler on_arrival) {
    return send(forward_.at(path), "fwd", path, pn, clocked, std::move(on_arrival));
  }

  bool send_reverse(std::size_t path, std::uint64_t pn, EventQueue::Handler on_arrival) {
    return send(reverse_.at(path), "rev", path, pn, true, std::move(on_arrival));
  }

 private:
  bool send(Link& link, std::string_view event, std::size_t path, std::uint64_t pn, bool clocked,
            EventQueue::Handler on_arrival) {
    const auto at = send_over(q_, link, clocked, std::move(on_arrival));
    if (trace_ != nullptr) trace_->record(q_.now(), event, static_cast<int>(path), pn, !at.has_value());
    return at.has_value();
  }

  EventQueue& q_;
  Trace* trace_;
  std::vector<Link> forward_;
  std::vector<Link> reverse_;
};

}  // namespace quicfec::netem
