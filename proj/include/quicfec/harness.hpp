#pragma once

// Real-time workload: a constant-rate message source on the client, a playback
// reader on the server, and run_experiment(), which wires both to the transport
// endpoints over the simulated network and reports the two run metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "quicfec/codec/scheme.hpp"
#include "quicfec/netem.hpp"
#include "quicfec/rng.hpp"
#include "quicfec/sched.hpp"
#include "quicfec/transport.hpp"

namespace quicfec::harness {

using netem::SimTime;

struct TrafficProfile {
  double msg_rate = 30.0;  // messages per second
  unsigned pkts_per_msg = 8;
  std::size_t pkt_payload = 1000;
  double duration_s = 25.0;

  std::size_t message_bytes() const { return pkts_per_msg * pkt_payload; }
  std::uint64_t message_count() const { return static_cast<std::uint64_t>(std::llround(msg_rate * duration_s)); }
  std::uint64_t total_bytes() const { return message_count() * message_bytes(); }
  double rebuffer_unit_ms() const { return 1000.0 / msg_rate; }

  // Offset of message m from the first emission.
  SimTime emission_offset(std::uint64_t m) const {
    return static_cast<SimTime>(std::floor(static_cast<double>(m) * 1e6 / msg_rate));
  }
};

// Deterministic stream content, so the sink can tell real bytes from anything else.
inline std::uint8_t content_byte(std::uint64_t offset) {
  return static_cast<std::uint8_t>(splitmix64(offset / 8) >> (8 * (offset % 8)));
}

inline Bytes source_tick(const TrafficProfile& profile, std::uint64_t m) {
  Bytes b(profile.message_bytes());
  const std::uint64_t base = m * profile.message_bytes();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = content_byte(base + i);
  return b;
}

enum class MessageStatus { pending, ok, corrupted, missing };

struct RunMetrics {
  double fraction_received = 0.0;
  double rebuffer_ms = 0.0;
  std::uint64_t messages_ok = 0;
  std::uint64_t messages_corrupted = 0;
  std::uint64_t messages_missing = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t late_bytes = 0;       // reached the reader after its deadline
  std::uint64_t mismatched_bytes = 0;  // delivered bytes that differ from what was sent
  // Diagnostics.
  std::uint64_t data_packets = 0;
  std::uint64_t repair_packets = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t recovered_packets = 0;
  std::uint64_t flow_control_blocked = 0;
  std::uint64_t channel_hash = 0;
  SimTime end_time = 0;
  std::vector<std::uint64_t> path_packets;  // packets sent on each path
  std::vector<double> path_cwin;            // final congestion window per path, bytes
};

// Reader side of the playback buffer. In unreliable modes only bytes delivered by a
// message's deadline count; a reliable stream cannot skip, so its late bytes are
// still received but the message is charged a rebuffer.
class PlaybackSink {
 public:
  PlaybackSink(TrafficProfile profile, bool reliable)
      : profile_(profile), reliable_(reliable), have_(profile.message_count(), 0),
        status_(profile.message_count(), MessageStatus::pending) {}

  void on_data(std::uint64_t offset, ByteView data) {
    const std::uint64_t msg_bytes = profile_.message_bytes();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i] != content_byte(offset + i)) ++mismatched_;
    }
    std::uint64_t pos = offset;
    const std::uint64_t end = offset + data.size();
    while (pos < end) {
      const std::uint64_t m = pos / msg_bytes;
      const std::uint64_t chunk_end = std::min(end, (m + 1) * msg_bytes);
      const std::uint64_t n = chunk_end - pos;
      if (m < have_.size()) {
        if (status_[m] == MessageStatus::pending) {
          have_[m] += n;
          bytes_received_ += n;
        } else {
          late_bytes_ += n;
          if (reliable_) bytes_received_ += n;
        }
      }
      pos = chunk_end;
    }
  }

  void on_event(const transport::StreamEvent& e) {
    if (e.kind == transport::StreamEvent::Kind::data) on_data(e.offset, e.data);
  }

  // Called once per message at its deadline.
  MessageStatus read(std::uint64_t m) {
    auto& s = status_.at(m);
    if (s != MessageStatus::pending) return s;
    const std::uint64_t got = have_[m];
    if (got == profile_.message_bytes()) {
      s = MessageStatus::ok;
    } else {
      s = got > 0 ? MessageStatus::corrupted : MessageStatus::missing;
      rebuffer_ms_ += profile_.rebuffer_unit_ms();
    }
    return s;
  }

  double rebuffer_ms() const { return rebuffer_ms_; }
  std::uint64_t bytes_received() const { return bytes_received_; }
  MessageStatus status(std::uint64_t m) const { return status_.at(m); }

  RunMetrics finalize() const {
    RunMetrics r;
    r.bytes_received = bytes_received_;
    r.fraction_received = static_cast<double>(bytes_received_) / static_cast<double>(profile_.total_bytes());
    r.rebuffer_ms = rebuffer_ms_;
    r.late_bytes = late_bytes_;
    r.mismatched_bytes = mismatched_;
    for (auto s : status_) {
      if (s == MessageStatus::ok) ++r.messages_ok;
      if (s == MessageStatus::corrupted) ++r.messages_corrupted;
      if (s == MessageStatus::missing || s == MessageStatus::pending) ++r.messages_missing;
    }
    return r;
  }

 private:
  TrafficProfile profile_;
  bool reliable_;
  std::vector<std::uint64_t> have_;
  std::vector<MessageStatus> status_;
  double rebuffer_ms_ = 0.0;
  std::uint64_t bytes_received_ = 0;
  std::uint64_t late_bytes_ = 0;
  std::uint64_t mismatched_ = 0;
};

struct ExperimentConfig {
  transport::DeliveryMode mode = transport::DeliveryMode::unreliable_fec;
  codec::SchemeConfig scheme = codec::SchemeConfig::reed_solomon(30, 20);
  sched::SchedulerKind scheduler = sched::SchedulerKind::single_path;
  std::vector<netem::PathSpec> paths = netem::single_path(30 * netem::kMillisecond, netem::NoLoss{});
  double buffer_ms = 100.0;
  TrafficProfile profile;
  std::uint64_t seed = 1;
  std::uint64_t initial_window = transport::kDefaultInitialWindow;
  // How long a reliable run may continue past the last deadline to finish delivery.
  SimTime reliable_grace = 120 * netem::kSecond;
  std::ostream* trace = nullptr;
};

namespace detail {

class Experiment {
 public:
  explicit Experiment(const ExperimentConfig& cfg)
      : cfg_(cfg),
        trace_(cfg.trace),
        net_(q_, cfg.paths, derive_seed({cfg.seed, 0x6E6574}), &trace_),
        scheduler_(cfg.scheduler, derive_seed({cfg.seed, 0x736368})),
        sink_(cfg.profile, cfg.mode == transport::DeliveryMode::reliable) {
    rtt_ = 2 * cfg.paths[0].owd;

    transport::DeliveryMode mode = cfg.mode;
    std::optional<codec::SchemeConfig> fec;
    if (mode == transport::DeliveryMode::unreliable_fec) {
      const transport::EndpointParams client{{cfg.scheme}, transport::kDefaultInitialWindow};
      const transport::EndpointParams server{{cfg.scheme}, cfg.initial_window};
      const auto tp = transport::negotiate(client, server);
      fec = tp.fec_c2s;
      if (!fec) mode = transport::DeliveryMode::unreliable;
    }

    transport::SenderConfig sc;
    sc.mode = mode;
    sc.fec = fec;
    sc.layout.frame_payload = cfg.profile.pkt_payload;
    sc.initial_max_data = cfg.initial_window;
    sc.n_paths = cfg.paths.size();
    sender_.emplace(sc);

    transport::ReceiverConfig rc;
    rc.mode = mode;
    rc.fec = fec;
    rc.layout = sc.layout;
    rc.initial_window = cfg.initial_window;
    rc.rtt = rtt_;
    receiver_.emplace(rc);

    for (std::size_t i = 0; i < cfg.paths.size(); ++i) {
      const SimTime path_rtt = 2 * cfg.paths[i].owd;
      sender_->on_rtt_sample(i, path_rtt);
      sched::PathState ps;
      ps.path_id = i;
      ps.srtt = path_rtt;
      paths_.push_back(ps);
    }
    path_packets_.assign(cfg.paths.size(), 0);
  }

  RunMetrics run() {
    const auto& profile = cfg_.profile;
    const SimTime t0 = rtt_;  // one round trip of handshake
    const SimTime read_origin = t0 + cfg_.paths[0].owd + netem::from_ms(cfg_.buffer_ms);
    const std::uint64_t count = profile.message_count();
    SimTime last_deadline = read_origin;
    for (std::uint64_t m = 0; m < count; ++m) {
      q_.schedule(t0 + profile.emission_offset(m), [this, m] { send(sender_->send_app_message(source_tick(cfg_.profile, m))); });
      const SimTime deadline = read_origin + profile.emission_offset(m);
      last_deadline = std::max(last_deadline, deadline);
      q_.schedule(deadline, [this, m] { read(m); }, netem::Phase::end_of_instant);
    }
    q_.run_until(last_deadline);
    if (cfg_.mode == transport::DeliveryMode::reliable) q_.run_all(last_deadline + cfg_.reliable_grace);

    RunMetrics r = sink_.finalize();
    const auto& sc = sender_->counters();
    r.data_packets = sc.data_packets_sent;
    r.repair_packets = sc.repair_packets;
    r.retransmissions = sc.retransmissions;
    r.flow_control_blocked = sc.flow_control_blocked;
    r.recovered_packets = receiver_->counters().recovered_packets;
    r.channel_hash = 0xCBF29CE484222325ull;
    for (std::size_t i = 0; i < net_.path_count(); ++i) {
      r.channel_hash = splitmix64(r.channel_hash ^ net_.forward(i).clocked_hash());
    }
    r.end_time = q_.now();
    r.path_packets = path_packets_;
    for (const auto& ps : paths_) r.path_cwin.push_back(ps.cwin);
    return r;
  }

 private:
  void send(std::vector<transport::OutgoingPacket> packets) {
    for (auto& p : packets) {
      const std::size_t path = scheduler_.pick(paths_);
      const SimTime deadline = sender_->on_packet_sent(p, path, q_.now());
      sched::cwnd_on_send(paths_[path], p.bytes.size());
      ++path_packets_[path];
      q_.schedule(deadline, [this] { on_timer(); });
      auto bytes = std::make_shared<Bytes>(std::move(p.bytes));
      net_.send_forward(path, p.pn, p.carries_stream, [this, path, bytes] { on_server_packet(path, *bytes); });
    }
  }

  void on_timer() {
    auto out = sender_->on_timer(q_.now());
    for (const auto& lost : out.lost) sched::cwnd_on_loss(paths_[lost.path], lost.bytes, q_.now());
    send(std::move(out.retransmissions));
  }

  void on_server_packet(std::size_t path, const Bytes& bytes) {
    const auto out = receiver_->on_packet(bytes, q_.now());
    for (const auto& e : out.events) sink_.on_event(e);
    reply(path, out);
  }

  void reply(std::size_t path, const transport::ReceiveOutcome& out) {
    if (!out.ack && !out.window_update) return;
    auto control = std::make_shared<Bytes>(receiver_->build_control_packet(out));
    net_.send_reverse(path, control_pn_++, [this, control] { on_client_control(*control); });
  }

  void on_client_control(const Bytes& bytes) {
    const auto out = sender_->on_control_packet(bytes, q_.now());
    for (const auto& a : out.acked) {
      auto& ps = paths_[a.path];
      sched::cwnd_on_ack(ps, a.bytes);
      ps.srtt = sender_->srtt(a.path).value_or(ps.srtt);
    }
    if (out.window_grew) send(sender_->flush());
  }

  void read(std::uint64_t m) {
    const std::uint64_t end = (m + 1) * cfg_.profile.message_bytes();
    const auto out = receiver_->seal_until(end, q_.now());
    for (const auto& e : out.events) sink_.on_event(e);
    if (out.window_update) reply(0, out);
    sink_.read(m);
  }

  const ExperimentConfig& cfg_;
  netem::EventQueue q_;
  netem::Trace trace_;
  netem::Network net_;
  sched::Scheduler scheduler_;
  std::vector<sched::PathState> paths_;
  std::optional<transport::Sender> sender_;
  std::optional<transport::Receiver> receiver_;
  PlaybackSink sink_;
  std::vector<std::uint64_t> path_packets_;
  SimTime rtt_ = 0;
  std::uint64_t control_pn_ = 0;
};

}  // namespace detail

// Deterministic given the config. Connection errors surface as netem::SimulationAborted.
inline RunMetrics run_experiment(const ExperimentConfig& cfg) {
  if (cfg.paths.empty()) throw std::invalid_argument("run_experiment: no paths");
  if (!(cfg.buffer_ms >= 0.0)) throw std::invalid_argument("run_experiment: negative buffer");
  detail::Experiment e(cfg);
  return e.run();
}

}  // namespace quicfec::harness
