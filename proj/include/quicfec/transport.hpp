#pragma once

// QUIC-like endpoints for one data stream: a sender with three delivery modes
// (reliable, plain unreliable, FEC-protected unreliable), a receiver with in-order
// stream delivery and flow control, and per-direction FEC scheme negotiation.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "quicfec/bytes.hpp"
#include "quicfec/codec/scheme.hpp"
#include "quicfec/fecframe.hpp"
#include "quicfec/netem.hpp"
#include "quicfec/wire.hpp"

namespace quicfec::transport {

using netem::SimTime;

enum class DeliveryMode { reliable, unreliable, unreliable_fec };

inline std::string_view to_string(DeliveryMode m) {
  switch (m) {
    case DeliveryMode::reliable: return "reliable";
    case DeliveryMode::unreliable: return "plain";
    case DeliveryMode::unreliable_fec: return "fec";
  }
  return "unknown";
}

inline DeliveryMode mode_from_string(std::string_view s) {
  if (s == "reliable") return DeliveryMode::reliable;
  if (s == "plain" || s == "unreliable") return DeliveryMode::unreliable;
  if (s == "fec" || s == "unreliable_fec") return DeliveryMode::unreliable_fec;
  throw std::invalid_argument("unknown delivery mode '" + std::string(s) + "'");
}

inline constexpr std::uint64_t kDefaultInitialWindow = 64 * 1024;
inline constexpr std::uint64_t kDefaultMaxWindow = 16 * 1024 * 1024;
inline constexpr SimTime kDefaultInitialRtt = 100 * netem::kMillisecond;
inline constexpr SimTime kTimerGranularity = 1 * netem::kMillisecond;
inline constexpr std::size_t kMaxAckRanges = 32;

struct FlowControlError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Negotiation

struct EndpointParams {
  std::vector<codec::SchemeConfig> fec_schemes;  // preference order, most preferred first
  std::uint64_t initial_receive_window = kDefaultInitialWindow;
};

struct TransportParameters {
  std::optional<codec::SchemeConfig> fec_c2s;
  std::optional<codec::SchemeConfig> fec_s2c;
  std::uint64_t initial_receive_window_c2s = kDefaultInitialWindow;  // advertised by the server
  std::uint64_t initial_receive_window_s2c = kDefaultInitialWindow;  // advertised by the client

  codec::SchemeId fec_scheme_c2s() const { return fec_c2s ? fec_c2s->id : codec::SchemeId::none; }
  codec::SchemeId fec_scheme_s2c() const { return fec_s2c ? fec_s2c->id : codec::SchemeId::none; }
};

namespace detail {

// First scheme in the receiver's preference order that the sender also supports;
// code parameters come from the receiver's entry.
inline std::optional<codec::SchemeConfig> pick_scheme(const EndpointParams& sender, const EndpointParams& receiver) {
  for (const auto& want : receiver.fec_schemes) {
    for (const auto& have : sender.fec_schemes) {
      if (want.id == have.id && want.id != codec::SchemeId::none) return want;
    }
  }
  return std::nullopt;
}

}  // namespace detail

inline TransportParameters negotiate(const EndpointParams& client, const EndpointParams& server) {
  TransportParameters tp;
  tp.fec_c2s = detail::pick_scheme(client, server);
  tp.fec_s2c = detail::pick_scheme(server, client);
  tp.initial_receive_window_c2s = server.initial_receive_window;
  tp.initial_receive_window_s2c = client.initial_receive_window;
  return tp;
}

// ---------------------------------------------------------------------------
// Packet layout shared by both endpoints

struct PacketLayout {
  std::optional<std::uint64_t> connection_id = 0x5155494346454331ull;
  wire::PnLength pn_length = wire::PnLength::four;
  std::size_t frame_payload = 1000;  // stream bytes per data packet
  std::size_t max_packet_size = 1350;

  std::size_t header_size(bool with_fec_id) const {
    return 1 + (connection_id ? 8 : 0) + wire::pn_bytes(pn_length) + (with_fec_id ? 4 : 0);
  }

  // E: a full protected data packet.
  std::size_t symbol_size() const { return header_size(true) + wire::kStreamFrameOverhead + frame_payload; }

  std::size_t max_fec_frame_payload() const {
    const std::size_t overhead = header_size(false) + wire::kFecFrameOverhead;
    if (max_packet_size <= overhead) throw std::invalid_argument("max packet size too small for FEC frames");
    return max_packet_size - overhead;
  }

  wire::PublicHeader header(std::uint64_t pn) const {
    wire::PublicHeader h;
    h.connection_id = connection_id;
    h.pn_length = pn_length;
    h.packet_number = pn;
    return h;
  }
};

// ---------------------------------------------------------------------------
// Sender

struct SenderConfig {
  DeliveryMode mode = DeliveryMode::unreliable;
  std::uint32_t stream_id = 1;
  PacketLayout layout;
  std::optional<codec::SchemeConfig> fec;  // required for unreliable_fec
  std::uint64_t initial_max_data = kDefaultInitialWindow;
  std::size_t n_paths = 1;
};

struct OutgoingPacket {
  std::uint64_t pn = 0;
  Bytes bytes;
  bool carries_stream = false;
  bool retransmission = false;
};

struct LostPacket {
  std::uint64_t pn = 0;
  std::size_t path = 0;
  std::uint64_t bytes = 0;
};

struct AckedPacket {
  std::uint64_t pn = 0;
  std::size_t path = 0;
  std::uint64_t bytes = 0;
};

struct AckOutcome {
  std::vector<AckedPacket> acked;
  bool window_grew = false;
};

struct TimerOutcome {
  std::vector<LostPacket> lost;
  std::vector<OutgoingPacket> retransmissions;  // reliable mode only
};

struct SenderCounters {
  std::uint64_t app_packets = 0;       // data packets produced from application messages
  std::uint64_t data_packets_sent = 0;  // stream-carrying packets handed to the network
  std::uint64_t repair_packets = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t losses_detected = 0;
  std::uint64_t flow_control_blocked = 0;  // flushes that stopped on the peer's window
};

class Sender {
 public:
  explicit Sender(SenderConfig config)
      : config_(std::move(config)), max_data_(config_.initial_max_data), srtt_(config_.n_paths) {
    if (config_.n_paths == 0) throw std::invalid_argument("Sender needs at least one path");
    if (config_.mode == DeliveryMode::unreliable_fec) {
      if (!config_.fec) throw std::invalid_argument("FEC mode needs a negotiated FEC scheme");
      fec_.emplace(*config_.fec, config_.layout.symbol_size(), config_.layout.max_fec_frame_payload());
    }
  }

  const SenderConfig& config() const { return config_; }
  DeliveryMode mode() const { return config_.mode; }
  const SenderCounters& counters() const { return counters_; }
  std::uint64_t max_data() const { return max_data_; }
  std::uint64_t bytes_queued() const { return write_offset_ - (queue_.empty() ? write_offset_ : queue_.front().offset); }
  std::size_t unacked_count() const { return unacked_.size(); }
  std::optional<SimTime> srtt(std::size_t path) const { return srtt_.at(path); }

  // A handshake or other out-of-band RTT measurement.
  void on_rtt_sample(std::size_t path, SimTime sample) { update_srtt(path, sample); }

  // Splits the message into frame_payload-sized chunks; a zero-byte message still
  // produces one packet.
  std::vector<OutgoingPacket> send_app_message(ByteView message) {
    const std::size_t chunk = config_.layout.frame_payload;
    std::size_t pos = 0;
    do {
      const std::size_t len = std::min(chunk, message.size() - pos);
      queue_.push_back(Chunk{write_offset_, Bytes(message.begin() + static_cast<std::ptrdiff_t>(pos),
                                                  message.begin() + static_cast<std::ptrdiff_t>(pos + len))});
      write_offset_ += len;
      pos += len;
    } while (pos < message.size());
    return flush();
  }

  // Emits queued data that fits in the peer's flow-control window.
  std::vector<OutgoingPacket> flush() {
    std::vector<OutgoingPacket> out;
    while (!queue_.empty()) {
      const Chunk& c = queue_.front();
      if (c.offset + c.data.size() > max_data_) {
        ++counters_.flow_control_blocked;
        break;
      }
      Chunk chunk = std::move(queue_.front());
      queue_.pop_front();
      ++counters_.app_packets;
      emit_data(std::move(chunk), false, out);
    }
    return out;
  }

  // Must be called for every packet returned by this sender, in order, when it is
  // handed to the network. Returns the loss-detection deadline.
  SimTime on_packet_sent(const OutgoingPacket& packet, std::size_t path, SimTime now) {
    if (path >= config_.n_paths) throw std::out_of_range("on_packet_sent: bad path");
    auto it = pending_chunks_.find(packet.pn);
    Sent s;
    s.path = path;
    s.send_time = now;
    s.size = packet.bytes.size();
    s.deadline = now + loss_delay(path);
    if (it != pending_chunks_.end()) {
      s.chunks = std::move(it->second);
      pending_chunks_.erase(it);
    }
    if (packet.carries_stream) ++counters_.data_packets_sent;
    unacked_.emplace(packet.pn, std::move(s));
    return now + loss_delay(path);
  }

  // 9/8 srtt, never below the timer granularity.
  SimTime loss_delay(std::size_t path) const {
    const SimTime rtt = srtt_.at(path).value_or(kDefaultInitialRtt);
    return std::max(rtt * 9 / 8, kTimerGranularity);
  }

  AckOutcome on_ack(const wire::AckFrame& ack, SimTime now) {
    AckOutcome out;
    if (auto it = unacked_.find(ack.largest_acked); it != unacked_.end()) {
      const SimTime sample = now - it->second.send_time - static_cast<SimTime>(ack.ack_delay_us);
      update_srtt(it->second.path, std::max<SimTime>(sample, 0));
    }
    for (const auto& range : ack.ranges) {
      if (range.smallest > range.largest) continue;
      auto it = unacked_.lower_bound(range.smallest);
      while (it != unacked_.end() && it->first <= range.largest) {
        out.acked.push_back({it->first, it->second.path, it->second.size});
        it = unacked_.erase(it);
      }
    }
    return out;
  }

  void on_window_update(const wire::WindowUpdateFrame& f, AckOutcome& out) {
    if (f.byte_offset > max_data_) {
      max_data_ = f.byte_offset;
      out.window_grew = true;
    }
  }

  // Parses a packet from the peer and applies its ACK and WINDOW_UPDATE frames.
  AckOutcome on_control_packet(ByteView bytes, SimTime now) {
    const auto packet = wire::parse_packet(bytes);
    AckOutcome out;
    for (const auto& frame : packet.frames) {
      if (const auto* ack = std::get_if<wire::AckFrame>(&frame)) {
        auto part = on_ack(*ack, now);
        out.acked.insert(out.acked.end(), part.acked.begin(), part.acked.end());
      } else if (const auto* wu = std::get_if<wire::WindowUpdateFrame>(&frame)) {
        on_window_update(*wu, out);
      }
    }
    return out;
  }

  // Declares every unacked packet whose deadline has passed lost. Reliable mode
  // re-frames its stream data into new packets; other modes only report the loss.
  TimerOutcome on_timer(SimTime now) {
    TimerOutcome out;
    std::vector<Chunk> resend;
    for (auto it = unacked_.begin(); it != unacked_.end();) {
      if (it->second.deadline > now) {
        ++it;
        continue;
      }
      out.lost.push_back({it->first, it->second.path, it->second.size});
      ++counters_.losses_detected;
      if (config_.mode == DeliveryMode::reliable) {
        for (auto& c : it->second.chunks) resend.push_back(std::move(c));
      }
      it = unacked_.erase(it);
    }
    for (auto& c : resend) {
      ++counters_.retransmissions;
      emit_data(std::move(c), true, out.retransmissions);
    }
    return out;
  }

  std::optional<SimTime> next_deadline() const {
    std::optional<SimTime> best;
    for (const auto& [pn, s] : unacked_) {
      if (!best || s.deadline < *best) best = s.deadline;
    }
    return best;
  }

 private:
  struct Chunk {
    std::uint64_t offset = 0;
    Bytes data;
  };

  struct Sent {
    std::size_t path = 0;
    SimTime send_time = 0;
    SimTime deadline = 0;
    std::uint64_t size = 0;
    std::vector<Chunk> chunks;  // reliable mode: data to resend on loss
  };

  void update_srtt(std::size_t path, SimTime sample) {
    auto& s = srtt_.at(path);
    s = s ? (*s * 7 + sample) / 8 : sample;
  }

  void emit_data(Chunk chunk, bool retransmission, std::vector<OutgoingPacket>& out) {
    const std::uint64_t pn = next_pn_++;
    wire::Packet p;
    p.header = config_.layout.header(pn);
    p.frames.push_back(wire::StreamFrame{config_.mode == DeliveryMode::reliable, config_.stream_id, chunk.offset,
                                         chunk.data});
    Bytes plain = wire::serialize_packet(p);

    OutgoingPacket data;
    data.pn = pn;
    data.carries_stream = true;
    data.retransmission = retransmission;
    if (config_.mode == DeliveryMode::reliable) pending_chunks_[pn].push_back(std::move(chunk));

    if (!fec_) {
      data.bytes = std::move(plain);
      out.push_back(std::move(data));
      return;
    }
    auto protected_packet = fec_->protect(plain);
    data.bytes = std::move(protected_packet.wire);
    out.push_back(std::move(data));
    for (auto& frame : protected_packet.repair_frames) {
      const std::uint64_t rpn = next_pn_++;
      wire::Packet rp;
      rp.header = config_.layout.header(rpn);
      rp.frames.emplace_back(std::move(frame));
      OutgoingPacket repair;
      repair.pn = rpn;
      repair.bytes = wire::serialize_packet(rp);
      ++counters_.repair_packets;
      out.push_back(std::move(repair));
    }
  }

  SenderConfig config_;
  std::optional<fec::FecSender> fec_;
  std::uint64_t next_pn_ = 0;
  std::uint64_t write_offset_ = 0;
  std::uint64_t max_data_;
  std::deque<Chunk> queue_;
  std::map<std::uint64_t, std::vector<Chunk>> pending_chunks_;  // built but not yet sent
  std::map<std::uint64_t, Sent> unacked_;
  std::vector<std::optional<SimTime>> srtt_;
  SenderCounters counters_;
};

// ---------------------------------------------------------------------------
// Receiver

struct StreamEvent {
  enum class Kind { data, gap };
  Kind kind = Kind::data;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  Bytes data;  // empty for gaps

  static StreamEvent gap(std::uint64_t offset, std::uint64_t length) { return {Kind::gap, offset, length, {}}; }
};

// In-order reassembly of one stream. Data below the read cursor is dropped.
class RecvStream {
 public:
  std::uint64_t cursor() const { return cursor_; }
  std::uint64_t buffered_bytes() const { return buffered_; }
  std::uint64_t late_bytes() const { return late_bytes_; }
  std::uint64_t highest_end() const { return highest_end_; }

  void insert(std::uint64_t offset, ByteView data) {
    const std::uint64_t end = offset + data.size();
    highest_end_ = std::max(highest_end_, end);
    if (end <= cursor_) {
      late_bytes_ += data.size();
      return;
    }
    std::uint64_t o = std::max(offset, cursor_);
    late_bytes_ += o - offset;

    auto it = pending_.upper_bound(o);
    if (it != pending_.begin()) {
      auto prev = std::prev(it);
      o = std::max(o, prev->first + prev->second.size());
    }
    while (o < end) {
      const std::uint64_t next_start = it == pending_.end() ? end : std::min(end, it->first);
      if (o < next_start) {
        add(o, data.subspan(o - offset, next_start - o));
        o = next_start;
      }
      if (it != pending_.end() && it->first < end) {
        o = std::max(o, it->first + it->second.size());
        ++it;
      } else {
        break;
      }
    }
  }

  // Hands out every contiguous byte at the cursor.
  std::vector<StreamEvent> drain() {
    std::vector<StreamEvent> out;
    for (auto it = pending_.begin(); it != pending_.end() && it->first == cursor_; it = pending_.erase(it)) {
      cursor_ += it->second.size();
      buffered_ -= it->second.size();
      out.push_back({StreamEvent::Kind::data, it->first, it->second.size(), std::move(it->second)});
    }
    return out;
  }

  // Moves the cursor to at least `end`, reporting holes as gaps, then drains.
  std::vector<StreamEvent> seal_until(std::uint64_t end) {
    std::vector<StreamEvent> out;
    while (cursor_ < end) {
      auto it = pending_.begin();
      if (it != pending_.end() && it->first == cursor_) {
        cursor_ += it->second.size();
        buffered_ -= it->second.size();
        out.push_back({StreamEvent::Kind::data, it->first, it->second.size(), std::move(it->second)});
        pending_.erase(it);
        continue;
      }
      const std::uint64_t hole_end = it == pending_.end() ? end : std::min(end, it->first);
      out.push_back(StreamEvent::gap(cursor_, hole_end - cursor_));
      cursor_ = hole_end;
    }
    for (auto& e : drain()) out.push_back(std::move(e));
    return out;
  }

 private:
  void add(std::uint64_t offset, ByteView data) {
    if (data.empty()) return;
    pending_.emplace(offset, Bytes(data.begin(), data.end()));
    buffered_ += data.size();
  }

  std::map<std::uint64_t, Bytes> pending_;
  std::uint64_t cursor_ = 0;
  std::uint64_t buffered_ = 0;
  std::uint64_t late_bytes_ = 0;
  std::uint64_t highest_end_ = 0;
};

struct ReceiverConfig {
  DeliveryMode mode = DeliveryMode::unreliable;
  std::uint32_t stream_id = 1;
  PacketLayout layout;
  std::optional<codec::SchemeConfig> fec;
  std::uint64_t initial_window = kDefaultInitialWindow;
  // Doubles the window when updates are due more often than every 2 RTTs.
  bool autotune = true;
  std::uint64_t max_window = kDefaultMaxWindow;
  SimTime rtt = kDefaultInitialRtt;
};

struct ReceiveOutcome {
  bool duplicate = false;  // every frame of the packet had already been delivered
  std::vector<StreamEvent> events;
  std::optional<wire::AckFrame> ack;
  std::optional<wire::WindowUpdateFrame> window_update;
  std::size_t recovered_packets = 0;
  bool corrupted_repair = false;
};

struct ReceiverCounters {
  std::uint64_t packets = 0;
  std::uint64_t recovered_packets = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t corrupted_repairs = 0;
  std::uint64_t window_updates = 0;
  std::uint64_t max_buffered = 0;
};

class Receiver {
 public:
  explicit Receiver(ReceiverConfig config)
      : config_(std::move(config)), window_(config_.initial_window), max_data_(config_.initial_window) {
    if (config_.mode == DeliveryMode::unreliable_fec) {
      if (!config_.fec) throw std::invalid_argument("FEC mode needs a negotiated FEC scheme");
      recovery_.emplace(*config_.fec, config_.layout.symbol_size());
    }
  }

  const ReceiverConfig& config() const { return config_; }
  const ReceiverCounters& counters() const { return counters_; }
  const RecvStream& stream() const { return stream_; }
  std::uint64_t max_data() const { return max_data_; }
  std::uint64_t window() const { return window_; }

  ReceiveOutcome on_packet(ByteView bytes, SimTime now) {
    ReceiveOutcome out;
    const auto packet = wire::parse_packet(bytes);
    ++counters_.packets;
    note_received(packet.header.packet_number);
    out.ack = build_ack();

    if (packet.header.f_flag() && recovery_) {
      auto r = recovery_->on_source_symbol(bytes);
      if (r.duplicate) {
        out.duplicate = true;
        ++counters_.duplicates;
      } else {
        process_frames(packet.frames, out);
        absorb_recovered(r, out);
      }
    } else {
      process_frames(packet.frames, out);
    }
    finish(out, now);
    return out;
  }

  // Called by the application when its read cursor passes `end` (unreliable only).
  ReceiveOutcome seal_until(std::uint64_t end, SimTime now) {
    ReceiveOutcome out;
    if (config_.mode == DeliveryMode::reliable) return out;
    out.events = stream_.seal_until(end);
    finish(out, now);
    return out;
  }

  Bytes build_control_packet(const ReceiveOutcome& outcome) {
    wire::Packet p;
    p.header = config_.layout.header(next_pn_++);
    if (outcome.ack) p.frames.emplace_back(*outcome.ack);
    if (outcome.window_update) p.frames.emplace_back(*outcome.window_update);
    return wire::serialize_packet(p);
  }

 private:
  void process_frames(const std::vector<wire::Frame>& frames, ReceiveOutcome& out) {
    for (const auto& frame : frames) {
      if (const auto* s = std::get_if<wire::StreamFrame>(&frame)) {
        on_stream_frame(*s);
      } else if (const auto* f = std::get_if<wire::FecFrame>(&frame)) {
        if (!recovery_) continue;
        auto r = recovery_->on_fec_frame(*f);
        if (r.corrupted) {
          out.corrupted_repair = true;
          ++counters_.corrupted_repairs;
        }
        absorb_recovered(r, out);
      }
    }
  }

  // Recovered packets re-enter the pipeline but are not fed back as source symbols.
  void absorb_recovered(const fec::RecoveryBuffer::Outcome& r, ReceiveOutcome& out) {
    for (const auto& image : r.recovered) {
      ++out.recovered_packets;
      ++counters_.recovered_packets;
      const auto packet = wire::parse_packet(image);
      for (const auto& frame : packet.frames) {
        if (const auto* s = std::get_if<wire::StreamFrame>(&frame)) on_stream_frame(*s);
      }
    }
  }

  void on_stream_frame(const wire::StreamFrame& s) {
    if (s.stream_id != config_.stream_id) return;
    if (s.offset + s.data.size() > max_data_) {
      throw FlowControlError("stream data up to offset " + std::to_string(s.offset + s.data.size()) +
                             " exceeds advertised limit " + std::to_string(max_data_));
    }
    stream_.insert(s.offset, s.data);
    counters_.max_buffered = std::max(counters_.max_buffered, stream_.buffered_bytes());
  }

  void finish(ReceiveOutcome& out, SimTime now) {
    for (auto& e : stream_.drain()) out.events.push_back(std::move(e));
    out.window_update = maybe_window_update(now);
  }

  std::optional<wire::WindowUpdateFrame> maybe_window_update(SimTime now) {
    const std::uint64_t consumed = stream_.cursor();
    // The first consumed byte counts as an update, so the first real one can already autotune.
    if (!last_update_time_ && consumed > 0) last_update_time_ = now;
    if (consumed - last_update_consumed_ < window_ / 2) return std::nullopt;
    if (config_.autotune && last_update_time_ && now - *last_update_time_ < 2 * config_.rtt) {
      window_ = std::min(window_ * 2, config_.max_window);
    }
    last_update_consumed_ = consumed;
    last_update_time_ = now;
    max_data_ = std::max(max_data_, consumed + window_);
    ++counters_.window_updates;
    return wire::WindowUpdateFrame{max_data_};
  }

  void note_received(std::uint64_t pn) {
    auto it = received_.upper_bound(pn);
    if (it != received_.begin()) {
      auto prev = std::prev(it);
      if (pn <= prev->second) return;
      if (pn == prev->second + 1) {
        prev->second = pn;
        if (it != received_.end() && it->first == pn + 1) {
          prev->second = it->second;
          received_.erase(it);
        }
        return;
      }
    }
    if (it != received_.end() && it->first == pn + 1) {
      const std::uint64_t last = it->second;
      received_.erase(it);
      received_.emplace(pn, last);
      return;
    }
    received_.emplace(pn, pn);
    while (received_.size() > 4 * kMaxAckRanges) received_.erase(received_.begin());
  }

  wire::AckFrame build_ack() const {
    wire::AckFrame ack;
    ack.largest_acked = received_.rbegin()->second;
    for (auto it = received_.rbegin(); it != received_.rend() && ack.ranges.size() < kMaxAckRanges; ++it) {
      ack.ranges.push_back({it->first, it->second});
    }
    return ack;
  }

  ReceiverConfig config_;
  std::optional<fec::RecoveryBuffer> recovery_;
  RecvStream stream_;
  std::uint64_t window_;
  std::uint64_t max_data_;
  std::uint64_t last_update_consumed_ = 0;
  std::optional<SimTime> last_update_time_;
  std::map<std::uint64_t, std::uint64_t> received_;  // packet number ranges [first, last]
  std::uint64_t next_pn_ = 0;
  ReceiverCounters counters_;
};

}  // namespace quicfec::transport
