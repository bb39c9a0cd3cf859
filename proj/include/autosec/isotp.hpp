#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "autosec/bus.hpp"

// ISO 15765-2 style segmentation over the virtual bus (normal addressing,
// classic CAN, 12-bit length field).
//
//   SingleFrame       [0x0L][data x L]           L in 1..7
//   FirstFrame        [0x1H][LL][data x 6]        HLL = total length, 8..4095
//   ConsecutiveFrame  [0x2S][data x 7]            S = 1..15,0,1,...
//   FlowControl       [0x30][block size][stmin]   only "continue to send"
//
// All frames are padded to 8 bytes with 0xCC.
namespace autosec::isotp {

using bus::CanFrame;
using bus::Tick;

inline constexpr Byte kPadByte = 0xCC;
inline constexpr std::size_t kMaxPayload = 4095;
inline constexpr Tick kFlowControlTimeout = 100;

enum class TpErrc { EmptyPayload, PayloadTooLarge, ChannelBusy, FlowControlTimeout };
using TpError = ErrorOf<TpErrc>;

enum class TpPhase { idle, sending_cf, awaiting_fc, receiving_cf };

enum class ProtocolErrorKind { WrongSequence, UnexpectedFrame };

inline constexpr std::string_view to_string(ProtocolErrorKind k) noexcept {
  return k == ProtocolErrorKind::WrongSequence ? "WrongSequence" : "UnexpectedFrame";
}

struct TpChannelState {
  TpPhase phase = TpPhase::idle;
  std::uint8_t next_seq = 0;  // expected (rx) sequence nibble
  Bytes assembled;
  std::size_t expected_len = 0;
  std::uint8_t block_size = 0;   // advertised in our FlowControl; 0 = all remaining
  std::uint8_t stmin_ticks = 0;  // advertised in our FlowControl
  std::uint8_t frames_in_block = 0;
};

namespace event {
struct None {
  bool operator==(const None&) const = default;
};
struct MessageComplete {
  Bytes payload;
  bool operator==(const MessageComplete&) const = default;
};
struct Emit {
  CanFrame frame;
  bool operator==(const Emit&) const = default;
};
struct ProtocolError {
  ProtocolErrorKind kind;
  bool operator==(const ProtocolError&) const = default;
};
// Peer FlowControl accepted while awaiting it; consumed by the sending side.
struct FlowControl {
  std::uint8_t block_size;
  std::uint8_t stmin_ticks;
  bool operator==(const FlowControl&) const = default;
};
}  // namespace event

using TpEvent = std::variant<event::None, event::MessageComplete, event::Emit, event::ProtocolError, event::FlowControl>;

inline Bytes pad_frame(Bytes data) {
  data.resize(8, kPadByte);
  return data;
}

inline std::vector<CanFrame> tp_encode(std::span<const Byte> payload, std::uint32_t tx_id = 0, bool extended = false) {
  if (payload.empty()) throw TpError(TpErrc::EmptyPayload, "ISO-TP payload is empty");
  if (payload.size() > kMaxPayload) throw TpError(TpErrc::PayloadTooLarge, "ISO-TP payload exceeds 4095 bytes");

  std::vector<CanFrame> frames;
  if (payload.size() <= 7) {
    Bytes data{static_cast<Byte>(payload.size())};
    data.insert(data.end(), payload.begin(), payload.end());
    frames.push_back({tx_id, extended, pad_frame(std::move(data))});
    return frames;
  }

  const auto len = payload.size();
  Bytes first{static_cast<Byte>(0x10 | (len >> 8)), static_cast<Byte>(len & 0xFF)};
  first.insert(first.end(), payload.begin(), payload.begin() + 6);
  frames.push_back({tx_id, extended, std::move(first)});

  std::uint8_t seq = 1;
  for (std::size_t off = 6; off < len; off += 7) {
    Bytes cf{static_cast<Byte>(0x20 | seq)};
    auto end = std::min(len, off + 7);
    cf.insert(cf.end(), payload.begin() + static_cast<std::ptrdiff_t>(off), payload.begin() + static_cast<std::ptrdiff_t>(end));
    frames.push_back({tx_id, extended, pad_frame(std::move(cf))});
    seq = (seq + 1) & 0x0F;
  }
  return frames;
}

inline CanFrame flow_control_frame(std::uint32_t tx_id, bool extended, std::uint8_t block_size, std::uint8_t stmin) {
  return {tx_id, extended, pad_frame({0x30, block_size, stmin})};
}

namespace detail {
inline void reset_rx(TpChannelState& st) {
  st.phase = TpPhase::idle;
  st.assembled.clear();
  st.expected_len = 0;
  st.next_seq = 0;
  st.frames_in_block = 0;
}
}  // namespace detail

// Receive-side state machine for one frame addressed to this channel.
// `fc_tx_id` is the id our FlowControl frames are sent with.
inline TpEvent tp_feed(TpChannelState& st, const CanFrame& frame, std::uint32_t fc_tx_id = 0, bool extended = false) {
  using namespace event;
  const auto& d = frame.data;
  if (d.empty()) return ProtocolError{ProtocolErrorKind::UnexpectedFrame};
  const bool sending = st.phase == TpPhase::sending_cf || st.phase == TpPhase::awaiting_fc;

  switch (d[0] >> 4) {
    case 0x0: {
      const std::size_t len = d[0] & 0x0F;
      if (len == 0 || len > 7 || len + 1 > d.size()) return ProtocolError{ProtocolErrorKind::UnexpectedFrame};
      if (st.phase == TpPhase::receiving_cf) detail::reset_rx(st);
      return MessageComplete{Bytes(d.begin() + 1, d.begin() + 1 + static_cast<std::ptrdiff_t>(len))};
    }
    case 0x1: {
      if (sending || d.size() != 8) return ProtocolError{ProtocolErrorKind::UnexpectedFrame};
      const std::size_t len = (static_cast<std::size_t>(d[0] & 0x0F) << 8) | d[1];
      if (len < 8) return ProtocolError{ProtocolErrorKind::UnexpectedFrame};
      detail::reset_rx(st);
      st.phase = TpPhase::receiving_cf;
      st.expected_len = len;
      st.assembled.assign(d.begin() + 2, d.end());
      st.next_seq = 1;
      return Emit{flow_control_frame(fc_tx_id, extended, st.block_size, st.stmin_ticks)};
    }
    case 0x2: {
      if (st.phase != TpPhase::receiving_cf) return ProtocolError{ProtocolErrorKind::UnexpectedFrame};
      if ((d[0] & 0x0F) != st.next_seq) {
        detail::reset_rx(st);
        return ProtocolError{ProtocolErrorKind::WrongSequence};
      }
      const std::size_t want = std::min<std::size_t>(7, st.expected_len - st.assembled.size());
      if (d.size() < want + 1) {
        detail::reset_rx(st);
        return ProtocolError{ProtocolErrorKind::UnexpectedFrame};
      }
      st.assembled.insert(st.assembled.end(), d.begin() + 1, d.begin() + 1 + static_cast<std::ptrdiff_t>(want));
      st.next_seq = (st.next_seq + 1) & 0x0F;
      if (st.assembled.size() == st.expected_len) {
        Bytes payload = std::move(st.assembled);
        detail::reset_rx(st);
        return MessageComplete{std::move(payload)};
      }
      if (st.block_size != 0 && ++st.frames_in_block == st.block_size) {
        st.frames_in_block = 0;
        return Emit{flow_control_frame(fc_tx_id, extended, st.block_size, st.stmin_ticks)};
      }
      return None{};
    }
    case 0x3: {
      if (st.phase != TpPhase::awaiting_fc || d.size() < 3 || d[0] != 0x30) {
        return ProtocolError{ProtocolErrorKind::UnexpectedFrame};
      }
      st.phase = TpPhase::sending_cf;
      return FlowControl{d[1], d[2]};
    }
    default:
      return ProtocolError{ProtocolErrorKind::UnexpectedFrame};
  }
}

struct TpConfig {
  std::uint32_t tx_id = 0;
  std::uint32_t rx_id = 0;
  bool extended = false;
  std::uint8_t block_size = 0;
  std::uint8_t stmin_ticks = 0;
  Tick fc_timeout = kFlowControlTimeout;
};

enum class SendStatus { idle, in_progress, complete, timed_out };

// One ISO-TP channel bound to a bus endpoint. Half duplex: a send may only
// start while no segmented transfer is in progress in either direction.
// `service` must be called once per tick after VirtualBus::step.
class TpChannel {
 public:
  TpChannel(bus::VirtualBus& bus, bus::EndpointId endpoint, TpConfig config) : bus_(&bus), endpoint_(endpoint), cfg_(config) {
    state_.block_size = cfg_.block_size;
    state_.stmin_ticks = cfg_.stmin_ticks;
  }

  void send(std::span<const Byte> payload) {
    if (state_.phase != TpPhase::idle || status_ == SendStatus::in_progress) {
      throw TpError(TpErrc::ChannelBusy, "ISO-TP channel busy");
    }
    auto frames = tp_encode(payload, cfg_.tx_id, cfg_.extended);
    status_ = SendStatus::in_progress;
    bus_->transmit(endpoint_, std::move(frames.front()));
    if (frames.size() == 1) {
      mark_last_staged();
      return;
    }
    pending_cfs_.assign(std::make_move_iterator(frames.begin() + 1), std::make_move_iterator(frames.end()));
    state_.phase = TpPhase::awaiting_fc;
    fc_deadline_ = bus_->now() + cfg_.fc_timeout;
  }

  void service() {
    const Tick now = bus_->now();
    if (last_staged_at_ && now > *last_staged_at_) {
      last_staged_at_.reset();
      status_ = SendStatus::complete;
    }

    auto& rx = bus_->rx_queue(endpoint_);
    while (!rx.empty()) {
      CanFrame frame = std::move(rx.front());
      rx.pop_front();
      if (frame.id != cfg_.rx_id || frame.extended != cfg_.extended) continue;
      handle(tp_feed(state_, frame, cfg_.tx_id, cfg_.extended), now);
    }

    if (state_.phase == TpPhase::awaiting_fc && now >= fc_deadline_) {
      state_.phase = TpPhase::idle;
      pending_cfs_.clear();
      status_ = SendStatus::timed_out;
      return;
    }
    if (state_.phase == TpPhase::sending_cf) pump(now);
  }

  SendStatus send_status() const noexcept { return status_; }
  const TpChannelState& state() const noexcept { return state_; }
  const TpConfig& config() const noexcept { return cfg_; }

  std::optional<Bytes> take_message() {
    if (inbox_.empty()) return std::nullopt;
    Bytes msg = std::move(inbox_.front());
    inbox_.pop_front();
    return msg;
  }

  std::vector<ProtocolErrorKind> take_errors() { return std::exchange(errors_, {}); }

 private:
  void handle(TpEvent ev, Tick now) {
    std::visit(
        [&](auto&& e) {
          using E = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<E, event::MessageComplete>) {
            inbox_.push_back(std::move(e.payload));
          } else if constexpr (std::is_same_v<E, event::Emit>) {
            bus_->transmit(endpoint_, std::move(e.frame));
          } else if constexpr (std::is_same_v<E, event::ProtocolError>) {
            errors_.push_back(e.kind);
          } else if constexpr (std::is_same_v<E, event::FlowControl>) {
            peer_block_size_ = e.block_size;
            peer_stmin_ = e.stmin_ticks;
            cfs_in_block_ = 0;
            next_cf_at_ = now;
          }
        },
        std::move(ev));
  }

  void pump(Tick now) {
    while (!pending_cfs_.empty() && next_cf_at_ <= now) {
      bus_->transmit(endpoint_, std::move(pending_cfs_.front()));
      pending_cfs_.pop_front();
      ++cfs_in_block_;
      if (pending_cfs_.empty()) {
        state_.phase = TpPhase::idle;
        mark_last_staged();
        return;
      }
      if (peer_block_size_ != 0 && cfs_in_block_ == peer_block_size_) {
        state_.phase = TpPhase::awaiting_fc;
        fc_deadline_ = now + cfg_.fc_timeout;
        return;
      }
      if (peer_stmin_ != 0) next_cf_at_ = now + peer_stmin_;
    }
  }

  void mark_last_staged() { last_staged_at_ = bus_->now(); }

  bus::VirtualBus* bus_;
  bus::EndpointId endpoint_;
  TpConfig cfg_;
  TpChannelState state_;
  SendStatus status_ = SendStatus::idle;
  std::deque<CanFrame> pending_cfs_;
  std::optional<Tick> last_staged_at_;
  Tick fc_deadline_ = 0;
  Tick next_cf_at_ = 0;
  std::uint8_t peer_block_size_ = 0;
  std::uint8_t peer_stmin_ = 0;
  std::uint8_t cfs_in_block_ = 0;
  std::deque<Bytes> inbox_;
  std::vector<ProtocolErrorKind> errors_;
};

}  // namespace autosec::isotp
