#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "autosec/bytes.hpp"
#include "autosec/error.hpp"

namespace autosec::bus {

// Virtual time in milliseconds. Advances only through VirtualBus::step.
using Tick = std::uint64_t;

inline constexpr std::uint32_t kMaxStandardId = 0x7FF;
inline constexpr std::uint32_t kMaxExtendedId = 0x1FFFFFFF;
inline constexpr std::size_t kMaxFrameData = 8;

struct CanFrame {
  std::uint32_t id = 0;
  bool extended = false;
  Bytes data;

  bool valid() const noexcept {
    return id <= (extended ? kMaxExtendedId : kMaxStandardId) && data.size() <= kMaxFrameData;
  }
  bool operator==(const CanFrame&) const = default;
};

enum class BusErrc { DuplicateNodeName, InvalidFrame, UnknownEndpoint };
using BusError = ErrorOf<BusErrc>;

struct EndpointId {
  std::size_t index = 0;
  bool operator==(const EndpointId&) const = default;
};

struct BusEndpoint {
  std::string node_name;
  std::deque<CanFrame> tx_queue;  // staged, not yet arbitrated
  std::deque<CanFrame> rx_queue;  // delivered, not yet consumed
};

// Deterministic broadcast bus. Each tick delivers every frame staged before the
// tick began, in arbitration order (lowest id first, then transmit order), to
// every endpoint except its sender.
class VirtualBus {
 public:
  explicit VirtualBus(Tick start = 0) : now_(start) {}

  EndpointId attach(std::string node_name) {
    for (const auto& ep : endpoints_) {
      if (ep.info.node_name == node_name) {
        throw BusError(BusErrc::DuplicateNodeName, "node '" + node_name + "' already attached");
      }
    }
    endpoints_.push_back(Slot{BusEndpoint{std::move(node_name), {}, {}}, {}, next_seq_});
    return EndpointId{endpoints_.size() - 1};
  }

  void transmit(EndpointId from, CanFrame frame) {
    Slot& slot = at(from);
    if (!frame.valid()) {
      throw BusError(BusErrc::InvalidFrame,
                     frame.data.size() > kMaxFrameData ? "frame data exceeds 8 bytes" : "CAN id out of range");
    }
    slot.staged_seq.push_back(next_seq_++);
    slot.info.tx_queue.push_back(std::move(frame));
  }

  // Returns the number of frames put on the wire.
  std::size_t step(Tick ticks = 1) {
    std::size_t delivered = 0;
    for (Tick t = 0; t < ticks; ++t) {
      struct Pending {
        std::uint32_t id;
        std::uint64_t seq;
        std::size_t sender;
        CanFrame frame;
      };
      std::vector<Pending> pending;
      for (std::size_t i = 0; i < endpoints_.size(); ++i) {
        auto& slot = endpoints_[i];
        for (std::size_t k = 0; k < slot.info.tx_queue.size(); ++k) {
          pending.push_back({slot.info.tx_queue[k].id, slot.staged_seq[k], i, std::move(slot.info.tx_queue[k])});
        }
        slot.info.tx_queue.clear();
        slot.staged_seq.clear();
      }
      std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
        return a.id != b.id ? a.id < b.id : a.seq < b.seq;
      });
      for (auto& p : pending) {
        for (std::size_t i = 0; i < endpoints_.size(); ++i) {
          if (i == p.sender || p.seq < endpoints_[i].attached_at_seq) continue;
          endpoints_[i].info.rx_queue.push_back(p.frame);
        }
      }
      delivered += pending.size();
      ++now_;
    }
    return delivered;
  }

  Tick now() const noexcept { return now_; }

  const BusEndpoint& endpoint(EndpointId id) const { return const_cast<VirtualBus*>(this)->at(id).info; }

  std::deque<CanFrame>& rx_queue(EndpointId id) { return at(id).info.rx_queue; }

  std::vector<CanFrame> drain(EndpointId id) {
    auto& q = at(id).info.rx_queue;
    std::vector<CanFrame> out(std::make_move_iterator(q.begin()), std::make_move_iterator(q.end()));
    q.clear();
    return out;
  }

  std::size_t endpoint_count() const noexcept { return endpoints_.size(); }

 private:
  struct Slot {
    BusEndpoint info;
    std::vector<std::uint64_t> staged_seq;
    std::uint64_t attached_at_seq;
  };

  Slot& at(EndpointId id) {
    if (id.index >= endpoints_.size()) throw BusError(BusErrc::UnknownEndpoint, "unknown endpoint");
    return endpoints_[id.index];
  }

  std::vector<Slot> endpoints_;
  std::uint64_t next_seq_ = 0;
  Tick now_;
};

}  // namespace autosec::bus
