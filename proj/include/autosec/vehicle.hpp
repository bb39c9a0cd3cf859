#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autosec/bus.hpp"
#include "autosec/isotp.hpp"
#include "autosec/uds.hpp"

// The built-in system under test: one virtual ECU and one tester on a shared
// bus, stepped together one tick at a time.
namespace autosec::vehicle {

using bus::Tick;

enum class SimErrc { BudgetExhausted };
using SimError = ErrorOf<SimErrc>;

struct Addressing {
  std::uint32_t tester_tx = 0x7E0;  // tester -> ECU
  std::uint32_t tester_rx = 0x7E8;  // ECU -> tester
  bool extended = false;
  bool operator==(const Addressing&) const = default;
};

// UDS server attached to the bus behind its own ISO-TP channel.
class EcuNode {
 public:
  EcuNode(bus::VirtualBus& bus, const uds::EcuProfile& profile, const Addressing& addr, CounterRng seeds)
      : bus_(&bus),
        profile_(profile),
        channel_(bus, bus.attach(profile.name.empty() ? "ecu" : profile.name),
                 isotp::TpConfig{addr.tester_rx, addr.tester_tx, addr.extended}),
        seeds_(seeds) {}

  void service() {
    channel_.service();
    while (auto request = channel_.take_message()) {
      outbox_.push_back(uds::ecu_handle(profile_, state_, *request, bus_->now(), seeds_));
    }
    channel_.take_errors();  // malformed traffic is dropped
    if (!outbox_.empty() && channel_.state().phase == isotp::TpPhase::idle &&
        channel_.send_status() != isotp::SendStatus::in_progress) {
      channel_.send(outbox_.front());
      outbox_.pop_front();
    }
  }

  const uds::EcuState& state() const noexcept { return state_; }
  const uds::EcuProfile& profile() const noexcept { return profile_; }

 private:
  bus::VirtualBus* bus_;
  uds::EcuProfile profile_;
  isotp::TpChannel channel_;
  CounterRng seeds_;
  uds::EcuState state_;
  std::deque<Bytes> outbox_;
};

struct VehicleConfig {
  std::optional<uds::EcuProfile> ecu;  // nullopt = nobody answers
  Addressing addressing;
  std::uint64_t seed = 0;
  Tick start_tick = 0;
  std::optional<Tick> tick_limit;  // absolute; advancing past it throws BudgetExhausted
};

class VirtualVehicle {
 public:
  explicit VirtualVehicle(const VehicleConfig& cfg)
      : bus_(std::make_unique<bus::VirtualBus>(cfg.start_tick)), addressing_(cfg.addressing), limit_(cfg.tick_limit) {
    if (cfg.ecu) ecu_ = std::make_unique<EcuNode>(*bus_, *cfg.ecu, cfg.addressing, CounterRng(cfg.seed).fork(1));
    tester_endpoint_ = bus_->attach("tester");
    tester_ = std::make_unique<isotp::TpChannel>(
        *bus_, tester_endpoint_, isotp::TpConfig{cfg.addressing.tester_tx, cfg.addressing.tester_rx, cfg.addressing.extended});
  }

  void advance(Tick ticks = 1) {
    for (Tick i = 0; i < ticks; ++i) {
      if (limit_ && bus_->now() >= *limit_) {
        throw SimError(SimErrc::BudgetExhausted, "virtual time budget exhausted");
      }
      bus_->step(1);
      if (ecu_) ecu_->service();
      tester_->service();
    }
  }

  // Raw frame from the tester endpoint, bypassing ISO-TP.
  void inject(bus::CanFrame frame) { bus_->transmit(tester_endpoint_, std::move(frame)); }

  Tick now() const noexcept { return bus_->now(); }
  bus::VirtualBus& bus() noexcept { return *bus_; }
  isotp::TpChannel& tester() noexcept { return *tester_; }
  const EcuNode* ecu() const noexcept { return ecu_.get(); }
  const Addressing& addressing() const noexcept { return addressing_; }

 private:
  std::unique_ptr<bus::VirtualBus> bus_;
  Addressing addressing_;
  std::optional<Tick> limit_;
  std::unique_ptr<EcuNode> ecu_;
  bus::EndpointId tester_endpoint_;
  std::unique_ptr<isotp::TpChannel> tester_;
};

}  // namespace autosec::vehicle
