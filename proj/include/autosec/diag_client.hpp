#pragma once

#include <string_view>
#include <vector>

#include "autosec/uds.hpp"
#include "autosec/vehicle.hpp"

namespace autosec::uds {

enum class EvidenceKind { request, response, timeout, frame };

inline constexpr std::string_view to_string(EvidenceKind k) noexcept {
  switch (k) {
    case EvidenceKind::request: return "request";
    case EvidenceKind::response: return "response";
    case EvidenceKind::timeout: return "timeout";
    case EvidenceKind::frame: return "frame";
  }
  return "?";
}

struct EvidenceEntry {
  Tick tick = 0;
  EvidenceKind kind = EvidenceKind::request;
  Bytes bytes;
  bool operator==(const EvidenceEntry&) const = default;
};

using EvidenceLog = std::vector<EvidenceEntry>;

inline constexpr Tick kDefaultRequestTimeout = 50;

// Tester-side request/response over the vehicle's tester channel. Every
// request is logged; it is followed in the log by its response or by a
// timeout marker.
class DiagClient {
 public:
  explicit DiagClient(vehicle::VirtualVehicle& vehicle) : vehicle_(&vehicle) {}

  struct Exchange {
    UdsResponse response;
    std::size_t response_index;  // position of the response in the evidence log
  };

  Exchange exchange(Byte service, std::span<const Byte> body, Tick timeout_ticks = kDefaultRequestTimeout) {
    auto& ch = vehicle_->tester();
    ch.take_errors();
    while (ch.take_message()) {
    }

    Bytes request{service};
    request.insert(request.end(), body.begin(), body.end());
    log_.push_back({vehicle_->now(), EvidenceKind::request, request});
    try {
      ch.send(request);
    } catch (const isotp::TpError& e) {
      fail_transport(std::string("send failed: ") + e.what());
    }

    const Tick started = vehicle_->now();
    while (true) {
      try {
        vehicle_->advance(1);
      } catch (const vehicle::SimError&) {
        log_.push_back({vehicle_->now(), EvidenceKind::timeout, {}});
        throw;
      }
      if (auto errors = ch.take_errors(); !errors.empty()) {
        fail_transport(std::string("ISO-TP protocol error: ") + std::string(isotp::to_string(errors.front())));
      }
      if (ch.send_status() == isotp::SendStatus::timed_out) fail_transport("ISO-TP flow control timeout");
      if (auto msg = ch.take_message()) {
        log_.push_back({vehicle_->now(), EvidenceKind::response, *msg});
        return {UdsResponse::parse(*msg), log_.size() - 1};
      }
      if (vehicle_->now() - started >= timeout_ticks) {
        log_.push_back({vehicle_->now(), EvidenceKind::timeout, {}});
        throw UdsError(UdsErrc::Timeout, "no response within " + std::to_string(timeout_ticks) + " ticks");
      }
    }
  }

  UdsResponse request(Byte service, std::span<const Byte> body, Tick timeout_ticks = kDefaultRequestTimeout) {
    return exchange(service, body, timeout_ticks).response;
  }

  UdsResponse request(Byte service, std::initializer_list<Byte> body, Tick timeout_ticks = kDefaultRequestTimeout) {
    const Bytes b(body);
    return request(service, std::span<const Byte>(b), timeout_ticks);
  }

  // Raw bus frame, logged as evidence; the bus settles for `settle` ticks.
  void inject(bus::CanFrame frame, Tick settle = 2) {
    log_.push_back({vehicle_->now(), EvidenceKind::frame, frame.data});
    vehicle_->inject(std::move(frame));
    vehicle_->advance(settle);
  }

  const EvidenceLog& evidence() const noexcept { return log_; }
  EvidenceLog take_evidence() { return std::exchange(log_, {}); }
  vehicle::VirtualVehicle& vehicle() noexcept { return *vehicle_; }

 private:
  [[noreturn]] void fail_transport(std::string message) {
    log_.push_back({vehicle_->now(), EvidenceKind::timeout, {}});
    throw UdsError(UdsErrc::TransportError, std::move(message));
  }

  vehicle::VirtualVehicle* vehicle_;
  EvidenceLog log_;
};

// Free-function form: encode via ISO-TP, step until response or timeout.
inline UdsResponse client_request(vehicle::VirtualVehicle& vehicle, Byte service, std::span<const Byte> body,
                                  Tick timeout_ticks = kDefaultRequestTimeout) {
  DiagClient client(vehicle);
  return client.request(service, body, timeout_ticks);
}

}  // namespace autosec::uds
