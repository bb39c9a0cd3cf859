#pragma once

#include <optional>
#include <set>
#include <string>

#include "autosec/blocks.hpp"
#include "autosec/sut.hpp"

namespace autosec::sut {

// What the SUT model says about the target. Blocks use it as the reference
// for "documented" services and "protected" data identifiers. Profiles without
// an embedded ECU model fall back to the standard UDS service table.
struct ModelHints {
  std::set<Byte> documented_sids;
  std::set<std::uint16_t> protected_dids;
  bool from_model = false;
  bool operator==(const ModelHints&) const = default;
};

inline const std::set<Byte>& standard_uds_sids() {
  static const std::set<Byte> sids = {0x10, 0x11, 0x14, 0x19, 0x22, 0x23, 0x24, 0x27, 0x28, 0x29, 0x2A, 0x2C, 0x2E,
                                      0x2F, 0x31, 0x34, 0x35, 0x36, 0x37, 0x38, 0x3D, 0x3E, 0x83, 0x84, 0x85, 0x86, 0x87};
  return sids;
}

inline ModelHints model_hints(const SutProfile& profile) {
  ModelHints h;
  const uds::EcuProfile* ecu = profile.virtual_ecu();
  if (!ecu) {
    h.documented_sids = standard_uds_sids();
    return h;
  }
  h.from_model = true;
  for (const auto& [_, sids] : ecu->services) h.documented_sids.insert(sids.begin(), sids.end());
  for (const auto& [did, entry] : ecu->dids) {
    if (entry.required_level) h.protected_dids.insert(did);
  }
  return h;
}

struct BoundTest {
  blocks::TestCase test_case;
  const blocks::BlockSpec* block = nullptr;
  std::optional<Transport> transport;            // nullopt for blocks with no requirements
  std::optional<vehicle::Addressing> channel;    // concrete CAN ids for obd2_can
  std::optional<uds::EcuProfile> virtual_ecu;    // present for the built-in SUT
  ModelHints hints;
  std::string profile_name;
};

enum class BindErrc { UnsupportedCapability, NonExecutableTransport, InvalidTestCase };

class BindError : public ErrorOf<BindErrc> {
 public:
  BindError(BindErrc code, std::string message, CapabilitySet missing = {})
      : ErrorOf(code, std::move(message)), missing_(missing) {}
  CapabilitySet missing() const noexcept { return missing_; }

 private:
  CapabilitySet missing_;
};

// A block with no required capabilities needs no transport and always binds.
inline BoundTest bind(const blocks::BlockSpec& block, const blocks::TestCase& test_case, const SutProfile& profile) {
  if (test_case.block != block.name) {
    throw BindError(BindErrc::InvalidTestCase, "test case '" + test_case.id + "' does not reference block " + block.name);
  }
  if (!blocks::params_match_schema(block, test_case.params)) {
    throw BindError(BindErrc::InvalidTestCase, "test case '" + test_case.id + "' params do not match the block schema");
  }

  BoundTest bound{test_case, &block, std::nullopt, std::nullopt, std::nullopt, model_hints(profile), profile.name};
  if (block.required_capabilities.empty()) return bound;

  const Transport* transport = profile.executable_transport();
  if (!transport) {
    throw BindError(BindErrc::NonExecutableTransport,
                    "profile '" + profile.name + "' has no executable transport for block " + block.name);
  }
  const CapabilitySet missing = block.required_capabilities - capabilities(profile);
  if (!missing.empty()) {
    throw BindError(BindErrc::UnsupportedCapability,
                    "profile '" + profile.name + "' lacks " + missing.to_string() + " required by " + block.name, missing);
  }
  bound.transport = *transport;
  bound.channel = transport->addressing();
  if (const auto* ecu = profile.virtual_ecu()) bound.virtual_ecu = *ecu;
  return bound;
}

}  // namespace autosec::sut
