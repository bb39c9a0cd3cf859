#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>

#include "autosec/bus.hpp"
#include "autosec/bytes.hpp"
#include "autosec/error.hpp"
#include "autosec/rng.hpp"

// UDS-style diagnostic server. Only the services needed by the building block
// catalog are implemented: 0x10, 0x11, 0x22, 0x27, 0x3E (plus the hidden 0xBA
// when the profile carries UNDOCUMENTED_SERVICE).
namespace autosec::uds {

using bus::Tick;

namespace sid {
inline constexpr Byte kSessionControl = 0x10;
inline constexpr Byte kEcuReset = 0x11;
inline constexpr Byte kReadDataById = 0x22;
inline constexpr Byte kSecurityAccess = 0x27;
inline constexpr Byte kTesterPresent = 0x3E;
inline constexpr Byte kHiddenService = 0xBA;
inline constexpr Byte kNegativeResponse = 0x7F;
inline constexpr Byte kPositiveOffset = 0x40;
}  // namespace sid

namespace nrc {
inline constexpr Byte kServiceNotSupported = 0x11;
inline constexpr Byte kSubFunctionNotSupported = 0x12;
inline constexpr Byte kConditionsNotCorrect = 0x22;
inline constexpr Byte kRequestOutOfRange = 0x31;
inline constexpr Byte kSecurityAccessDenied = 0x33;
inline constexpr Byte kInvalidKey = 0x35;
inline constexpr Byte kExceededNumberOfAttempts = 0x36;

inline constexpr std::array<Byte, 7> kDefined = {
    kServiceNotSupported, kSubFunctionNotSupported, kConditionsNotCorrect, kRequestOutOfRange,
    kSecurityAccessDenied, kInvalidKey, kExceededNumberOfAttempts,
};
}  // namespace nrc

namespace session {
inline constexpr Byte kDefault = 0x01;
inline constexpr Byte kProgramming = 0x02;
inline constexpr Byte kExtended = 0x03;
}  // namespace session

inline constexpr std::uint32_t kMaxFailedKeys = 3;
inline constexpr Tick kLockoutTicks = 1000;

enum class UdsErrc { UnknownAlgorithm, Timeout, TransportError, InvalidProfile };
using UdsError = ErrorOf<UdsErrc>;

enum class KeyAlgorithm : std::uint8_t { XOR_FF, ADD_9, STRONG_OPAQUE };

inline constexpr std::string_view to_string(KeyAlgorithm a) noexcept {
  switch (a) {
    case KeyAlgorithm::XOR_FF: return "XOR_FF";
    case KeyAlgorithm::ADD_9: return "ADD_9";
    case KeyAlgorithm::STRONG_OPAQUE: return "STRONG_OPAQUE";
  }
  return "?";
}

inline std::optional<KeyAlgorithm> key_algorithm_from_string(std::string_view s) noexcept {
  if (s == "XOR_FF") return KeyAlgorithm::XOR_FF;
  if (s == "ADD_9") return KeyAlgorithm::ADD_9;
  if (s == "STRONG_OPAQUE") return KeyAlgorithm::STRONG_OPAQUE;
  return std::nullopt;
}

enum class Vulnerability : std::uint8_t {
  WEAK_KEY_XOR,
  UNDOCUMENTED_SERVICE,
  OPEN_PROGRAMMING_SESSION,
  DID_LEAK,
  NO_RATE_LIMIT,
};

inline constexpr std::array<std::string_view, 5> kVulnerabilityNames = {
    "WEAK_KEY_XOR", "UNDOCUMENTED_SERVICE", "OPEN_PROGRAMMING_SESSION", "DID_LEAK", "NO_RATE_LIMIT",
};

inline constexpr std::string_view to_string(Vulnerability v) noexcept {
  return kVulnerabilityNames[static_cast<std::size_t>(v)];
}

inline std::optional<Vulnerability> vulnerability_from_string(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kVulnerabilityNames.size(); ++i) {
    if (kVulnerabilityNames[i] == s) return static_cast<Vulnerability>(i);
  }
  return std::nullopt;
}

using Seed = std::array<Byte, 2>;
using Key = std::array<Byte, 2>;

// STRONG_OPAQUE stands in for an OEM keyed algorithm; testers never get it.
inline Key compute_key(KeyAlgorithm algorithm, Seed seed) {
  switch (algorithm) {
    case KeyAlgorithm::XOR_FF:
      return {static_cast<Byte>(seed[0] ^ 0xFF), static_cast<Byte>(seed[1] ^ 0xFF)};
    case KeyAlgorithm::ADD_9:
      return {static_cast<Byte>(seed[0] + 9), static_cast<Byte>(seed[1] + 9)};
    case KeyAlgorithm::STRONG_OPAQUE: {
      constexpr std::uint64_t kEcuSecret = 0x3C6EF372FE94F82Bull;
      const std::uint64_t mixed = splitmix64(kEcuSecret ^ ((std::uint64_t{seed[0]} << 8) | seed[1]));
      return {static_cast<Byte>(mixed >> 8), static_cast<Byte>(mixed)};
    }
  }
  throw UdsError(UdsErrc::UnknownAlgorithm, "unknown key algorithm");
}

struct DidEntry {
  Bytes value;
  std::optional<std::uint8_t> required_level;  // nullopt = readable without unlock
  bool operator==(const DidEntry&) const = default;
};

struct EcuProfile {
  std::string name;
  std::set<Byte> sessions{session::kDefault};
  std::map<Byte, std::set<Byte>> services;  // session -> supported sids
  std::map<std::uint16_t, DidEntry> dids;
  std::map<std::uint8_t, KeyAlgorithm> security_levels;
  std::set<Vulnerability> vulnerability_flags;
  std::set<std::string> component_tags;

  bool has(Vulnerability v) const { return vulnerability_flags.contains(v); }

  bool supports(Byte session_id, Byte service) const {
    auto it = services.find(session_id);
    return it != services.end() && it->second.contains(service);
  }

  // Algorithm the ECU actually checks keys with; WEAK_KEY_XOR overrides.
  std::optional<KeyAlgorithm> effective_algorithm(std::uint8_t level) const {
    auto it = security_levels.find(level);
    if (it == security_levels.end()) return std::nullopt;
    return has(Vulnerability::WEAK_KEY_XOR) ? KeyAlgorithm::XOR_FF : it->second;
  }

  void validate() const {
    if (!sessions.contains(session::kDefault)) {
      throw UdsError(UdsErrc::InvalidProfile, "ECU '" + name + "': default session 0x01 missing");
    }
    for (const auto& [s, _] : services) {
      if (!sessions.contains(s)) {
        throw UdsError(UdsErrc::InvalidProfile, "ECU '" + name + "': services listed for undeclared session");
      }
    }
    for (const auto& [level, _] : security_levels) {
      if (level == 0 || level > 0x3F) {
        throw UdsError(UdsErrc::InvalidProfile, "ECU '" + name + "': security level out of range 1..63");
      }
    }
    for (const auto& [did, entry] : dids) {
      if (entry.required_level && !security_levels.contains(*entry.required_level)) {
        throw UdsError(UdsErrc::InvalidProfile, "ECU '" + name + "': DID " + hex_literal(did, 4) +
                                                    " requires undefined security level");
      }
    }
  }

  bool operator==(const EcuProfile&) const = default;
};

struct EcuState {
  Byte session = session::kDefault;
  std::set<std::uint8_t> unlocked_levels;
  std::optional<Seed> pending_seed;
  std::uint8_t pending_level = 0;
  std::uint32_t failed_key_attempts = 0;
  std::optional<Tick> locked_until_tick;

  bool operator==(const EcuState&) const = default;
};

struct UdsResponse {
  bool positive = false;
  Byte request_sid = 0;
  Bytes body;  // positive: bytes after the echo byte
  Byte nrc = 0;

  static UdsResponse parse(std::span<const Byte> bytes) {
    if (bytes.empty()) throw UdsError(UdsErrc::TransportError, "empty UDS response");
    if (bytes[0] == sid::kNegativeResponse) {
      if (bytes.size() != 3) throw UdsError(UdsErrc::TransportError, "negative response must be 3 bytes");
      return {false, bytes[1], {}, bytes[2]};
    }
    if (bytes[0] < sid::kPositiveOffset) throw UdsError(UdsErrc::TransportError, "response byte is not a positive echo");
    return {true, static_cast<Byte>(bytes[0] - sid::kPositiveOffset), Bytes(bytes.begin() + 1, bytes.end()), 0};
  }

  Bytes encode() const {
    if (!positive) return {sid::kNegativeResponse, request_sid, nrc};
    Bytes out{static_cast<Byte>(request_sid + sid::kPositiveOffset)};
    out.insert(out.end(), body.begin(), body.end());
    return out;
  }

  bool is_nrc(Byte code) const noexcept { return !positive && nrc == code; }
  bool operator==(const UdsResponse&) const = default;
};

namespace detail {

inline Bytes negative(Byte service, Byte code) { return {sid::kNegativeResponse, service, code}; }

inline Bytes positive(Byte service, std::initializer_list<Byte> body) {
  Bytes out{static_cast<Byte>(service + sid::kPositiveOffset)};
  for (Byte b : body) out.push_back(b);
  return out;
}

inline Bytes session_control(const EcuProfile& p, EcuState& st, std::span<const Byte> body) {
  constexpr Byte s = sid::kSessionControl;
  if (body.size() != 1) return negative(s, nrc::kRequestOutOfRange);
  const Byte target = body[0];
  if (!p.sessions.contains(target)) return negative(s, nrc::kSubFunctionNotSupported);
  if (target == session::kProgramming && !st.unlocked_levels.contains(1) &&
      !p.has(Vulnerability::OPEN_PROGRAMMING_SESSION)) {
    return negative(s, nrc::kSecurityAccessDenied);
  }
  if (target != st.session) {
    // Any session transition relocks security access.
    st.unlocked_levels.clear();
    st.pending_seed.reset();
  }
  st.session = target;
  return positive(s, {target});
}

inline Bytes ecu_reset(EcuState& st, std::span<const Byte> body) {
  constexpr Byte s = sid::kEcuReset;
  if (body.size() != 1) return negative(s, nrc::kRequestOutOfRange);
  if (body[0] < 0x01 || body[0] > 0x03) return negative(s, nrc::kSubFunctionNotSupported);
  st = EcuState{};
  return positive(s, {body[0]});
}

inline Bytes read_did(const EcuProfile& p, const EcuState& st, std::span<const Byte> body) {
  constexpr Byte s = sid::kReadDataById;
  if (body.size() != 2) return negative(s, nrc::kRequestOutOfRange);
  const auto did = static_cast<std::uint16_t>((body[0] << 8) | body[1]);
  auto it = p.dids.find(did);
  if (it == p.dids.end()) return negative(s, nrc::kRequestOutOfRange);
  const auto& entry = it->second;
  if (entry.required_level && !st.unlocked_levels.contains(*entry.required_level) &&
      !p.has(Vulnerability::DID_LEAK)) {
    return negative(s, nrc::kSecurityAccessDenied);
  }
  Bytes out{static_cast<Byte>(s + sid::kPositiveOffset), body[0], body[1]};
  out.insert(out.end(), entry.value.begin(), entry.value.end());
  return out;
}

inline Bytes security_access(const EcuProfile& p, EcuState& st, std::span<const Byte> body, Tick now, CounterRng& seeds) {
  constexpr Byte s = sid::kSecurityAccess;
  if (body.empty()) return negative(s, nrc::kRequestOutOfRange);
  const Byte sub = body[0];
  if (sub == 0 || sub > 0x7E) return negative(s, nrc::kSubFunctionNotSupported);
  const auto level = static_cast<std::uint8_t>((sub + 1) / 2);
  const auto algorithm = p.effective_algorithm(level);
  if (!algorithm) return negative(s, nrc::kSubFunctionNotSupported);

  if (st.locked_until_tick) {
    if (now < *st.locked_until_tick) return negative(s, nrc::kExceededNumberOfAttempts);
    st.locked_until_tick.reset();
  }

  if (sub % 2 == 1) {
    if (body.size() != 1) return negative(s, nrc::kRequestOutOfRange);
    if (st.unlocked_levels.contains(level)) return positive(s, {sub, 0x00, 0x00});
    Seed seed{};
    do {
      seed = {seeds.byte(), seeds.byte()};
    } while (seed[0] == 0 && seed[1] == 0);
    st.pending_seed = seed;
    st.pending_level = level;
    return positive(s, {sub, seed[0], seed[1]});
  }

  if (body.size() != 3) return negative(s, nrc::kRequestOutOfRange);
  if (!st.pending_seed || st.pending_level != level) return negative(s, nrc::kConditionsNotCorrect);
  const Key expected = compute_key(*algorithm, *st.pending_seed);
  st.pending_seed.reset();
  if (body[1] == expected[0] && body[2] == expected[1]) {
    st.unlocked_levels.insert(level);
    st.failed_key_attempts = 0;
    return positive(s, {sub});
  }
  ++st.failed_key_attempts;
  if (!p.has(Vulnerability::NO_RATE_LIMIT) && st.failed_key_attempts >= kMaxFailedKeys) {
    st.failed_key_attempts = 0;
    st.locked_until_tick = now + kLockoutTicks;
    return negative(s, nrc::kExceededNumberOfAttempts);
  }
  return negative(s, nrc::kInvalidKey);
}

}  // namespace detail

// Server-side transition: one request in, exactly one response out. Never
// throws for any byte input; malformed requests get NRC 0x31.
inline Bytes ecu_handle(const EcuProfile& profile, EcuState& state, std::span<const Byte> request, Tick now,
                        CounterRng& seeds) {
  if (request.empty()) return detail::negative(0x00, nrc::kRequestOutOfRange);
  const Byte service = request[0];
  const auto body = request.subspan(1);

  if (service == sid::kHiddenService && profile.has(Vulnerability::UNDOCUMENTED_SERVICE)) {
    return detail::positive(service, {0x00});
  }
  if (!profile.supports(state.session, service)) return detail::negative(service, nrc::kServiceNotSupported);

  switch (service) {
    case sid::kSessionControl: return detail::session_control(profile, state, body);
    case sid::kEcuReset: return detail::ecu_reset(state, body);
    case sid::kReadDataById: return detail::read_did(profile, state, body);
    case sid::kSecurityAccess: return detail::security_access(profile, state, body, now, seeds);
    case sid::kTesterPresent:
      if (body.size() != 1) return detail::negative(service, nrc::kRequestOutOfRange);
      if (body[0] != 0x00) return detail::negative(service, nrc::kSubFunctionNotSupported);
      return detail::positive(service, {0x00});
    default:
      // Listed in the profile but not implemented by this server.
      return detail::negative(service, nrc::kServiceNotSupported);
  }
}

}  // namespace autosec::uds
