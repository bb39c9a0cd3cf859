#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "autosec/binding.hpp"
#include "autosec/blocks.hpp"
#include "autosec/diag_client.hpp"
#include "autosec/isotp.hpp"
#include "autosec/rng.hpp"

// Concrete executables for the block catalog against a UDS-over-ISO-TP target,
// and the per-block verdict rules.
namespace autosec::exec {

using uds::DiagClient;
namespace sid = uds::sid;
namespace nrc = uds::nrc;

enum class Verdict { pass, fail, error, skipped };

inline constexpr std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::error: return "error";
    case Verdict::skipped: return "skipped";
  }
  return "?";
}

// Indices into the evidence log that back the observation.
struct ObservationBase {
  std::vector<std::size_t> evidence_refs;
};

struct ServiceDiscoveryObs : ObservationBase {
  std::vector<Byte> supported;
  std::vector<Byte> undocumented;
};

struct SessionScanObs : ObservationBase {
  std::map<Byte, bool> opened;
  bool programming_without_security = false;
};

struct SecurityAccessProbeObs : ObservationBase {
  std::optional<std::string> unlocked_with;
};

struct RateLimitObs : ObservationBase {
  unsigned wrong_keys_sent = 0;
  bool lockout_observed = false;
};

struct ReadDidSweepObs : ObservationBase {
  std::vector<std::uint16_t> readable;
  std::vector<std::uint16_t> leaked;
};

struct ResetResilienceObs : ObservationBase {
  bool unlocked_before_reset = false;
  bool unlock_persisted = false;
};

struct FuzzObs : ObservationBase {
  unsigned iterations = 0;
  bool alive = true;
};

using Observations = std::variant<ServiceDiscoveryObs, SessionScanObs, SecurityAccessProbeObs, RateLimitObs,
                                  ReadDidSweepObs, ResetResilienceObs, FuzzObs>;

inline const std::vector<std::size_t>& evidence_refs(const Observations& obs) {
  return std::visit([](const ObservationBase& b) -> const std::vector<std::size_t>& { return b.evidence_refs; }, obs);
}

// Pass/fail for a completed block run. Threat-based: fail = weakness shown.
// Requirement-based: fail = requirement violated. Same rule either way.
inline Verdict verdict(const blocks::BlockSpec& block, const Observations& obs) {
  using blocks::VerdictRule;
  auto fail_if = [](bool c) { return c ? Verdict::fail : Verdict::pass; };
  auto mismatch = [&]() -> Verdict { throw std::invalid_argument("observations do not belong to block " + block.name); };
  switch (block.verdict_rule) {
    case VerdictRule::hidden_service_found:
      if (auto* o = std::get_if<ServiceDiscoveryObs>(&obs)) return fail_if(!o->undocumented.empty());
      return mismatch();
    case VerdictRule::programming_without_security:
      if (auto* o = std::get_if<SessionScanObs>(&obs)) return fail_if(o->programming_without_security);
      return mismatch();
    case VerdictRule::weak_key_unlocks:
      if (auto* o = std::get_if<SecurityAccessProbeObs>(&obs)) return fail_if(o->unlocked_with.has_value());
      return mismatch();
    case VerdictRule::no_lockout:
      if (auto* o = std::get_if<RateLimitObs>(&obs)) return fail_if(!o->lockout_observed);
      return mismatch();
    case VerdictRule::gated_did_readable:
      if (auto* o = std::get_if<ReadDidSweepObs>(&obs)) return fail_if(!o->leaked.empty());
      return mismatch();
    case VerdictRule::unlock_persists_after_reset:
      if (auto* o = std::get_if<ResetResilienceObs>(&obs)) return fail_if(o->unlock_persisted);
      return mismatch();
    case VerdictRule::unresponsive_after_fuzz:
      if (auto* o = std::get_if<FuzzObs>(&obs)) return fail_if(!o->alive);
      return mismatch();
  }
  return mismatch();
}

namespace detail {

inline std::int64_t int_param(const nlohmann::json& params, const char* key, std::int64_t lo, std::int64_t hi) {
  const auto v = params.at(key).get<std::int64_t>();
  if (v < lo || v > hi) {
    throw std::invalid_argument(std::string("parameter '") + key + "' out of range " + std::to_string(lo) + ".." +
                                std::to_string(hi));
  }
  return v;
}

inline Byte seed_subfunction(const nlohmann::json& params) {
  return static_cast<Byte>(2 * int_param(params, "level", 1, 0x3F) - 1);
}

inline bool enter_session(DiagClient& c, Byte session) { return c.request(sid::kSessionControl, {session}).positive; }

// Key that none of the weak tester algorithms would produce for this seed.
inline uds::Key wrong_key(uds::Seed seed) {
  uds::Key key{};
  for (std::size_t i = 0; i < 2; ++i) {
    const Byte weak_xor = static_cast<Byte>(seed[i] ^ 0xFF);
    const Byte weak_add = static_cast<Byte>(seed[i] + 9);
    for (Byte mask : {Byte{0x5A}, Byte{0x3C}, Byte{0x11}}) {
      key[i] = static_cast<Byte>(seed[i] ^ mask);
      if (key[i] != weak_xor && key[i] != weak_add) break;
    }
  }
  return key;
}

struct UnlockAttempt {
  std::optional<std::string> algorithm;
  std::vector<std::size_t> evidence;
};

// Seed/key exchange with each named weak algorithm until one unlocks.
inline UnlockAttempt try_weak_unlock(DiagClient& c, Byte seed_sub, const std::vector<std::string>& algorithms) {
  UnlockAttempt out;
  for (const auto& name : algorithms) {
    auto alg = uds::key_algorithm_from_string(name);
    if (!alg || *alg == uds::KeyAlgorithm::STRONG_OPAQUE) {
      throw std::invalid_argument("algorithm '" + name + "' is not available to tester blocks");
    }
    auto seed_ex = c.exchange(sid::kSecurityAccess, std::vector<Byte>{seed_sub});
    if (!seed_ex.response.positive) {
      if (seed_ex.response.is_nrc(nrc::kExceededNumberOfAttempts)) break;
      continue;
    }
    const auto& body = seed_ex.response.body;
    if (body.size() != 3) throw uds::UdsError(uds::UdsErrc::TransportError, "seed response has unexpected length");
    const uds::Seed seed{body[1], body[2]};
    if (seed[0] == 0 && seed[1] == 0) {
      out.algorithm = "already-unlocked";
      out.evidence = {seed_ex.response_index};
      return out;
    }
    const auto key = uds::compute_key(*alg, seed);
    auto key_ex = c.exchange(sid::kSecurityAccess, std::vector<Byte>{static_cast<Byte>(seed_sub + 1), key[0], key[1]});
    if (key_ex.response.positive) {
      out.algorithm = name;
      out.evidence = {seed_ex.response_index, key_ex.response_index};
      return out;
    }
  }
  return out;
}

inline std::vector<std::string> string_list(const nlohmann::json& params, const char* key) {
  return params.at(key).get<std::vector<std::string>>();
}

}  // namespace detail

inline ServiceDiscoveryObs run_service_discovery(DiagClient& c, const sut::BoundTest& bt) {
  const auto& p = bt.test_case.params;
  const auto first = detail::int_param(p, "first_sid", 0, 0xFF);
  const auto last = detail::int_param(p, "last_sid", first, 0xFF);
  ServiceDiscoveryObs obs;
  std::set<Byte> supported;
  std::map<Byte, std::size_t> first_seen;

  auto sweep = [&]() {
    for (auto s = first; s <= last; ++s) {
      const auto service = static_cast<Byte>(s);
      auto ex = c.exchange(service, std::span<const Byte>{});
      if (!ex.response.is_nrc(nrc::kServiceNotSupported) && supported.insert(service).second) {
        first_seen[service] = ex.response_index;
      }
    }
  };
  sweep();
  if (detail::enter_session(c, uds::session::kExtended)) sweep();

  obs.supported.assign(supported.begin(), supported.end());
  for (Byte s : supported) {
    if (!bt.hints.documented_sids.contains(s)) {
      obs.undocumented.push_back(s);
      obs.evidence_refs.push_back(first_seen[s]);
    }
  }
  return obs;
}

inline SessionScanObs run_session_scan(DiagClient& c, const sut::BoundTest& bt) {
  SessionScanObs obs;
  for (auto s : bt.test_case.params.at("sessions").get<std::vector<int>>()) {
    if (s < 0 || s > 0xFF) throw std::invalid_argument("session id out of range");
    const auto session = static_cast<Byte>(s);
    auto ex = c.exchange(sid::kSessionControl, std::vector<Byte>{session});
    obs.opened[session] = ex.response.positive;
    if (ex.response.positive && session == uds::session::kProgramming) {
      // No unlock was attempted in this run, so the ECU was locked.
      obs.programming_without_security = true;
      obs.evidence_refs.push_back(ex.response_index);
    }
    if (ex.response.positive && session != uds::session::kDefault) detail::enter_session(c, uds::session::kDefault);
  }
  return obs;
}

inline SecurityAccessProbeObs run_security_access_probe(DiagClient& c, const sut::BoundTest& bt) {
  const auto& p = bt.test_case.params;
  detail::enter_session(c, uds::session::kExtended);
  auto attempt = detail::try_weak_unlock(c, detail::seed_subfunction(p), detail::string_list(p, "algorithms"));
  SecurityAccessProbeObs obs;
  obs.unlocked_with = attempt.algorithm;
  obs.evidence_refs = std::move(attempt.evidence);
  return obs;
}

inline RateLimitObs run_rate_limit_check(DiagClient& c, const sut::BoundTest& bt) {
  const auto& p = bt.test_case.params;
  const Byte seed_sub = detail::seed_subfunction(p);
  const auto attempts = detail::int_param(p, "wrong_keys", 1, 64);
  detail::enter_session(c, uds::session::kExtended);

  RateLimitObs obs;
  std::vector<std::size_t> key_responses;
  for (std::int64_t i = 0; i < attempts && !obs.lockout_observed; ++i) {
    auto seed_ex = c.exchange(sid::kSecurityAccess, std::vector<Byte>{seed_sub});
    if (seed_ex.response.is_nrc(nrc::kExceededNumberOfAttempts)) {
      obs.lockout_observed = true;
      break;
    }
    if (!seed_ex.response.positive || seed_ex.response.body.size() != 3) continue;
    const auto key = detail::wrong_key({seed_ex.response.body[1], seed_ex.response.body[2]});
    auto key_ex = c.exchange(sid::kSecurityAccess, std::vector<Byte>{static_cast<Byte>(seed_sub + 1), key[0], key[1]});
    ++obs.wrong_keys_sent;
    key_responses.push_back(key_ex.response_index);
    if (key_ex.response.is_nrc(nrc::kExceededNumberOfAttempts)) obs.lockout_observed = true;
  }
  obs.evidence_refs = obs.lockout_observed ? std::vector<std::size_t>{key_responses.empty() ? 0 : key_responses.back()}
                                           : key_responses;
  return obs;
}

inline ReadDidSweepObs run_read_did_sweep(DiagClient& c, const sut::BoundTest& bt) {
  const auto& p = bt.test_case.params;
  const auto first = detail::int_param(p, "did_first", 0, 0xFFFF);
  const auto last = detail::int_param(p, "did_last", first, 0xFFFF);
  ReadDidSweepObs obs;
  for (auto d = first; d <= last; ++d) {
    const auto did = static_cast<std::uint16_t>(d);
    auto ex = c.exchange(sid::kReadDataById, std::vector<Byte>{static_cast<Byte>(did >> 8), static_cast<Byte>(did)});
    if (!ex.response.positive) continue;
    obs.readable.push_back(did);
    if (bt.hints.protected_dids.contains(did)) {
      obs.leaked.push_back(did);
      obs.evidence_refs.push_back(ex.response_index);
    }
  }
  return obs;
}

inline ResetResilienceObs run_reset_resilience(DiagClient& c, const sut::BoundTest& bt) {
  const Byte seed_sub = detail::seed_subfunction(bt.test_case.params);
  ResetResilienceObs obs;
  detail::enter_session(c, uds::session::kExtended);
  obs.unlocked_before_reset = detail::try_weak_unlock(c, seed_sub, {"XOR_FF", "ADD_9"}).algorithm.has_value();

  auto reset = c.exchange(sid::kEcuReset, std::vector<Byte>{0x01});
  if (!reset.response.positive) throw uds::UdsError(uds::UdsErrc::TransportError, "EcuReset was rejected");

  // A reset ECU is back in the default session; a seed of 0000 means the
  // previous unlock survived.
  auto probe = c.exchange(sid::kSecurityAccess, std::vector<Byte>{seed_sub});
  const auto& body = probe.response.body;
  obs.unlock_persisted = probe.response.positive && body.size() == 3 && body[1] == 0 && body[2] == 0;
  obs.evidence_refs = {reset.response_index, probe.response_index};
  return obs;
}

// Malformed ISO-TP traffic: every generated frame violates the framing rules
// in some way, so none of them is a well-formed UDS request.
inline bus::CanFrame malformed_frame(CounterRng& rng, const vehicle::Addressing& addr) {
  bus::CanFrame f{addr.tester_tx, addr.extended, {}};
  auto random_tail = [&](std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f.data.push_back(rng.byte());
  };
  switch (rng.below(6)) {
    case 0:  // reserved PCI types 0x4..0xF
      f.data.push_back(static_cast<Byte>(((4 + rng.below(12)) << 4) | rng.below(16)));
      random_tail(rng.below(8));
      break;
    case 1:  // single frame with length 0 or > 7
      f.data.push_back(rng.below(2) == 0 ? Byte{0x00} : static_cast<Byte>(8 + rng.below(8)));
      random_tail(7);
      break;
    case 2:  // first frame announcing fewer than 8 bytes
      f.data = {0x10, static_cast<Byte>(rng.below(8))};
      random_tail(6);
      break;
    case 3:  // consecutive frame with no transfer in progress, or out of order
      f.data.push_back(static_cast<Byte>(0x20 | rng.below(16)));
      random_tail(7);
      break;
    case 4:  // stray flow control
      f.data = {static_cast<Byte>(0x30 | rng.below(16)), rng.byte(), rng.byte()};
      random_tail(5);
      break;
    default:  // single frame claiming more bytes than the frame carries
      f.data.push_back(static_cast<Byte>(2 + rng.below(6)));
      random_tail(rng.below((f.data[0] & 0x0F)));
      break;
  }
  return f;
}

inline FuzzObs run_fuzz_isotp(DiagClient& c, const sut::BoundTest& bt, CounterRng rng) {
  const auto iterations = static_cast<unsigned>(detail::int_param(bt.test_case.params, "iterations", 0, 1u << 20));
  if (!bt.channel) throw std::invalid_argument("FuzzIsoTp needs a bound CAN channel");
  FuzzObs obs;
  auto alive = [&]() {
    try {
      auto ex = c.exchange(sid::kTesterPresent, std::vector<Byte>{0x00});
      if (!ex.response.positive) obs.evidence_refs.push_back(ex.response_index);
      return ex.response.positive;
    } catch (const uds::UdsError& e) {
      if (e.code() != uds::UdsErrc::Timeout) throw;
      obs.evidence_refs.push_back(c.evidence().size() - 1);
      return false;
    }
  };
  constexpr unsigned kCheckEvery = 32;
  for (unsigned i = 0; i < iterations && obs.alive; ++i) {
    c.inject(malformed_frame(rng, *bt.channel));
    ++obs.iterations;
    if ((i + 1) % kCheckEvery == 0) obs.alive = alive();
  }
  if (obs.alive) obs.alive = alive();
  return obs;
}

inline Observations run_block(const sut::BoundTest& bt, DiagClient& client, CounterRng rng) {
  using blocks::VerdictRule;
  switch (bt.block->verdict_rule) {
    case VerdictRule::hidden_service_found: return run_service_discovery(client, bt);
    case VerdictRule::programming_without_security: return run_session_scan(client, bt);
    case VerdictRule::weak_key_unlocks: return run_security_access_probe(client, bt);
    case VerdictRule::no_lockout: return run_rate_limit_check(client, bt);
    case VerdictRule::gated_did_readable: return run_read_did_sweep(client, bt);
    case VerdictRule::unlock_persists_after_reset: return run_reset_resilience(client, bt);
    case VerdictRule::unresponsive_after_fuzz: return run_fuzz_isotp(client, bt, rng.fork(2));
  }
  throw std::invalid_argument("no executable for block " + bt.block->name);
}

}  // namespace autosec::exec
