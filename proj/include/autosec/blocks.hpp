#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "autosec/bytes.hpp"
#include "autosec/capability.hpp"
#include "autosec/sources.hpp"
#include "autosec/sut.hpp"

// Portable test building blocks and derivation of test cases from sources.
// A test case names a block and concrete parameters; it carries nothing about
// the transport. Binding to a concrete SUT happens in binding.hpp.
namespace autosec::blocks {

using nlohmann::json;
using sources::BoxKind;

namespace name {
inline constexpr std::string_view kServiceDiscovery = "ServiceDiscovery";
inline constexpr std::string_view kSessionScan = "SessionScan";
inline constexpr std::string_view kSecurityAccessProbe = "SecurityAccessProbe";
inline constexpr std::string_view kRateLimitCheck = "RateLimitCheck";
inline constexpr std::string_view kReadDidSweep = "ReadDidSweep";
inline constexpr std::string_view kResetResilience = "ResetResilience";
inline constexpr std::string_view kFuzzIsoTp = "FuzzIsoTp";
}  // namespace name

// Fail condition of each block; a fail means the weakness was demonstrated.
enum class VerdictRule {
  hidden_service_found,
  programming_without_security,
  weak_key_unlocks,
  no_lockout,
  gated_did_readable,
  unlock_persists_after_reset,
  unresponsive_after_fuzz,
};

enum class ParamType { integer, integer_list, string_list };

struct ParamSpec {
  std::string name;
  ParamType type;
  json default_value;
};

struct BlockSpec {
  std::string name;
  std::vector<ParamSpec> params_schema;
  CapabilitySet required_capabilities;
  CapabilitySet preconditions;
  CapabilitySet effects;
  VerdictRule verdict_rule;
  std::string description;

  json default_params() const {
    json p = json::object();
    for (const auto& s : params_schema) p[s.name] = s.default_value;
    return p;
  }
};

inline const std::vector<BlockSpec>& catalog() {
  using C = Capability;
  static const std::vector<BlockSpec> blocks = {
      {std::string(name::kServiceDiscovery),
       {{"first_sid", ParamType::integer, 0x00}, {"last_sid", ParamType::integer, 0xFF}},
       {C::DIAG_REQUEST},
       {C::DIAG_REQUEST},
       {C::SESSION_DEFAULT, C::SESSION_EXTENDED, C::DID_READ, C::ECU_RESET},
       VerdictRule::hidden_service_found,
       "Probe every service id in the default and extended sessions; fails if an undocumented service answers."},
      {std::string(name::kSessionScan),
       {{"sessions", ParamType::integer_list, json::array({0x01, 0x02, 0x03})}},
       {C::DIAG_REQUEST},
       {C::SECURITY_L1},
       {C::SESSION_PROGRAMMING},
       VerdictRule::programming_without_security,
       "Request each diagnostic session while locked; fails if the programming session opens without security access."},
      {std::string(name::kSecurityAccessProbe),
       {{"level", ParamType::integer, 1}, {"algorithms", ParamType::string_list, json::array({"XOR_FF", "ADD_9"})}},
       {C::DIAG_REQUEST},
       {C::SESSION_EXTENDED},
       {C::SECURITY_L1},
       VerdictRule::weak_key_unlocks,
       "Request a seed and answer with keys from known weak algorithms; fails if any of them unlocks."},
      {std::string(name::kRateLimitCheck),
       {{"level", ParamType::integer, 1}, {"wrong_keys", ParamType::integer, 3}},
       {C::DIAG_REQUEST},
       {C::SESSION_EXTENDED},
       {},
       VerdictRule::no_lockout,
       "Send consecutive wrong keys; fails if the ECU never answers exceededNumberOfAttempts (0x36)."},
      {std::string(name::kReadDidSweep),
       {{"did_first", ParamType::integer, 0xF100}, {"did_last", ParamType::integer, 0xF1FF}},
       {C::DIAG_REQUEST},
       {C::DID_READ},
       {},
       VerdictRule::gated_did_readable,
       "Read every data identifier in range while locked; fails if a security-gated identifier is served."},
      {std::string(name::kResetResilience),
       {{"level", ParamType::integer, 1}},
       {C::DIAG_REQUEST},
       {C::ECU_RESET},
       {C::SESSION_DEFAULT},
       VerdictRule::unlock_persists_after_reset,
       "Try to unlock, reset the ECU, then check it is back to a locked default state; fails if an unlock survives."},
      {std::string(name::kFuzzIsoTp),
       {{"iterations", ParamType::integer, 256}},
       {C::BUS_ACCESS},
       {C::BUS_ACCESS},
       {},
       VerdictRule::unresponsive_after_fuzz,
       "Inject seeded malformed ISO-TP frames; fails if the ECU stops answering TesterPresent."},
  };
  return blocks;
}

inline const BlockSpec* find_block(std::string_view block_name) {
  for (const auto& b : catalog()) {
    if (b.name == block_name) return &b;
  }
  return nullptr;
}

enum class SourceKind { threat, requirement };

inline constexpr std::string_view to_string(SourceKind k) noexcept { return k == SourceKind::threat ? "threat" : "requirement"; }

struct SourceTrace {
  SourceKind kind = SourceKind::threat;
  std::string id;
  bool operator==(const SourceTrace&) const = default;
};

struct TestCase {
  std::string id;
  std::string block;
  json params;
  SourceTrace source_trace;
  BoxKind box = BoxKind::black;
  bool operator==(const TestCase&) const = default;
};

// "<source id>/<block>/<fnv1a32 of canonical params>"
inline std::string test_case_id(std::string_view source_id, std::string_view block, const json& params) {
  const auto digest = fnv1a32(params.dump());
  std::string hex = hex_literal(digest, 8).substr(2);
  std::transform(hex.begin(), hex.end(), hex.begin(), [](char c) { return static_cast<char>(std::tolower(c)); });
  return std::string(source_id) + "/" + std::string(block) + "/" + hex;
}

inline bool params_match_schema(const BlockSpec& spec, const json& params) {
  if (!params.is_object() || params.size() != spec.params_schema.size()) return false;
  for (const auto& s : spec.params_schema) {
    if (!params.contains(s.name)) return false;
    const auto& v = params[s.name];
    switch (s.type) {
      case ParamType::integer:
        if (!v.is_number_integer()) return false;
        break;
      case ParamType::integer_list:
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_integer(); })) return false;
        break;
      case ParamType::string_list:
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); })) return false;
        break;
    }
  }
  return true;
}

enum class MappingErrc { ParseError, UnknownBlockInMapping };
using MappingError = ErrorOf<MappingErrc>;

struct DerivationMapping {
  std::map<sources::AttackClass, std::vector<std::string>> attack_class;
  std::map<sources::CheckClass, std::vector<std::string>> check_class;

  void validate() const {
    auto check = [](const std::vector<std::string>& names, std::string_view cls) {
      for (const auto& n : names) {
        if (!find_block(n)) {
          throw MappingError(MappingErrc::UnknownBlockInMapping,
                             "mapping for '" + std::string(cls) + "' names unknown block '" + n + "'");
        }
      }
    };
    for (std::size_t i = 0; i < sources::kAttackClassNames.size(); ++i) {
      auto it = attack_class.find(static_cast<sources::AttackClass>(i));
      if (it == attack_class.end()) {
        throw MappingError(MappingErrc::ParseError, "mapping lacks attack class '" + std::string(sources::kAttackClassNames[i]) + "'");
      }
      check(it->second, sources::kAttackClassNames[i]);
    }
    for (std::size_t i = 0; i < sources::kCheckClassNames.size(); ++i) {
      auto it = check_class.find(static_cast<sources::CheckClass>(i));
      if (it == check_class.end()) {
        throw MappingError(MappingErrc::ParseError, "mapping lacks check class '" + std::string(sources::kCheckClassNames[i]) + "'");
      }
      check(it->second, sources::kCheckClassNames[i]);
    }
  }

  bool operator==(const DerivationMapping&) const = default;
};

inline DerivationMapping default_mapping() {
  using sources::AttackClass;
  using sources::CheckClass;
  const auto s = [](std::string_view v) { return std::string(v); };
  DerivationMapping m;
  m.attack_class[AttackClass::diagnostic_abuse] = {s(name::kSessionScan), s(name::kSecurityAccessProbe)};
  m.attack_class[AttackClass::injection] = {s(name::kFuzzIsoTp)};
  m.attack_class[AttackClass::information_disclosure] = {s(name::kReadDidSweep), s(name::kServiceDiscovery)};
  m.attack_class[AttackClass::denial_of_service] = {s(name::kResetResilience), s(name::kFuzzIsoTp)};
  m.attack_class[AttackClass::weak_crypto] = {s(name::kSecurityAccessProbe), s(name::kRateLimitCheck)};
  m.check_class[CheckClass::session_gating] = {s(name::kSessionScan)};
  m.check_class[CheckClass::key_strength] = {s(name::kSecurityAccessProbe)};
  m.check_class[CheckClass::rate_limiting] = {s(name::kRateLimitCheck)};
  m.check_class[CheckClass::data_protection] = {s(name::kReadDidSweep)};
  m.check_class[CheckClass::reset_recovery] = {s(name::kResetResilience)};
  return m;
}

// Override document: {"attack_class": {class: [blocks]}, "check_class": {class: [blocks]}}.
// Both sections are optional; classes not listed keep the built-in entry.
inline DerivationMapping load_mapping(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw MappingError(MappingErrc::ParseError, std::string("malformed mapping JSON: ") + e.what());
  }
  if (!doc.is_object()) throw MappingError(MappingErrc::ParseError, "mapping must be a JSON object");
  DerivationMapping m = default_mapping();
  auto read_list = [](const json& v, const std::string& key) {
    if (!v.is_array()) throw MappingError(MappingErrc::ParseError, "mapping entry '" + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw MappingError(MappingErrc::ParseError, "mapping entry '" + key + "' must list block names");
      out.push_back(e.get<std::string>());
    }
    return out;
  };
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object()) throw MappingError(MappingErrc::ParseError, "mapping section '" + section + "' must be an object");
    if (section == "attack_class") {
      for (const auto& [cls, list] : body.items()) {
        auto c = sources::attack_class_from_string(cls);
        if (!c) throw MappingError(MappingErrc::ParseError, "unknown attack class '" + cls + "' in mapping");
        m.attack_class[*c] = read_list(list, cls);
      }
    } else if (section == "check_class") {
      for (const auto& [cls, list] : body.items()) {
        auto c = sources::check_class_from_string(cls);
        if (!c) throw MappingError(MappingErrc::ParseError, "unknown check class '" + cls + "' in mapping");
        m.check_class[*c] = read_list(list, cls);
      }
    } else {
      throw MappingError(MappingErrc::ParseError, "unknown mapping section '" + section + "'");
    }
  }
  m.validate();
  return m;
}

struct Derivation {
  std::vector<TestCase> cases;
  std::vector<std::string> uncovered;  // source ids with no component tag overlap
};

namespace detail {

inline bool overlaps(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::any_of(a.begin(), a.end(), [&](const std::string& t) { return b.contains(t); });
}

inline void emit(Derivation& out, const std::vector<std::string>& block_names, SourceTrace trace, BoxKind box) {
  std::set<std::string> done;
  for (const auto& bn : block_names) {
    const BlockSpec* spec = find_block(bn);
    if (!spec) throw MappingError(MappingErrc::UnknownBlockInMapping, "unknown block '" + bn + "' in mapping");
    if (!done.insert(bn).second) continue;
    json params = spec->default_params();
    out.cases.push_back({test_case_id(trace.id, bn, params), bn, std::move(params), trace, box});
  }
}

inline void sort_cases(std::vector<TestCase>& cases) {
  std::stable_sort(cases.begin(), cases.end(), [](const TestCase& a, const TestCase& b) {
    if (a.source_trace.id != b.source_trace.id) return a.source_trace.id < b.source_trace.id;
    return a.block < b.block;
  });
}

}  // namespace detail

inline Derivation derive_from_threats(const std::vector<sources::ThreatRecord>& threats, const sut::SutProfile& profile,
                                      const DerivationMapping& mapping = default_mapping()) {
  Derivation out;
  const auto tags = profile.all_tags();
  for (const auto& t : threats) {
    if (!detail::overlaps(t.component_tags, tags)) {
      out.uncovered.push_back(t.id);
      continue;
    }
    auto it = mapping.attack_class.find(t.attack_class);
    if (it == mapping.attack_class.end()) {
      throw MappingError(MappingErrc::ParseError, "mapping lacks attack class '" + std::string(to_string(t.attack_class)) + "'");
    }
    detail::emit(out, it->second, {SourceKind::threat, t.id}, sources::classify(t));
  }
  detail::sort_cases(out.cases);
  std::sort(out.uncovered.begin(), out.uncovered.end());
  return out;
}

inline Derivation derive_from_requirements(const std::vector<sources::RequirementRecord>& reqs, const sut::SutProfile& profile,
                                           const DerivationMapping& mapping = default_mapping()) {
  Derivation out;
  const auto tags = profile.all_tags();
  for (const auto& r : reqs) {
    if (!detail::overlaps(r.component_tags, tags)) {
      out.uncovered.push_back(r.id);
      continue;
    }
    auto it = mapping.check_class.find(r.check_class);
    if (it == mapping.check_class.end()) {
      throw MappingError(MappingErrc::ParseError, "mapping lacks check class '" + std::string(to_string(r.check_class)) + "'");
    }
    detail::emit(out, it->second, {SourceKind::requirement, r.id}, sources::classify(r));
  }
  detail::sort_cases(out.cases);
  std::sort(out.uncovered.begin(), out.uncovered.end());
  return out;
}

}  // namespace autosec::blocks
