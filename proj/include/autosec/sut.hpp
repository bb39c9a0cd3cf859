#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "autosec/capability.hpp"
#include "autosec/uds.hpp"
#include "autosec/vehicle.hpp"

// SUT profile documents: the standardized description of a system under test.
//
//   {
//     "name": "...",
//     "components": [{"name": "...", "component_tags": [...], "ecu": {...}?}],
//     "transports": [{"kind": "obd2_can", "params": {"tester_tx": "0x7E0", "tester_rx": "0x7E8"}}],
//     "declared_capabilities": ["DIAG_REQUEST", ...]
//   }
//
// Unknown fields are rejected at every level. The optional "ecu" object embeds
// the virtual ECU model for the built-in SUT (see docs/profile-format.md).
namespace autosec::sut {

using nlohmann::json;

enum class TransportKind { obd2_can, bluetooth, wlan, cellular };

inline constexpr std::string_view to_string(TransportKind k) noexcept {
  switch (k) {
    case TransportKind::obd2_can: return "obd2_can";
    case TransportKind::bluetooth: return "bluetooth";
    case TransportKind::wlan: return "wlan";
    case TransportKind::cellular: return "cellular";
  }
  return "?";
}

inline std::optional<TransportKind> transport_kind_from_string(std::string_view s) noexcept {
  if (s == "obd2_can") return TransportKind::obd2_can;
  if (s == "bluetooth") return TransportKind::bluetooth;
  if (s == "wlan") return TransportKind::wlan;
  if (s == "cellular") return TransportKind::cellular;
  return std::nullopt;
}

inline constexpr bool is_executable(TransportKind k) noexcept { return k == TransportKind::obd2_can; }

struct Transport {
  TransportKind kind = TransportKind::obd2_can;
  std::map<std::string, std::string> params;

  bool executable() const noexcept { return is_executable(kind); }

  // Tester CAN ids for obd2_can; validated at load time.
  vehicle::Addressing addressing() const {
    vehicle::Addressing a;
    a.extended = params.contains("extended") && params.at("extended") == "true";
    a.tester_tx = parse_hex_literal(params.at("tester_tx")).value();
    a.tester_rx = parse_hex_literal(params.at("tester_rx")).value();
    return a;
  }
  bool operator==(const Transport&) const = default;
};

struct Component {
  std::string name;
  std::set<std::string> component_tags;
  std::optional<uds::EcuProfile> ecu;
  bool operator==(const Component&) const = default;
};

struct SutProfile {
  std::string name;
  std::vector<Component> components;
  std::vector<Transport> transports;
  CapabilitySet declared_capabilities;

  const Transport* executable_transport() const {
    for (const auto& t : transports) {
      if (t.executable()) return &t;
    }
    return nullptr;
  }

  const uds::EcuProfile* virtual_ecu() const {
    for (const auto& c : components) {
      if (c.ecu) return &*c.ecu;
    }
    return nullptr;
  }

  std::set<std::string> all_tags() const {
    std::set<std::string> tags;
    for (const auto& c : components) tags.insert(c.component_tags.begin(), c.component_tags.end());
    return tags;
  }

  bool operator==(const SutProfile&) const = default;
};

enum class ProfileErrc { ParseError, UnknownCapability, UnknownTransportKind };

class ProfileError : public ErrorOf<ProfileErrc> {
 public:
  ProfileError(ProfileErrc code, std::string field, std::string message, std::optional<std::size_t> line = std::nullopt)
      : ErrorOf(code, (line ? "line " + std::to_string(*line) + ": " : std::string()) +
                          (field.empty() ? "" : "field '" + field + "': ") + message),
        field_(std::move(field)),
        line_(line) {}
  const std::string& field() const noexcept { return field_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  std::string field_;
  std::optional<std::size_t> line_;
};

inline CapabilitySet capabilities(const SutProfile& profile) {
  CapabilitySet caps = profile.declared_capabilities;
  if (profile.executable_transport()) caps.insert(Capability::BUS_ACCESS);
  return caps;
}

namespace detail {

[[noreturn]] inline void bad(const std::string& field, const std::string& message) {
  throw ProfileError(ProfileErrc::ParseError, field, message);
}

inline void expect_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> required,
                        std::initializer_list<std::string_view> optional = {}) {
  if (!obj.is_object()) bad(where, "expected an object");
  for (auto key : required) {
    if (!obj.contains(std::string(key))) bad(where.empty() ? std::string(key) : where + "." + std::string(key), "missing");
  }
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto k : required) known = known || k == key;
    for (auto k : optional) known = known || k == key;
    if (!known) bad(where.empty() ? key : where + "." + key, "unknown field");
  }
}

inline std::string get_string(const json& v, const std::string& field) {
  if (!v.is_string()) bad(field, "expected a string");
  return v.get<std::string>();
}

inline std::uint32_t get_number(const json& v, const std::string& field, std::uint32_t max) {
  std::optional<std::uint32_t> n;
  if (v.is_string()) n = parse_hex_literal(v.get<std::string>());
  else if (v.is_number_unsigned()) n = v.get<std::uint64_t>() <= max ? std::optional(v.get<std::uint32_t>()) : std::nullopt;
  if (!n || *n > max) bad(field, "expected an integer or 0x-literal <= " + hex_literal(max));
  return *n;
}

inline std::uint32_t key_number(const std::string& key, const std::string& field, std::uint32_t max) {
  if (auto n = parse_hex_literal(key); n && *n <= max) return *n;
  if (!key.empty() && key.find_first_not_of("0123456789") == std::string::npos && key.size() < 9) {
    auto n = static_cast<std::uint32_t>(std::stoul(key));
    if (n <= max) return n;
  }
  bad(field, "key '" + key + "' is not an integer <= " + hex_literal(max));
}

inline std::set<std::string> get_tags(const json& v, const std::string& field) {
  if (!v.is_array()) bad(field, "expected an array of strings");
  std::set<std::string> tags;
  for (std::size_t i = 0; i < v.size(); ++i) tags.insert(get_string(v[i], field + "[" + std::to_string(i) + "]"));
  return tags;
}

inline uds::EcuProfile parse_ecu(const json& j, const std::string& where, const Component& owner) {
  expect_keys(j, where, {"sessions", "services", "dids", "security_levels", "vulnerability_flags"});
  uds::EcuProfile ecu;
  ecu.name = owner.name;
  ecu.component_tags = owner.component_tags;
  ecu.sessions.clear();
  if (!j["sessions"].is_array()) bad(where + ".sessions", "expected an array");
  for (const auto& s : j["sessions"]) ecu.sessions.insert(static_cast<Byte>(get_number(s, where + ".sessions", 0xFF)));

  if (!j["services"].is_object()) bad(where + ".services", "expected an object");
  for (const auto& [key, list] : j["services"].items()) {
    const std::string f = where + ".services." + key;
    auto session = static_cast<Byte>(key_number(key, f, 0xFF));
    if (!list.is_array()) bad(f, "expected an array");
    auto& set = ecu.services[session];
    for (const auto& s : list) set.insert(static_cast<Byte>(get_number(s, f, 0xFF)));
  }

  if (!j["dids"].is_object()) bad(where + ".dids", "expected an object");
  for (const auto& [key, entry] : j["dids"].items()) {
    const std::string f = where + ".dids." + key;
    auto did = static_cast<std::uint16_t>(key_number(key, f, 0xFFFF));
    expect_keys(entry, f, {"value", "level"});
    auto value = from_hex(get_string(entry["value"], f + ".value"));
    if (!value) bad(f + ".value", "expected a hex string");
    uds::DidEntry d{*value, std::nullopt};
    if (!(entry["level"].is_string() && entry["level"] == "none")) {
      d.required_level = static_cast<std::uint8_t>(get_number(entry["level"], f + ".level", 0x3F));
    }
    ecu.dids.emplace(did, std::move(d));
  }

  if (!j["security_levels"].is_object()) bad(where + ".security_levels", "expected an object");
  for (const auto& [key, alg] : j["security_levels"].items()) {
    const std::string f = where + ".security_levels." + key;
    auto level = static_cast<std::uint8_t>(key_number(key, f, 0x3F));
    auto a = uds::key_algorithm_from_string(get_string(alg, f));
    if (!a) bad(f, "unknown key algorithm '" + alg.get<std::string>() + "'");
    ecu.security_levels.emplace(level, *a);
  }

  if (!j["vulnerability_flags"].is_array()) bad(where + ".vulnerability_flags", "expected an array");
  for (const auto& v : j["vulnerability_flags"]) {
    auto flag = uds::vulnerability_from_string(get_string(v, where + ".vulnerability_flags"));
    if (!flag) bad(where + ".vulnerability_flags", "unknown flag '" + v.get<std::string>() + "'");
    ecu.vulnerability_flags.insert(*flag);
  }

  try {
    ecu.validate();
  } catch (const uds::UdsError& e) {
    bad(where, e.what());
  }
  return ecu;
}

inline json ecu_to_json(const uds::EcuProfile& ecu) {
  json sessions = json::array();
  for (Byte s : ecu.sessions) sessions.push_back(hex_literal(s));
  json services = json::object();
  for (const auto& [s, set] : ecu.services) {
    json list = json::array();
    for (Byte sid : set) list.push_back(hex_literal(sid));
    services[hex_literal(s)] = std::move(list);
  }
  json dids = json::object();
  for (const auto& [did, entry] : ecu.dids) {
    dids[hex_literal(did, 4)] = {
        {"value", to_hex(entry.value)},
        {"level", entry.required_level ? json(*entry.required_level) : json("none")},
    };
  }
  json levels = json::object();
  for (const auto& [level, alg] : ecu.security_levels) levels[std::to_string(level)] = std::string(uds::to_string(alg));
  json flags = json::array();
  for (auto f : ecu.vulnerability_flags) flags.push_back(std::string(uds::to_string(f)));
  return {{"sessions", sessions}, {"services", services}, {"dids", dids},
          {"security_levels", levels}, {"vulnerability_flags", flags}};
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace detail

inline CapabilitySet parse_capabilities(const json& list, const std::string& field) {
  if (!list.is_array()) detail::bad(field, "expected an array");
  CapabilitySet caps;
  for (const auto& v : list) {
    auto name = detail::get_string(v, field);
    auto c = capability_from_string(name);
    if (!c) throw ProfileError(ProfileErrc::UnknownCapability, field, "unknown capability '" + name + "'");
    caps.insert(*c);
  }
  return caps;
}

inline json capabilities_to_json(CapabilitySet caps) {
  json out = json::array();
  for (auto c : caps.members()) out.push_back(std::string(to_string(c)));
  return out;
}

inline SutProfile profile_from_json(const json& doc) {
  using namespace detail;
  expect_keys(doc, "", {"name", "components", "transports", "declared_capabilities"});
  SutProfile p;
  p.name = get_string(doc["name"], "name");

  if (!doc["components"].is_array()) bad("components", "expected an array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc["components"].size(); ++i) {
    const auto& cj = doc["components"][i];
    const std::string f = "components[" + std::to_string(i) + "]";
    expect_keys(cj, f, {"name", "component_tags"}, {"ecu"});
    Component c;
    c.name = get_string(cj["name"], f + ".name");
    if (!names.insert(c.name).second) bad(f + ".name", "duplicate component name '" + c.name + "'");
    c.component_tags = get_tags(cj["component_tags"], f + ".component_tags");
    if (cj.contains("ecu")) c.ecu = parse_ecu(cj["ecu"], f + ".ecu", c);
    p.components.push_back(std::move(c));
  }

  if (!doc["transports"].is_array() || doc["transports"].empty()) bad("transports", "expected a non-empty array");
  for (std::size_t i = 0; i < doc["transports"].size(); ++i) {
    const auto& tj = doc["transports"][i];
    const std::string f = "transports[" + std::to_string(i) + "]";
    expect_keys(tj, f, {"kind", "params"});
    auto kind_name = get_string(tj["kind"], f + ".kind");
    auto kind = transport_kind_from_string(kind_name);
    if (!kind) throw ProfileError(ProfileErrc::UnknownTransportKind, f + ".kind", "unknown transport kind '" + kind_name + "'");
    Transport t{*kind, {}};
    if (!tj["params"].is_object()) bad(f + ".params", "expected an object");
    for (const auto& [k, v] : tj["params"].items()) t.params[k] = get_string(v, f + ".params." + k);
    if (t.kind == TransportKind::obd2_can) {
      const bool ext = t.params.contains("extended") && t.params["extended"] == "true";
      if (t.params.contains("extended") && t.params["extended"] != "true" && t.params["extended"] != "false") {
        bad(f + ".params.extended", "expected \"true\" or \"false\"");
      }
      for (const char* key : {"tester_tx", "tester_rx"}) {
        if (!t.params.contains(key)) bad(f + ".params." + key, "missing");
        auto id = parse_hex_literal(t.params[key]);
        if (!id || *id > (ext ? bus::kMaxExtendedId : bus::kMaxStandardId)) {
          bad(f + ".params." + key, "expected a CAN id literal such as 0x7E0");
        }
      }
    }
    p.transports.push_back(std::move(t));
  }

  p.declared_capabilities = parse_capabilities(doc["declared_capabilities"], "declared_capabilities");
  if (p.declared_capabilities.empty()) bad("declared_capabilities", "must not be empty");
  return p;
}

inline SutProfile load_profile(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ProfileError(ProfileErrc::ParseError, "", "malformed JSON", detail::line_of_offset(document, e.byte));
  }
  return profile_from_json(doc);
}

inline json profile_to_json(const SutProfile& p) {
  json components = json::array();
  for (const auto& c : p.components) {
    json cj = {{"name", c.name}, {"component_tags", c.component_tags}};
    if (c.ecu) cj["ecu"] = detail::ecu_to_json(*c.ecu);
    components.push_back(std::move(cj));
  }
  json transports = json::array();
  for (const auto& t : p.transports) {
    transports.push_back({{"kind", std::string(to_string(t.kind))}, {"params", t.params}});
  }
  return {{"name", p.name},
          {"components", components},
          {"transports", transports},
          {"declared_capabilities", capabilities_to_json(p.declared_capabilities)}};
}

// Canonical form: sorted keys, two-space indent, trailing newline.
inline std::string serialize_profile(const SutProfile& p) { return profile_to_json(p).dump(2) + "\n"; }

}  // namespace autosec::sut
