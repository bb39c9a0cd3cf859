#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "autosec/error.hpp"

// Test sources: threat libraries (black box) and requirement sets (white box),
// both as JSON-lines documents with one record per line.
namespace autosec::sources {

using nlohmann::json;

enum class AttackClass { diagnostic_abuse, injection, information_disclosure, denial_of_service, weak_crypto };
enum class CheckClass { session_gating, key_strength, rate_limiting, data_protection, reset_recovery };
enum class Severity { low, medium, high, critical };
enum class BoxKind { black, white };

inline constexpr std::array<std::string_view, 5> kAttackClassNames = {
    "diagnostic-abuse", "injection", "information-disclosure", "denial-of-service", "weak-crypto"};
inline constexpr std::array<std::string_view, 5> kCheckClassNames = {
    "session-gating", "key-strength", "rate-limiting", "data-protection", "reset-recovery"};
inline constexpr std::array<std::string_view, 4> kSeverityNames = {"low", "medium", "high", "critical"};

inline constexpr std::string_view to_string(AttackClass c) noexcept { return kAttackClassNames[static_cast<std::size_t>(c)]; }
inline constexpr std::string_view to_string(CheckClass c) noexcept { return kCheckClassNames[static_cast<std::size_t>(c)]; }
inline constexpr std::string_view to_string(Severity s) noexcept { return kSeverityNames[static_cast<std::size_t>(s)]; }
inline constexpr std::string_view to_string(BoxKind b) noexcept { return b == BoxKind::black ? "black" : "white"; }

template <typename Enum, std::size_t N>
std::optional<Enum> enum_from_name(const std::array<std::string_view, N>& names, std::string_view s) noexcept {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

inline std::optional<AttackClass> attack_class_from_string(std::string_view s) noexcept {
  return enum_from_name<AttackClass>(kAttackClassNames, s);
}
inline std::optional<CheckClass> check_class_from_string(std::string_view s) noexcept {
  return enum_from_name<CheckClass>(kCheckClassNames, s);
}
inline std::optional<Severity> severity_from_string(std::string_view s) noexcept {
  return enum_from_name<Severity>(kSeverityNames, s);
}
inline std::optional<BoxKind> box_from_string(std::string_view s) noexcept {
  if (s == "black") return BoxKind::black;
  if (s == "white") return BoxKind::white;
  return std::nullopt;
}

struct ThreatRecord {
  std::string id;
  std::string title;
  std::set<std::string> component_tags;
  AttackClass attack_class = AttackClass::diagnostic_abuse;
  Severity severity = Severity::medium;
  std::vector<std::string> references;
  bool operator==(const ThreatRecord&) const = default;
};

struct RequirementRecord {
  std::string id;
  std::string text;
  std::set<std::string> component_tags;
  CheckClass check_class = CheckClass::session_gating;
  bool operator==(const RequirementRecord&) const = default;
};

// Threats are black-box sources, requirements white-box ones.
inline constexpr BoxKind classify(const ThreatRecord&) noexcept { return BoxKind::black; }
inline constexpr BoxKind classify(const RequirementRecord&) noexcept { return BoxKind::white; }

enum class SourceErrc { ParseError, DuplicateId, UnknownAttackClass, UnknownCheckClass };

inline constexpr std::string_view to_string(SourceErrc c) noexcept {
  switch (c) {
    case SourceErrc::ParseError: return "ParseError";
    case SourceErrc::DuplicateId: return "DuplicateId";
    case SourceErrc::UnknownAttackClass: return "UnknownAttackClass";
    case SourceErrc::UnknownCheckClass: return "UnknownCheckClass";
  }
  return "?";
}

// Every source error names the 1-based line and the offending field.
class SourceError : public ErrorOf<SourceErrc> {
 public:
  SourceError(SourceErrc code, std::size_t line, std::string field, std::string detail)
      : ErrorOf(code, "line " + std::to_string(line) + ": " + std::string(to_string(code)) + " in field '" + field +
                          "': " + detail),
        line_(line),
        field_(std::move(field)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

template <typename Record>
struct ParseOutcome {
  std::vector<Record> records;
  std::vector<SourceError> errors;     // all of them, in line order
  std::vector<std::string> warnings;   // e.g. EmptyLibrary
};

namespace detail {

struct LineReader {
  std::size_t line;
  const json& obj;

  [[noreturn]] void fail(SourceErrc code, const std::string& field, const std::string& why) const {
    throw SourceError(code, line, field, why);
  }

  void expect_exact_keys(std::initializer_list<std::string_view> keys) const {
    for (auto k : keys) {
      if (!obj.contains(std::string(k))) fail(SourceErrc::ParseError, std::string(k), "missing");
    }
    for (const auto& [k, _] : obj.items()) {
      bool known = false;
      for (auto want : keys) known = known || want == k;
      if (!known) fail(SourceErrc::ParseError, k, "unknown field");
    }
  }

  std::string str(const char* field) const {
    const auto& v = obj[field];
    if (!v.is_string()) fail(SourceErrc::ParseError, field, "expected a string");
    return v.get<std::string>();
  }

  std::string non_empty_str(const char* field) const {
    auto s = str(field);
    if (s.empty()) fail(SourceErrc::ParseError, field, "must not be empty");
    return s;
  }

  std::vector<std::string> str_list(const char* field) const {
    const auto& v = obj[field];
    if (!v.is_array()) fail(SourceErrc::ParseError, field, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) fail(SourceErrc::ParseError, field, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::set<std::string> tags(const char* field) const {
    auto list = str_list(field);
    return {list.begin(), list.end()};
  }
};

inline ThreatRecord read_threat(const LineReader& r) {
  r.expect_exact_keys({"id", "title", "component_tags", "attack_class", "severity", "references"});
  ThreatRecord t;
  t.id = r.non_empty_str("id");
  t.title = r.str("title");
  t.component_tags = r.tags("component_tags");
  auto cls = r.str("attack_class");
  auto ac = attack_class_from_string(cls);
  if (!ac) r.fail(SourceErrc::UnknownAttackClass, "attack_class", "unknown attack class '" + cls + "'");
  t.attack_class = *ac;
  auto sev = r.str("severity");
  auto sv = severity_from_string(sev);
  if (!sv) r.fail(SourceErrc::ParseError, "severity", "unknown severity '" + sev + "'");
  t.severity = *sv;
  t.references = r.str_list("references");
  return t;
}

inline RequirementRecord read_requirement(const LineReader& r) {
  r.expect_exact_keys({"id", "text", "component_tags", "check_class"});
  RequirementRecord q;
  q.id = r.non_empty_str("id");
  q.text = r.str("text");
  q.component_tags = r.tags("component_tags");
  auto cls = r.str("check_class");
  auto cc = check_class_from_string(cls);
  if (!cc) r.fail(SourceErrc::UnknownCheckClass, "check_class", "unknown check class '" + cls + "'");
  q.check_class = *cc;
  return q;
}

template <typename Record, typename Reader>
ParseOutcome<Record> parse_lines(std::string_view document, Reader read, std::string_view empty_warning) {
  ParseOutcome<Record> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= document.size()) {
    auto nl = document.find('\n', pos);
    auto line = document.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? document.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        throw SourceError(SourceErrc::ParseError, line_no, "<record>", "malformed JSON at column " + std::to_string(e.byte));
      }
      if (!obj.is_object()) throw SourceError(SourceErrc::ParseError, line_no, "<record>", "expected a JSON object");
      Record rec = read(LineReader{line_no, obj});
      if (!seen.insert(rec.id).second) {
        throw SourceError(SourceErrc::DuplicateId, line_no, "id", "duplicate id '" + rec.id + "'");
      }
      out.records.push_back(std::move(rec));
    } catch (const SourceError& e) {
      out.errors.push_back(e);
    }
  }
  if (out.records.empty() && out.errors.empty()) out.warnings.emplace_back(empty_warning);
  return out;
}

}  // namespace detail

// Collecting variants: report every bad line instead of stopping at the first.
inline ParseOutcome<ThreatRecord> parse_threats_collect(std::string_view document) {
  return detail::parse_lines<ThreatRecord>(document, detail::read_threat, "EmptyLibrary: threat library has no records");
}

inline ParseOutcome<RequirementRecord> parse_requirements_collect(std::string_view document) {
  return detail::parse_lines<RequirementRecord>(document, detail::read_requirement,
                                                "EmptyLibrary: requirement set has no records");
}

// Throwing variants: first error wins.
inline std::vector<ThreatRecord> parse_threats(std::string_view document, std::vector<std::string>* warnings = nullptr) {
  auto out = parse_threats_collect(document);
  if (!out.errors.empty()) throw out.errors.front();
  if (warnings) *warnings = std::move(out.warnings);
  return std::move(out.records);
}

inline std::vector<RequirementRecord> parse_requirements(std::string_view document,
                                                         std::vector<std::string>* warnings = nullptr) {
  auto out = parse_requirements_collect(document);
  if (!out.errors.empty()) throw out.errors.front();
  if (warnings) *warnings = std::move(out.warnings);
  return std::move(out.records);
}

inline json to_json(const ThreatRecord& t) {
  return {{"id", t.id},
          {"title", t.title},
          {"component_tags", t.component_tags},
          {"attack_class", std::string(to_string(t.attack_class))},
          {"severity", std::string(to_string(t.severity))},
          {"references", t.references}};
}

inline json to_json(const RequirementRecord& r) {
  return {{"id", r.id},
          {"text", r.text},
          {"component_tags", r.component_tags},
          {"check_class", std::string(to_string(r.check_class))}};
}

template <typename Record>
std::string serialize_lines(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

inline std::string serialize_threats(const std::vector<ThreatRecord>& v) { return serialize_lines(v); }
inline std::string serialize_requirements(const std::vector<RequirementRecord>& v) { return serialize_lines(v); }

}  // namespace autosec::sources
