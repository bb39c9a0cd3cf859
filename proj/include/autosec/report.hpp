#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autosec/orchestrator.hpp"
#include "autosec/sources.hpp"
#include "autosec/sut.hpp"

namespace autosec::report {

using exec::Verdict;
using nlohmann::json;
using orchestrator::Campaign;
using orchestrator::TestResult;
using sources::Severity;

inline constexpr Severity kRequirementSeverity = Severity::medium;

struct Finding {
  std::string id;
  Severity severity = kRequirementSeverity;
  blocks::SourceTrace source_trace;
  std::string test_case;
  std::string block;
  std::string component;
  std::vector<std::size_t> evidence_ref;
  std::string detail;
  bool operator==(const Finding&) const = default;
};

struct Counts {
  std::size_t pass = 0, fail = 0, error = 0, skipped = 0;
  std::size_t total() const { return pass + fail + error + skipped; }
  bool operator==(const Counts&) const = default;
};

struct Coverage {
  std::size_t covered = 0;
  std::size_t total = 0;
  double ratio() const { return total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total); }
  bool operator==(const Coverage&) const = default;
};

struct RequirementCompliance {
  std::size_t total = 0;
  std::size_t exercised = 0;
  std::size_t violated = 0;
  bool operator==(const RequirementCompliance&) const = default;
};

struct NodeResult {
  std::string node;
  TestResult result;
  bool operator==(const NodeResult&) const = default;
};

struct Report {
  std::string campaign_id;
  std::uint64_t seed = 0;
  std::string profile;
  Counts counts;
  std::vector<Finding> findings;
  Coverage coverage;
  std::vector<std::string> uncovered;
  RequirementCompliance requirements;
  std::vector<NodeResult> results;
  bool operator==(const Report&) const = default;
};

enum class ReportErrc { InconsistentInputs };
using ReportError = ErrorOf<ReportErrc>;

namespace detail {

inline std::string finding_id(std::size_t n) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "F-%03zu", n);
  return buf;
}

inline bool overlaps(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::any_of(a.begin(), a.end(), [&](const std::string& t) { return b.contains(t); });
}

}  // namespace detail

// `results` must be in node order, as returned by execute(). The profile is
// used to name the affected component; without one the campaign's SUT name
// is used.
inline Report aggregate(const Campaign& campaign, const std::vector<TestResult>& results,
                        const std::vector<sources::ThreatRecord>& threats,
                        const std::vector<sources::RequirementRecord>& requirements,
                        const sut::SutProfile* profile = nullptr) {
  if (results.size() > campaign.nodes.size()) {
    throw ReportError(ReportErrc::InconsistentInputs, "more results than campaign nodes");
  }
  std::map<std::string, const sources::ThreatRecord*> threat_by_id;
  for (const auto& t : threats) threat_by_id[t.id] = &t;
  std::map<std::string, const sources::RequirementRecord*> req_by_id;
  for (const auto& r : requirements) req_by_id[r.id] = &r;

  std::vector<const sut::Component*> components;
  if (profile) {
    for (const auto& c : profile->components) components.push_back(&c);
    std::sort(components.begin(), components.end(), [](auto* a, auto* b) { return a->name < b->name; });
  }

  Report rep;
  rep.campaign_id = campaign.id;
  rep.seed = campaign.seed;
  rep.profile = profile ? profile->name : campaign.sut;

  std::set<std::string> executed_threats, executed_reqs, violated_reqs;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& node = campaign.nodes[i];
    const auto& r = results[i];
    if (r.test_case_id != node.test_case.id) {
      throw ReportError(ReportErrc::InconsistentInputs,
                        "result for unknown test case '" + r.test_case_id + "' at node " + node.id);
    }
    const auto& trace = node.test_case.source_trace;
    const std::set<std::string>* tags = nullptr;
    Severity severity = kRequirementSeverity;
    if (trace.kind == blocks::SourceKind::threat) {
      auto it = threat_by_id.find(trace.id);
      if (it == threat_by_id.end()) {
        throw ReportError(ReportErrc::InconsistentInputs, "test case " + r.test_case_id + " traces to unknown threat " + trace.id);
      }
      tags = &it->second->component_tags;
      severity = it->second->severity;
    } else {
      auto it = req_by_id.find(trace.id);
      if (it == req_by_id.end()) {
        throw ReportError(ReportErrc::InconsistentInputs,
                          "test case " + r.test_case_id + " traces to unknown requirement " + trace.id);
      }
      tags = &it->second->component_tags;
    }

    switch (r.verdict) {
      case Verdict::pass: ++rep.counts.pass; break;
      case Verdict::fail: ++rep.counts.fail; break;
      case Verdict::error: ++rep.counts.error; break;
      case Verdict::skipped: ++rep.counts.skipped; break;
    }
    if (r.verdict != Verdict::skipped) {
      (trace.kind == blocks::SourceKind::threat ? executed_threats : executed_reqs).insert(trace.id);
    }
    if (r.verdict == Verdict::fail) {
      if (r.evidence_refs.empty()) {
        throw ReportError(ReportErrc::InconsistentInputs, "failed test case " + r.test_case_id + " carries no evidence");
      }
      for (auto ref : r.evidence_refs) {
        if (ref >= r.evidence.size()) {
          throw ReportError(ReportErrc::InconsistentInputs, "evidence reference out of range in " + r.test_case_id);
        }
      }
      if (trace.kind == blocks::SourceKind::requirement) violated_reqs.insert(trace.id);
      std::string component = rep.profile;
      for (const auto* c : components) {
        if (detail::overlaps(c->component_tags, *tags)) {
          component = c->name;
          break;
        }
      }
      rep.findings.push_back({detail::finding_id(rep.findings.size() + 1), severity, trace, r.test_case_id,
                              node.test_case.block, component, r.evidence_refs, r.detail});
    }
    rep.results.push_back({node.id, r});
  }

  rep.coverage.total = threats.size();
  for (const auto& t : threats) {
    if (executed_threats.contains(t.id)) ++rep.coverage.covered;
    else rep.uncovered.push_back(t.id);
  }
  std::sort(rep.uncovered.begin(), rep.uncovered.end());
  rep.requirements = {requirements.size(), executed_reqs.size(), violated_reqs.size()};
  return rep;
}

// ---------------------------------------------------------------------------
// Rendering

inline json to_json(const Report& rep) {
  json findings = json::array();
  for (const auto& f : rep.findings) {
    findings.push_back({{"id", f.id},
                        {"severity", std::string(sources::to_string(f.severity))},
                        {"source_trace", {{"kind", std::string(blocks::to_string(f.source_trace.kind))}, {"id", f.source_trace.id}}},
                        {"test_case", f.test_case},
                        {"block", f.block},
                        {"component", f.component},
                        {"evidence_ref", f.evidence_ref},
                        {"detail", f.detail}});
  }
  json results = json::array();
  for (const auto& nr : rep.results) {
    json evidence = json::array();
    for (const auto& e : nr.result.evidence) {
      evidence.push_back({{"tick", e.tick}, {"kind", std::string(uds::to_string(e.kind))}, {"bytes", to_hex(e.bytes)}});
    }
    results.push_back({{"node", nr.node},
                       {"test_case", nr.result.test_case_id},
                       {"verdict", std::string(exec::to_string(nr.result.verdict))},
                       {"started", nr.result.started},
                       {"ended", nr.result.ended},
                       {"detail", nr.result.detail},
                       {"evidence_refs", nr.result.evidence_refs},
                       {"evidence", evidence}});
  }
  return {{"campaign", rep.campaign_id},
          {"seed", rep.seed},
          {"profile", rep.profile},
          {"counts", {{"pass", rep.counts.pass}, {"fail", rep.counts.fail}, {"error", rep.counts.error}, {"skipped", rep.counts.skipped}}},
          {"findings", findings},
          {"coverage", {{"covered", rep.coverage.covered}, {"total", rep.coverage.total}, {"ratio", rep.coverage.ratio()}}},
          {"uncovered_threats", rep.uncovered},
          {"requirements", {{"total", rep.requirements.total}, {"exercised", rep.requirements.exercised}, {"violated", rep.requirements.violated}}},
          {"results", results}};
}

inline std::string render_json(const Report& rep) { return to_json(rep).dump(2) + "\n"; }

inline std::vector<const Finding*> findings_by_severity(const Report& rep) {
  std::vector<const Finding*> v;
  for (const auto& f : rep.findings) v.push_back(&f);
  std::stable_sort(v.begin(), v.end(), [](const Finding* a, const Finding* b) {
    if (a->severity != b->severity) return a->severity > b->severity;
    return a->id < b->id;
  });
  return v;
}

inline std::string render_text(const Report& rep) {
  std::string out;
  char line[256];
  out += "Security test report\n";
  out += "campaign: " + (rep.campaign_id.empty() ? std::string("-") : rep.campaign_id) + "\n";
  out += "profile:  " + (rep.profile.empty() ? std::string("-") : rep.profile) + "\n";
  out += "seed:     " + std::to_string(rep.seed) + "\n\n";
  out += "verdict   count\n";
  const std::array<std::pair<const char*, std::size_t>, 4> rows = {
      {{"pass", rep.counts.pass}, {"fail", rep.counts.fail}, {"error", rep.counts.error}, {"skipped", rep.counts.skipped}}};
  for (auto [name, n] : rows) {
    std::snprintf(line, sizeof line, "%-9s %5zu\n", name, n);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-9s %5zu\n\n", "total", rep.counts.total());
  out += line;

  out += std::to_string(rep.findings.size()) + (rep.findings.size() == 1 ? " finding\n" : " findings\n");
  for (const auto* f : findings_by_severity(rep)) {
    std::snprintf(line, sizeof line, "  %s  %-8s  %-8s  %-20s  %s\n", f->id.c_str(),
                  std::string(sources::to_string(f->severity)).c_str(), f->source_trace.id.c_str(), f->block.c_str(),
                  f->component.c_str());
    out += line;
    out += "      " + f->detail + "\n";
  }
  out += "\n";
  std::snprintf(line, sizeof line, "threat coverage: %zu/%zu (%.1f%%)\n", rep.coverage.covered, rep.coverage.total,
                rep.coverage.ratio() * 100.0);
  out += line;
  if (!rep.uncovered.empty()) {
    out += "uncovered threats:";
    for (const auto& id : rep.uncovered) out += " " + id;
    out += "\n";
  }
  std::snprintf(line, sizeof line, "requirements: %zu total, %zu exercised, %zu violated\n", rep.requirements.total,
                rep.requirements.exercised, rep.requirements.violated);
  out += line;
  return out;
}

}  // namespace autosec::report
