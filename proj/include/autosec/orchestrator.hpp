#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autosec/attackpath.hpp"
#include "autosec/binding.hpp"
#include "autosec/blocks.hpp"
#include "autosec/diag_client.hpp"
#include "autosec/executors.hpp"
#include "autosec/rng.hpp"
#include "autosec/vehicle.hpp"

// The supervisor: orders test cases into a dependency workflow, runs each
// bound test against the SUT and collects per-case results.
namespace autosec::orchestrator {

using blocks::TestCase;
using bus::Tick;
using exec::Verdict;
using nlohmann::json;

enum class OnFail { continue_run, abort_dependents };

inline constexpr std::string_view to_string(OnFail f) noexcept {
  return f == OnFail::continue_run ? "continue" : "abort_dependents";
}

struct CampaignNode {
  std::string id;
  TestCase test_case;
  std::vector<std::string> depends_on;
  OnFail on_fail = OnFail::continue_run;
  bool operator==(const CampaignNode&) const = default;
};

struct Campaign {
  std::string id;
  std::vector<CampaignNode> nodes;
  std::uint64_t seed = 0;
  std::string sut;
  bool operator==(const Campaign&) const = default;
};

enum class CampaignErrc { ParseError, DuplicateCaseId, CyclicDependency };
using CampaignError = ErrorOf<CampaignErrc>;

// Throws unless node ids are unique and every dependency points at an earlier
// node, i.e. the node list is a topological order of an acyclic graph.
inline void validate(const Campaign& c) {
  std::set<std::string> seen;
  std::set<std::string> case_ids;
  for (const auto& n : c.nodes) {
    for (const auto& d : n.depends_on) {
      if (!seen.contains(d)) {
        throw CampaignError(CampaignErrc::CyclicDependency,
                            "node " + n.id + " depends on " + d + " which is not an earlier node");
      }
    }
    if (!seen.insert(n.id).second) throw CampaignError(CampaignErrc::ParseError, "duplicate node id " + n.id);
    if (!case_ids.insert(n.test_case.id).second) {
      throw CampaignError(CampaignErrc::DuplicateCaseId, "duplicate test case id " + n.test_case.id);
    }
  }
}

// Recon (ServiceDiscovery) first, then by (source id, block name). A case
// depends on the first case whose block produces one of its preconditions, and
// supplied attack paths chain consecutive blocks.
inline Campaign plan(std::vector<TestCase> cases, const std::vector<paths::AttackPath>& attack_paths = {},
                     std::uint64_t seed = 0, std::string sut = {}) {
  std::set<std::string> ids;
  for (const auto& c : cases) {
    if (!ids.insert(c.id).second) throw CampaignError(CampaignErrc::DuplicateCaseId, "duplicate test case id " + c.id);
    if (!blocks::find_block(c.block)) throw CampaignError(CampaignErrc::ParseError, "unknown block " + c.block);
  }
  const auto is_recon = [](const TestCase& c) { return c.block == blocks::name::kServiceDiscovery; };
  std::stable_sort(cases.begin(), cases.end(), [&](const TestCase& a, const TestCase& b) {
    if (is_recon(a) != is_recon(b)) return is_recon(a);
    if (a.source_trace.id != b.source_trace.id) return a.source_trace.id < b.source_trace.id;
    if (a.block != b.block) return a.block < b.block;
    return a.id < b.id;
  });

  const std::size_t n = cases.size();
  std::vector<std::set<std::size_t>> deps(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* spec = blocks::find_block(cases[i].block);
    for (Capability need : spec->preconditions.members()) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || cases[j].block == cases[i].block) continue;
        if (blocks::find_block(cases[j].block)->effects.contains(need)) {
          deps[i].insert(j);
          break;
        }
      }
    }
  }
  for (const auto& path : attack_paths) {
    for (std::size_t s = 1; s < path.steps.size(); ++s) {
      auto producer = std::find_if(cases.begin(), cases.end(), [&](const TestCase& c) { return c.block == path.steps[s - 1]; });
      if (producer == cases.end()) continue;
      const auto j = static_cast<std::size_t>(producer - cases.begin());
      for (std::size_t i = 0; i < n; ++i) {
        if (cases[i].block == path.steps[s] && i != j) deps[i].insert(j);
      }
    }
  }

  // Kahn's algorithm, always releasing the lowest sort position first.
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> dependents(n);
  for (std::size_t i = 0; i < n; ++i) {
    indegree[i] = deps[i].size();
    for (auto j : deps[i]) dependents[j].push_back(i);
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const auto i = ready.top();
    ready.pop();
    order.push_back(i);
    for (auto k : dependents[i]) {
      if (--indegree[k] == 0) ready.push(k);
    }
  }
  if (order.size() != n) throw CampaignError(CampaignErrc::CyclicDependency, "test case dependencies form a cycle");

  Campaign campaign;
  campaign.seed = seed;
  campaign.sut = std::move(sut);
  std::vector<std::string> node_id(n);
  std::string all_ids;
  for (std::size_t pos = 0; pos < n; ++pos) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "N%03zu", pos + 1);
    node_id[order[pos]] = buf;
  }
  for (auto i : order) {
    CampaignNode node{node_id[i], cases[i], {}, OnFail::continue_run};
    for (auto j : deps[i]) node.depends_on.push_back(node_id[j]);
    std::sort(node.depends_on.begin(), node.depends_on.end());
    all_ids += cases[i].id + "\n";
    campaign.nodes.push_back(std::move(node));
  }
  campaign.id = "C-" + hex_literal(fnv1a32(all_ids), 8).substr(2);
  return campaign;
}

// ---------------------------------------------------------------------------
// Execution

struct TestResult {
  std::string test_case_id;
  Verdict verdict = Verdict::skipped;
  uds::EvidenceLog evidence;
  std::vector<std::size_t> evidence_refs;  // entries that back the verdict
  Tick started = 0;
  Tick ended = 0;
  std::string detail;
  bool operator==(const TestResult&) const = default;
};

using BindResolver = std::function<sut::BoundTest(const TestCase&)>;

inline constexpr std::string_view kBudgetExhausted = "BudgetExhausted";

namespace detail {

inline std::string describe(const exec::Observations& obs) {
  return std::visit(
      [](const auto& o) -> std::string {
        using O = std::decay_t<decltype(o)>;
        auto bytes_list = [](const auto& v, int digits) {
          std::string s;
          for (auto x : v) s += (s.empty() ? "" : ",") + hex_literal(x, digits);
          return s.empty() ? std::string("none") : s;
        };
        if constexpr (std::is_same_v<O, exec::ServiceDiscoveryObs>) {
          return std::to_string(o.supported.size()) + " services answer; undocumented: " + bytes_list(o.undocumented, 2);
        } else if constexpr (std::is_same_v<O, exec::SessionScanObs>) {
          std::string s;
          for (auto [session, ok] : o.opened) s += (s.empty() ? "" : ",") + hex_literal(session) + (ok ? "=open" : "=denied");
          return "sessions " + s;
        } else if constexpr (std::is_same_v<O, exec::SecurityAccessProbeObs>) {
          return o.unlocked_with ? "unlocked with " + *o.unlocked_with : std::string("no weak key unlocked");
        } else if constexpr (std::is_same_v<O, exec::RateLimitObs>) {
          return std::to_string(o.wrong_keys_sent) + " wrong keys sent; " +
                 (o.lockout_observed ? "lockout observed" : "no lockout");
        } else if constexpr (std::is_same_v<O, exec::ReadDidSweepObs>) {
          return std::to_string(o.readable.size()) + " identifiers readable while locked; gated leaked: " +
                 bytes_list(o.leaked, 4);
        } else if constexpr (std::is_same_v<O, exec::ResetResilienceObs>) {
          return std::string(o.unlocked_before_reset ? "unlocked before reset; " : "locked before reset; ") +
                 (o.unlock_persisted ? "unlock persisted" : "state cleared");
        } else {
          return std::to_string(o.iterations) + " malformed frames; ECU " + (o.alive ? "responsive" : "unresponsive");
        }
      },
      obs);
}

}  // namespace detail

// Runs the campaign. Binding happens up front and a BindError aborts the
// whole execution; everything after that is recorded per node.
inline std::vector<TestResult> execute(const Campaign& campaign, const BindResolver& resolve, Tick budget_ticks) {
  validate(campaign);
  std::vector<sut::BoundTest> bound;
  bound.reserve(campaign.nodes.size());
  for (const auto& node : campaign.nodes) bound.push_back(resolve(node.test_case));

  std::vector<TestResult> results;
  std::map<std::string, std::size_t> index_of;
  Tick clock = 0;
  for (std::size_t i = 0; i < campaign.nodes.size(); ++i) {
    const auto& node = campaign.nodes[i];
    index_of[node.id] = i;
    TestResult r{node.test_case.id, Verdict::skipped, {}, {}, clock, clock, {}};

    std::optional<std::string> skip_reason;
    for (const auto& dep : node.depends_on) {
      const auto& d = results[index_of.at(dep)];
      const auto& dn = campaign.nodes[index_of.at(dep)];
      if (d.verdict == Verdict::skipped ||
          (dn.on_fail == OnFail::abort_dependents && (d.verdict == Verdict::fail || d.verdict == Verdict::error))) {
        skip_reason = "dependency " + dep + " " + std::string(exec::to_string(d.verdict));
        break;
      }
    }
    if (skip_reason) {
      r.detail = *skip_reason;
      results.push_back(std::move(r));
      continue;
    }
    if (clock >= budget_ticks) {
      r.verdict = Verdict::error;
      r.detail = std::string(kBudgetExhausted);
      results.push_back(std::move(r));
      continue;
    }

    const auto& bt = bound[i];
    if (!bt.virtual_ecu || !bt.channel) {
      r.verdict = Verdict::error;
      r.detail = "no executable backend for SUT '" + bt.profile_name + "'";
      results.push_back(std::move(r));
      continue;
    }

    const CounterRng node_rng = CounterRng::for_node(campaign.seed, i);
    vehicle::VirtualVehicle vehicle({bt.virtual_ecu, *bt.channel, node_rng.key(), clock, budget_ticks});
    uds::DiagClient client(vehicle);
    try {
      auto obs = exec::run_block(bt, client, node_rng);
      r.verdict = exec::verdict(*bt.block, obs);
      r.evidence_refs = exec::evidence_refs(obs);
      r.detail = detail::describe(obs);
    } catch (const vehicle::SimError&) {
      r.verdict = Verdict::error;
      r.detail = std::string(kBudgetExhausted);
    } catch (const uds::UdsError& e) {
      r.verdict = Verdict::error;
      r.detail = e.what();
    } catch (const std::invalid_argument& e) {
      r.verdict = Verdict::error;
      r.detail = e.what();
    }
    r.evidence = client.take_evidence();
    r.ended = vehicle.now();
    clock = r.ended;
    results.push_back(std::move(r));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Campaign documents

inline json to_json(const TestCase& tc) {
  return {{"id", tc.id},
          {"block", tc.block},
          {"params", tc.params},
          {"source_trace", {{"kind", std::string(blocks::to_string(tc.source_trace.kind))}, {"id", tc.source_trace.id}}},
          {"box", std::string(sources::to_string(tc.box))}};
}

inline json to_json(const Campaign& c) {
  json nodes = json::array();
  for (const auto& n : c.nodes) {
    nodes.push_back({{"id", n.id},
                     {"test_case", to_json(n.test_case)},
                     {"depends_on", n.depends_on},
                     {"on_fail", std::string(to_string(n.on_fail))}});
  }
  return {{"id", c.id}, {"seed", c.seed}, {"sut", c.sut}, {"nodes", nodes}};
}

inline std::string serialize_campaign(const Campaign& c) { return to_json(c).dump(2) + "\n"; }

namespace detail {

[[noreturn]] inline void bad_campaign(const std::string& where, const std::string& why) {
  throw CampaignError(CampaignErrc::ParseError, "campaign field '" + where + "': " + why);
}

inline void exact_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) bad_campaign(where, "expected an object");
  for (auto k : keys) {
    if (!j.contains(std::string(k))) bad_campaign(where + "." + std::string(k), "missing");
  }
  if (j.size() != keys.size()) bad_campaign(where, "unexpected extra fields");
}

inline std::string str(const json& j, const std::string& where) {
  if (!j.is_string()) bad_campaign(where, "expected a string");
  return j.get<std::string>();
}

}  // namespace detail

inline TestCase test_case_from_json(const json& j, const std::string& where) {
  using detail::bad_campaign;
  detail::exact_keys(j, where, {"id", "block", "params", "source_trace", "box"});
  TestCase tc;
  tc.id = detail::str(j["id"], where + ".id");
  tc.block = detail::str(j["block"], where + ".block");
  const auto* spec = blocks::find_block(tc.block);
  if (!spec) bad_campaign(where + ".block", "unknown block '" + tc.block + "'");
  tc.params = j["params"];
  if (!blocks::params_match_schema(*spec, tc.params)) bad_campaign(where + ".params", "does not match the block schema");
  detail::exact_keys(j["source_trace"], where + ".source_trace", {"kind", "id"});
  const auto kind = detail::str(j["source_trace"]["kind"], where + ".source_trace.kind");
  if (kind != "threat" && kind != "requirement") bad_campaign(where + ".source_trace.kind", "expected threat or requirement");
  tc.source_trace = {kind == "threat" ? blocks::SourceKind::threat : blocks::SourceKind::requirement,
                     detail::str(j["source_trace"]["id"], where + ".source_trace.id")};
  auto box = sources::box_from_string(detail::str(j["box"], where + ".box"));
  if (!box) bad_campaign(where + ".box", "expected black or white");
  tc.box = *box;
  return tc;
}

inline Campaign load_campaign(std::string_view document) {
  using detail::bad_campaign;
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw CampaignError(CampaignErrc::ParseError, std::string("malformed campaign JSON: ") + e.what());
  }
  detail::exact_keys(doc, "campaign", {"id", "seed", "sut", "nodes"});
  Campaign c;
  c.id = detail::str(doc["id"], "id");
  if (!doc["seed"].is_number_unsigned()) bad_campaign("seed", "expected an unsigned integer");
  c.seed = doc["seed"].get<std::uint64_t>();
  c.sut = detail::str(doc["sut"], "sut");
  if (!doc["nodes"].is_array()) bad_campaign("nodes", "expected an array");
  for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
    const auto& nj = doc["nodes"][i];
    const std::string where = "nodes[" + std::to_string(i) + "]";
    detail::exact_keys(nj, where, {"id", "test_case", "depends_on", "on_fail"});
    CampaignNode n;
    n.id = detail::str(nj["id"], where + ".id");
    n.test_case = test_case_from_json(nj["test_case"], where + ".test_case");
    if (!nj["depends_on"].is_array()) bad_campaign(where + ".depends_on", "expected an array");
    for (const auto& d : nj["depends_on"]) n.depends_on.push_back(detail::str(d, where + ".depends_on"));
    const auto on_fail = detail::str(nj["on_fail"], where + ".on_fail");
    if (on_fail == "continue") n.on_fail = OnFail::continue_run;
    else if (on_fail == "abort_dependents") n.on_fail = OnFail::abort_dependents;
    else bad_campaign(where + ".on_fail", "expected continue or abort_dependents");
    c.nodes.push_back(std::move(n));
  }
  validate(c);
  return c;
}

}  // namespace autosec::orchestrator
