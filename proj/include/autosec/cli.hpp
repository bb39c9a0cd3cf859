#pragma once

#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autosec/attackpath.hpp"
#include "autosec/binding.hpp"
#include "autosec/blocks.hpp"
#include "autosec/fetch.hpp"
#include "autosec/orchestrator.hpp"
#include "autosec/report.hpp"
#include "autosec/sources.hpp"
#include "autosec/sut.hpp"

namespace autosec::cli {

enum ExitCode : int { kClean = 0, kFindings = 1, kUsage = 2, kInputError = 3, kExecutionError = 4 };

inline constexpr const char* kMappingEnv = "AUTOSEC_MAPPING";
inline constexpr bus::Tick kDefaultBudget = 1'000'000;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SourceOptions {
  std::string threats;
  std::string threats_url;
  std::string requirements;
  std::string profile;
  std::string mapping;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Everything loaded from the source flags. Parse problems are collected as
// "<origin>: <message>" lines rather than thrown.
struct Loaded {
  std::vector<sources::ThreatRecord> threats;
  std::vector<sources::RequirementRecord> requirements;
  std::optional<sut::SutProfile> profile;
  std::optional<blocks::DerivationMapping> mapping;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

template <typename Outcome>
void absorb(const std::string& origin, Outcome&& outcome, auto& records, Loaded& out) {
  for (const auto& e : outcome.errors) out.errors.push_back(origin + ": " + e.what());
  for (const auto& w : outcome.warnings) out.warnings.push_back(origin + ": " + w);
  records = std::move(outcome.records);
}

inline Loaded load(const SourceOptions& opt, bool want_mapping) {
  Loaded out;
  // The download overlaps with reading the local files.
  std::future<std::string> remote;
  if (!opt.threats_url.empty()) {
    remote = std::async(std::launch::async, [url = opt.threats_url] { return sources::fetch_threats(url); });
  }
  auto guarded = [&](const std::string& origin, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      out.errors.push_back(origin + ": " + e.what());
    }
  };
  if (!opt.threats.empty()) {
    guarded(opt.threats, [&] { absorb(opt.threats, sources::parse_threats_collect(read_file(opt.threats)), out.threats, out); });
  }
  if (!opt.requirements.empty()) {
    guarded(opt.requirements, [&] {
      absorb(opt.requirements, sources::parse_requirements_collect(read_file(opt.requirements)), out.requirements, out);
    });
  }
  if (!opt.profile.empty()) {
    guarded(opt.profile, [&] { out.profile = sut::load_profile(read_file(opt.profile)); });
  }
  if (want_mapping) {
    std::string path = opt.mapping;
    if (path.empty()) {
      if (const char* env = std::getenv(kMappingEnv)) path = env;
    }
    if (path.empty()) out.mapping = blocks::default_mapping();
    else guarded(path, [&] { out.mapping = blocks::load_mapping(read_file(path)); });
  }
  if (remote.valid()) {
    guarded(opt.threats_url, [&] {
      std::vector<sources::ThreatRecord> fetched;
      absorb(opt.threats_url, sources::parse_threats_collect(remote.get()), fetched, out);
      // Remote records follow the local file's; clashing ids are an input error.
      std::set<std::string> ids;
      for (const auto& t : out.threats) ids.insert(t.id);
      for (auto& t : fetched) {
        if (!ids.insert(t.id).second) {
          out.errors.push_back(opt.threats_url + ": duplicate id '" + t.id + "' already present in " + opt.threats);
          continue;
        }
        out.threats.push_back(std::move(t));
      }
    });
  }
  return out;
}

inline void print_lines(std::ostream& os, const std::string& prefix, const std::vector<std::string>& lines) {
  for (const auto& l : lines) os << prefix << l << "\n";
}

struct Planned {
  orchestrator::Campaign campaign;
  std::vector<std::string> uncovered;
};

inline Planned derive_and_plan(const Loaded& in) {
  auto from_threats = blocks::derive_from_threats(in.threats, *in.profile, *in.mapping);
  auto from_reqs = blocks::derive_from_requirements(in.requirements, *in.profile, *in.mapping);
  std::vector<blocks::TestCase> cases = std::move(from_threats.cases);
  cases.insert(cases.end(), from_reqs.cases.begin(), from_reqs.cases.end());
  Planned p{orchestrator::plan(std::move(cases), {}, 0, in.profile->name), {}};
  for (const auto& id : from_threats.uncovered) p.uncovered.push_back("threat " + id + " shares no component tag with the profile");
  for (const auto& id : from_reqs.uncovered) p.uncovered.push_back("requirement " + id + " shares no component tag with the profile");
  return p;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << content;
  if (!f) throw InputError("cannot write '" + path + "'");
}

inline void add_source_flags(CLI::App& cmd, SourceOptions& o) {
  cmd.add_option("--threats", o.threats, "threat library (JSON lines)");
  cmd.add_option("--threats-url", o.threats_url, "fetch a threat library over plain HTTP");
  cmd.add_option("--requirements", o.requirements, "security requirements (JSON lines)");
  cmd.add_option("--profile", o.profile, "SUT profile (JSON)");
}

}  // namespace detail

inline int cmd_validate(const SourceOptions& opt, std::ostream& out, std::ostream& err) {
  if (opt.threats.empty() && opt.threats_url.empty() && opt.requirements.empty() && opt.profile.empty()) {
    err << "validate: give at least one of --threats, --threats-url, --requirements, --profile\n";
    return kUsage;
  }
  const auto in = detail::load(opt, false);
  detail::print_lines(err, "warning: ", in.warnings);
  detail::print_lines(err, "error: ", in.errors);
  if (!in.errors.empty()) return kInputError;
  out << "ok: " << in.threats.size() << " threats, " << in.requirements.size() << " requirements"
      << (in.profile ? ", profile '" + in.profile->name + "'" : std::string()) << "\n";
  return kClean;
}

inline int cmd_plan(const SourceOptions& opt, const std::string& out_path, std::ostream& out, std::ostream& err) {
  auto in = detail::load(opt, true);
  detail::print_lines(err, "warning: ", in.warnings);
  detail::print_lines(err, "error: ", in.errors);
  if (!in.errors.empty()) return kInputError;
  try {
    auto planned = detail::derive_and_plan(in);
    detail::print_lines(err, "warning: ", planned.uncovered);
    const auto doc = orchestrator::serialize_campaign(planned.campaign);
    if (out_path.empty()) {
      out << doc;
    } else {
      detail::write_file(out_path, doc);
      out << "planned " << planned.campaign.nodes.size() << " test cases into " << out_path << "\n";
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kClean;
}

struct RunOptions {
  SourceOptions sources;
  std::string campaign;
  std::optional<std::uint64_t> seed;
  bus::Tick budget = kDefaultBudget;
  std::string report_json;
  std::string report_text;
};

inline int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  if (opt.sources.profile.empty()) {
    err << "run: --profile is required\n";
    return kUsage;
  }
  auto in = detail::load(opt.sources, opt.campaign.empty());
  detail::print_lines(err, "warning: ", in.warnings);
  detail::print_lines(err, "error: ", in.errors);
  if (!in.errors.empty()) return kInputError;

  report::Report rep;
  try {
    orchestrator::Campaign campaign;
    if (opt.campaign.empty()) {
      auto planned = detail::derive_and_plan(in);
      detail::print_lines(err, "warning: ", planned.uncovered);
      campaign = std::move(planned.campaign);
    } else {
      campaign = orchestrator::load_campaign(detail::read_file(opt.campaign));
    }
    if (opt.seed) campaign.seed = *opt.seed;
    const auto& profile = *in.profile;
    auto resolve = [&](const blocks::TestCase& tc) {
      return sut::bind(*blocks::find_block(tc.block), tc, profile);
    };
    const auto results = orchestrator::execute(campaign, resolve, opt.budget);
    rep = report::aggregate(campaign, results, in.threats, in.requirements, &profile);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    if (!opt.report_json.empty()) detail::write_file(opt.report_json, report::render_json(rep));
    if (!opt.report_text.empty()) detail::write_file(opt.report_text, report::render_text(rep));
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExecutionError;
  }
  out << report::render_text(rep);

  const bool all_exhausted =
      !rep.results.empty() && std::all_of(rep.results.begin(), rep.results.end(), [](const report::NodeResult& r) {
        return r.result.verdict == exec::Verdict::error && r.result.detail == orchestrator::kBudgetExhausted;
      });
  if (all_exhausted) {
    err << "error: virtual time budget of " << opt.budget << " ticks exhausted before any test ran\n";
    return kExecutionError;
  }
  return rep.findings.empty() ? kClean : kFindings;
}

inline int cmd_paths(const std::string& profile_path, const std::string& goal_name, unsigned max_depth, std::ostream& out,
                     std::ostream& err) {
  const auto goal = capability_from_string(goal_name);
  if (!goal) {
    err << "paths: unknown capability '" << goal_name << "'\n";
    return kUsage;
  }
  if (max_depth == 0 || max_depth > paths::kMaxDepth) {
    err << "paths: --max-depth must be within 1.." << paths::kMaxDepth << "\n";
    return kUsage;
  }
  sut::SutProfile profile;
  try {
    profile = sut::load_profile(detail::read_file(profile_path));
  } catch (const std::exception& e) {
    err << "error: " << profile_path << ": " << e.what() << "\n";
    return kInputError;
  }
  const auto start = sut::capabilities(profile);
  for (const auto& p : paths::enumerate_paths(blocks::catalog(), start, *goal, max_depth)) {
    out << paths::format_path(p) << "\n";
  }
  return kClean;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Security test derivation and execution for connected vehicles", "autosec"};
  app.require_subcommand(1);

  SourceOptions validate_opt;
  auto* validate = app.add_subcommand("validate", "check threat, requirement and profile inputs");
  detail::add_source_flags(*validate, validate_opt);

  SourceOptions plan_opt;
  std::string plan_out;
  auto* plan = app.add_subcommand("plan", "derive test cases and write a campaign");
  detail::add_source_flags(*plan, plan_opt);
  plan->add_option("--mapping", plan_opt.mapping, "derivation mapping override (JSON)");
  plan->add_option("--out", plan_out, "campaign output file (default: stdout)");

  RunOptions run_opt;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "execute a campaign against the virtual SUT");
  detail::add_source_flags(*run, run_opt.sources);
  run->add_option("--mapping", run_opt.sources.mapping, "derivation mapping override (JSON)");
  run->add_option("--campaign", run_opt.campaign, "previously planned campaign (JSON)");
  auto* seed_opt = run->add_option("--seed", seed, "RNG seed (default: the campaign's, 0 when planning)");
  run->add_option("--budget-ticks", run_opt.budget, "virtual time budget")->capture_default_str();
  run->add_option("--report-json", run_opt.report_json, "JSON report output file");
  run->add_option("--report-text", run_opt.report_text, "text report output file");

  std::string paths_profile, goal;
  unsigned max_depth = paths::kMaxDepth;
  auto* paths_cmd = app.add_subcommand("paths", "list attack paths to a capability");
  paths_cmd->add_option("--profile", paths_profile, "SUT profile (JSON)")->required();
  paths_cmd->add_option("--goal", goal, "target capability")->required();
  paths_cmd->add_option("--max-depth", max_depth, "maximum path length")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kClean;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  if (*validate) return cmd_validate(validate_opt, out, err);
  if (*plan) return cmd_plan(plan_opt, plan_out, out, err);
  if (*run) {
    if (seed_opt->count() > 0) run_opt.seed = seed;
    return cmd_run(run_opt, out, err);
  }
  return cmd_paths(paths_profile, goal, max_depth, out, err);
}

}  // namespace autosec::cli
