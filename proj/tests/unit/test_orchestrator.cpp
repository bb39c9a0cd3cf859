#include <gtest/gtest.h>

#include "autosec/orchestrator.hpp"
#include "autosec/sources.hpp"
#include "oracles.hpp"

using namespace autosec;
using namespace autosec::orchestrator;
using exec::Verdict;

namespace {

struct Demo {
  sut::SutProfile profile;
  std::vector<sources::ThreatRecord> threats;
  std::vector<sources::RequirementRecord> requirements;
  std::vector<blocks::TestCase> cases;
};

Demo load_demo(const std::string& profile_file = "demo_vulnerable.json") {
  Demo d;
  d.profile = sut::load_profile(testutil::read_file(testutil::data_path(profile_file)));
  d.threats = sources::parse_threats(testutil::read_file(testutil::data_path("demo_threats.jsonl")));
  d.requirements = sources::parse_requirements(testutil::read_file(testutil::data_path("demo_requirements.jsonl")));
  d.cases = blocks::derive_from_threats(d.threats, d.profile).cases;
  auto r = blocks::derive_from_requirements(d.requirements, d.profile).cases;
  d.cases.insert(d.cases.end(), r.begin(), r.end());
  return d;
}

BindResolver resolver(const sut::SutProfile& p) {
  return [&p](const blocks::TestCase& tc) { return sut::bind(*blocks::find_block(tc.block), tc, p); };
}

blocks::TestCase make_case(std::string source, std::string_view block) {
  const auto* spec = blocks::find_block(block);
  auto params = spec->default_params();
  return {blocks::test_case_id(source, block, params), spec->name, params, {blocks::SourceKind::threat, source}};
}

}  // namespace

TEST(Plan, DemoOrderAndDependenciesMatchHandDerivation) {
  const auto d = load_demo();
  const auto c = plan(d.cases, {}, 0, d.profile.name);
  // (source, block, depends_on)
  const std::vector<std::tuple<std::string, std::string, std::vector<std::string>>> expected = {
      {"TL-0003", "ServiceDiscovery", {}},
      {"TL-0007", "ServiceDiscovery", {}},
      {"RQ-002", "SecurityAccessProbe", {"N001"}},
      {"RQ-001", "SessionScan", {"N003"}},
      {"RQ-003", "RateLimitCheck", {"N001"}},
      {"RQ-004", "ReadDidSweep", {"N001"}},
      {"RQ-005", "ResetResilience", {"N001"}},
      {"TL-0001", "SecurityAccessProbe", {"N001"}},
      {"TL-0001", "SessionScan", {"N003"}},
      {"TL-0002", "RateLimitCheck", {"N001"}},
      {"TL-0002", "SecurityAccessProbe", {"N001"}},
      {"TL-0003", "ReadDidSweep", {"N001"}},
      {"TL-0004", "FuzzIsoTp", {}},
      {"TL-0005", "FuzzIsoTp", {}},
      {"TL-0005", "ResetResilience", {"N001"}},
      {"TL-0007", "ReadDidSweep", {"N001"}},
      {"TL-0008", "RateLimitCheck", {"N001"}},
      {"TL-0008", "SecurityAccessProbe", {"N001"}},
      {"TL-0010", "SecurityAccessProbe", {"N001"}},
      {"TL-0010", "SessionScan", {"N003"}},
  };
  ASSERT_EQ(c.nodes.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [src, block, deps] = expected[i];
    EXPECT_EQ(c.nodes[i].test_case.source_trace.id, src) << i;
    EXPECT_EQ(c.nodes[i].test_case.block, block) << i;
    EXPECT_EQ(c.nodes[i].depends_on, deps) << i;
    EXPECT_EQ(c.nodes[i].on_fail, OnFail::continue_run);
  }
  EXPECT_EQ(c.sut, "demo-vulnerable");
  EXPECT_NO_THROW(validate(c));
}

TEST(Plan, InputOrderDoesNotMatter) {
  auto d = load_demo();
  const auto a = plan(d.cases);
  CounterRng rng(3);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(d.cases.begin(), d.cases.end(), rng);
    EXPECT_EQ(plan(d.cases), a);
  }
}

TEST(Plan, CampaignGolden) {
  const auto d = load_demo();
  EXPECT_EQ(serialize_campaign(plan(d.cases, {}, 0, d.profile.name)),
            testutil::read_file(testutil::test_path("golden/demo_campaign.json")));
}

TEST(Plan, SerializeRoundTrip) {
  const auto d = load_demo();
  const auto c = plan(d.cases, {}, 42, d.profile.name);
  const auto text = serialize_campaign(c);
  EXPECT_EQ(load_campaign(text), c);
}

TEST(Plan, AttackPathAddsChain) {
  const std::vector<blocks::TestCase> cases = {make_case("A", blocks::name::kFuzzIsoTp),
                                               make_case("B", blocks::name::kResetResilience)};
  EXPECT_TRUE(plan(cases).nodes[1].depends_on.empty());
  paths::AttackPath chain{{"FuzzIsoTp", "ResetResilience"}, {}, Capability::SESSION_DEFAULT};
  const auto c = plan(cases, {chain});
  EXPECT_EQ(c.nodes[1].test_case.block, "ResetResilience");
  EXPECT_EQ(c.nodes[1].depends_on, std::vector<std::string>{"N001"});
}

TEST(Plan, CycleIsRejected) {
  const std::vector<blocks::TestCase> cases = {make_case("A", blocks::name::kSecurityAccessProbe),
                                               make_case("A", blocks::name::kSessionScan)};
  paths::AttackPath backwards{{"SessionScan", "SecurityAccessProbe"}, {}, Capability::SECURITY_L1};
  try {
    plan(cases, {backwards});
    FAIL();
  } catch (const CampaignError& e) {
    EXPECT_EQ(e.code(), CampaignErrc::CyclicDependency);
  }
}

TEST(Plan, DuplicateCaseIdsRejected) {
  const auto c = make_case("A", blocks::name::kFuzzIsoTp);
  EXPECT_THROW(plan({c, c}), CampaignError);
}

TEST(Plan, EmptyInputGivesEmptyCampaign) {
  const auto c = plan({});
  EXPECT_TRUE(c.nodes.empty());
  EXPECT_EQ(load_campaign(serialize_campaign(c)), c);
}

TEST(LoadCampaign, RejectsBrokenDocuments) {
  const auto d = load_demo();
  auto j = to_json(plan(d.cases));
  auto broken = j;
  broken["nodes"][0]["depends_on"] = {"N005"};
  EXPECT_THROW(load_campaign(broken.dump()), CampaignError);
  broken = j;
  broken["nodes"][1]["on_fail"] = "panic";
  EXPECT_THROW(load_campaign(broken.dump()), CampaignError);
  broken = j;
  broken["nodes"][1]["test_case"]["block"] = "Teleport";
  EXPECT_THROW(load_campaign(broken.dump()), CampaignError);
  broken = j;
  broken["seed"] = -1;
  EXPECT_THROW(load_campaign(broken.dump()), CampaignError);
  EXPECT_THROW(load_campaign("[1,2"), CampaignError);
}

TEST(Execute, DemoVerdictsFollowTheFlagOracle) {
  for (const char* file : {"demo_vulnerable.json", "demo_hardened.json"}) {
    const auto d = load_demo(file);
    const auto c = plan(d.cases, {}, 0, d.profile.name);
    const auto results = execute(c, resolver(d.profile), 1'000'000);
    ASSERT_EQ(results.size(), c.nodes.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
      const bool want_fail = oracle::expect_fail(c.nodes[i].test_case.block, *d.profile.virtual_ecu());
      EXPECT_EQ(results[i].verdict, want_fail ? Verdict::fail : Verdict::pass)
          << file << " " << results[i].test_case_id << ": " << results[i].detail;
      EXPECT_EQ(results[i].test_case_id, c.nodes[i].test_case.id);
      if (i) {
        EXPECT_EQ(results[i].started, results[i - 1].ended);
      }
      EXPECT_LE(results[i].started, results[i].ended);
    }
  }
}

TEST(Execute, DeterministicForEqualSeeds) {
  const auto d = load_demo();
  const auto c = plan(d.cases, {}, 9, d.profile.name);
  EXPECT_EQ(execute(c, resolver(d.profile), 1'000'000), execute(c, resolver(d.profile), 1'000'000));
}

TEST(Execute, ZeroBudgetErrorsEveryNode) {
  const auto d = load_demo();
  const auto results = execute(plan(d.cases), resolver(d.profile), 0);
  for (const auto& r : results) {
    EXPECT_EQ(r.verdict, Verdict::error);
    EXPECT_EQ(r.detail, kBudgetExhausted);
  }
}

TEST(Execute, BudgetRunsOutPartWay) {
  const auto d = load_demo();
  const auto c = plan(d.cases);
  const auto full = execute(c, resolver(d.profile), 1'000'000);
  const bus::Tick budget = full[5].ended + 1;
  const auto cut = execute(c, resolver(d.profile), budget);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(cut[i], full[i]);
  EXPECT_EQ(cut[6].verdict, Verdict::error);
  for (std::size_t i = 7; i < cut.size(); ++i) {
    EXPECT_EQ(cut[i].verdict, Verdict::error);
    EXPECT_EQ(cut[i].detail, kBudgetExhausted);
  }
  EXPECT_LE(cut.back().ended, budget);
}

TEST(Execute, AbortDependentsSkipsTransitively) {
  const auto d = load_demo();
  // SecurityAccessProbe fails on the vulnerable ECU; SessionScan depends on
  // it and RateLimitCheck depends on SessionScan via an attack path.
  std::vector<blocks::TestCase> cases = {make_case("TL-0001", blocks::name::kServiceDiscovery),
                                         make_case("TL-0001", blocks::name::kSecurityAccessProbe),
                                         make_case("TL-0001", blocks::name::kSessionScan),
                                         make_case("TL-0008", blocks::name::kRateLimitCheck)};
  paths::AttackPath chain{{"SessionScan", "RateLimitCheck"}, {}, Capability::SECURITY_L1};
  auto c = plan(cases, {chain});
  ASSERT_EQ(c.nodes[1].test_case.block, "SecurityAccessProbe");
  c.nodes[1].on_fail = OnFail::abort_dependents;
  const auto results = execute(c, resolver(d.profile), 1'000'000);
  EXPECT_EQ(results[1].verdict, Verdict::fail);
  EXPECT_EQ(results[2].verdict, Verdict::skipped);
  EXPECT_EQ(results[3].verdict, Verdict::skipped);
  EXPECT_TRUE(results[3].evidence.empty());

  c.nodes[1].on_fail = OnFail::continue_run;
  const auto cont = execute(c, resolver(d.profile), 1'000'000);
  EXPECT_EQ(cont[2].verdict, Verdict::fail);
  EXPECT_EQ(cont[3].verdict, Verdict::fail);
}

TEST(Execute, BindErrorsAbortBeforeRunning) {
  const auto d = load_demo();
  const auto bt = sut::load_profile(testutil::read_file(testutil::data_path("bluetooth_only.json")));
  EXPECT_THROW(execute(plan(d.cases), resolver(bt), 1000), sut::BindError);
}
