#include <gtest/gtest.h>

#include "autosec/report.hpp"
#include "oracles.hpp"

using namespace autosec;
using namespace autosec::report;
using exec::Verdict;

namespace {

struct Demo {
  sut::SutProfile profile;
  std::vector<sources::ThreatRecord> threats;
  std::vector<sources::RequirementRecord> requirements;
  orchestrator::Campaign campaign;
};

Demo load_demo(const std::string& profile_file = "demo_vulnerable.json") {
  Demo d;
  d.profile = sut::load_profile(testutil::read_file(testutil::data_path(profile_file)));
  d.threats = sources::parse_threats(testutil::read_file(testutil::data_path("demo_threats.jsonl")));
  d.requirements = sources::parse_requirements(testutil::read_file(testutil::data_path("demo_requirements.jsonl")));
  auto cases = blocks::derive_from_threats(d.threats, d.profile).cases;
  auto r = blocks::derive_from_requirements(d.requirements, d.profile).cases;
  cases.insert(cases.end(), r.begin(), r.end());
  d.campaign = orchestrator::plan(cases, {}, 0, d.profile.name);
  return d;
}

std::vector<orchestrator::TestResult> run(const Demo& d) {
  return orchestrator::execute(
      d.campaign, [&](const blocks::TestCase& tc) { return sut::bind(*blocks::find_block(tc.block), tc, d.profile); },
      1'000'000);
}

}  // namespace

TEST(Aggregate, EmptyInputs) {
  const auto rep = aggregate({}, {}, {}, {});
  EXPECT_TRUE(rep.findings.empty());
  EXPECT_EQ(rep.coverage.ratio(), 0.0);
  EXPECT_EQ(rep.counts, Counts{});
  EXPECT_EQ(render_json(rep), testutil::read_file(testutil::test_path("golden/empty_report.json")));
  EXPECT_NE(render_text(rep).find("0 findings"), std::string::npos);
}

TEST(Aggregate, DemoFindingsMatchFlagOracle) {
  const auto d = load_demo();
  const auto results = run(d);
  const auto rep = aggregate(d.campaign, results, d.threats, d.requirements, &d.profile);

  std::size_t expected_fails = 0;
  for (const auto& n : d.campaign.nodes) expected_fails += oracle::expect_fail(n.test_case.block, *d.profile.virtual_ecu());
  EXPECT_EQ(expected_fails, 16u);
  ASSERT_EQ(rep.findings.size(), expected_fails);
  EXPECT_EQ(rep.counts.fail, expected_fails);
  EXPECT_EQ(rep.counts.total(), d.campaign.nodes.size());

  std::set<std::string> ids;
  for (const auto& f : rep.findings) {
    EXPECT_TRUE(ids.insert(f.id).second);
    EXPECT_FALSE(f.evidence_ref.empty());
    const bool known = std::any_of(d.threats.begin(), d.threats.end(), [&](auto& t) { return t.id == f.source_trace.id; }) ||
                       std::any_of(d.requirements.begin(), d.requirements.end(), [&](auto& r) { return r.id == f.source_trace.id; });
    EXPECT_TRUE(known) << f.source_trace.id;
    if (f.source_trace.kind == blocks::SourceKind::requirement) {
      EXPECT_EQ(f.severity, sources::Severity::medium);
    }
  }
  // 8 of 10 threats share a tag with the profile; TL-0006 and TL-0009 do not.
  EXPECT_EQ(rep.coverage.covered, 8u);
  EXPECT_EQ(rep.coverage.total, 10u);
  EXPECT_DOUBLE_EQ(rep.coverage.ratio(), 0.8);
  EXPECT_EQ(rep.uncovered, (std::vector<std::string>{"TL-0006", "TL-0009"}));
  EXPECT_EQ(rep.requirements, (RequirementCompliance{5, 5, 4}));
}

TEST(Aggregate, HardenedHasNoFindings) {
  const auto d = load_demo("demo_hardened.json");
  const auto rep = aggregate(d.campaign, run(d), d.threats, d.requirements, &d.profile);
  EXPECT_TRUE(rep.findings.empty());
  EXPECT_EQ(rep.counts.pass, d.campaign.nodes.size());
}

TEST(Aggregate, SkippedNodeDoesNotCover) {
  const auto d = load_demo("demo_hardened.json");
  auto results = run(d);
  // TL-0004 has a single case; mark it skipped.
  for (auto& r : results) {
    if (r.test_case_id.rfind("TL-0004/", 0) == 0) r.verdict = Verdict::skipped;
  }
  const auto rep = aggregate(d.campaign, results, d.threats, d.requirements, &d.profile);
  EXPECT_EQ(rep.coverage.covered, 7u);
  EXPECT_EQ(rep.uncovered, (std::vector<std::string>{"TL-0004", "TL-0006", "TL-0009"}));
}

TEST(Aggregate, InconsistentInputsRejected) {
  const auto d = load_demo();
  auto results = run(d);
  auto renamed = results;
  renamed[0].test_case_id = "nope";
  EXPECT_THROW(aggregate(d.campaign, renamed, d.threats, d.requirements), ReportError);
  EXPECT_THROW(aggregate(d.campaign, results, {}, d.requirements), ReportError);
  auto extra = results;
  extra.push_back(results[0]);
  EXPECT_THROW(aggregate(d.campaign, extra, d.threats, d.requirements), ReportError);
}

TEST(Render, TextOrdersBySeverityThenId) {
  Report rep;
  rep.findings.push_back({"F-001", sources::Severity::low, {blocks::SourceKind::threat, "T-1"}, "c1", "FuzzIsoTp", "x", {0}, "d"});
  rep.findings.push_back({"F-002", sources::Severity::high, {blocks::SourceKind::threat, "T-2"}, "c2", "FuzzIsoTp", "x", {0}, "d"});
  rep.findings.push_back({"F-003", sources::Severity::high, {blocks::SourceKind::threat, "T-3"}, "c3", "FuzzIsoTp", "x", {0}, "d"});
  const auto text = render_text(rep);
  EXPECT_LT(text.find("F-002"), text.find("F-003"));
  EXPECT_LT(text.find("F-003"), text.find("F-001"));
}

TEST(Render, JsonIsStableAndDistinguishesReports) {
  const auto d = load_demo();
  const auto results = run(d);
  const auto a = aggregate(d.campaign, results, d.threats, d.requirements, &d.profile);
  const auto b = aggregate(d.campaign, results, d.threats, d.requirements, &d.profile);
  EXPECT_EQ(render_json(a), render_json(b));
  auto c = a;
  c.findings.back().severity = sources::Severity::low;
  EXPECT_NE(render_json(a), render_json(c));
  auto e = a;
  e.results[3].result.evidence[0].tick += 1;
  EXPECT_NE(render_json(a), render_json(e));
}

TEST(Render, DemoGoldens) {
  const auto d = load_demo();
  const auto rep = aggregate(d.campaign, run(d), d.threats, d.requirements, &d.profile);
  EXPECT_EQ(render_json(rep), testutil::read_file(testutil::test_path("golden/demo_report.json")));
  EXPECT_EQ(render_text(rep), testutil::read_file(testutil::test_path("golden/demo_report.txt")));
}
