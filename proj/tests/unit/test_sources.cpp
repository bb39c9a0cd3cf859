#include <gtest/gtest.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "autosec/fetch.hpp"
#include "autosec/sources.hpp"
#include "oracles.hpp"

using namespace autosec;
using namespace autosec::sources;

TEST(Sources, DemoLibraryParses) {
  std::vector<std::string> warnings;
  const auto threats = parse_threats(testutil::read_file(testutil::data_path("demo_threats.jsonl")), &warnings);
  ASSERT_EQ(threats.size(), 10u);
  EXPECT_TRUE(warnings.empty());
  EXPECT_EQ(threats[0].id, "TL-0001");
  EXPECT_EQ(threats[0].attack_class, AttackClass::diagnostic_abuse);
  EXPECT_EQ(threats[0].severity, Severity::critical);
  EXPECT_EQ(classify(threats[0]), BoxKind::black);
  const auto reqs = parse_requirements(testutil::read_file(testutil::data_path("demo_requirements.jsonl")));
  ASSERT_EQ(reqs.size(), 5u);
  EXPECT_EQ(classify(reqs[0]), BoxKind::white);
}

TEST(Sources, SerializeRoundTrip) {
  const auto text = testutil::read_file(testutil::data_path("demo_threats.jsonl"));
  const auto threats = parse_threats(text);
  EXPECT_EQ(parse_threats(serialize_threats(threats)), threats);
  const auto reqs = parse_requirements(testutil::read_file(testutil::data_path("demo_requirements.jsonl")));
  EXPECT_EQ(parse_requirements(serialize_requirements(reqs)), reqs);
}

TEST(Sources, EmptyDocumentWarns) {
  std::vector<std::string> warnings;
  EXPECT_TRUE(parse_threats("\n\n", &warnings).empty());
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("EmptyLibrary"), std::string::npos);
}

TEST(Sources, CrlfLinesAccepted) {
  auto text = testutil::read_file(testutil::data_path("demo_requirements.jsonl"));
  std::string crlf;
  for (char c : text) crlf += c == '\n' ? std::string("\r\n") : std::string(1, c);
  EXPECT_EQ(parse_requirements(crlf).size(), 5u);
}

TEST(Sources, CorruptedFixturesReportExactLine) {
  const auto manifest = nlohmann::json::parse(testutil::read_file(testutil::test_path("fixtures/manifest.json")));
  ASSERT_EQ(manifest.size(), 10u);
  for (const auto& c : manifest) {
    const auto file = c["file"].get<std::string>();
    const auto text = testutil::read_file(testutil::test_path("fixtures/" + file));
    std::vector<SourceError> errors;
    if (c["kind"] == "threats") errors = parse_threats_collect(text).errors;
    else errors = parse_requirements_collect(text).errors;
    ASSERT_EQ(errors.size(), 1u) << file;
    EXPECT_EQ(errors[0].line(), c["line"].get<std::size_t>()) << file;
    EXPECT_EQ(to_string(errors[0].code()), c["code"].get<std::string>()) << file;
  }
}

TEST(Sources, CollectKeepsGoodRecordsAndAllErrors) {
  const std::string doc =
      "{\"id\":\"A\",\"text\":\"t\",\"component_tags\":[],\"check_class\":\"rate-limiting\"}\n"
      "nope\n"
      "{\"id\":\"A\",\"text\":\"t\",\"component_tags\":[],\"check_class\":\"rate-limiting\"}\n"
      "{\"id\":\"B\",\"text\":\"t\",\"component_tags\":[],\"check_class\":\"reset-recovery\"}\n";
  const auto out = parse_requirements_collect(doc);
  EXPECT_EQ(out.records.size(), 2u);
  ASSERT_EQ(out.errors.size(), 2u);
  EXPECT_EQ(out.errors[0].line(), 2u);
  EXPECT_EQ(out.errors[1].line(), 3u);
  EXPECT_EQ(out.errors[1].code(), SourceErrc::DuplicateId);
  EXPECT_THROW(parse_requirements(doc), SourceError);
}

TEST(Sources, RandomCorruptionNeverCrashes) {
  const auto text = testutil::read_file(testutil::data_path("demo_threats.jsonl"));
  CounterRng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    std::string t = text;
    const auto edits = 1 + rng.below(4);
    for (std::uint64_t e = 0; e < edits; ++e) t[rng.below(t.size())] = static_cast<char>(rng.byte());
    ParseOutcome<ThreatRecord> out;
    ASSERT_NO_THROW(out = parse_threats_collect(t));
    const auto lines = static_cast<std::size_t>(std::count(t.begin(), t.end(), '\n')) + 1;
    for (const auto& err : out.errors) {
      EXPECT_GE(err.line(), 1u);
      EXPECT_LE(err.line(), lines);
    }
  }
}

namespace {

class StubServer {
 public:
  StubServer() {
    server_.Get("/library", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(testutil::read_file(testutil::data_path("demo_threats.jsonl")), "application/json");
    });
    server_.Get("/slow", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(800));
      res.set_content("{}", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(FetchThreats, ServedLibraryParses) {
  StubServer s;
  const auto body = fetch_threats(s.url("/library"));
  EXPECT_EQ(parse_threats(body).size(), 10u);
}

TEST(FetchThreats, HttpErrorStatus) {
  StubServer s;
  try {
    fetch_threats(s.url("/missing"));
    FAIL();
  } catch (const FetchError& e) {
    EXPECT_EQ(e.code(), FetchErrc::HttpStatus);
    EXPECT_EQ(e.status(), 404);
  }
}

TEST(FetchThreats, SlowServerTimesOut) {
  StubServer s;
  try {
    fetch_threats(s.url("/slow"), std::chrono::milliseconds(200));
    FAIL();
  } catch (const FetchError& e) {
    EXPECT_EQ(e.code(), FetchErrc::Timeout);
  }
}

TEST(FetchThreats, UnreachableHost) {
  try {
    fetch_threats("http://127.0.0.1:1/library", std::chrono::milliseconds(500));
    FAIL();
  } catch (const FetchError& e) {
    EXPECT_EQ(e.code(), FetchErrc::NetworkError);
  }
  EXPECT_THROW(fetch_threats("ftp://example.invalid/x"), FetchError);
}
