#include <gtest/gtest.h>

#include "support.hpp"
#include "vizprompt/registry.hpp"
#include "vizprompt/repair.hpp"
#include "vizprompt/session.hpp"

using namespace vizprompt;
using namespace testing_support;

namespace {

const DatasetRegistry& registry() {
  static DatasetRegistry r(datasets());
  return r;
}

std::string reply(const std::string& name) {
  for (const auto& e : read_json(fixtures() / "replies" / "pack.json")) {
    if (e["name"] == name) return e["reply"];
  }
  throw std::runtime_error("no reply " + name);
}

const std::string kQuery = "Show average IMDb Rating by Genre";

struct Fixture {
  std::shared_ptr<const Dataset> dataset = registry().get("movies");
  std::string prompt = render(assemble(*dataset, std::vector<std::string>{kQuery}, PromptConfig{}));
  llm::MockProvider mock;
  std::vector<std::chrono::milliseconds> slept;
  RepairContext ctx{*dataset, kQuery, 1, RecordingSleeper{&slept}};

  ValidationReport report_for(const std::string& raw) const {
    return analyze(raw, *dataset, kQuery).report;
  }
};

}  // namespace

TEST(RepairPrompt, ListsOnlyErrorsAndRestatesSchema) {
  ValidationReport report;
  report.add(Severity::Error, FindingCode::UnknownAttribute, "attribute 'Director' is missing");
  report.add(Severity::Warning, FindingCode::UngroundedPhrase, "phrase 'x'");
  const std::string p = build_repair_prompt("ORIGINAL\n\n", report);
  EXPECT_TRUE(p.starts_with("ORIGINAL\n\n# [repair]\n"));
  EXPECT_NE(p.find("- UnknownAttribute: attribute 'Director' is missing"), std::string::npos);
  EXPECT_EQ(p.find("UngroundedPhrase"), std::string::npos);
  EXPECT_NE(p.find(kResponseSchemaLeadIn), std::string::npos);
  EXPECT_NE(p.find(response_exemplar()), std::string::npos);
  EXPECT_TRUE(p.ends_with(std::string(kJsonOnlyInstruction) + "\n"));
}

TEST(Repair, MalformedThenValid) {
  Fixture f;
  const std::string bad = reply("truncated_json");
  const auto bad_report = f.report_for(bad);
  ASSERT_EQ(bad_report.codes(), std::vector<FindingCode>{FindingCode::MalformedJson});
  f.mock.add_reply_for_prompt(build_repair_prompt(f.prompt, bad_report), reply("valid"));

  const auto result = repair(bad, bad_report, f.prompt, f.mock, {}, f.ctx);
  ASSERT_EQ(result.trail.size(), 2u);
  EXPECT_EQ(result.trail[0].raw_text, bad);
  EXPECT_EQ(result.trail[0].report, bad_report);
  EXPECT_EQ(result.trail[1].raw_text, reply("valid"));
  EXPECT_EQ(result.report.verdict(), Verdict::Valid);
  EXPECT_EQ(result.specification, parse_specification(reply("valid")));
  EXPECT_EQ(result.provider_attempts, 1);
  EXPECT_GT(result.latency_seconds, 0.0);
  EXPECT_EQ(f.mock.calls(), 1u);
}

TEST(Repair, MalformedTwiceFails) {
  Fixture f;
  const std::string bad = reply("truncated_json");
  const auto bad_report = f.report_for(bad);
  f.mock.add_reply_for_prompt(build_repair_prompt(f.prompt, bad_report), bad);
  try {
    repair(bad, bad_report, f.prompt, f.mock, {}, f.ctx);
    FAIL();
  } catch (const RepairFailed& e) {
    ASSERT_EQ(e.trail().size(), 2u);
    EXPECT_EQ(e.trail()[1].report.codes(), std::vector<FindingCode>{FindingCode::MalformedJson});
    EXPECT_EQ(e.provider_attempts(), 1);
  }
}

TEST(Repair, EachRoundUsesLatestReport) {
  Fixture f;
  f.ctx.max_rounds = 2;
  const std::string bad = reply("truncated_json");
  const auto r0 = f.report_for(bad);
  const std::string second = reply("unknown_attribute");
  const auto r1 = analyze(second, *f.dataset, kQuery).report;
  ASSERT_EQ(r1.verdict(), Verdict::Invalid);
  f.mock.add_reply_for_prompt(build_repair_prompt(f.prompt, r0), second);
  f.mock.add_reply_for_prompt(build_repair_prompt(f.prompt, r1), reply("valid"));
  const auto result = repair(bad, r0, f.prompt, f.mock, {}, f.ctx);
  EXPECT_EQ(result.trail.size(), 3u);
  EXPECT_EQ(result.provider_attempts, 2);
}

TEST(Repair, WarningsEndRepair) {
  Fixture f;
  const std::string bad = reply("truncated_json");
  const auto r0 = f.report_for(bad);
  const std::string warn = reply("ungrounded_phrase");
  f.mock.add_reply_for_prompt(build_repair_prompt(f.prompt, r0), warn);
  RepairContext ctx{*f.dataset, "Show average IMDb Rating by Genre", 1, {}};
  const auto result = repair(bad, r0, f.prompt, f.mock, {}, ctx);
  EXPECT_EQ(result.report.verdict(), Verdict::ValidWithWarnings);
}

TEST(Repair, RejectsNonInvalidReport) {
  Fixture f;
  EXPECT_THROW(repair(reply("valid"), f.report_for(reply("valid")), f.prompt, f.mock, {}, f.ctx),
               std::invalid_argument);
  EXPECT_EQ(f.mock.calls(), 0u);
}

TEST(Repair, ProviderErrorsPropagate) {
  Fixture f;
  const std::string bad = reply("truncated_json");
  EXPECT_THROW(repair(bad, f.report_for(bad), f.prompt, f.mock, {}, f.ctx), llm::ProviderError);
}

TEST(Repair, ThroughSessionRecordsAllReplies) {
  Fixture f;
  auto session = std::make_shared<Session>("s1", f.dataset, 0);
  const std::string prompt = render(session->prompt_for(kQuery, QueryMode::Initial, {}));
  const std::string bad = reply("truncated_json");
  f.mock.add_reply_for_prompt(prompt, bad);
  f.mock.add_reply_for_prompt(build_repair_prompt(prompt, f.report_for(bad)), reply("valid"));
  const Turn t = session->ask(kQuery, QueryMode::Initial, f.mock, {});
  ASSERT_TRUE(t.succeeded());
  EXPECT_EQ(t.raw_responses, (std::vector<std::string>{bad, reply("valid")}));
  EXPECT_EQ(t.attempts, 2);
  EXPECT_FALSE(t.error.has_value());

  PipelineOptions no_repair;
  no_repair.repair_rounds = 0;
  auto other = std::make_shared<Session>("s2", f.dataset, 0);
  const Turn u = other->ask(kQuery, QueryMode::Initial, f.mock, {}, no_repair);
  EXPECT_FALSE(u.succeeded());
  ASSERT_TRUE(u.error.has_value());
  EXPECT_EQ(u.error->code, "InvalidSpecification");
  EXPECT_EQ(u.raw_responses.size(), 1u);
}
