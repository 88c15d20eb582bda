#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"
#include "vizprompt/cli.hpp"
#include "vizprompt/evaluation.hpp"
#include "vizprompt/llm_client.hpp"

using namespace vizprompt;
using namespace testing_support;

namespace {

std::string reply(const std::string& name) {
  for (const auto& e : read_json(fixtures() / "replies" / "pack.json")) {
    if (e["name"] == name) return e["reply"];
  }
  throw std::runtime_error("no reply " + name);
}

std::string cli() { return shell_quote(cli_path().string()); }

std::string data_flag() { return " --data-dir " + shell_quote(datasets().string()); }

/// Writes a mock fixture dir answering `prompt` with the given steps.
void write_mock(const fs::path& dir, const std::string& prompt, const nlohmann::json& steps) {
  nlohmann::json doc;
  doc["entries"] = {{{"prompt_digest", llm::prompt_digest(prompt)}, {"steps", steps}}};
  write_file(dir / "fixtures.json", doc.dump());
}

std::string prompt_via_cli(const std::string& query, const std::string& extra = "") {
  const auto r = run_command(cli() + " prompt movies " + shell_quote(query) + data_flag() + extra);
  if (r.exit_code != 0) throw std::runtime_error(r.err);
  return r.out;
}

const std::string kQuery = "Show average IMDb Rating by Genre";

}  // namespace

TEST(Cli, PromptMatchesGoldenBytes) {
  const auto r = run_command(cli() + " prompt movies 'Show gross by genre' --seed 42" + data_flag());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, read_file(fixtures() / "golden" / "movies.v5.prompt.txt"));
}

TEST(Cli, PromptFollowUpGolden) {
  const auto manifest = read_json(fixtures() / "golden" / "prompts" / "manifest.json");
  int checked = 0;
  for (const auto& e : manifest) {
    if (e["mode"] != "FollowUp" || e["json_only"] != false) continue;
    TempDir tmp;
    const std::string ds = e["dataset"];
    const std::string cmd = cli() + " prompt " + ds + " " + shell_quote(e["query"]) +
                            " --seed 7 --follow-up --no-json-only --prev " +
                            shell_quote((fixtures() / "specs" / std::string(e["previous"])).string()) +
                            data_flag() + " -o " + shell_quote((tmp / "p.txt").string());
    const auto r = run_command(cmd);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    EXPECT_EQ(read_file(tmp / "p.txt"),
              read_file(fixtures() / "golden" / "prompts" / std::string(e["file"])));
    ++checked;
  }
  EXPECT_EQ(checked, 12);
}

TEST(Cli, PromptDigestAndDataFile) {
  const std::string text = prompt_via_cli(kQuery);
  auto r = run_command(cli() + " prompt movies " + shell_quote(kQuery) + " --digest" + data_flag());
  EXPECT_EQ(r.out, llm::prompt_digest(text) + "\n");
  // A direct path to the data file produces the same prompt.
  r = run_command(cli() + " prompt " + shell_quote((datasets() / "movies.csv").string()) + " " +
                  shell_quote(kQuery));
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, text);
}

TEST(Cli, PromptUsageErrors) {
  EXPECT_EQ(run_command(cli()).exit_code, kExitUsage);
  EXPECT_EQ(run_command(cli() + " frobnicate").exit_code, kExitUsage);
  EXPECT_EQ(run_command(cli() + " prompt movies" + data_flag()).exit_code, kExitUsage);
  EXPECT_EQ(run_command(cli() + " prompt movies q --follow-up" + data_flag()).exit_code, kExitUsage);
  EXPECT_EQ(run_command(cli() + " prompt movies q --prev x.json" + data_flag()).exit_code, kExitUsage);
  EXPECT_EQ(run_command(cli() + " prompt movies ' '" + data_flag()).exit_code, kExitUsage);
  EXPECT_EQ(run_command(cli() + " prompt movies q --budget 10" + data_flag()).exit_code, kExitUsage);
  EXPECT_EQ(run_command(cli() + " prompt nowhere q" + data_flag()).exit_code, kExitUsage);
  EXPECT_EQ(run_command(cli() + " --help").exit_code, kExitOk);
}

TEST(Cli, QueryExitCodes) {
  const std::string prompt = prompt_via_cli(kQuery);
  const std::string base = cli() + " query movies " + shell_quote(kQuery) + data_flag();

  TempDir ok;
  write_mock(ok.path(), prompt, {{{"reply", reply("valid")}}});
  auto r = run_command("VIZPROMPT_MOCK_FIXTURES=" + shell_quote(ok.path().string()) + " " + base);
  EXPECT_EQ(r.exit_code, kExitOk) << r.err;
  const auto spec = nlohmann::json::parse(r.out);
  EXPECT_FALSE(spec["visList"].empty());
  EXPECT_NE(r.err.find("verdict: Valid"), std::string::npos);

  TempDir invalid;
  write_mock(invalid.path(), prompt, {{{"reply", reply("truncated_json")}}});
  r = run_command("VIZPROMPT_MOCK_FIXTURES=" + shell_quote(invalid.path().string()) + " " + base +
                  " --no-repair");
  EXPECT_EQ(r.exit_code, kExitInvalid);
  EXPECT_NE(r.err.find("MalformedJson"), std::string::npos);

  TempDir provider;
  write_mock(provider.path(), prompt,
             {{{"error", {{"kind", "HttpError"}, {"status", 401}, {"message", "bad key"}}}}});
  r = run_command("VIZPROMPT_MOCK_FIXTURES=" + shell_quote(provider.path().string()) + " " + base);
  EXPECT_EQ(r.exit_code, kExitProvider);
  EXPECT_NE(r.err.find("ProviderError"), std::string::npos);

  r = run_command("VIZPROMPT_MOCK_FIXTURES=" + shell_quote(ok.path().string()) + " " + base +
                  " --budget 10");
  EXPECT_EQ(r.exit_code, kExitUsage);
}

TEST(Cli, EvalRunAndScore) {
  TempDir tmp;
  const auto corpus = fixtures() / "corpus";
  const std::string env =
      "VIZPROMPT_MOCK_FIXTURES=" + shell_quote((corpus / "mock").string()) + " ";
  auto r = run_command(env + cli() + " eval run " + shell_quote((corpus / "corpus.jsonl").string()) +
                       " --seed 11" + data_flag() + " -o " + shell_quote((tmp / "run.json").string()));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto report = load_run_report(tmp / "run.json");
  ASSERT_EQ(report.records.size(), 20u);
  for (const auto& rec : report.records) {
    if (rec.outcome == Outcome::Failed) {
      EXPECT_EQ(rec.case_id, "c05");
    } else {
      EXPECT_GT(rec.latency_seconds, 0.0) << rec.case_id;
    }
  }

  r = run_command(cli() + " eval score " + shell_quote((tmp / "run.json").string()) + " " +
                  shell_quote((corpus / "annotations.jsonl").string()) + " --tiebreaker t -o " +
                  shell_quote((tmp / "final.json").string()));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto metrics = nlohmann::json::parse(r.out);
  EXPECT_EQ(metrics["overall_accuracy"]["percent"], "85.00");
  EXPECT_EQ(metrics["per_dataset_accuracy"]["cars"]["percent"], "83.33");
  EXPECT_EQ(metrics["per_dataset_accuracy"]["movies"]["percent"], "85.71");
  EXPECT_EQ(metrics["per_dataset_accuracy"]["superstore"]["percent"], "85.71");
  EXPECT_EQ(metrics["tiebreaks"], 1);
  const auto final_report = load_run_report(tmp / "final.json");
  ASSERT_TRUE(final_report.overall_accuracy.has_value());
  EXPECT_EQ(final_report.overall_accuracy->accurate, 17u);

  // Naming the wrong tiebreaker leaves s06 with three primary annotations.
  r = run_command(cli() + " eval score " + shell_quote((tmp / "run.json").string()) + " " +
                  shell_quote((corpus / "annotations.jsonl").string()) + " --tiebreaker nobody");
  EXPECT_EQ(r.exit_code, kExitUsage);
  EXPECT_NE(r.err.find("MissingAnnotation"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("s06"), std::string::npos) << r.err;
}

TEST(Cli, IngestRegistersDataset) {
  TempDir tmp;
  write_file(tmp / "pets.csv", "Name,Age,Weight\nRex,3,12.5\nTom,5,4.1\n");
  const auto r = run_command(cli() + " ingest " + shell_quote((tmp / "pets.csv").string()) +
                             " --data-dir " + shell_quote((tmp / "data").string()));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto schema = nlohmann::json::parse(r.out);
  EXPECT_EQ(schema["id"], "pets");
  EXPECT_EQ(schema["attributes"].size(), 3u);
  EXPECT_EQ(run_command(cli() + " prompt pets 'Show age by name' --data-dir " +
                        shell_quote((tmp / "data").string()))
                .exit_code,
            0);
}

TEST(Cli, InProcessEntryPoint) {
  std::ostringstream out, err;
  EXPECT_EQ(run_cli({"prompt", "movies", "Show gross by genre", "--seed", "42", "--data-dir",
                     datasets().string()},
                    out, err),
            kExitOk);
  EXPECT_EQ(out.str(), read_file(fixtures() / "golden" / "movies.v5.prompt.txt"));
}
