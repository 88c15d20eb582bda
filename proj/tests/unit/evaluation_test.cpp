#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "support.hpp"
#include "vizprompt/evaluation.hpp"

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

/// Percentage truncated to two decimals by schoolbook long division.
std::string long_division_percent(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return "0.00";
  std::uint64_t rem = num * 100;
  std::string out = std::to_string(rem / den) + ".";
  rem %= den;
  for (int i = 0; i < 2; ++i) {
    rem *= 10;
    out += static_cast<char>('0' + rem / den);
    rem %= den;
  }
  return out;
}

QueryCase make_case(std::string id, std::string dataset, std::string query,
                    QueryMode mode = QueryMode::Initial,
                    std::optional<std::string> group = std::nullopt) {
  return QueryCase{std::move(id), std::move(dataset), std::move(query), mode, std::move(group), {}};
}

std::string prompt_text(const std::string& dataset, const std::string& query, std::uint64_t seed,
                        const AnalyticSpecification* previous = nullptr) {
  PromptConfig config;
  config.seed = seed;
  config.mode = previous ? QueryMode::FollowUp : QueryMode::Initial;
  return render(assemble(*registry().get(dataset), std::vector<std::string>{query}, config, previous));
}

Annotation ann(std::string case_id, std::string who, Label label) {
  Annotation a{std::move(case_id), std::move(who), label, {}, std::nullopt};
  if (label == Label::Inaccurate) a.reasons = {Reason::MissingTask};
  return a;
}

RunReport synthetic_report(const std::vector<std::pair<std::string, bool>>& cases,
                           std::mt19937_64& rng) {
  RunReport r;
  r.run_id = "run-test";
  std::uniform_real_distribution<double> latency(0.5, 40.0);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    RunRecord rec;
    rec.case_id = "c" + std::to_string(i);
    rec.dataset_id = cases[i].first;
    rec.outcome = Outcome::Valid;
    rec.latency_seconds = latency(rng);
    r.records.push_back(rec);
    Reconciliation rc;
    rc.case_id = rec.case_id;
    rc.final_label = cases[i].second ? Label::Accurate : Label::Inaccurate;
    r.reconciliation.push_back(rc);
  }
  return r;
}

}  // namespace

TEST(Accuracy, PublishedFigures) {
  EXPECT_EQ((Accuracy{644, 740}.percent()), "87.02");
  EXPECT_EQ((Accuracy{474, 740}.percent()), "64.05");
  EXPECT_EQ((Accuracy{644, 740}.hundredths()), 8702u);
}

TEST(Accuracy, EdgeCases) {
  EXPECT_EQ((Accuracy{0, 17}.percent()), "0.00");
  EXPECT_EQ((Accuracy{17, 17}.percent()), "100.00");
  EXPECT_EQ((Accuracy{0, 0}.percent()), "0.00");
  EXPECT_EQ((Accuracy{1, 3}.percent()), "33.33");
  EXPECT_EQ((Accuracy{2, 3}.percent()), "66.66");
  EXPECT_EQ((Accuracy{1, 20}.percent()), "5.00");
}

TEST(Accuracy, MatchesLongDivision) {
  for (std::uint64_t den = 1; den <= 400; ++den) {
    for (std::uint64_t num = 0; num <= den; ++num) {
      ASSERT_EQ((Accuracy{num, den}.percent()), long_division_percent(num, den)) << num << "/" << den;
    }
  }
}

TEST(Score, PermutationInvariant) {
  std::mt19937_64 rng(3);
  std::vector<std::pair<std::string, bool>> cases;
  for (int i = 0; i < 60; ++i) cases.emplace_back(i % 3 == 0 ? "cars" : "movies", rng() % 4 != 0);
  auto report = synthetic_report(cases, rng);
  const auto base_metrics = score(report);
  const auto base = to_json(base_metrics).dump();
  for (int k = 0; k < 20; ++k) {
    std::shuffle(report.records.begin(), report.records.end(), rng);
    std::shuffle(report.reconciliation.begin(), report.reconciliation.end(), rng);
    const auto m = score(report);
    EXPECT_EQ(to_json(m)["overall_accuracy"], nlohmann::ordered_json::parse(base)["overall_accuracy"]);
    EXPECT_EQ(to_json(m)["per_dataset_accuracy"],
              nlohmann::ordered_json::parse(base)["per_dataset_accuracy"]);
    EXPECT_NEAR(m.mean_latency_seconds, base_metrics.mean_latency_seconds, 1e-9);
    EXPECT_EQ(m.label_counts, base_metrics.label_counts);
  }
}

TEST(Score, PerDatasetRecomposesExactly) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> names{"cars", "movies", "superstore"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<std::string, bool>> cases;
    const int n = 1 + static_cast<int>(rng() % 120);
    for (int i = 0; i < n; ++i) cases.emplace_back(names[rng() % 3], rng() % 5 != 0);
    const auto m = score(synthetic_report(cases, rng));
    std::uint64_t acc = 0, total = 0;
    for (const auto& [id, a] : m.per_dataset) {
      acc += a.accurate;
      total += a.total;
    }
    ASSERT_EQ(acc, m.overall.accurate);
    ASSERT_EQ(total, m.overall.total);
    // Weighted ratios: sum(ratio_d * n_d) == overall ratio * N, within float noise.
    double weighted = 0;
    for (const auto& [id, a] : m.per_dataset) weighted += a.ratio() * double(a.total);
    ASSERT_NEAR(weighted / double(total), m.overall.ratio(), 1e-12);
  }
}

TEST(Score, MeanLatencyBruteForce) {
  std::mt19937_64 rng(5);
  std::vector<std::pair<std::string, bool>> cases;
  for (int i = 0; i < 37; ++i) cases.emplace_back("movies", true);
  const auto report = synthetic_report(cases, rng);
  long double sum = 0;
  for (const auto& r : report.records) sum += r.latency_seconds;
  EXPECT_NEAR(score(report).mean_latency_seconds, double(sum / 37), 1e-9);
}

TEST(Score, CountsAndUnreconciled) {
  std::mt19937_64 rng(1);
  auto report = synthetic_report({{"cars", true}, {"cars", false}, {"movies", true}}, rng);
  report.reconciliation[1].tiebreaker_used = true;
  const auto m = score(report);
  EXPECT_EQ(m.label_counts.at("Accurate"), 2u);
  EXPECT_EQ(m.label_counts.at("Inaccurate"), 1u);
  EXPECT_EQ(m.outcome_counts.at("Valid"), 3u);
  EXPECT_EQ(m.tiebreaks, 1u);
  EXPECT_EQ(m.per_dataset.at("cars").percent(), "50.00");

  report.reconciliation.pop_back();
  try {
    score(report);
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.kind(), EvaluationError::Kind::UnreconciledCases);
  }
}

TEST(Reconcile, AgreementAndTiebreak) {
  const auto out = reconcile({ann("a", "p1", Label::Accurate), ann("a", "p2", Label::Accurate),
                              ann("b", "p1", Label::Accurate), ann("b", "p2", Label::Inaccurate),
                              ann("b", "tb", Label::Inaccurate), ann("c", "p1", Label::NoOutput),
                              ann("c", "p2", Label::NoOutput)},
                             "tb");
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].final_label, Label::Accurate);
  EXPECT_FALSE(out[0].tiebreaker_used);
  EXPECT_EQ(out[1].final_label, Label::Inaccurate);
  EXPECT_TRUE(out[1].tiebreaker_used);
  EXPECT_EQ(out[1].labels.size(), 2u);
  EXPECT_EQ(out[2].final_label, Label::NoOutput);
}

TEST(Reconcile, TiebreakerIgnoredOnAgreement) {
  const auto out = reconcile({ann("a", "p1", Label::Accurate), ann("a", "p2", Label::Accurate),
                              ann("a", "tb", Label::Inaccurate)},
                             "tb");
  EXPECT_EQ(out[0].final_label, Label::Accurate);
  EXPECT_FALSE(out[0].tiebreaker_used);
}

TEST(Reconcile, Errors) {
  auto kind_of = [](auto fn) {
    try {
      fn();
    } catch (const EvaluationError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no error";
    return EvaluationError::Kind::EmptyCorpus;
  };
  EXPECT_EQ(kind_of([] { reconcile({ann("a", "p1", Label::Accurate)}, "tb"); }),
            EvaluationError::Kind::MissingAnnotation);
  EXPECT_EQ(kind_of([] {
              reconcile({ann("a", "p1", Label::Accurate), ann("a", "p2", Label::Accurate),
                         ann("a", "p3", Label::Accurate)},
                        "tb");
            }),
            EvaluationError::Kind::MissingAnnotation);
  EXPECT_EQ(kind_of([] {
              reconcile({ann("a", "p1", Label::Accurate), ann("a", "p2", Label::Inaccurate)}, "tb");
            }),
            EvaluationError::Kind::MissingTiebreaker);
  EXPECT_EQ(kind_of([] {
              reconcile({ann("a", "p1", Label::Accurate), ann("a", "p2", Label::Accurate)}, "tb",
                        {"a", "b"});
            }),
            EvaluationError::Kind::MissingAnnotation);
}

TEST(Annotations, Invariants) {
  EXPECT_NO_THROW(parse_annotations(
      R"({"case_id": "a", "annotator_id": "x", "label": "Inaccurate", "reasons": ["MissingTask"]})"));
  for (const char* bad :
       {R"({"case_id": "a", "annotator_id": "x", "label": "Inaccurate", "reasons": []})",
        R"({"case_id": "a", "annotator_id": "x", "label": "Accurate", "reasons": ["Other"]})",
        R"({"case_id": "a", "annotator_id": "x", "label": "Great", "reasons": []})",
        R"({"case_id": "a", "annotator_id": "x", "label": "Inaccurate", "reasons": ["Vibes"]})",
        R"({"annotator_id": "x", "label": "Accurate"})", "not json"}) {
    EXPECT_THROW(parse_annotations(bad), EvaluationError) << bad;
  }
}

TEST(Annotations, JsonRoundTrip) {
  Annotation a{"m05", "a1", Label::Inaccurate, {Reason::MissingTask, Reason::IncorrectAttribute}, "no sort"};
  EXPECT_EQ(annotation_from_json(nlohmann::json::parse(to_json(a).dump())), a);
  const auto all = load_annotations(fixtures() / "corpus" / "annotations.jsonl");
  EXPECT_GE(all.size(), 40u);
}

TEST(Corpus, ParseAndErrors) {
  const auto cases = parse_corpus(
      "{\"case_id\": \"1\", \"dataset_id\": \"cars\", \"query\": \"q\", \"mode\": \"Initial\"}\n\n"
      "{\"case_id\": \"2\", \"dataset_id\": \"cars\", \"query\": \"f\", \"mode\": \"FollowUp\", "
      "\"sequence_group\": \"g\", \"ambiguity_candidates\": {\"hp\": [\"Horsepower\"]}}\n");
  ASSERT_EQ(cases.size(), 2u);
  EXPECT_EQ(cases[1].sequence_group, "g");
  EXPECT_EQ(cases[1].ambiguity_candidates->at("hp"), std::vector<std::string>{"Horsepower"});
  EXPECT_EQ(query_case_from_json(nlohmann::json::parse(to_json(cases[1]).dump())), cases[1]);

  for (const char* bad :
       {"{\"case_id\": \"1\", \"dataset_id\": \"cars\", \"query\": \"f\", \"mode\": \"FollowUp\"}",
        "{\"case_id\": \"1\", \"dataset_id\": \"cars\", \"query\": \"q\", \"mode\": \"Sideways\"}",
        "{\"case_id\": \"1\", \"dataset_id\": \"cars\", \"query\": \"q\"}\n"
        "{\"case_id\": \"1\", \"dataset_id\": \"cars\", \"query\": \"r\"}",
        "{broken"}) {
    try {
      parse_corpus(bad);
      FAIL() << bad;
    } catch (const EvaluationError& e) {
      EXPECT_EQ(e.kind(), EvaluationError::Kind::InvalidRecord);
    }
  }
  try {
    parse_corpus("{\"case_id\": \"1\", \"dataset_id\": \"cars\", \"query\": \"q\"}\n{oops");
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(RunCorpus, ThreeCasesEachWithLatency) {
  llm::MockProvider mock;
  const std::uint64_t seed = 4;
  mock.add_reply_for_prompt(prompt_text("movies", "Show average IMDb Rating by Genre", seed),
                            reply("valid"));
  mock.add_reply_for_prompt(prompt_text("movies", "Show total profit across genres", seed),
                            reply("field_title_mismatch"));
  mock.add_reply_for_prompt(prompt_text("superstore", "Show profit by region", seed),
                            reply("other_dataset_valid"));
  const std::vector<QueryCase> corpus{
      make_case("a", "movies", "Show average IMDb Rating by Genre"),
      make_case("b", "movies", "Show total profit across genres"),
      make_case("c", "superstore", "Show profit by region")};
  RunOptions options;
  options.seed = seed;
  const auto report = run_corpus(corpus, registry(), mock, {}, options);
  ASSERT_EQ(report.records.size(), 3u);
  EXPECT_EQ(report.seed, seed);
  EXPECT_TRUE(report.run_id.starts_with("run-"));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(report.records[i].case_id, corpus[i].case_id);
    EXPECT_GT(report.records[i].latency_seconds, 0.0);
  }
  EXPECT_EQ(report.records[0].outcome, Outcome::Valid);
  EXPECT_EQ(report.records[1].outcome, Outcome::ValidWithWarnings);
  EXPECT_NE(report.records[2].outcome, Outcome::Failed);
  EXPECT_FALSE(report.overall_accuracy.has_value());
}

TEST(RunCorpus, BrokenChain) {
  llm::MockProvider mock;
  mock.add_reply_for_prompt(prompt_text("movies", "Show average IMDb Rating by Genre", 0),
                            reply("truncated_json"));
  const std::vector<QueryCase> corpus{
      make_case("i", "movies", "Show average IMDb Rating by Genre", QueryMode::Initial, "g"),
      make_case("f", "movies", "Now make it a line chart", QueryMode::FollowUp, "g")};
  RunOptions options;
  options.pipeline.repair_rounds = 0;
  const auto report = run_corpus(corpus, registry(), mock, {}, options);
  EXPECT_EQ(report.records[0].outcome, Outcome::Failed);
  EXPECT_EQ(report.records[0].error_code, "InvalidSpecification");
  EXPECT_TRUE(report.records[0].report.has(FindingCode::MalformedJson));
  EXPECT_EQ(report.records[1].outcome, Outcome::BrokenChain);
  EXPECT_EQ(report.records[1].error_code, "BrokenChain");
  EXPECT_TRUE(report.records[1].note.has_value());
  EXPECT_EQ(mock.calls(), 1u);
}

TEST(RunCorpus, ChainFollowUpSeesPredecessor) {
  llm::MockProvider mock;
  const auto prev = parse_specification(reply("valid"));
  mock.add_reply_for_prompt(prompt_text("movies", "Show average IMDb Rating by Genre", 0),
                            reply("valid"));
  mock.add_reply_for_prompt(prompt_text("movies", "Show average IMDb Rating by Genre as a bar", 0, &prev),
                            reply("valid"));
  const std::vector<QueryCase> corpus{
      make_case("i", "movies", "Show average IMDb Rating by Genre", QueryMode::Initial, "g"),
      make_case("x", "cars", "Unrelated", QueryMode::Initial),
      make_case("f", "movies", "Show average IMDb Rating by Genre as a bar", QueryMode::FollowUp, "g")};
  const auto report = run_corpus(corpus, registry(), mock, {});
  EXPECT_EQ(report.records[2].outcome, Outcome::Valid);
  EXPECT_EQ(report.records[1].outcome, Outcome::Failed);
}

TEST(RunCorpus, Errors) {
  llm::MockProvider mock;
  auto kind_of = [&](const std::vector<QueryCase>& corpus) {
    try {
      run_corpus(corpus, registry(), mock, {});
    } catch (const EvaluationError& e) {
      return e.kind();
    }
    ADD_FAILURE();
    return EvaluationError::Kind::MissingTiebreaker;
  };
  EXPECT_EQ(kind_of({}), EvaluationError::Kind::EmptyCorpus);
  EXPECT_EQ(kind_of({make_case("a", "nope", "q")}), EvaluationError::Kind::UnknownDataset);
  EXPECT_EQ(kind_of({make_case("a", "cars", "q", QueryMode::Initial, "g"),
                     make_case("b", "movies", "q", QueryMode::FollowUp, "g")}),
            EvaluationError::Kind::InvalidRecord);
  EXPECT_EQ(mock.calls(), 0u);
}

TEST(RunCorpus, ConcurrencyKeepsCorpusOrder) {
  llm::MockProvider mock;
  std::vector<QueryCase> corpus;
  for (int i = 0; i < 24; ++i) {
    const std::string q = "Show average IMDb Rating by Genre " + std::to_string(i);
    mock.add_reply_for_prompt(prompt_text("movies", q, 0), reply("valid"));
    corpus.push_back(make_case("c" + std::to_string(i), "movies", q));
  }
  for (std::size_t workers : {std::size_t{1}, std::size_t{4}, std::size_t{0}}) {
    RunOptions options;
    options.max_concurrency = workers;
    const auto report = run_corpus(corpus, registry(), mock, {}, options);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      ASSERT_EQ(report.records[i].case_id, corpus[i].case_id);
      ASSERT_EQ(report.records[i].query, corpus[i].query);
      // Each query text differs, so ungrounded phrase warnings are not expected.
      ASSERT_NE(report.records[i].outcome, Outcome::Failed);
    }
  }
}

TEST(RunReportJson, RoundTripAndFinalize) {
  llm::MockProvider mock;
  mock.add_reply_for_prompt(prompt_text("movies", "Show average IMDb Rating by Genre", 0),
                            reply("valid"));
  auto report = run_corpus({make_case("a", "movies", "Show average IMDb Rating by Genre"),
                            make_case("b", "cars", "q")},
                           registry(), mock, {});
  finalize(report, reconcile({ann("a", "1", Label::Accurate), ann("a", "2", Label::Accurate),
                              ann("b", "1", Label::NoOutput), ann("b", "2", Label::NoOutput)},
                             "t"));
  ASSERT_TRUE(report.overall_accuracy.has_value());
  EXPECT_EQ(report.overall_accuracy->percent(), "50.00");
  EXPECT_EQ(report.per_dataset_accuracy.at("cars").accurate, 0u);

  TempDir dir;
  write_file(dir / "report.json", to_json(report).dump(2));
  EXPECT_EQ(load_run_report(dir / "report.json"), report);
  const auto j = to_json(report);
  EXPECT_EQ(j["overall_accuracy"]["percent"], "50.00");
  EXPECT_EQ(j["reconciliation"][0]["annotator_labels"]["1"], "Accurate");

  write_file(dir / "bad.json", "[1]");
  EXPECT_THROW(load_run_report(dir / "bad.json"), EvaluationError);
}
