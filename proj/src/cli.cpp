#include "vizprompt/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "vizprompt/config.hpp"
#include "vizprompt/evaluation.hpp"
#include "vizprompt/prompt.hpp"
#include "vizprompt/registry.hpp"
#include "vizprompt/response.hpp"
#include "vizprompt/service.hpp"
#include "vizprompt/session.hpp"

namespace vizprompt {

namespace {

namespace fs = std::filesystem;

/// Raised inside a subcommand to exit with a specific code.
struct Exit {
  int code;
  std::string message;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{kExitUsage, "cannot read " + path.string()};
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Exit{kExitUsage, "cannot write " + path.string()};
}

fs::path data_dir_or_default(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("VIZPROMPT_DATA_DIR"); env && *env) return env;
  return fs::path("vizprompt-state") / "datasets";
}

/// A path to an existing data file is ingested directly; anything else is
/// looked up in the registry.
std::shared_ptr<const Dataset> resolve_dataset(const std::string& ref, const fs::path& data_dir) {
  std::error_code ec;
  if (fs::is_regular_file(ref, ec)) return std::make_shared<const Dataset>(ingest(ref));
  return DatasetRegistry(data_dir).get(ref);
}

ServiceConfig config_or_default(const std::string& config_file) {
  ServiceConfig config = config_file.empty() ? ServiceConfig{} : load_config(config_file);
  if (const char* env = std::getenv("VIZPROMPT_MOCK_FIXTURES"); env && *env) {
    config.provider_kind = ProviderKind::Mock;
    config.fixtures_dir = env;
  }
  return config;
}

struct PromptFlags {
  std::string dataset;
  std::string query;
  bool follow_up = false;
  std::string prev;
  std::uint64_t seed = 0;
  bool no_json_only = false;
  std::size_t budget = 8000;
  std::string data_dir;
};

void add_prompt_flags(CLI::App* cmd, PromptFlags& f) {
  cmd->add_option("dataset", f.dataset, "Dataset id or path to a data file")->required();
  cmd->add_option("query", f.query, "Natural-language query")->required();
  cmd->add_flag("--follow-up", f.follow_up, "Treat the query as a follow-up");
  cmd->add_option("--prev", f.prev, "Previous specification JSON (follow-up)");
  cmd->add_option("--seed", f.seed, "Row-sampling seed");
  cmd->add_flag("--no-json-only", f.no_json_only, "Allow prose explanation in the reply");
  cmd->add_option("--budget", f.budget, "Token budget");
  cmd->add_option("--data-dir", f.data_dir, "Dataset directory");
}

std::optional<AnalyticSpecification> load_previous(const PromptFlags& f) {
  if (!f.follow_up) {
    if (!f.prev.empty()) throw Exit{kExitUsage, "--prev requires --follow-up"};
    return std::nullopt;
  }
  if (f.prev.empty()) throw Exit{kExitUsage, "--follow-up requires --prev <spec.json>"};
  try {
    return parse_specification(read_text(f.prev));
  } catch (const MalformedJson& e) {
    throw Exit{kExitUsage, f.prev + ": " + e.what()};
  }
}

int cmd_ingest(const std::string& file, const std::string& data_dir, std::ostream& out) {
  DatasetRegistry registry(data_dir_or_default(data_dir));
  out << schema_json(*registry.import_file(file)).dump(2) << '\n';
  return kExitOk;
}

int cmd_prompt(const PromptFlags& f, const std::string& output, bool digest_only,
               std::ostream& out) {
  const auto previous = load_previous(f);
  const auto dataset = resolve_dataset(f.dataset, data_dir_or_default(f.data_dir));
  PromptConfig config;
  config.mode = f.follow_up ? QueryMode::FollowUp : QueryMode::Initial;
  config.json_only = !f.no_json_only;
  config.token_budget = f.budget;
  config.seed = f.seed;
  const std::vector<std::string> queries{f.query};
  const std::string text =
      render(assemble(*dataset, queries, config, previous ? &*previous : nullptr));
  if (!output.empty()) write_text(output, text);
  if (digest_only) {
    out << llm::prompt_digest(text) << '\n';
  } else if (output.empty()) {
    out << text;
  }
  return kExitOk;
}

int cmd_query(const PromptFlags& f, bool no_repair, const std::string& config_file,
              std::ostream& out, std::ostream& err) {
  const auto previous = load_previous(f);
  const ServiceConfig config = config_or_default(config_file);
  const auto provider = make_provider(config);
  const auto dataset = resolve_dataset(f.dataset, data_dir_or_default(f.data_dir));

  Session session("cli", dataset, f.seed);
  if (previous) {
    Turn prior;
    prior.query = "(previous specification)";
    prior.specification = *previous;
    session.append(std::move(prior));
  }
  PipelineOptions options = config.pipeline_options();
  options.json_only = !f.no_json_only;
  options.token_budget = f.budget;
  if (no_repair) options.repair_rounds = 0;

  const Turn turn = session.ask(f.query, f.follow_up ? QueryMode::FollowUp : QueryMode::Initial,
                                *provider, config.provider, options);
  if (turn.specification) {
    out << serialize_specification(*turn.specification) << '\n';
    err << "verdict: " << to_string(turn.report.verdict()) << '\n'
        << to_json(turn.report).dump(2) << '\n';
    return kExitOk;
  }
  const auto& e = *turn.error;
  err << e.code << ": " << e.message << '\n';
  if (e.code == "ProviderError") return kExitProvider;
  if (e.code == "TokenBudgetExceeded") return kExitUsage;
  err << to_json(turn.report).dump(2) << '\n';
  return kExitInvalid;
}

int cmd_eval_run(const std::string& corpus_file, const std::string& data_dir, std::uint64_t seed,
                 std::optional<std::size_t> concurrency, const std::string& config_file,
                 const std::string& output, std::ostream& out, std::ostream& err) {
  const ServiceConfig config = config_or_default(config_file);
  const auto provider = make_provider(config);
  const DatasetRegistry registry(data_dir_or_default(data_dir));
  const auto corpus = load_corpus(corpus_file);

  RunOptions options;
  options.seed = seed;
  options.pipeline = config.pipeline_options();
  options.max_concurrency = concurrency.value_or(
      config.provider_kind == ProviderKind::Mock ? 0 : config.eval_max_concurrency);
  const RunReport report = run_corpus(corpus, registry, *provider, config.provider, options);

  std::size_t with_spec = 0;
  for (const auto& r : report.records) with_spec += r.specification.has_value();
  err << report.records.size() << " cases run, " << with_spec << " with a specification, mean "
      << "latency " << report.mean_latency_seconds << " s\n";
  const std::string text = to_json(report).dump(2) + "\n";
  if (output.empty()) {
    out << text;
  } else {
    write_text(output, text);
  }
  return kExitOk;
}

int cmd_eval_score(const std::string& report_file, const std::string& annotations_file,
                   const std::string& tiebreaker, const std::string& output, std::ostream& out) {
  RunReport report = load_run_report(report_file);
  const auto annotations = load_annotations(annotations_file);
  std::vector<std::string> case_ids;
  for (const auto& r : report.records) case_ids.push_back(r.case_id);
  finalize(report, reconcile(annotations, tiebreaker, case_ids));
  if (!output.empty()) write_text(output, to_json(report).dump(2) + "\n");
  out << to_json(score(report)).dump(2) << '\n';
  return kExitOk;
}

int cmd_serve(const std::string& config_file, const std::string& listen, std::ostream& err) {
  ServiceConfig config = config_or_default(config_file);
  if (!listen.empty()) config.listen_address = listen;
  validate(config);
  Service service(config, make_provider(config));
  const int port = service.bind();
  err << "listening on http://" << config.host() << ':' << port << '\n';
  service.serve();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"NL2VIS prompt pipeline"};
  app.require_subcommand(1);

  std::string data_dir;
  std::string file;
  auto* ingest_cmd = app.add_subcommand("ingest", "Register a dataset and print its schema");
  ingest_cmd->add_option("file", file, "CSV or JSON records file")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--data-dir", data_dir, "Dataset directory");

  PromptFlags prompt_flags;
  std::string prompt_output;
  bool digest_only = false;
  auto* prompt_cmd = app.add_subcommand("prompt", "Print the assembled prompt (no network)");
  add_prompt_flags(prompt_cmd, prompt_flags);
  prompt_cmd->add_option("-o,--output", prompt_output, "Write the prompt to a file");
  prompt_cmd->add_flag("--digest", digest_only, "Print the SHA-256 of the prompt instead");

  PromptFlags query_flags;
  bool no_repair = false;
  std::string config_file;
  auto* query_cmd = app.add_subcommand("query", "Run the full pipeline for one query");
  add_prompt_flags(query_cmd, query_flags);
  query_cmd->add_flag("--no-repair", no_repair, "Do not re-ask after an invalid reply");
  query_cmd->add_option("--config", config_file, "Config file");

  auto* eval_cmd = app.add_subcommand("eval", "Corpus evaluation");
  eval_cmd->require_subcommand(1);
  std::string corpus_file;
  std::uint64_t eval_seed = 0;
  std::optional<std::size_t> concurrency;
  std::string eval_output;
  auto* run_cmd = eval_cmd->add_subcommand("run", "Replay a corpus and write a run report");
  run_cmd->add_option("corpus", corpus_file, "corpus.jsonl")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--data-dir", data_dir, "Dataset directory");
  run_cmd->add_option("--seed", eval_seed, "Row-sampling seed for every session");
  run_cmd->add_option("--concurrency", concurrency, "Parallel sequence groups (0 = no cap)");
  run_cmd->add_option("--config", config_file, "Config file");
  run_cmd->add_option("-o,--output", eval_output, "Write the report to a file");

  std::string report_file;
  std::string annotations_file;
  std::string tiebreaker = "tiebreaker";
  auto* score_cmd = eval_cmd->add_subcommand("score", "Reconcile annotations and print metrics");
  score_cmd->add_option("report", report_file, "report.json")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("annotations", annotations_file, "annotations.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--tiebreaker", tiebreaker, "Annotator id of the tiebreaker");
  score_cmd->add_option("-o,--output", eval_output, "Write the finalized report to a file");

  std::string listen;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--config", config_file, "Config file");
  serve_cmd->add_option("--listen", listen, "host:port, overrides the config");

  std::vector<std::string> argv_store{"vizprompt"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(file, data_dir, out);
    if (*prompt_cmd) return cmd_prompt(prompt_flags, prompt_output, digest_only, out);
    if (*query_cmd) return cmd_query(query_flags, no_repair, config_file, out, err);
    if (*run_cmd) {
      return cmd_eval_run(corpus_file, data_dir, eval_seed, concurrency, config_file, eval_output,
                          out, err);
    }
    if (*score_cmd) return cmd_eval_score(report_file, annotations_file, tiebreaker, eval_output, out);
    if (*serve_cmd) return cmd_serve(config_file, listen, err);
  } catch (const Exit& e) {
    err << e.message << '\n';
    return e.code;
  } catch (const llm::ProviderError& e) {
    err << "ProviderError: " << e.what() << '\n';
    return kExitProvider;
  } catch (const PromptError& e) {
    err << to_string(e.kind()) << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const EvaluationError& e) {
    err << to_string(e.kind()) << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const NoPriorSpecification& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace vizprompt
