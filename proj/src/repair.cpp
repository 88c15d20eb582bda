#include "vizprompt/repair.hpp"

#include "vizprompt/prompt.hpp"

namespace vizprompt {

RepairFailed::RepairFailed(std::vector<Attempt> trail, double latency_seconds,
                           int provider_attempts)
    : std::runtime_error("repair failed after " + std::to_string(trail.size()) + " replies"),
      trail_(std::move(trail)),
      latency_seconds_(latency_seconds),
      provider_attempts_(provider_attempts) {}

std::string build_repair_prompt(std::string_view original_prompt,
                                const ValidationReport& report) {
  std::string out(original_prompt);
  while (!out.empty() && out.back() == '\n') out.pop_back();
  out += "\n\n# [repair]\nYour previous response could not be used because of these errors:";
  for (const auto& f : report.findings()) {
    if (f.severity != Severity::Error) continue;
    out += "\n- ";
    out += to_string(f.code);
    out += ": ";
    out += f.detail;
  }
  out += "\nReturn a corrected analytic specification for the same query. ";
  out += kResponseSchemaLeadIn;
  out += "\n```json\n";
  out += response_exemplar();
  out += "\n```\n";
  out += kJsonOnlyInstruction;
  out += '\n';
  return out;
}

RepairResult repair(std::string_view raw, const ValidationReport& report,
                    std::string_view original_prompt, llm::Provider& client,
                    const llm::ProviderConfig& config, const RepairContext& context) {
  if (report.verdict() != Verdict::Invalid) {
    throw std::invalid_argument("repair is only defined for Invalid reports");
  }
  std::vector<Attempt> trail{{std::string(raw), report}};
  double latency = 0.0;
  int provider_attempts = 0;
  for (int round = 0; round < context.max_rounds; ++round) {
    const std::string prompt = build_repair_prompt(original_prompt, trail.back().report);
    const llm::Completion reply = llm::complete(client, prompt, config, context.sleeper);
    latency += reply.latency_seconds;
    provider_attempts += reply.attempt_count;
    Analysis analysis = analyze(reply.raw_text, context.dataset, context.query);
    trail.push_back({reply.raw_text, analysis.report});
    if (analysis.report.verdict() != Verdict::Invalid) {
      return RepairResult{std::move(*analysis.specification), std::move(analysis.report),
                          std::move(trail), latency, provider_attempts};
    }
  }
  throw RepairFailed(std::move(trail), latency, provider_attempts);
}

}  // namespace vizprompt
