#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vizprompt/dataset.hpp"
#include "vizprompt/llm_client.hpp"
#include "vizprompt/response.hpp"
#include "vizprompt/validate.hpp"

namespace vizprompt {

/// One model reply and what the validator made of it.
struct Attempt {
  std::string raw_text;
  ValidationReport report;

  bool operator==(const Attempt&) const = default;
};

struct RepairResult {
  AnalyticSpecification specification;
  ValidationReport report;
  /// Original reply first, then one entry per repair round.
  std::vector<Attempt> trail;
  /// Latency of the repair rounds only.
  double latency_seconds = 0.0;
  int provider_attempts = 0;
};

class RepairFailed : public std::runtime_error {
 public:
  RepairFailed(std::vector<Attempt> trail, double latency_seconds, int provider_attempts);

  const std::vector<Attempt>& trail() const { return trail_; }
  double latency_seconds() const { return latency_seconds_; }
  int provider_attempts() const { return provider_attempts_; }

 private:
  std::vector<Attempt> trail_;
  double latency_seconds_;
  int provider_attempts_;
};

/// Original prompt followed by a corrective section listing the Error
/// findings and repeating the response exemplar.
std::string build_repair_prompt(std::string_view original_prompt, const ValidationReport& report);

struct RepairContext {
  const Dataset& dataset;
  std::string_view query;
  int max_rounds = 1;
  llm::Sleeper sleeper = {};
};

/// Re-asks the model after an Invalid verdict. Each round sends
/// build_repair_prompt(original_prompt, latest report), then re-parses and
/// re-validates. Returns the first non-Invalid result; throws RepairFailed
/// when every round is Invalid, std::invalid_argument when `report` is not
/// Invalid, and lets llm::ProviderError through.
RepairResult repair(std::string_view raw, const ValidationReport& report,
                    std::string_view original_prompt, llm::Provider& client,
                    const llm::ProviderConfig& config, const RepairContext& context);

}  // namespace vizprompt
