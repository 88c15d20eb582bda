#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vizprompt {

/// Exit codes of the `vizprompt` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInvalid = 1,
  kExitUsage = 2,
  kExitProvider = 3,
};

/// Entry point of the command-line tool. Machine output goes to `out`,
/// diagnostics to `err`. `args` excludes the program name.
///
/// The dataset directory is `--data-dir`, else $VIZPROMPT_DATA_DIR, else
/// `vizprompt-state/datasets`. When $VIZPROMPT_MOCK_FIXTURES names a
/// directory, `query`, `eval run` and `serve` use the mock provider.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vizprompt
