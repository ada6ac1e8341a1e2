#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace phrlab {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,     // bad config, flags or incompatible inputs
  kExitTraining = 3,  // training diverged or produced nothing usable
  kExitIo = 4,        // unreadable/unwritable files, corrupt checkpoints
};

/// Runs one `phrlab` command. `args` excludes the program name.
/// Subcommands: train-teacher, train-phr, bench, render-path, eval, gradcheck.
/// Progress lines go to `err` when PHRLAB_VERBOSE is set.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phrlab
