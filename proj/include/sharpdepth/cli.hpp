#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace sharpdepth::cli {

// Exit codes: 0 success, 2 configuration/argument error, 3 I/O error,
// 4 numerical failure.
enum ExitCode : int { kOk = 0, kConfig = 2, kIo = 3, kNumerical = 4, kInternal = 1 };

struct CommandResult {
  int exit_code = kOk;
  std::vector<std::filesystem::path> artifacts;
  std::string summary;
};

// args excludes the program name, e.g. {"generate", "--out-dir", "d"}.
CommandResult run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sharpdepth::cli
