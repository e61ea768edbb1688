#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace recomb::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kBuildError = 2,
  kVerifyFailed = 3,
};

// Entry point shared by the binary and the tests; args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Writes through a sibling temp file and renames it into place.
void write_atomically(const std::string& path, const std::string& contents);

}  // namespace recomb::cli
