#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace icpcov::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalFailure = 3 };

/// Parses and runs one `icpcov` invocation. argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace icpcov::cli
