#ifndef LOGICCAR_TOOLS_CLI_HPP_
#define LOGICCAR_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace logiccar::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kValidationError = 3,
  kExternalError = 4,
  kNumericalError = 5,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace logiccar::cli

#endif  // LOGICCAR_TOOLS_CLI_HPP_
