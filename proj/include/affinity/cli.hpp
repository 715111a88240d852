#ifndef AFFINITY_CLI_HPP_
#define AFFINITY_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace affinity {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one CLI invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace affinity

#endif  // AFFINITY_CLI_HPP_
