#pragma once

/**
 * @file
 * @brief Command-line front end. Exit codes: 0 ok, 1 usage, 2 config error, 3 I/O error.
 *
 *   dqnmpc regulate   [--config f.json] --out dir [--jobs n] [--smoke]
 *   dqnmpc track      [--config f.json] --out dir [--jobs n] [--smoke]
 *   dqnmpc costcurves [--config f.json] --out dir [--grid a,b,...] [--points n]
 *
 * DQNMPC_SEED in the environment overrides the configured seed.
 */

#include <iosfwd>
#include <string>
#include <vector>

namespace dqnmpc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dqnmpc
