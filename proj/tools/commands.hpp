#pragma once

// copsamp subcommands as a library so tests can drive them in-process.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cops/simulation.hpp"
#include "cops/uncertainty.hpp"

namespace cops::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid configuration or input; maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a simulation config document. `source` names the file in messages.
SimulationSpec parse_simulation_spec(const std::string& text, const std::string& source);
SimulationSpec load_simulation_spec(const std::filesystem::path& path);

ProbeEnsemble load_ensemble(const std::filesystem::path& path);

struct CheckResult {
  std::string name;
  double tolerance = 0.0;
  double measured = 0.0;
  bool pass = false;
  std::string note;
};

/// The invariant oracles behind `copsamp selfcheck`.
std::vector<CheckResult> run_selfcheck(std::uint64_t seed, bool quick);

/// Entry point; args[0] is the program name. Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cops::cli
