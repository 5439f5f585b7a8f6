#pragma once

#include <iosfwd>
#include <optional>
#include <string>

namespace elfuse::cli {

enum ExitCode { kSuccess = 0, kCheckFailed = 1, kInvalidInput = 2, kNumericalFailure = 3 };

struct FitArgs {
  std::string primary;
  std::string predictions;
  std::string config;
  std::optional<int> bootstrap;
  std::string out;
};

struct SimulateArgs {
  std::string scenario;
  std::optional<int> reps;
  std::optional<unsigned long long> seed;
  std::optional<int> B;
  std::string out;
  std::string emit_data;
};

struct CheckArgs {
  std::string suite;   // identities, efficiency or mar
  std::string config;  // optional for identities
};

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_check(const CheckArgs& args, std::ostream& out, std::ostream& err);

/// Simulation table text for a scenario file, as written by cmd_simulate.
std::string simulate_text(const std::string& scenario_path, std::optional<int> reps,
                          std::optional<unsigned long long> seed, std::optional<int> B);

}  // namespace elfuse::cli
