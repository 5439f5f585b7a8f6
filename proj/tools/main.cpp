#include "cli/commands.hpp"
#include "cli/config.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

namespace {

const char* kFormats = R"(File formats:
  primary CSV      header label,x1,...,x{p-1}; integer labels 1..K; the
                   intercept column is added automatically
  predictions CSV  header q1,...,q{L-1}; row i belongs to primary row i
  config JSON      see --print-schema config
  scenario JSON    see --print-schema scenario

Exit codes: 0 success, 1 check failure, 2 invalid input, 3 numerical failure.
ELFUSE_THREADS caps the number of worker threads.)";

}  // namespace

int main(int argc, char** argv) {
  using namespace elfuse::cli;
  CLI::App app{"Fused multinomial logistic regression with external ML predictions", "elfuse"};
  app.footer(kFormats);
  app.require_subcommand(0, 1);

  std::string schema;
  app.add_option("--print-schema", schema, "Print a JSON schema and exit")
      ->check(CLI::IsMember(schema_names()));
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: ELFUSE_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit MLE and FMLE on primary data");
  fit_cmd->add_option("--primary", fit.primary, "Primary CSV");
  fit_cmd->add_option("--predictions", fit.predictions, "Predictions CSV");
  fit_cmd->add_option("--config", fit.config, "Run config JSON")->required();
  fit_cmd->add_option("--bootstrap", fit.bootstrap, "Bootstrap replicates (below 2: Hessian SEs)");
  fit_cmd->add_option("--out", fit.out, "JSON report path");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo scenario");
  sim_cmd->add_option("--scenario", sim.scenario, "Scenario JSON")->required();
  sim_cmd->add_option("--reps", sim.reps, "Replicates")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed, "Master seed");
  sim_cmd->add_option("--bootstrap", sim.B, "Bootstrap replicates per fit (below 2: Hessian SEs)");
  sim_cmd->add_option("--out", sim.out, "Output CSV (default: stdout)");
  sim_cmd->add_option("--emit-data", sim.emit_data, "Also write each replicate's CSV files here");

  CheckArgs check;
  auto* check_cmd = app.add_subcommand("check", "Run a property suite");
  check_cmd->add_option("--suite", check.suite, "identities, efficiency or mar")
      ->required()
      ->check(CLI::IsMember({"identities", "efficiency", "mar"}));
  check_cmd->add_option("--config", check.config, "Scenario JSON (optional for identities)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInvalidInput;
  }

  if (!schema.empty()) {
    std::cout << schema_text(schema);
    return kSuccess;
  }
  if (threads > 0) setenv("ELFUSE_THREADS", std::to_string(threads).c_str(), 1);

  if (*fit_cmd) return cmd_fit(fit, std::cout, std::cerr);
  if (*sim_cmd) return cmd_simulate(sim, std::cout, std::cerr);
  if (*check_cmd) return cmd_check(check, std::cout, std::cerr);
  std::cout << app.help();
  return kSuccess;
}
