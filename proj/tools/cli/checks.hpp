#pragma once

#include "config.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace elfuse::cli {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Gradients, lambda = 0 reduction, weight normalisation, score / Hessian
/// identity, sandwich vs decomposition, efficiency ordering, dimension
/// conditions and the disconnected-layout reduction. Data come from
/// replicate 0 of `file.scenario`.
std::vector<CheckResult> identities_suite(const ScenarioFile& file);

/// Dimension conditions and the numeric column-space test for one scenario,
/// compared with the expectations in its "check" section.
std::vector<CheckResult> efficiency_suite(const ScenarioFile& file);

/// Monte Carlo means of the grouped moment conditions; each must lie within
/// three standard errors of zero.
std::vector<CheckResult> mar_suite(const ScenarioFile& file);

/// Random blocks with the structural zero pattern and J_l = -G_ll,
/// J_t = G_tt. `free_dim` < 0 picks a random free dimension below num_lambda.
BlockMatrices synthetic_blocks(std::mt19937_64& rng, int free_dim = -1);

std::string format_results(const std::vector<CheckResult>& results);

}  // namespace elfuse::cli
