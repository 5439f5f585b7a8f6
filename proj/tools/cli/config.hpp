#pragma once

#include "elfuse/basis.hpp"
#include "elfuse/elfusion.hpp"
#include "elfuse/inference.hpp"
#include "elfuse/simengine.hpp"
#include "elfuse/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace elfuse::cli {

using Json = nlohmann::ordered_json;

/// Configuration of `elfuse fit`.
struct RunConfig {
  int K = 0;
  int L = 0;
  std::vector<std::vector<int>> groups;
  std::string layout_kind = "free_intercepts";  // or full, disconnected, custom
  std::vector<Index> shared_index;
  std::optional<Matrix> A;
  std::vector<Index> z_columns;                 // design columns, intercept implicit
  std::optional<std::vector<BasisDescriptor>> basis;
  double tau = 0.1;
  double tol = 1e-8;
  int max_iter = 200;
  PenaltyForm penalty = PenaltyForm::shrink;
  int B = 200;
  double level = 0.95;
  SeMethod se_method = SeMethod::bootstrap;
  std::string primary_path;
  std::string predictions_path;
  std::string out_path;
  std::uint64_t seed = 1;

  ParamLayout layout(Index p) const;
  CoarseningMap map() const;
  BasisSet basis_set(const std::vector<Index>& z) const;
};

/// Options read from the optional "check" section of a scenario file.
struct CheckSettings {
  bool violate = false;
  Index draws = 100000;
  double violation_shift = 1.0;
  std::uint64_t seed = 7;
  int points = 20;
  std::optional<bool> expect_necessary;
  std::optional<bool> expect_sufficient;
  std::optional<bool> expect_gain;
};

struct ScenarioFile {
  ScenarioConfig scenario;
  CheckSettings check;
};

/// Parsers reject unknown keys, wrong types and out-of-range values with
/// ValidationError naming the offending JSON path.
RunConfig parse_run_config(const Json& doc);
ScenarioFile parse_scenario(const Json& doc);

Json load_json(const std::string& path);

/// FNV-1a 64-bit hash of the compact dump, as 16 hex digits.
std::string config_hash(const Json& doc);

/// Embedded JSON schemas: "config", "scenario" and "report".
const char* schema_text(const std::string& name);
std::vector<std::string> schema_names();

}  // namespace elfuse::cli
