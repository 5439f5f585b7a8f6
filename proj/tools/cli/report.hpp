#pragma once

#include "config.hpp"

#include "elfuse/simengine.hpp"
#include "elfuse/types.hpp"

#include <string>
#include <vector>

namespace elfuse::cli {

Json report_to_json(const EstimateReport& report);

/// Side-by-side MLE / FMLE coefficient table for the terminal.
std::string coefficient_table(const EstimateReport& report);

/// Text form of a simulation table: '#' comment lines, the coordinate block
/// and, after one blank line, the class MSE block.
struct SimulationCsv {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<CoordinateSummary> coordinates;
  std::vector<MseSummary> mse;
};

SimulationCsv simulation_csv(const ReplicationTable& table, const ScenarioConfig& config,
                             const std::string& hash);
std::string to_text(const SimulationCsv& csv);
SimulationCsv parse_simulation_csv(const std::string& text);

/// printf "%.9g".
std::string fmt9(double value);

}  // namespace elfuse::cli
