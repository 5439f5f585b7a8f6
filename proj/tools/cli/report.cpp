#include "report.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace elfuse::cli {

namespace {

Json coefficients(const std::vector<CoordinateEstimate>& rows) {
  Json out = Json::array();
  for (const auto& c : rows) {
    out.push_back({{"name", c.name},
                   {"estimate", c.estimate},
                   {"se", c.se},
                   {"ci_lower", c.ci_lower},
                   {"ci_upper", c.ci_upper},
                   {"degenerate", c.degenerate}});
  }
  return out;
}

Json numbers(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

double parse_number(const std::string& cell, int line_no) {
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw ValidationError("simulation table: malformed number '" + cell + "' at line " +
                          std::to_string(line_no));
  }
  return v;
}

const char* kCoordinateHeader = "coordinate,truth,method,bias,SD,SE,CP";
const char* kMseHeader = "class,method,MSE";

}  // namespace

std::string fmt9(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

Json report_to_json(const EstimateReport& r) {
  Json doc;
  doc["schema"] = "elfuse.report/1";
  doc["config_hash"] = r.config_hash;
  doc["seed"] = r.seed;
  doc["level"] = r.level;
  doc["se_method"] = r.se_method == SeMethod::bootstrap ? "bootstrap" : "hessian";
  doc["mle"] = {{"iterations", r.mle_iterations}, {"coefficients", coefficients(r.mle)}};
  doc["fmle"] = {{"iterations", r.fmle_iterations},
                 {"gradient_norm", r.gradient_norm},
                 {"bootstrap_failures", r.bootstrap_failures},
                 {"phi_free", numbers(r.phi_free_hat)},
                 {"lambda", numbers(r.lambda_hat)},
                 {"coefficients", coefficients(r.fmle)}};
  if (r.efficiency) {
    doc["efficiency"] = {{"necessary_holds", r.efficiency->necessary_holds},
                         {"sufficient_holds", r.efficiency->sufficient_holds},
                         {"colspace_residual", r.efficiency->colspace_residual},
                         {"gain_expected", r.efficiency->gain_expected}};
  } else {
    doc["efficiency"] = nullptr;
  }
  doc["warnings"] = r.warnings;
  return doc;
}

std::string coefficient_table(const EstimateReport& r) {
  std::ostringstream os;
  char line[200];
  std::snprintf(line, sizeof line, "%-12s %11s %10s %11s %10s %8s\n", "coefficient", "MLE", "SE",
                "FMLE", "SE", "SE ratio");
  os << line;
  for (std::size_t j = 0; j < r.mle.size() && j < r.fmle.size(); ++j) {
    const auto& a = r.mle[j];
    const auto& b = r.fmle[j];
    const double ratio = a.se > 0.0 ? b.se / a.se : 0.0;
    std::snprintf(line, sizeof line, "%-12s %11.5f %10.5f %11.5f %10.5f %8.3f\n", a.name.c_str(),
                  a.estimate, a.se, b.estimate, b.se, ratio);
    os << line;
  }
  return os.str();
}

SimulationCsv simulation_csv(const ReplicationTable& table, const ScenarioConfig& config,
                             const std::string& hash) {
  SimulationCsv csv;
  csv.comments.push_back("elfuse simulate");
  csv.comments.push_back("scenario: " + config.name);
  csv.comments.push_back("config_hash: " + hash);
  csv.comments.push_back("seed: " + std::to_string(config.seed));
  csv.comments.push_back("reps: " + std::to_string(table.reps));
  csv.comments.push_back("failures: " + std::to_string(table.failures));
  csv.comments.push_back("B: " + std::to_string(config.B));
  csv.comments.push_back("tau: " + fmt9(config.tau));
  csv.coordinates = table.coordinates;
  csv.mse = table.mse;
  return csv;
}

std::string to_text(const SimulationCsv& csv) {
  std::string out;
  for (const auto& c : csv.comments) out += "# " + c + "\n";
  out += kCoordinateHeader;
  out += '\n';
  for (const auto& c : csv.coordinates) {
    out += c.name + "," + fmt9(c.truth) + "," + c.method + "," + fmt9(c.bias) + "," + fmt9(c.sd) +
           "," + fmt9(c.se) + "," + fmt9(c.cp) + "\n";
  }
  out += '\n';
  out += kMseHeader;
  out += '\n';
  for (const auto& m : csv.mse) {
    out += std::to_string(m.cls) + "," + m.method + "," + fmt9(m.mse) + "\n";
  }
  return out;
}

SimulationCsv parse_simulation_csv(const std::string& text) {
  SimulationCsv csv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  enum { comments, coordinate_header, coordinates, mse_header, mse } state = comments;
  while (std::getline(in, line)) {
    ++line_no;
    if (state == comments && line.rfind("# ", 0) == 0) {
      csv.comments.push_back(line.substr(2));
      continue;
    }
    if (state == comments) state = coordinate_header;
    if (state == coordinate_header) {
      if (line != kCoordinateHeader) {
        throw ValidationError("simulation table: expected coordinate header at line " +
                              std::to_string(line_no));
      }
      state = coordinates;
      continue;
    }
    if (state == coordinates) {
      if (line.empty()) {
        state = mse_header;
        continue;
      }
      const auto f = split_fields(line);
      if (f.size() != 7) {
        throw ValidationError("simulation table: line " + std::to_string(line_no) +
                              " needs 7 fields");
      }
      CoordinateSummary c;
      c.name = f[0];
      c.truth = parse_number(f[1], line_no);
      c.method = f[2];
      c.bias = parse_number(f[3], line_no);
      c.sd = parse_number(f[4], line_no);
      c.se = parse_number(f[5], line_no);
      c.cp = parse_number(f[6], line_no);
      csv.coordinates.push_back(c);
      continue;
    }
    if (state == mse_header) {
      if (line != kMseHeader) {
        throw ValidationError("simulation table: expected MSE header at line " +
                              std::to_string(line_no));
      }
      state = mse;
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != 3) {
      throw ValidationError("simulation table: line " + std::to_string(line_no) + " needs 3 fields");
    }
    MseSummary m;
    m.cls = static_cast<int>(parse_number(f[0], line_no));
    m.method = f[1];
    m.mse = parse_number(f[2], line_no);
    csv.mse.push_back(m);
  }
  if (state != mse) throw ValidationError("simulation table: truncated input");
  return csv;
}

}  // namespace elfuse::cli
