#include "commands.hpp"

#include "checks.hpp"
#include "config.hpp"
#include "report.hpp"

#include "elfuse/csv.hpp"
#include "elfuse/inference.hpp"
#include "elfuse/mnlogit.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>

namespace elfuse::cli {

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const ConvergenceError& e) {
    err << "numerical failure: " << e.what() << '\n';
    if (e.last_iterate().size() > 0) err << "  last iterate: " << e.last_iterate().transpose() << '\n';
    return kNumericalFailure;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
}

void require_file(const std::string& path, const std::string& role) {
  if (path.empty()) throw ValidationError("no " + role + " file given");
  if (!std::filesystem::is_regular_file(path)) throw ValidationError(role + " file not found: " + path);
}

struct PrimaryFile {
  std::vector<int> labels;
  Matrix design;
};

PrimaryFile read_primary(const std::string& path) {
  const NumericTable t = read_numeric_csv(path);
  const Index label_col = t.column("label");
  if (label_col < 0) throw ValidationError(path + ": missing 'label' column");
  if (t.values.rows() == 0) throw ValidationError(path + ": no data rows");
  PrimaryFile f;
  f.design.resize(t.values.rows(), static_cast<Index>(t.header.size()));
  f.design.col(0).setOnes();
  Index c = 1;
  for (Index j = 0; j < static_cast<Index>(t.header.size()); ++j) {
    if (j != label_col) f.design.col(c++) = t.values.col(j);
  }
  for (Index i = 0; i < t.values.rows(); ++i) {
    const double v = t.values(i, label_col);
    if (v != std::floor(v)) {
      throw ValidationError(path + ": non-integer label at line " + std::to_string(i + 2) +
                            ", column 'label'");
    }
    f.labels.push_back(static_cast<int>(v));
  }
  return f;
}

Matrix read_predictions(const std::string& path, int L, Index rows) {
  const NumericTable t = read_numeric_csv(path);
  Matrix q(t.values.rows(), L - 1);
  for (int l = 0; l + 1 < L; ++l) {
    const Index c = t.column("q" + std::to_string(l + 1));
    if (c < 0) throw ValidationError(path + ": missing column q" + std::to_string(l + 1));
    q.col(l) = t.values.col(c);
  }
  if (q.rows() != rows) {
    throw ValidationError(path + ": " + std::to_string(q.rows()) + " rows, primary file has " +
                          std::to_string(rows));
  }
  return q;
}

std::vector<CoordinateEstimate> estimates(const Vector& theta, const Vector& se,
                                          const std::vector<std::string>& names, double level) {
  const auto ci = wald_ci(theta, se, level);
  std::vector<CoordinateEstimate> out;
  for (Index j = 0; j < theta.size(); ++j) {
    const auto& c = ci[static_cast<std::size_t>(j)];
    out.push_back({names[static_cast<std::size_t>(j)], theta(j), se(j), c.lower, c.upper, c.degenerate});
  }
  return out;
}

std::string csv_of(const std::vector<std::string>& header, const Matrix& values) {
  NumericTable t;
  t.header = header;
  t.values = values;
  return to_csv(t);
}

void emit_data(const ScenarioConfig& config, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto z = config.z_columns();
  for (int rep = 0; rep < config.reps; ++rep) {
    const ReplicateData d = generate_replicate(config, rep);
    const std::string tag = std::to_string(rep + 1);
    std::vector<std::string> header{"label"};
    for (Index j = 1; j < config.p; ++j) header.push_back("x" + std::to_string(j));
    Matrix primary(d.primary.n(), config.p);
    for (Index i = 0; i < d.primary.n(); ++i) primary(i, 0) = d.primary.labels[static_cast<std::size_t>(i)];
    primary.rightCols(config.p - 1) = d.primary.design.rightCols(config.p - 1);
    write_file_atomic(dir + "/primary_" + tag + ".csv", csv_of(header, primary));

    std::vector<std::string> qh;
    for (Index l = 0; l < d.predictions.values.cols(); ++l) qh.push_back("q" + std::to_string(l + 1));
    write_file_atomic(dir + "/predictions_" + tag + ".csv", csv_of(qh, d.predictions.values));

    std::vector<std::string> eh{"u"};
    for (std::size_t j = 1; j < z.size(); ++j) eh.push_back("z" + std::to_string(j));
    std::vector<Index> keep;
    for (std::size_t i = 0; i < d.external_groups.size(); ++i) {
      if (d.external_groups[i] > 0) keep.push_back(static_cast<Index>(i));
    }
    Matrix ext(static_cast<Index>(keep.size()), static_cast<Index>(z.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
      const auto i = keep[r];
      ext(static_cast<Index>(r), 0) = d.external_groups[static_cast<std::size_t>(i)];
      for (std::size_t j = 1; j < z.size(); ++j) {
        ext(static_cast<Index>(r), static_cast<Index>(j)) = d.external_design(i, z[j]);
      }
    }
    write_file_atomic(dir + "/external_" + tag + ".csv", csv_of(eh, ext));
  }
}

ScenarioFile scenario_with_overrides(const std::string& path, std::optional<int> reps,
                                     std::optional<unsigned long long> seed, std::optional<int> B,
                                     std::string& hash) {
  require_file(path, "scenario");
  Json doc = load_json(path);
  if (reps) doc["reps"] = *reps;
  if (seed) doc["seed"] = *seed;
  if (B) doc["B"] = *B;
  ScenarioFile file = parse_scenario(doc);
  hash = config_hash(doc);
  return file;
}

}  // namespace

std::string simulate_text(const std::string& scenario_path, std::optional<int> reps,
                          std::optional<unsigned long long> seed, std::optional<int> B) {
  std::string hash;
  const ScenarioFile file = scenario_with_overrides(scenario_path, reps, seed, B, hash);
  const ReplicationTable table = run_replications(file.scenario);
  return to_text(simulation_csv(table, file.scenario, hash));
}

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(args.config, "config");
    const Json doc = load_json(args.config);
    RunConfig cfg = parse_run_config(doc);
    const std::string primary_path = args.primary.empty() ? cfg.primary_path : args.primary;
    const std::string predictions_path = args.predictions.empty() ? cfg.predictions_path : args.predictions;
    const std::string out_path = args.out.empty() ? cfg.out_path : args.out;
    if (args.bootstrap) {
      cfg.B = *args.bootstrap;
      cfg.se_method = cfg.B >= 2 ? SeMethod::bootstrap : SeMethod::hessian;
    }
    require_file(primary_path, "primary");
    require_file(predictions_path, "predictions");

    const PrimaryFile primary = read_primary(primary_path);
    const Index p = primary.design.cols();
    const Matrix q = read_predictions(predictions_path, cfg.L, primary.design.rows());
    std::vector<Index> z{0};
    if (cfg.z_columns.empty()) {
      for (Index j = 1; j < p; ++j) z.push_back(j);
    } else {
      z.insert(z.end(), cfg.z_columns.begin(), cfg.z_columns.end());
    }
    PrimaryDataset data = PrimaryDataset::make(primary.labels, primary.design, cfg.K, z);
    const FusionProblem problem = FusionProblem::make(
        data, ExternalPredictionSet::make(q, data.n()), cfg.map(), cfg.basis_set(z), cfg.layout(p));

    EstimateReport report;
    report.config_hash = config_hash(doc);
    report.seed = cfg.seed;
    report.level = cfg.level;
    report.se_method = cfg.se_method;
    report.warnings = problem.warnings;

    const MleFit mle = fit_mle(problem.data);
    FmleOptions opts;
    opts.tau = cfg.tau;
    opts.tol = cfg.tol;
    opts.max_outer = cfg.max_iter;
    opts.penalty = cfg.penalty;
    opts.mle = mle;
    const FmleFit fit = fit_fmle(problem, opts);
    report.warnings.insert(report.warnings.end(), fit.warnings.begin(), fit.warnings.end());

    const Index d = problem.num_theta();
    const double n = static_cast<double>(problem.n());
    const Matrix info_inv = Eigen::LDLT<Matrix>(mle.info).solve(Matrix::Identity(d, d));
    const Vector mle_se = (info_inv.diagonal() / n).cwiseMax(0.0).cwiseSqrt();

    std::optional<BlockMatrices> blocks;
    try {
      blocks = empirical_blocks(problem, fit);
    } catch (const NumericalError& e) {
      report.warnings.push_back(e.what());
    }
    Vector fmle_se;
    if (cfg.se_method == SeMethod::bootstrap) {
      BootstrapOptions bo;
      bo.B = cfg.B;
      bo.seed = cfg.seed;
      bo.fit = opts;
      const BootstrapResult boot = bootstrap_se(problem, bo);
      fmle_se = boot.se.segment(problem.num_lambda(), d);
      report.bootstrap_failures = boot.failures;
    } else {
      if (!blocks) throw NumericalError("hessian standard errors need a non-singular G");
      const SandwichResult sw = sigma_sandwich(*blocks);
      fmle_se = (sw.sigma_theta.diagonal() / n).cwiseMax(0.0).cwiseSqrt();
    }
    if (blocks) {
      const EfficiencyDiagnostic e = efficiency_diagnostic(*blocks, problem.H(), cfg.K, p, problem.layout.m());
      report.efficiency = EfficiencySummary{e.necessary_holds, e.sufficient_holds, e.colspace_residual,
                                            e.gain_expected};
    }

    const auto names = theta_names(p, cfg.K);
    report.mle = estimates(mle.theta_hat, mle_se, names, cfg.level);
    report.fmle = estimates(fit.params.theta, fmle_se, names, cfg.level);
    report.theta_hat = fit.params.theta;
    report.phi_free_hat = fit.params.phi_free;
    report.lambda_hat = fit.params.lambda;
    report.mle_iterations = mle.iterations;
    report.fmle_iterations = fit.outer_iterations;
    report.gradient_norm = fit.gradient_norm;

    if (!out_path.empty()) write_file_atomic(out_path, report_to_json(report).dump(2) + "\n");
    out << coefficient_table(report);
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    return kSuccess;
  });
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string hash;
    const ScenarioFile file = scenario_with_overrides(args.scenario, args.reps, args.seed, args.B, hash);
    if (!args.emit_data.empty()) emit_data(file.scenario, args.emit_data);
    const ReplicationTable table = run_replications(file.scenario);
    const std::string text = to_text(simulation_csv(table, file.scenario, hash));
    if (args.out.empty()) {
      out << text;
    } else {
      write_file_atomic(args.out, text);
    }
    return kSuccess;
  });
}

int cmd_check(const CheckArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ScenarioFile file;
    if (args.config.empty()) {
      if (args.suite != "identities") throw ValidationError("suite '" + args.suite + "' needs --config");
      file.scenario = ScenarioConfig::reference(ShiftSpec::Kind::none, false);
    } else {
      require_file(args.config, "config");
      file = parse_scenario(load_json(args.config));
    }
    std::vector<CheckResult> results;
    if (args.suite == "identities") {
      results = identities_suite(file);
    } else if (args.suite == "efficiency") {
      results = efficiency_suite(file);
    } else if (args.suite == "mar") {
      results = mar_suite(file);
    } else {
      throw ValidationError("unknown suite '" + args.suite + "'");
    }
    out << format_results(results);
    int failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    out << (failed ? std::to_string(failed) + " of " + std::to_string(results.size()) + " checks failed\n"
                   : "all " + std::to_string(results.size()) + " checks passed\n");
    return failed ? kCheckFailed : kSuccess;
  });
}

}  // namespace elfuse::cli
