#include "checks.hpp"

#include "elfuse/mnlogit.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

namespace elfuse::cli {

namespace {

CheckResult flag(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok, NAN, NAN, std::move(detail)};
}

CheckResult below(std::string name, double measured, double tolerance, std::string detail = {}) {
  return {std::move(name), measured <= tolerance, measured, tolerance, std::move(detail)};
}

Vector normal_vector(std::mt19937_64& rng, Index size, double scale) {
  std::normal_distribution<double> z(0.0, scale);
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = z(rng);
  return v;
}

Matrix normal_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale) {
  std::normal_distribution<double> z(0.0, scale);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) m(r, c) = z(rng);
  }
  return m;
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x(i)));
    Vector a = x;
    Vector b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

double relative_gap(const Vector& analytic, const Vector& numeric) {
  return (analytic - numeric).lpNorm<Eigen::Infinity>() /
         std::max(1.0, numeric.lpNorm<Eigen::Infinity>());
}

double relative_gap(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

/// Random lambda scaled so that every weight denominator stays above 1/2.
Vector feasible_lambda(std::mt19937_64& rng, const Matrix& moments) {
  Vector lambda = normal_vector(rng, moments.cols(), 1.0);
  const double reach = (moments * lambda).cwiseAbs().maxCoeff();
  if (reach > 0.0) lambda *= 0.5 / reach;
  return lambda;
}

FusionProblem problem_for(const ScenarioConfig& config, const ParamLayout& layout) {
  const ReplicateData data = generate_replicate(config, 0);
  return FusionProblem::make(data.primary, data.predictions, config.map, config.basis_set(),
                             layout);
}

CheckResult dimension_case(const std::string& name, Index H, int K, Index p, Index m,
                           bool expect_necessary, bool expect_sufficient) {
  const EfficiencyDiagnostic d = dimension_conditions(H, K, p, m);
  const bool ok = d.necessary_holds == expect_necessary && d.sufficient_holds == expect_sufficient;
  std::ostringstream os;
  os << "H=" << H << " K=" << K << " p=" << p << " m=" << m << ": necessary "
     << (d.necessary_holds ? "holds" : "fails") << ", sufficient "
     << (d.sufficient_holds ? "holds" : "fails");
  return flag(name, ok, os.str());
}

}  // namespace

BlockMatrices synthetic_blocks(std::mt19937_64& rng, int free_dim) {
  std::uniform_int_distribution<int> q_dist(3, 7);
  std::uniform_int_distribution<int> d_dist(2, 6);
  const Index q = q_dist(rng);
  const Index d = d_dist(rng);
  const Index f = free_dim >= 0 ? free_dim : std::uniform_int_distribution<int>(0, static_cast<int>(q) - 1)(rng);
  const Index m = std::uniform_int_distribution<int>(1, static_cast<int>(d))(rng);

  const Matrix a = normal_matrix(rng, q, q, 1.0);
  const Matrix J_l = a.transpose() * a / static_cast<double>(q) + 0.5 * Matrix::Identity(q, q);
  const Matrix b = normal_matrix(rng, d, d, 1.0);
  const Matrix G_tt = b.transpose() * b / static_cast<double>(d) + 0.5 * Matrix::Identity(d, d);
  Matrix G_lt = Matrix::Zero(q, d);
  G_lt.leftCols(m) = normal_matrix(rng, q, m, 0.4);
  const Matrix G_lf = normal_matrix(rng, q, f, 1.0);

  std::vector<Index> psi;
  std::vector<Index> vartheta;
  for (Index j = 0; j < d; ++j) (j < m ? psi : vartheta).push_back(j);
  return BlockMatrices::assemble(-J_l, G_lt, G_lf, G_tt, J_l, G_tt, psi, vartheta);
}

std::vector<CheckResult> identities_suite(const ScenarioFile& file) {
  const ScenarioConfig& config = file.scenario;
  std::vector<CheckResult> out;
  std::mt19937_64 rng(file.check.seed);
  const FusionProblem problem = problem_for(config, config.layout);
  const Vector phi_free_truth = config.phi_free_true;

  double grad_ll = 0.0;
  double grad_profile = 0.0;
  double grad_penalized = 0.0;
  double reduction = 0.0;
  const double tau = 0.1;
  for (int point = 0; point < file.check.points; ++point) {
    FusedParams gamma;
    gamma.theta = config.theta_true + normal_vector(rng, config.theta_true.size(), 0.3);
    gamma.phi_free = phi_free_truth + normal_vector(rng, phi_free_truth.size(), 0.3);
    gamma.lambda = feasible_lambda(rng, moment_matrix(problem, gamma.theta, gamma.phi_free));

    const ScoreHessian sh = score_and_hessian(problem.data, gamma.theta);
    const Vector fd_ll = central_difference(
        [&](const Vector& t) { return log_lik(problem.data, t); }, gamma.theta);
    grad_ll = std::max(grad_ll, relative_gap(sh.gradient, fd_ll));

    const Index q = problem.num_lambda();
    const Index d = problem.num_theta();
    const auto unpack = [&](const Vector& x) { return FusedParams::unstack(x, q, d); };
    const Vector x = gamma.stacked();
    const Derivatives profile = objective_derivatives(problem, gamma, 0.0, 1.0, false);
    const Vector fd_profile = central_difference(
        [&](const Vector& v) { return profile_objective(problem, unpack(v)); }, x);
    grad_profile = std::max(grad_profile, relative_gap(profile.gradient, fd_profile));

    const Derivatives penalized = objective_derivatives(problem, gamma, tau, -1.0, false);
    const Vector fd_penalized = central_difference(
        [&](const Vector& v) { return penalized_objective(problem, unpack(v), tau); }, x);
    grad_penalized = std::max(grad_penalized, relative_gap(penalized.gradient, fd_penalized));

    FusedParams at_zero = gamma;
    at_zero.lambda.setZero();
    reduction = std::max(reduction, std::abs(profile_objective(problem, at_zero) -
                                             log_lik(problem.data, gamma.theta)));
  }
  const std::string points = std::to_string(file.check.points) + " random points";
  out.push_back(below("gradient of the primary log-likelihood", grad_ll, 1e-5, points));
  out.push_back(below("gradient of the profile objective", grad_profile, 1e-5, points));
  out.push_back(below("gradient of the penalised objective", grad_penalized, 1e-5, points));
  out.push_back(below("lambda = 0 reduces to the primary log-likelihood", reduction, 1e-12, points));

  {
    const MleFit mle = fit_mle(problem.data);
    const Vector phi_free = problem.layout.free_part(mle.theta_hat);
    const Matrix g = moment_matrix(problem, mle.theta_hat, phi_free);
    const Vector lambda = solve_lambda(g, 0.0);
    const double total = el_weights(g, lambda).sum();
    out.push_back(below("weights sum to one at the fitted lambda with tau = 0",
                        std::abs(total - 1.0), 1e-8));

    FusedParams at_zero;
    at_zero.theta = mle.theta_hat;
    at_zero.phi_free = phi_free;
    at_zero.lambda = Vector::Zero(g.cols());
    const ObservationScores scores = observation_scores(problem, at_zero);
    const Matrix outer = scores.lambda.transpose() * scores.lambda / static_cast<double>(problem.n());
    Matrix hessian = Matrix::Zero(g.cols(), g.cols());
    for (Index i = 0; i < problem.n(); ++i) hessian += observation_lambda_hessian(g, at_zero.lambda, i);
    hessian /= static_cast<double>(problem.n());
    out.push_back(below("lambda score outer product equals the lambda Hessian at lambda = 0",
                        relative_gap(outer, hessian), 1e-10));
  }

  {
    double agreement = 0.0;
    double ordering = 0.0;
    double projection = 0.0;
    int ordered_sets = 0;
    for (int set = 0; set < 50; ++set) {
      const BlockMatrices blocks = synthetic_blocks(rng);
      const SandwichResult sw = sigma_sandwich(blocks);
      const Theorem3Result t3 = sigma_theorem3(blocks);
      agreement = std::max(agreement, (t3.sigma_theta - sw.sigma_theta).norm() / sw.sigma_theta.norm());
      Eigen::SelfAdjointEigenSolver<Matrix> d_eig(t3.D);
      if (d_eig.eigenvalues().maxCoeff() < 0.0) {
        ++ordered_sets;
        Eigen::SelfAdjointEigenSolver<Matrix> gap(t3.info_inverse - t3.sigma_theta);
        ordering = std::max(ordering, -gap.eigenvalues().minCoeff());
      }
    }
    for (int set = 0; set < 10; ++set) {
      BlockMatrices blocks = synthetic_blocks(rng, 0);
      blocks = BlockMatrices::assemble(blocks.G_ll(), blocks.G_lt(),
                                       normal_matrix(rng, blocks.num_lambda, blocks.num_lambda, 1.0),
                                       blocks.G_tt(), blocks.J_l(), blocks.J_t(), blocks.psi_index,
                                       blocks.vartheta_index);
      const Theorem3Result t3 = sigma_theorem3(blocks);
      const double scale = (blocks.G_lt() * t3.info_inverse).norm();
      projection = std::max(projection, t3.L.norm() / scale);
    }
    out.push_back(below("decomposition matches the sandwich (relative)", agreement, 1e-6,
                        "50 synthetic block sets"));
    out.push_back(below("information inverse dominates the fused covariance", ordering, 1e-8,
                        std::to_string(ordered_sets) + " sets with D negative definite"));
    out.push_back(below("free parameters spanning all constraints give L = 0", projection, 1e-6,
                        "10 synthetic block sets"));
  }

  out.push_back(dimension_case("full transportability, constant basis", 1, 3, 5, 10, true, true));
  out.push_back(dimension_case("free intercepts, p = 5, H = 5", 5, 3, 5, 8, true, true));
  out.push_back(dimension_case("free intercepts, p = 5, H = 1", 1, 3, 5, 8, false, false));
  out.push_back(dimension_case("free intercepts, p = 3, H = 2", 2, 3, 3, 4, true, true));
  out.push_back(dimension_case("free intercepts, p = 2, any H", 4, 3, 2, 2, true, false));
  {
    const EfficiencyDiagnostic d = dimension_conditions(5, 3, 5, 8);
    const Index free = 5 * 2 - 8;
    const bool ok = std::min<Index>(8, 5 * 2) == 8 && free == 2 && d.sufficient_holds;
    out.push_back(flag("min{m, H(K-1)} = 8 > 2 for the simulation design", ok,
                       "m = 8, H(K-1) = 10, p(K-1) - m = 2"));
  }

  {
    const ParamLayout disconnected = ParamLayout::disconnected(config.p, config.K);
    const FusionProblem loose = problem_for(config, disconnected);
    const MleFit mle = fit_mle(loose.data, MleOptions{1e-12, 200, {}});
    FmleOptions opts;
    opts.tau = config.tau;
    opts.mle = mle;
    const FmleFit fit = fit_fmle(loose, opts);
    out.push_back(below("no shared parameters leaves the MLE unchanged",
                        (fit.params.theta - mle.theta_hat).lpNorm<Eigen::Infinity>(), 1e-6));
  }
  return out;
}

std::vector<CheckResult> efficiency_suite(const ScenarioFile& file) {
  const ScenarioConfig& config = file.scenario;
  const CheckSettings& check = file.check;
  std::vector<CheckResult> out;
  const Index H = config.basis_set().size();
  const Index m = config.layout.m();
  const EfficiencyDiagnostic dims = dimension_conditions(H, config.K, config.p, m);
  std::ostringstream os;
  os << "H=" << H << " K=" << config.K << " p=" << config.p << " m=" << m;
  out.push_back(flag("sufficient condition implies the necessary one",
                     !dims.sufficient_holds || dims.necessary_holds, os.str()));
  const auto state = [](bool v) { return std::string(v ? "holds" : "fails"); };
  if (check.expect_necessary) {
    out.push_back(flag("necessary condition matches expectation",
                       dims.necessary_holds == *check.expect_necessary,
                       os.str() + ", " + state(dims.necessary_holds)));
  }
  if (check.expect_sufficient) {
    out.push_back(flag("sufficient condition matches expectation",
                       dims.sufficient_holds == *check.expect_sufficient,
                       os.str() + ", " + state(dims.sufficient_holds)));
  }

  const FusionProblem problem = problem_for(config, config.layout);
  FmleOptions opts;
  opts.tau = config.tau;
  opts.penalty = config.penalty;
  const FmleFit fit = fit_fmle(problem, opts);
  const BlockMatrices blocks = empirical_blocks(problem, fit);
  const EfficiencyDiagnostic diag = efficiency_diagnostic(blocks, problem.H(), config.K, config.p, m);
  out.push_back({"column-space residual lies in [0, 1]",
                 diag.colspace_residual >= 0.0 && diag.colspace_residual <= 1.0 + 1e-12,
                 diag.colspace_residual, 1.0, {}});
  if (check.expect_gain) {
    const bool ok = diag.gain_expected == *check.expect_gain;
    out.push_back({"efficiency gain flag matches expectation", ok, diag.colspace_residual, 1e-6,
                   diag.gain_expected ? "residual above threshold" : "residual below threshold"});
  }
  if (!diag.necessary_holds) {
    out.push_back(below("column space covers every constraint when the necessary condition fails",
                        diag.colspace_residual, 1e-6));
  }
  return out;
}

std::vector<CheckResult> mar_suite(const ScenarioFile& file) {
  MarOptions opts;
  opts.violate = file.check.violate;
  opts.draws = file.check.draws;
  opts.violation_shift = file.check.violation_shift;
  opts.seed = file.check.seed;
  const auto moments = mar_moment_check(file.scenario, opts);
  std::vector<CheckResult> out;
  for (const auto& mm : moments) {
    const double z = mm.se > 0.0 ? std::abs(mm.mean) / mm.se : (mm.mean == 0.0 ? 0.0 : INFINITY);
    std::ostringstream os;
    os << "mean " << mm.mean << ", se " << mm.se;
    out.push_back(below("moment group " + std::to_string(mm.group + 1) + " basis " +
                            std::to_string(mm.basis + 1) + " within 3 SE",
                        z, 3.0, os.str()));
  }
  return out;
}

std::string format_results(const std::vector<CheckResult>& results) {
  std::string out;
  char buf[64];
  for (const auto& r : results) {
    out += r.passed ? "PASS  " : "FAIL  ";
    out += r.name;
    if (!std::isnan(r.tolerance)) {
      std::snprintf(buf, sizeof buf, "  [measured %.3g, limit %.3g]", r.measured, r.tolerance);
      out += buf;
    }
    if (!r.detail.empty()) out += "  " + r.detail;
    out += '\n';
  }
  return out;
}

}  // namespace elfuse::cli
