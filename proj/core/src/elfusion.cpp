#include "elfuse/elfusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace elfuse {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Model quantities under phi that the moment functions and their
/// derivatives are built from.
struct MomentKernel {
  Matrix moments;                 // n x (L-1)H
  std::vector<Matrix> slope;      // per group l: n x (K-1), a_lj = dP_l/d eta_j
  std::vector<Matrix> own;        // per group l: n x (K-1), 1[j in C_l] - P_l
  Matrix probs;                   // n x K under phi
};

MomentKernel compute_kernel(const FusionProblem& pr, const Vector& theta,
                            const Vector& phi_free) {
  const Vector phi = pr.layout.build_phi_full(theta, phi_free);
  const Index n = pr.n();
  const int K = pr.data.K();
  const int groups = pr.map.num_groups() - 1;
  const Index H = pr.H();

  MomentKernel out;
  out.moments.resize(n, groups * H);
  out.probs.resize(n, K);
  out.slope.assign(static_cast<std::size_t>(groups), Matrix(n, K - 1));
  out.own.assign(static_cast<std::size_t>(groups), Matrix(n, K - 1));
  std::vector<double> probs(static_cast<std::size_t>(K));
  for (Index i = 0; i < n; ++i) {
    class_probs_into(pr.data.design.row(i), phi, K, probs.data());
    for (int k = 0; k < K; ++k) out.probs(i, k) = probs[static_cast<std::size_t>(k)];
    for (int l = 0; l < groups; ++l) {
      double grouped = 0.0;
      for (int k : pr.map.groups()[static_cast<std::size_t>(l)]) {
        grouped += probs[static_cast<std::size_t>(k - 1)];
      }
      const double diff = grouped - pr.predictions.values(i, l);
      for (Index h = 0; h < H; ++h) {
        out.moments(i, l * H + h) = diff * pr.basis_values(i, h);
      }
      auto& a = out.slope[static_cast<std::size_t>(l)];
      auto& s = out.own[static_cast<std::size_t>(l)];
      for (int j = 0; j < K - 1; ++j) {
        const double member = pr.map.contains(l, j + 1) ? 1.0 : 0.0;
        s(i, j) = member - grouped;
        a(i, j) = probs[static_cast<std::size_t>(j)] * s(i, j);
      }
    }
  }
  return out;
}

Vector row_weights(const Matrix& moments, const Vector& lambda) {
  Vector w = Vector::Ones(moments.rows());
  if (lambda.size() > 0) w.noalias() += moments * lambda;
  return w;
}

Index first_nonpositive(const Vector& w) {
  for (Index i = 0; i < w.size(); ++i) {
    if (!(w(i) > 0.0)) return i;
  }
  return -1;
}

double mean_log(const Vector& w) {
  double s = 0.0;
  for (Index i = 0; i < w.size(); ++i) s += std::log(w(i));
  return s / static_cast<double>(w.size());
}

}  // namespace

FusionProblem FusionProblem::make(PrimaryDataset data,
                                  ExternalPredictionSet predictions,
                                  CoarseningMap map, const BasisSet& basis,
                                  ParamLayout layout, bool drop_degenerate) {
  Matrix values = eval_basis(basis, data);
  return from_basis_values(std::move(data), std::move(predictions), std::move(map),
                           std::move(values), std::move(layout), drop_degenerate);
}

FusionProblem FusionProblem::from_basis_values(PrimaryDataset data,
                                               ExternalPredictionSet predictions,
                                               CoarseningMap map,
                                               Matrix basis_values,
                                               ParamLayout layout,
                                               bool drop_degenerate) {
  if (map.num_classes() != data.K()) {
    throw ValidationError("coarsening: K does not match the primary data");
  }
  if (layout.p() != data.p() || layout.K() != data.K()) {
    throw ValidationError("layout: (p, K) does not match the primary data");
  }
  if (predictions.rows() != data.n()) {
    throw ValidationError("predictions: " + std::to_string(predictions.rows()) +
                          " rows, primary data has " + std::to_string(data.n()));
  }
  if (predictions.values.cols() != map.num_groups() - 1) {
    throw ValidationError("predictions: expected L-1 = " +
                          std::to_string(map.num_groups() - 1) + " columns, got " +
                          std::to_string(predictions.values.cols()));
  }
  if (basis_values.rows() != data.n()) {
    throw ValidationError("basis: row count does not match the primary data");
  }
  FusionProblem pr;
  if (drop_degenerate) {
    // Keep a column only if it adds a direction to the span of kept columns.
    std::vector<Index> keep;
    Matrix q_basis(basis_values.rows(), 0);
    for (Index c = 0; c < basis_values.cols(); ++c) {
      const Vector col = basis_values.col(c);
      const double norm = col.norm();
      Vector resid = col;
      if (q_basis.cols() > 0) resid -= q_basis * (q_basis.transpose() * col);
      if (norm == 0.0 || resid.norm() <= 1e-10 * norm) {
        pr.warnings.push_back("basis column " + std::to_string(c + 1) +
                              " is degenerate (zero or collinear) and was dropped");
        continue;
      }
      keep.push_back(c);
      q_basis.conservativeResize(Eigen::NoChange, q_basis.cols() + 1);
      q_basis.col(q_basis.cols() - 1) = resid / resid.norm();
    }
    if (keep.empty()) throw ValidationError("basis: every column is degenerate");
    if (static_cast<Index>(keep.size()) != basis_values.cols()) {
      Matrix kept(basis_values.rows(), static_cast<Index>(keep.size()));
      for (std::size_t j = 0; j < keep.size(); ++j) {
        kept.col(static_cast<Index>(j)) = basis_values.col(keep[j]);
      }
      basis_values = std::move(kept);
    }
  }
  pr.data = std::move(data);
  pr.predictions = std::move(predictions);
  pr.map = std::move(map);
  pr.layout = std::move(layout);
  pr.basis_values = std::move(basis_values);
  return pr;
}

FusionProblem FusionProblem::resample(std::span<const Index> rows) const {
  FusionProblem out;
  out.data = data.resample(rows);
  out.predictions = predictions.resample(rows);
  out.map = map;
  out.layout = layout;
  out.basis_values.resize(static_cast<Index>(rows.size()), basis_values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.basis_values.row(static_cast<Index>(i)) = basis_values.row(rows[i]);
  }
  return out;
}

Matrix moment_matrix(const FusionProblem& problem, const Vector& theta,
                     const Vector& phi_free) {
  return compute_kernel(problem, theta, phi_free).moments;
}

Vector el_weights(const Matrix& moments, const Vector& lambda) {
  if (lambda.size() != moments.cols()) {
    throw ValidationError("el_weights: lambda length does not match moment columns");
  }
  const Vector w = row_weights(moments, lambda);
  if (const Index bad = first_nonpositive(w); bad >= 0) {
    throw BoundaryError("el_weights: 1 + g'lambda <= 0 at row " + std::to_string(bad + 1),
                        bad);
  }
  const double n = static_cast<double>(moments.rows());
  return (n * w.array()).inverse().matrix();
}

double profile_objective(const FusionProblem& problem, const FusedParams& gamma) {
  const double ll = log_lik(problem.data, gamma.theta);
  if (gamma.lambda.size() == 0 || gamma.lambda.isZero(0.0)) return ll;
  const Matrix g = moment_matrix(problem, gamma.theta, gamma.phi_free);
  const Vector w = row_weights(g, gamma.lambda);
  if (first_nonpositive(w) >= 0) return kNegInf;
  return ll - mean_log(w);
}

double penalized_objective(const FusionProblem& problem, const FusedParams& gamma,
                           double tau) {
  if (tau < 0.0) throw ValidationError("penalized_objective: tau must be >= 0");
  return profile_objective(problem, gamma) - tau * gamma.lambda.squaredNorm();
}

Derivatives objective_derivatives(const FusionProblem& pr, const FusedParams& gamma,
                                  double tau, double sign, bool with_hessian) {
  const Index n = pr.n();
  const int K = pr.data.K();
  const Index p = pr.data.p();
  const int groups = pr.map.num_groups() - 1;
  const Index H = pr.H();
  const Index q = pr.num_lambda();
  const Index d = pr.num_theta();
  const Index f = pr.num_free();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix& X = pr.data.design;
  const Matrix& M = pr.layout.phi_jacobian_theta();
  const Matrix& E = pr.layout.phi_jacobian_free();

  const MomentKernel ker = compute_kernel(pr, gamma.theta, gamma.phi_free);
  const Vector w = row_weights(ker.moments, gamma.lambda);
  if (const Index bad = first_nonpositive(w); bad >= 0) {
    throw BoundaryError("objective: 1 + g'lambda <= 0 at row " + std::to_string(bad + 1),
                        bad);
  }
  const Vector inv_w = w.array().inverse().matrix();

  // c_il = sum_h lambda_lh h_ih ; e_ij = sum_l c_il a_lj
  Matrix c(n, groups);
  for (int l = 0; l < groups; ++l) {
    c.col(l) = pr.basis_values * gamma.lambda.segment(l * H, H);
  }
  Matrix e = Matrix::Zero(n, K - 1);
  for (int l = 0; l < groups; ++l) {
    e += (ker.slope[static_cast<std::size_t>(l)].array().colwise() * c.col(l).array()).matrix();
  }

  const ScoreHessian ll = score_and_hessian(pr.data, gamma.theta);

  Derivatives out;
  out.value = log_lik(pr.data, gamma.theta) - mean_log(w) +
              sign * tau * gamma.lambda.squaredNorm();

  Vector grad_phi(d);
  for (int j = 0; j < K - 1; ++j) {
    grad_phi.segment(j * p, p) =
        -inv_n * X.transpose() * (e.col(j).array() * inv_w.array()).matrix();
  }
  out.gradient.resize(q + d + f);
  out.gradient.head(q) =
      -inv_n * ker.moments.transpose() * inv_w + 2.0 * sign * tau * gamma.lambda;
  out.gradient.segment(q, d) = ll.gradient + M.transpose() * grad_phi;
  out.gradient.tail(f) = E.transpose() * grad_phi;

  if (!with_hessian) return out;

  const Matrix gw = ker.moments.array().colwise() * inv_w.array();
  Matrix q_ll = inv_n * gw.transpose() * gw;
  q_ll.diagonal().array() += 2.0 * sign * tau;

  // d/dphi of the lambda score: -(1/n) sum [J_i / w_i - g_i (J_i' lambda)' / w_i^2]
  Matrix q_lphi(q, d);
  const Vector inv_w2 = inv_w.array().square().matrix();
  for (int l = 0; l < groups; ++l) {
    const auto& a = ker.slope[static_cast<std::size_t>(l)];
    for (Index h = 0; h < H; ++h) {
      const Index r = l * H + h;
      for (int j = 0; j < K - 1; ++j) {
        const Vector v = (pr.basis_values.col(h).array() * a.col(j).array() * inv_w.array() -
                          ker.moments.col(r).array() * e.col(j).array() * inv_w2.array())
                             .matrix();
        q_lphi.block(r, j * p, 1, p) = -inv_n * (X.transpose() * v).transpose();
      }
    }
  }

  // phi-phi block: -(1/n) sum [ (sum_l c_il d2P_l) / w_i - (J_i'lambda)(J_i'lambda)' / w_i^2 ]
  // with d2P_l/deta_j deta_m = delta_jm p_j s_lj - p_j p_m (s_lj + s_lm).
  Matrix q_phiphi(d, d);
  for (int j = 0; j < K - 1; ++j) {
    for (int m = j; m < K - 1; ++m) {
      Vector coef = Vector::Zero(n);
      for (int l = 0; l < groups; ++l) {
        const auto& s = ker.own[static_cast<std::size_t>(l)];
        Eigen::ArrayXd b = -ker.probs.col(j).array() * ker.probs.col(m).array() *
                           (s.col(j).array() + s.col(m).array());
        if (j == m) b += ker.probs.col(j).array() * s.col(j).array();
        coef.array() += c.col(l).array() * b;
      }
      const Vector wt = (coef.array() * inv_w.array() -
                         e.col(j).array() * e.col(m).array() * inv_w2.array())
                            .matrix();
      const Matrix block = -inv_n * X.transpose() * (X.array().colwise() * wt.array()).matrix();
      q_phiphi.block(j * p, m * p, p, p) = block;
      if (m != j) q_phiphi.block(m * p, j * p, p, p) = block.transpose();
    }
  }

  out.hessian.resize(q + d + f, q + d + f);
  out.hessian.topLeftCorner(q, q) = q_ll;
  const Matrix q_ltheta = q_lphi * M;
  const Matrix q_lfree = q_lphi * E;
  out.hessian.block(0, q, q, d) = q_ltheta;
  out.hessian.block(q, 0, d, q) = q_ltheta.transpose();
  out.hessian.block(0, q + d, q, f) = q_lfree;
  out.hessian.block(q + d, 0, f, q) = q_lfree.transpose();
  out.hessian.block(q, q, d, d) = ll.hessian + M.transpose() * q_phiphi * M;
  const Matrix q_thetafree = M.transpose() * q_phiphi * E;
  out.hessian.block(q, q + d, d, f) = q_thetafree;
  out.hessian.block(q + d, q, f, d) = q_thetafree.transpose();
  out.hessian.block(q + d, q + d, f, f) = E.transpose() * q_phiphi * E;
  return out;
}

ObservationScores observation_scores(const FusionProblem& pr, const FusedParams& gamma) {
  const Index n = pr.n();
  const int K = pr.data.K();
  const Index p = pr.data.p();
  const int groups = pr.map.num_groups() - 1;
  const Index H = pr.H();
  const MomentKernel ker = compute_kernel(pr, gamma.theta, gamma.phi_free);
  const Vector w = row_weights(ker.moments, gamma.lambda);
  if (const Index bad = first_nonpositive(w); bad >= 0) {
    throw BoundaryError("scores: 1 + g'lambda <= 0 at row " + std::to_string(bad + 1), bad);
  }
  Matrix e = Matrix::Zero(n, K - 1);
  for (int l = 0; l < groups; ++l) {
    const Vector c = pr.basis_values * gamma.lambda.segment(l * H, H);
    e += (ker.slope[static_cast<std::size_t>(l)].array().colwise() * c.array()).matrix();
  }
  Matrix phi_scores(n, pr.num_theta());
  for (int j = 0; j < K - 1; ++j) {
    phi_scores.middleCols(j * p, p) =
        -(pr.data.design.array().colwise() * (e.col(j).array() / w.array())).matrix();
  }
  ObservationScores out;
  out.lambda = -(ker.moments.array().colwise() / w.array()).matrix();
  out.theta = elfuse::observation_scores(pr.data, gamma.theta) +
              phi_scores * pr.layout.phi_jacobian_theta();
  out.phi_free = phi_scores * pr.layout.phi_jacobian_free();
  return out;
}

Matrix observation_lambda_hessian(const Matrix& moments, const Vector& lambda, Index row) {
  const Vector g = moments.row(row).transpose();
  const double w = 1.0 + g.dot(lambda);
  if (!(w > 0.0)) throw BoundaryError("1 + g'lambda <= 0", row);
  return g * g.transpose() / (w * w);
}

LambdaSolution solve_lambda_detailed(const Matrix& moments, double tau,
                                     const LambdaOptions& options) {
  if (tau < 0.0) throw ValidationError("solve_lambda: tau must be >= 0");
  if (!moments.allFinite()) throw ValidationError("solve_lambda: non-finite moments");
  const Index q = moments.cols();
  const double n = static_cast<double>(moments.rows());
  const double sign = penalty_sign(options.penalty);
  LambdaSolution sol;
  sol.lambda = options.start.size() == q ? options.start : Vector::Zero(q);
  if (q == 0) return sol;

  auto score = [&](const Vector& lam, const Vector& w) {
    return Vector(-(moments.transpose() * w.array().inverse().matrix()) / n +
                  2.0 * sign * tau * lam);
  };
  // The shrink form minimises this convex function.
  auto merit = [&](const Vector& lam, const Vector& w) {
    return -mean_log(w) + tau * lam.squaredNorm();
  };

  Vector w = row_weights(moments, sol.lambda);
  if (first_nonpositive(w) >= 0) {
    sol.lambda.setZero();
    w.setOnes();
  }
  Vector F = score(sol.lambda, w);
  for (int it = 0; it < options.max_iter; ++it) {
    sol.residual = F.lpNorm<Eigen::Infinity>();
    if (sol.residual < options.tol) return sol;
    sol.iterations = it + 1;
    const Matrix gw = moments.array().colwise() / w.array();
    Matrix jac = gw.transpose() * gw / n;
    jac.diagonal().array() += 2.0 * sign * tau;
    Eigen::LDLT<Matrix> ldlt(jac);
    const double scale = std::max(1.0, jac.diagonal().cwiseAbs().maxCoeff());
    double ridge = 0.0;
    while (ldlt.info() != Eigen::Success ||
           ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-13 * scale) {
      ridge = ridge == 0.0 ? 1e-10 * scale : ridge * 10.0;
      jac.diagonal().array() += ridge;
      ldlt.compute(jac);
      if (ridge > 1e8) break;
    }
    const Vector step = ldlt.solve(F);
    const double f0 = merit(sol.lambda, w);
    const double slope = -F.dot(step);
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      const Vector trial = sol.lambda - alpha * step;
      const Vector tw = row_weights(moments, trial);
      if (first_nonpositive(tw) >= 0) continue;
      const Vector tF = score(trial, tw);
      const bool residual_drop =
          tF.lpNorm<Eigen::Infinity>() < (1.0 - 1e-4 * alpha) * sol.residual;
      const bool armijo = options.penalty == PenaltyForm::shrink && slope < 0.0 &&
                          merit(trial, tw) <= f0 + 1e-4 * alpha * slope;
      if (armijo || residual_drop) {
        sol.lambda = trial;
        w = tw;
        F = tF;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  sol.residual = F.lpNorm<Eigen::Infinity>();
  if (sol.residual < options.tol) return sol;
  throw ConvergenceError("solve_lambda: residual " + std::to_string(sol.residual) +
                             " after " + std::to_string(sol.iterations) + " iterations",
                         sol.lambda, sol.residual);
}

double outer_objective(const FusionProblem& problem, const Vector& theta,
                       const Vector& phi_free, double tau, PenaltyForm penalty,
                       Vector& lambda_io, const LambdaOptions& inner) {
  const Matrix g = moment_matrix(problem, theta, phi_free);
  LambdaOptions opts = inner;
  opts.penalty = penalty;
  opts.start = lambda_io;
  const LambdaSolution sol = solve_lambda_detailed(g, tau, opts);
  lambda_io = sol.lambda;
  const Vector w = row_weights(g, sol.lambda);
  return log_lik(problem.data, theta) - mean_log(w) +
         penalty_sign(penalty) * tau * sol.lambda.squaredNorm();
}

FmleFit fit_fmle(const FusionProblem& problem, const FmleOptions& options) {
  if (options.tau < 0.0) throw ValidationError("fit_fmle: tau must be >= 0");
  const Index q = problem.num_lambda();
  const Index d = problem.num_theta();
  const Index f = problem.num_free();
  const Index x_dim = d + f;
  const double sign = penalty_sign(options.penalty);

  FmleFit fit;
  fit.tau = options.tau;
  fit.warnings = problem.warnings;
  fit.mle = options.mle ? *options.mle : fit_mle(problem.data);

  const int K = problem.data.K();
  const Index H = problem.H();
  if (H * (K - 1) <= problem.layout.num_free()) {
    fit.warnings.push_back("H(K-1) <= p(K-1) - m: external information cannot "
                           "improve efficiency (necessary condition fails)");
  } else if (q <= problem.layout.num_free()) {
    fit.warnings.push_back("(L-1)H <= p(K-1) - m: coarsened constraints are too few "
                           "to improve efficiency");
  }

  Vector theta = fit.mle.theta_hat;
  Vector phi_free = problem.layout.free_part(theta);
  Vector lambda = Vector::Zero(q);
  if (options.start) {
    theta = options.start->theta;
    phi_free = options.start->phi_free;
    if (options.start->lambda.size() == q) lambda = options.start->lambda;
  }

  LambdaOptions inner = options.inner;
  inner.penalty = options.penalty;
  auto evaluate = [&](const Vector& th, const Vector& ph, Vector& lam, int& inner_iters) {
    const Matrix g = moment_matrix(problem, th, ph);
    LambdaOptions o = inner;
    o.start = lam;
    const LambdaSolution sol = solve_lambda_detailed(g, options.tau, o);
    inner_iters += sol.iterations;
    lam = sol.lambda;
    const Vector w = row_weights(g, lam);
    return log_lik(problem.data, th) - mean_log(w) + sign * options.tau * lam.squaredNorm();
  };

  double value = evaluate(theta, phi_free, lambda, fit.inner_iterations);
  fit.trace.push_back(value);
  double gnorm = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    const FusedParams cur{lambda, theta, phi_free};
    const Derivatives der = objective_derivatives(problem, cur, options.tau, sign, true);
    const Vector gx = der.gradient.tail(x_dim);
    gnorm = std::max(gx.lpNorm<Eigen::Infinity>(),
                     der.gradient.head(q).lpNorm<Eigen::Infinity>());
    if (gx.lpNorm<Eigen::Infinity>() < options.tol &&
        der.gradient.head(q).lpNorm<Eigen::Infinity>() < std::max(options.inner.tol, options.tol)) {
      fit.converged = true;
      break;
    }
    if (it >= options.max_outer) break;
    fit.outer_iterations = it + 1;

    // Hessian of the outer objective by implicit differentiation of lambda.
    const Matrix h_ll = der.hessian.topLeftCorner(q, q);
    const Matrix h_lx = der.hessian.topRightCorner(q, x_dim);
    Matrix neg_hp = -der.hessian.bottomRightCorner(x_dim, x_dim);
    if (q > 0) {
      Eigen::FullPivLU<Matrix> lu(h_ll);
      if (lu.isInvertible()) neg_hp += h_lx.transpose() * lu.solve(h_lx);
    }
    neg_hp = 0.5 * (neg_hp + neg_hp.transpose());
    const double scale = std::max(1.0, neg_hp.diagonal().cwiseAbs().maxCoeff());
    Eigen::LLT<Matrix> llt(neg_hp);
    double mu = 0.0;
    while (llt.info() != Eigen::Success) {
      mu = mu == 0.0 ? 1e-8 * scale : mu * 10.0;
      llt.compute(neg_hp + mu * Matrix::Identity(x_dim, x_dim));
    }
    const Vector dir = llt.solve(gx);
    const double predicted = gx.dot(dir);

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 50; ++ls, alpha *= 0.5) {
      const Vector t_theta = theta + alpha * dir.head(d);
      const Vector t_free = phi_free + alpha * dir.tail(f);
      Vector t_lambda = lambda;
      double t_value = kNegInf;
      try {
        t_value = evaluate(t_theta, t_free, t_lambda, fit.inner_iterations);
      } catch (const Error&) {
        continue;  // boundary or inner failure: reject the step
      }
      const bool armijo = t_value >= value + 1e-4 * alpha * predicted;
      // Near the optimum the predicted gain falls below rounding of the
      // objective; accept a full step that does not lose more than that.
      const bool flat = alpha == 1.0 && predicted < 1e-10 &&
                        t_value >= value - 1e-12 * (1.0 + std::abs(value));
      if (armijo || flat) {
        theta = t_theta;
        phi_free = t_free;
        lambda = t_lambda;
        value = t_value;
        fit.trace.push_back(value);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }

  fit.gradient_norm = gnorm;
  if (!fit.converged) {
    std::ostringstream os;
    os << "fit_fmle: no convergence after " << fit.outer_iterations
       << " outer iterations (gradient sup-norm " << gnorm << "); objective trace:";
    const std::size_t from = fit.trace.size() > 5 ? fit.trace.size() - 5 : 0;
    for (std::size_t i = from; i < fit.trace.size(); ++i) os << ' ' << fit.trace[i];
    FusedParams last{lambda, theta, phi_free};
    throw ConvergenceError(os.str(), last.stacked(), gnorm);
  }
  fit.params = FusedParams{lambda, theta, phi_free};
  fit.objective = value;
  fit.el_weights = el_weights(moment_matrix(problem, theta, phi_free), lambda);
  return fit;
}

}  // namespace elfuse
