#pragma once

#include "elfuse/basis.hpp"
#include "elfuse/mnlogit.hpp"
#include "elfuse/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace elfuse {

/// Everything the empirical-likelihood layer needs, evaluated once: primary
/// data, aligned predictions, coarsening, layout and the basis values h(Z_i).
struct FusionProblem {
  PrimaryDataset data;
  ExternalPredictionSet predictions;
  CoarseningMap map;
  ParamLayout layout;
  Matrix basis_values;  // n x H
  std::vector<std::string> warnings;

  /// Evaluates the basis on `data`. With `drop_degenerate`, basis columns
  /// that are zero or linearly dependent on earlier columns are dropped and
  /// reported in `warnings`.
  static FusionProblem make(PrimaryDataset data, ExternalPredictionSet predictions,
                            CoarseningMap map, const BasisSet& basis,
                            ParamLayout layout, bool drop_degenerate = true);

  static FusionProblem from_basis_values(PrimaryDataset data,
                                         ExternalPredictionSet predictions,
                                         CoarseningMap map, Matrix basis_values,
                                         ParamLayout layout,
                                         bool drop_degenerate = false);

  Index n() const { return data.n(); }
  Index H() const { return basis_values.cols(); }
  Index num_lambda() const { return (map.num_groups() - 1) * H(); }
  Index num_theta() const { return data.param_dim(); }
  Index num_free() const { return layout.num_free(); }
  Index num_gamma() const { return num_lambda() + num_theta() + num_free(); }

  /// Rows drawn jointly from data, predictions and basis values.
  FusionProblem resample(std::span<const Index> rows) const;
};

/// n x (L-1)H matrix of g_{l,h}(X_i); column index l*H + h.
Matrix moment_matrix(const FusionProblem& problem, const Vector& theta,
                     const Vector& phi_free);

/// delta_i = 1 / (n (1 + g_i' lambda)). Throws BoundaryError on a
/// non-positive denominator.
Vector el_weights(const Matrix& moments, const Vector& lambda);

/// ell_n(theta) - mean_i log(1 + g_i' lambda); -infinity outside the
/// positivity region.
double profile_objective(const FusionProblem& problem, const FusedParams& gamma);

/// profile_objective - tau * ||lambda||^2.
double penalized_objective(const FusionProblem& problem, const FusedParams& gamma,
                           double tau);

/// How the L2 penalty on lambda enters the saddle problem solved by the
/// estimator.
///   shrink:  lambda minimises  -mean log(1+g'lambda) + tau ||lambda||^2
///   literal: lambda is stationary for -mean log(1+g'lambda) - tau ||lambda||^2
enum class PenaltyForm { shrink, literal };

inline double penalty_sign(PenaltyForm form) {
  return form == PenaltyForm::shrink ? 1.0 : -1.0;
}

struct Derivatives {
  double value = 0.0;
  Vector gradient;  // gamma order: lambda, theta, phi_free
  Matrix hessian;   // empty unless requested
};

/// Value, gradient and (optionally) Hessian of
/// profile_objective + sign * tau * ||lambda||^2.
Derivatives objective_derivatives(const FusionProblem& problem,
                                  const FusedParams& gamma, double tau,
                                  double sign, bool with_hessian);

/// Per-observation gradients of the single-observation profile objective
/// (no penalty), each n x dim.
struct ObservationScores {
  Matrix lambda;
  Matrix theta;
  Matrix phi_free;
};

ObservationScores observation_scores(const FusionProblem& problem,
                                     const FusedParams& gamma);

/// lambda-lambda Hessian of the single-observation profile objective at row i.
Matrix observation_lambda_hessian(const Matrix& moments, const Vector& lambda,
                                  Index row);

struct LambdaOptions {
  double tol = 1e-9;
  int max_iter = 100;
  PenaltyForm penalty = PenaltyForm::shrink;
  Vector start;  // zero when empty
};

struct LambdaSolution {
  Vector lambda;
  int iterations = 0;
  double residual = 0.0;
};

/// Newton on the lambda score of the penalised objective, with backtracking
/// confined to {1 + g_i' lambda > 0 for all i}.
LambdaSolution solve_lambda_detailed(const Matrix& moments, double tau,
                                     const LambdaOptions& options = {});

inline Vector solve_lambda(const Matrix& moments, double tau,
                           const LambdaOptions& options = {}) {
  return solve_lambda_detailed(moments, tau, options).lambda;
}

struct FmleOptions {
  double tau = 0.1;
  double tol = 1e-8;
  int max_outer = 200;
  LambdaOptions inner;
  PenaltyForm penalty = PenaltyForm::shrink;
  std::optional<FusedParams> start;
  /// Reuse an existing primary-only fit instead of refitting it.
  std::optional<MleFit> mle;
};

struct FmleFit {
  FusedParams params;
  Vector el_weights;
  double objective = 0.0;  // outer objective at the solution
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool converged = false;
  double tau = 0.0;
  double gradient_norm = 0.0;
  std::vector<double> trace;  // outer objective after each accepted step
  std::vector<std::string> warnings;
  MleFit mle;
};

/// Outer objective of (theta, phi_free): the saddle objective with lambda
/// re-solved. Returns the solved lambda through `lambda_io` (used as a warm
/// start on input).
double outer_objective(const FusionProblem& problem, const Vector& theta,
                       const Vector& phi_free, double tau, PenaltyForm penalty,
                       Vector& lambda_io, const LambdaOptions& inner = {});

/// Stationary point of the penalised profile pseudo-likelihood: lambda
/// solved given (theta, phi_free), Newton ascent in (theta, phi_free).
FmleFit fit_fmle(const FusionProblem& problem, const FmleOptions& options = {});

}  // namespace elfuse
