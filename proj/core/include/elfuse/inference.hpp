#pragma once

#include "elfuse/elfusion.hpp"
#include "elfuse/types.hpp"

#include <cstdint>
#include <vector>

namespace elfuse {

/// Empirical G and J matrices of the fused estimator, gamma order
/// (lambda, theta, phi_free).
struct BlockMatrices {
  Matrix G;
  Matrix J;
  Index num_lambda = 0;
  Index num_theta = 0;
  Index num_free = 0;
  std::vector<Index> psi_index;       // shared coordinates within theta
  std::vector<Index> vartheta_index;  // free coordinates within theta

  Index dim() const { return num_lambda + num_theta + num_free; }
  Index theta_offset() const { return num_lambda; }
  Index free_offset() const { return num_lambda + num_theta; }

  Matrix G_ll() const { return G.topLeftCorner(num_lambda, num_lambda); }
  Matrix G_lt() const { return G.block(0, num_lambda, num_lambda, num_theta); }
  Matrix G_lf() const { return G.block(0, free_offset(), num_lambda, num_free); }
  Matrix G_tt() const { return G.block(num_lambda, num_lambda, num_theta, num_theta); }
  Matrix G_lpsi() const;
  Matrix J_l() const { return J.topLeftCorner(num_lambda, num_lambda); }
  Matrix J_t() const { return J.block(num_lambda, num_lambda, num_theta, num_theta); }

  /// Assembles G and J from blocks, filling the structural zeros.
  static BlockMatrices assemble(const Matrix& G_ll, const Matrix& G_lt,
                                const Matrix& G_lf, const Matrix& G_tt,
                                const Matrix& J_l, const Matrix& J_t,
                                std::vector<Index> psi_index = {},
                                std::vector<Index> vartheta_index = {});
};

/// Plug-in blocks at the fitted point: G = -(1/n) sum of per-observation
/// Hessians, J from the centred covariance of per-observation scores.
/// Throws NumericalError with the numerical rank when G is singular.
BlockMatrices empirical_blocks(const FusionProblem& problem, const FmleFit& fit);

struct SandwichResult {
  Matrix sigma_gamma;
  Matrix sigma_theta;
};

/// G^{-1} J G^{-1}. Throws NumericalError when cond(G) > 1e12.
SandwichResult sigma_sandwich(const BlockMatrices& blocks);

struct Theorem3Result {
  Matrix sigma_theta;
  Matrix D;
  Matrix L;
  Matrix info_inverse;
};

/// I^{-1} + L' D L with D = -J_l - G_lt I^{-1} G_tl and I = G_tt.
/// Throws NumericalError when D is not negative definite or the free-parameter
/// block G_fl D^{-1} G_lf is singular.
Theorem3Result sigma_theorem3(const BlockMatrices& blocks);

struct EfficiencyDiagnostic {
  bool necessary_holds = false;
  bool sufficient_holds = false;
  double colspace_residual = 0.0;
  bool gain_expected = false;
};

/// Dimension checks H(K-1) > p(K-1) - m and min{m, H(K-1)} > p(K-1) - m.
EfficiencyDiagnostic dimension_conditions(Index H, int K, Index p, Index m);

/// ||(I - P) G_lpsi||_F / ||G_lpsi||_F with P the projection onto col(G_lf),
/// plus the dimension checks.
EfficiencyDiagnostic efficiency_diagnostic(const BlockMatrices& blocks, Index H,
                                           int K, Index p, Index m);

/// Relative residual of projecting the columns of `target` onto col(`span`).
/// Rank of `span` uses singular values above 1e-10 * sigma_max.
double colspace_residual(const Matrix& target, const Matrix& span);

struct BootstrapOptions {
  int B = 200;
  std::uint64_t seed = 0;
  FmleOptions fit;
  /// When set, every replicate uses this seed for its resample.
  std::optional<std::uint64_t> force_replicate_seed;
  int threads = 0;
};

struct BootstrapResult {
  Matrix covariance;   // of stacked gamma replicates
  Vector se;           // sqrt of the diagonal
  int replicates = 0;  // successful fits
  int failures = 0;
};

/// Row-resampling bootstrap of the fused estimator. Throws ConvergenceError
/// when more than 10% of replicate fits fail.
BootstrapResult bootstrap_se(const FusionProblem& problem, const BootstrapOptions& options);

/// Standard normal quantile, absolute error below 1e-12 on (1e-300, 1).
double normal_quantile(double prob);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool degenerate = false;
};

std::vector<Interval> wald_ci(const Vector& estimates, const Vector& ses, double level);

/// Sample covariance of the rows of `samples` with divisor `samples.rows()`
/// after centring.
Matrix centered_covariance(const Matrix& samples);

}  // namespace elfuse
