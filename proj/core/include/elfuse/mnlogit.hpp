#pragma once

#include "elfuse/types.hpp"

#include <string>
#include <vector>

namespace elfuse {

/// Class probabilities p_1..p_K of the multinomial logit with class K as the
/// reference. `theta` stacks theta_1..theta_{K-1}, each of length x.size().
Vector class_probs(const Eigen::Ref<const Vector>& x, const Vector& theta,
                   int num_classes);

/// Writes class probabilities into `probs` (length K) without allocating.
void class_probs_into(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                      const Vector& theta, int num_classes, double* probs);

/// Average full multinomial log-likelihood (the k = K term included).
double log_lik(const PrimaryDataset& data, const Vector& theta);

struct ScoreHessian {
  Vector gradient;
  Matrix hessian;
};

/// Gradient and Hessian of log_lik with respect to stacked theta.
ScoreHessian score_and_hessian(const PrimaryDataset& data, const Vector& theta);

/// Per-observation scores, n x p(K-1).
Matrix observation_scores(const PrimaryDataset& data, const Vector& theta);

struct MleOptions {
  double tol = 1e-8;
  int max_iter = 200;
  /// Starting point; zero when empty.
  Vector start;
};

struct MleFit {
  Vector theta_hat;
  double loglik = 0.0;
  Matrix info;  // negative average Hessian at theta_hat
  int iterations = 0;
  bool converged = false;
  bool separation = false;
  std::vector<std::string> warnings;
};

/// Damped Newton maximization of log_lik with step halving.
MleFit fit_mle(const PrimaryDataset& data, const MleOptions& options = {});

}  // namespace elfuse
