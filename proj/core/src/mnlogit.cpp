#include "elfuse/mnlogit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace elfuse {

void class_probs_into(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                      const Vector& theta, int num_classes, double* probs) {
  const Index p = x.size();
  double max_eta = 0.0;  // reference class has eta = 0
  for (int k = 0; k < num_classes - 1; ++k) {
    const double eta = x.dot(theta.segment(k * p, p).transpose());
    probs[k] = eta;
    max_eta = std::max(max_eta, eta);
  }
  double denom = std::exp(-max_eta);
  probs[num_classes - 1] = denom;
  for (int k = 0; k < num_classes - 1; ++k) {
    probs[k] = std::exp(probs[k] - max_eta);
    denom += probs[k];
  }
  for (int k = 0; k < num_classes; ++k) probs[k] /= denom;
}

Vector class_probs(const Eigen::Ref<const Vector>& x, const Vector& theta,
                   int num_classes) {
  if (theta.size() != x.size() * (num_classes - 1)) {
    throw ValidationError("class_probs: theta length does not match p(K-1)");
  }
  Vector out(num_classes);
  class_probs_into(x.transpose(), theta, num_classes, out.data());
  return out;
}

double log_lik(const PrimaryDataset& data, const Vector& theta) {
  const int K = data.K();
  const Index p = data.p();
  if (theta.size() != data.param_dim()) {
    throw ValidationError("log_lik: theta length does not match p(K-1)");
  }
  double total = 0.0;
  std::vector<double> eta(static_cast<std::size_t>(K));
  for (Index i = 0; i < data.n(); ++i) {
    double max_eta = 0.0;
    for (int k = 0; k < K - 1; ++k) {
      eta[static_cast<std::size_t>(k)] =
          data.design.row(i).dot(theta.segment(k * p, p).transpose());
      max_eta = std::max(max_eta, eta[static_cast<std::size_t>(k)]);
    }
    eta[static_cast<std::size_t>(K - 1)] = 0.0;
    double sum = 0.0;
    for (int k = 0; k < K; ++k) sum += std::exp(eta[static_cast<std::size_t>(k)] - max_eta);
    const int y = data.labels[static_cast<std::size_t>(i)];
    total += eta[static_cast<std::size_t>(y - 1)] - max_eta - std::log(sum);
  }
  return total / static_cast<double>(data.n());
}

Matrix observation_scores(const PrimaryDataset& data, const Vector& theta) {
  const int K = data.K();
  const Index p = data.p();
  Matrix scores(data.n(), data.param_dim());
  std::vector<double> probs(static_cast<std::size_t>(K));
  for (Index i = 0; i < data.n(); ++i) {
    class_probs_into(data.design.row(i), theta, K, probs.data());
    const int y = data.labels[static_cast<std::size_t>(i)];
    for (int k = 0; k < K - 1; ++k) {
      const double resid = (y == k + 1 ? 1.0 : 0.0) - probs[static_cast<std::size_t>(k)];
      scores.block(i, k * p, 1, p) = resid * data.design.row(i);
    }
  }
  return scores;
}

ScoreHessian score_and_hessian(const PrimaryDataset& data, const Vector& theta) {
  const int K = data.K();
  const Index p = data.p();
  const Index n = data.n();
  if (theta.size() != data.param_dim()) {
    throw ValidationError("score_and_hessian: theta length does not match p(K-1)");
  }
  Matrix probs(n, K);
  for (Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd row(K);
    class_probs_into(data.design.row(i), theta, K, row.data());
    probs.row(i) = row;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  ScoreHessian out;
  out.gradient.resize(data.param_dim());
  out.hessian.resize(data.param_dim(), data.param_dim());
  for (int k = 0; k < K - 1; ++k) {
    Vector resid(n);
    for (Index i = 0; i < n; ++i) {
      resid(i) = (data.labels[static_cast<std::size_t>(i)] == k + 1 ? 1.0 : 0.0) - probs(i, k);
    }
    out.gradient.segment(k * p, p) = inv_n * data.design.transpose() * resid;
    for (int j = k; j < K - 1; ++j) {
      Vector w(n);
      for (Index i = 0; i < n; ++i) {
        w(i) = probs(i, k) * ((k == j ? 1.0 : 0.0) - probs(i, j));
      }
      const Matrix block =
          -inv_n * data.design.transpose() * (data.design.array().colwise() * w.array()).matrix();
      out.hessian.block(k * p, j * p, p, p) = block;
      if (j != k) out.hessian.block(j * p, k * p, p, p) = block.transpose();
    }
  }
  return out;
}

MleFit fit_mle(const PrimaryDataset& data, const MleOptions& options) {
  const Index d = data.param_dim();
  MleFit fit;
  if (data.n() <= d) {
    fit.warnings.push_back("fit_mle: n = " + std::to_string(data.n()) +
                           " does not exceed p(K-1) = " + std::to_string(d));
  }
  std::vector<int> counts(static_cast<std::size_t>(data.K()), 0);
  for (int y : data.labels) ++counts[static_cast<std::size_t>(y - 1)];
  for (int k = 0; k < data.K(); ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw ConvergenceError("fit_mle: class " + std::to_string(k + 1) +
                                 " has no observations; the MLE does not exist "
                                 "(separation)",
                             Vector::Zero(d), std::numeric_limits<double>::infinity());
    }
  }

  Vector theta = options.start.size() == d ? options.start : Vector::Zero(d);
  double ll = log_lik(data, theta);
  ScoreHessian sh = score_and_hessian(data, theta);
  int iter = 0;
  while (sh.gradient.lpNorm<Eigen::Infinity>() >= options.tol) {
    if (iter >= options.max_iter) {
      throw ConvergenceError("fit_mle: no convergence after " +
                                 std::to_string(options.max_iter) + " iterations",
                             theta, sh.gradient.lpNorm<Eigen::Infinity>());
    }
    ++iter;
    Matrix neg_h = -sh.hessian;
    Eigen::LDLT<Matrix> ldlt(neg_h);
    double ridge = 0.0;
    while (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
           ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, neg_h.diagonal().maxCoeff())) {
      ridge = ridge == 0.0 ? 1e-10 * std::max(1.0, neg_h.diagonal().maxCoeff()) : ridge * 10.0;
      ldlt.compute(neg_h + ridge * Matrix::Identity(d, d));
      if (ridge > 1e6) break;
    }
    const Vector step = ldlt.solve(sh.gradient);
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      const Vector trial = theta + scale * step;
      const double trial_ll = log_lik(data, trial);
      if (std::isfinite(trial_ll) && trial_ll >= ll) {
        theta = trial;
        ll = trial_ll;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    sh = score_and_hessian(data, theta);
    if (!accepted) break;  // no ascent possible at machine precision
  }
  const double gnorm = sh.gradient.lpNorm<Eigen::Infinity>();
  if (gnorm >= options.tol) {
    throw ConvergenceError("fit_mle: line search stalled with gradient norm " +
                               std::to_string(gnorm),
                           theta, gnorm);
  }
  fit.theta_hat = theta;
  fit.loglik = ll;
  fit.info = -sh.hessian;
  fit.iterations = iter;
  fit.converged = true;
  const Index p = data.p();
  for (Index i = 0; i < data.n() && !fit.separation; ++i) {
    for (int k = 0; k < data.K() - 1; ++k) {
      if (std::abs(data.design.row(i).dot(theta.segment(k * p, p).transpose())) > 30.0) {
        fit.separation = true;
        fit.warnings.push_back("fit_mle: linear predictor exceeds 30 in magnitude; "
                               "possible separation");
        break;
      }
    }
  }
  return fit;
}

}  // namespace elfuse
