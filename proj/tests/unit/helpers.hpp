#pragma once

#include "elfuse/basis.hpp"
#include "elfuse/elfusion.hpp"
#include "elfuse/mnlogit.hpp"
#include "elfuse/simengine.hpp"
#include "elfuse/types.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testutil {

using elfuse::Index;
using elfuse::Matrix;
using elfuse::Vector;

inline Matrix gaussian_design(std::mt19937_64& rng, Index n, Index p, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Matrix X(n, p);
  for (Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (Index j = 1; j < p; ++j) X(i, j) = z(rng);
  }
  return X;
}

inline Vector gaussian_vector(std::mt19937_64& rng, Index size, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = z(rng);
  return v;
}

inline elfuse::PrimaryDataset random_dataset(std::mt19937_64& rng, Index n, Index p, int K,
                                             double theta_scale = 0.5) {
  Matrix X = gaussian_design(rng, n, p);
  const Vector theta = gaussian_vector(rng, p * (K - 1), theta_scale);
  auto labels = elfuse::gen_labels(X, theta, K, rng);
  return elfuse::PrimaryDataset::make(std::move(labels), std::move(X), K);
}

/// Random grouped predictions: each row is a draw from a flat Dirichlet over
/// L cells with the last cell omitted.
inline Matrix random_predictions(std::mt19937_64& rng, Index n, int L) {
  std::exponential_distribution<double> e(1.0);
  Matrix q(n, L - 1);
  for (Index i = 0; i < n; ++i) {
    std::vector<double> w(static_cast<std::size_t>(L));
    double total = 0.0;
    for (auto& v : w) total += (v = e(rng));
    for (int l = 0; l + 1 < L; ++l) q(i, l) = w[static_cast<std::size_t>(l)] / total;
  }
  return q;
}

inline Matrix grouped_probs(const elfuse::PrimaryDataset& data, const Vector& phi_full,
                            const elfuse::CoarseningMap& map) {
  Matrix q = Matrix::Zero(data.n(), map.num_groups() - 1);
  for (Index i = 0; i < data.n(); ++i) {
    const Vector pr = elfuse::class_probs(data.design.row(i).transpose(), phi_full, data.K());
    for (int l = 0; l + 1 < map.num_groups(); ++l) {
      for (int k : map.groups()[static_cast<std::size_t>(l)]) q(i, l) += pr(k - 1);
    }
  }
  return q;
}

inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                                 double h = 1e-5) {
  Vector g(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    Vector a = x, b = x;
    a(j) += h;
    b(j) -= h;
    g(j) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double relative_gap(const Vector& analytic, const Vector& numeric) {
  return (analytic - numeric).lpNorm<Eigen::Infinity>() /
         std::max(1.0, numeric.lpNorm<Eigen::Infinity>());
}

/// Small fusion problem with free intercepts and random predictions.
inline elfuse::FusionProblem random_problem(std::mt19937_64& rng, Index n = 120, Index p = 3,
                                            int K = 3) {
  auto data = random_dataset(rng, n, p, K);
  std::vector<std::vector<int>> groups;
  for (int k = 1; k <= K; ++k) groups.push_back({k});
  auto map = elfuse::CoarseningMap::make(groups, K);
  auto preds = elfuse::ExternalPredictionSet::make(random_predictions(rng, n, K), n);
  std::vector<Index> z(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) z[static_cast<std::size_t>(j)] = j;
  return elfuse::FusionProblem::make(std::move(data), std::move(preds), std::move(map),
                                     elfuse::BasisSet::default_for(z),
                                     elfuse::ParamLayout::free_intercepts(p, K));
}

}  // namespace testutil
