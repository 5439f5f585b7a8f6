#include "elfuse/inference.hpp"

#include "elfuse/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

namespace elfuse {

namespace {

constexpr double kRankTol = 1e-10;
constexpr double kMaxCondition = 1e12;

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix inverse_checked(const Matrix& m, const char* what) {
  if (m.rows() == 0) return m;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > s(0) / kMaxCondition)) {
    std::ostringstream os;
    os << what << ": matrix is singular or ill-conditioned (condition number "
       << (s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity())
       << ")";
    throw NumericalError(os.str());
  }
  return Eigen::PartialPivLU<Matrix>(m).inverse();
}

}  // namespace

Matrix BlockMatrices::G_lpsi() const {
  Matrix out(num_lambda, static_cast<Index>(psi_index.size()));
  for (std::size_t j = 0; j < psi_index.size(); ++j) {
    out.col(static_cast<Index>(j)) = G.col(num_lambda + psi_index[j]);
  }
  return out;
}

BlockMatrices BlockMatrices::assemble(const Matrix& G_ll, const Matrix& G_lt,
                                      const Matrix& G_lf, const Matrix& G_tt,
                                      const Matrix& J_l, const Matrix& J_t,
                                      std::vector<Index> psi_index,
                                      std::vector<Index> vartheta_index) {
  BlockMatrices b;
  b.num_lambda = G_ll.rows();
  b.num_theta = G_tt.rows();
  b.num_free = G_lf.cols();
  const Index q = b.num_lambda;
  const Index d = b.num_theta;
  const Index f = b.num_free;
  if (G_lt.rows() != q || G_lt.cols() != d || G_lf.rows() != q || J_l.rows() != q ||
      J_t.rows() != d) {
    throw ValidationError("BlockMatrices: inconsistent block dimensions");
  }
  b.G = Matrix::Zero(q + d + f, q + d + f);
  b.G.topLeftCorner(q, q) = G_ll;
  b.G.block(0, q, q, d) = G_lt;
  b.G.block(q, 0, d, q) = G_lt.transpose();
  b.G.block(0, q + d, q, f) = G_lf;
  b.G.block(q + d, 0, f, q) = G_lf.transpose();
  b.G.block(q, q, d, d) = G_tt;
  b.J = Matrix::Zero(q + d + f, q + d + f);
  b.J.topLeftCorner(q, q) = J_l;
  b.J.block(q, q, d, d) = J_t;
  b.psi_index = std::move(psi_index);
  b.vartheta_index = std::move(vartheta_index);
  return b;
}

Matrix centered_covariance(const Matrix& samples) {
  if (samples.rows() == 0) return Matrix::Zero(samples.cols(), samples.cols());
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Matrix centred = samples.rowwise() - mean;
  return centred.transpose() * centred / static_cast<double>(samples.rows());
}

BlockMatrices empirical_blocks(const FusionProblem& problem, const FmleFit& fit) {
  if (!fit.converged) throw ValidationError("empirical_blocks: fit did not converge");
  const Derivatives der = objective_derivatives(problem, fit.params, 0.0, 1.0, true);
  const Matrix G = -der.hessian;
  const Index q = problem.num_lambda();
  const Index d = problem.num_theta();
  const Index f = problem.num_free();
  const ObservationScores scores = observation_scores(problem, fit.params);
  BlockMatrices b = BlockMatrices::assemble(
      G.topLeftCorner(q, q), G.block(0, q, q, d), G.block(0, q + d, q, f),
      symmetrize(G.block(q, q, d, d)), centered_covariance(scores.lambda),
      centered_covariance(scores.theta), problem.layout.shared_index(),
      problem.layout.free_index());
  b.G = symmetrize(b.G);

  Eigen::JacobiSVD<Matrix> svd(b.G);
  const auto& s = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) rank += s(i) > kRankTol * s(0) ? 1 : 0;
  if (rank < s.size()) {
    throw NumericalError("empirical_blocks: G is singular (rank " + std::to_string(rank) +
                         " of " + std::to_string(s.size()) + ")");
  }
  return b;
}

SandwichResult sigma_sandwich(const BlockMatrices& blocks) {
  const Matrix g_inv = inverse_checked(blocks.G, "sigma_sandwich");
  SandwichResult out;
  out.sigma_gamma = symmetrize(g_inv * blocks.J * g_inv.transpose());
  out.sigma_theta =
      out.sigma_gamma.block(blocks.num_lambda, blocks.num_lambda, blocks.num_theta, blocks.num_theta);
  return out;
}

Theorem3Result sigma_theorem3(const BlockMatrices& blocks) {
  const Index q = blocks.num_lambda;
  const Index d = blocks.num_theta;
  const Index f = blocks.num_free;
  Theorem3Result out;
  out.info_inverse = symmetrize(inverse_checked(blocks.G_tt(), "sigma_theorem3: information"));
  const Matrix G_lt = blocks.G_lt();
  out.D = symmetrize(-blocks.J_l() - G_lt * out.info_inverse * G_lt.transpose());
  out.L = Matrix::Zero(q, d);
  if (q == 0) {
    out.sigma_theta = out.info_inverse;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.D);
  if (!(eig.eigenvalues().maxCoeff() < 0.0)) {
    std::ostringstream os;
    os << "sigma_theorem3: D is not negative definite; eigenvalues "
       << eig.eigenvalues().transpose();
    throw NumericalError(os.str());
  }
  if (G_lt.squaredNorm() > 0.0) {
    const Matrix d_inv = symmetrize(Eigen::LDLT<Matrix>(out.D).solve(Matrix::Identity(q, q)));
    Matrix proj = d_inv;
    if (f > 0) {
      const Matrix G_lf = blocks.G_lf();
      const Matrix S = symmetrize(G_lf.transpose() * d_inv * G_lf);
      const Matrix s_inv =
          inverse_checked(S, "sigma_theorem3: free-parameter block G_fl D^-1 G_lf");
      proj -= d_inv * G_lf * s_inv * G_lf.transpose() * d_inv;
    }
    out.L = proj * G_lt * out.info_inverse;
  }
  out.sigma_theta = symmetrize(out.info_inverse + out.L.transpose() * out.D * out.L);
  return out;
}

EfficiencyDiagnostic dimension_conditions(Index H, int K, Index p, Index m) {
  EfficiencyDiagnostic out;
  const Index rows = H * (K - 1);
  const Index free = p * (K - 1) - m;
  out.necessary_holds = rows > free;
  out.sufficient_holds = std::min(m, rows) > free;
  return out;
}

double colspace_residual(const Matrix& target, const Matrix& span) {
  const double norm = target.norm();
  if (norm == 0.0) return 0.0;
  if (span.cols() == 0 || span.norm() == 0.0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(span, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) rank += s(i) > kRankTol * s(0) ? 1 : 0;
  const Matrix U = svd.matrixU().leftCols(rank);
  const Matrix resid = target - U * (U.transpose() * target);
  return std::min(1.0, resid.norm() / norm);
}

EfficiencyDiagnostic efficiency_diagnostic(const BlockMatrices& blocks, Index H, int K,
                                           Index p, Index m) {
  EfficiencyDiagnostic out = dimension_conditions(H, K, p, m);
  out.colspace_residual = colspace_residual(blocks.G_lpsi(), blocks.G_lf());
  out.gain_expected = out.colspace_residual > 1e-6;
  return out;
}

BootstrapResult bootstrap_se(const FusionProblem& problem, const BootstrapOptions& options) {
  if (options.B < 2) throw ValidationError("bootstrap: B must be at least 2");
  const Index n = problem.n();
  std::vector<std::optional<Vector>> draws(static_cast<std::size_t>(options.B));
  parallel_for(
      options.B,
      [&](std::int64_t b) {
        const std::uint64_t seed = options.force_replicate_seed
                                       ? *options.force_replicate_seed
                                       : derive_seed(options.seed, static_cast<std::uint64_t>(b));
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<Index> pick(0, n - 1);
        std::vector<Index> rows(static_cast<std::size_t>(n));
        for (auto& r : rows) r = pick(rng);
        FmleOptions fit_options = options.fit;
        fit_options.mle.reset();
        fit_options.start.reset();
        try {
          const FusionProblem sample = problem.resample(rows);
          const FmleFit fit = fit_fmle(sample, fit_options);
          if (fit.params.all_finite()) draws[static_cast<std::size_t>(b)] = fit.params.stacked();
        } catch (const Error&) {
        }
      },
      options.threads);

  BootstrapResult out;
  std::vector<const Vector*> ok;
  for (const auto& d : draws) {
    if (d) ok.push_back(&*d);
  }
  out.replicates = static_cast<int>(ok.size());
  out.failures = options.B - out.replicates;
  if (out.failures * 10 > options.B) {
    throw ConvergenceError("bootstrap: " + std::to_string(out.failures) + " of " +
                               std::to_string(options.B) + " replicate fits failed",
                           Vector(), static_cast<double>(out.failures));
  }
  if (out.replicates < 2) {
    throw ConvergenceError("bootstrap: fewer than two successful replicates", Vector(), 0.0);
  }
  const Index dim = ok.front()->size();
  Vector mean = Vector::Zero(dim);
  for (const Vector* v : ok) mean += *v;
  mean /= static_cast<double>(ok.size());
  out.covariance = Matrix::Zero(dim, dim);
  for (const Vector* v : ok) {
    const Vector c = *v - mean;
    out.covariance.noalias() += c * c.transpose();
  }
  out.covariance /= static_cast<double>(ok.size() - 1);
  out.se = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw ValidationError("normal_quantile: probability must lie in (0,1)");
  }
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (prob < low) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - low) {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - prob;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

std::vector<Interval> wald_ci(const Vector& estimates, const Vector& ses, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("wald_ci: level must lie in (0,1)");
  if (estimates.size() != ses.size()) {
    throw ValidationError("wald_ci: estimates and standard errors differ in length");
  }
  const double z = normal_quantile(0.5 * (1.0 + level));
  std::vector<Interval> out(static_cast<std::size_t>(estimates.size()));
  for (Index i = 0; i < estimates.size(); ++i) {
    auto& ci = out[static_cast<std::size_t>(i)];
    const double est = estimates(i);
    const double se = ses(i);
    if (!(se > 0.0) || !std::isfinite(se)) {
      ci = {est, est, true};
    } else {
      ci = {est - z * se, est + z * se, false};
    }
  }
  return out;
}

}  // namespace elfuse
