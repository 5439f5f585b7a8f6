#include "doctest.h"
#include "helpers.hpp"

#include "elfuse/inference.hpp"

#include <cmath>

using namespace elfuse;

namespace {

// Gauss-Jordan with partial pivoting.
Matrix gj_inverse(Matrix a) {
  const Index n = a.rows();
  Matrix inv = Matrix::Identity(n, n);
  for (Index c = 0; c < n; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < n; ++r) {
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    }
    a.row(c).swap(a.row(piv));
    inv.row(c).swap(inv.row(piv));
    const double d = a(c, c);
    a.row(c) /= d;
    inv.row(c) /= d;
    for (Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      a.row(r) -= f * a.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

Matrix spd(std::mt19937_64& rng, Index n) {
  const Matrix a = testutil::gaussian_design(rng, n, n + 1).rightCols(n);
  return a.transpose() * a / static_cast<double>(n) + Matrix::Identity(n, n);
}

// Blocks with the structural zeros and the two information identities.
BlockMatrices blocks(std::mt19937_64& rng, Index q, Index d, Index f, std::vector<Index> psi) {
  const Matrix Jl = spd(rng, q);
  const Matrix Gtt = spd(rng, d);
  Matrix Glt = Matrix::Zero(q, d);
  for (Index c : psi) Glt.col(c) = 0.4 * testutil::gaussian_vector(rng, q);
  const Matrix Glf = testutil::gaussian_design(rng, q, f + 1).rightCols(f);
  std::vector<Index> vartheta;
  for (Index c = 0; c < d; ++c) {
    if (std::find(psi.begin(), psi.end(), c) == psi.end()) vartheta.push_back(c);
  }
  return BlockMatrices::assemble(-Jl, Glt, Glf, Gtt, Jl, Gtt, psi, vartheta);
}

}  // namespace

TEST_CASE("sandwich matches a dense oracle") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    const auto b = blocks(rng, 4, 4, 2, {1, 3});
    const Matrix gi = gj_inverse(b.G);
    const Matrix expected = gi * b.J * gi.transpose();
    const auto s = sigma_sandwich(b);
    CHECK((s.sigma_gamma - expected).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, expected.norm()));
    CHECK(s.sigma_theta.diagonal().minCoeff() >= 0.0);
    CHECK((s.sigma_gamma - s.sigma_gamma.transpose()).norm() < 1e-8);
  }
}

TEST_CASE("zero pattern of assembled blocks") {
  std::mt19937_64 rng(42);
  const auto b = blocks(rng, 3, 4, 1, {0, 2});
  CHECK(b.G.block(b.theta_offset(), b.free_offset(), 4, 1).norm() == 0.0);
  CHECK(b.J.block(b.free_offset(), b.free_offset(), 1, 1).norm() == 0.0);
  CHECK((b.G - b.G.transpose()).norm() < 1e-10);
}

TEST_CASE("decomposition agrees with the sandwich and orders the covariances") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 50; ++rep) {
    std::uniform_int_distribution<int> dim(2, 5);
    const Index d = dim(rng);
    const Index q = dim(rng) + 1;
    std::vector<Index> psi;
    for (Index c = 0; c < d; ++c) {
      if (c % 2 == 0 || c == d - 1) psi.push_back(c);
    }
    const Index f = std::uniform_int_distribution<Index>(0, q - 1)(rng);
    const auto b = blocks(rng, q, d, f, psi);
    const auto t3 = sigma_theorem3(b);
    const auto sw = sigma_sandwich(b);
    CHECK((t3.sigma_theta - sw.sigma_theta).norm() <= 1e-6 * sw.sigma_theta.norm());
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(t3.D).eigenvalues().maxCoeff() < 0.0);
    const Matrix gap = t3.info_inverse - t3.sigma_theta;
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (gap + gap.transpose())).eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("no constraints collapse to the information inverse") {
  std::mt19937_64 rng(44);
  const Matrix Gtt = spd(rng, 4);
  const auto b = BlockMatrices::assemble(Matrix(0, 0), Matrix(0, 4), Matrix(0, 0), Gtt,
                                         Matrix(0, 0), Gtt);
  const auto s = sigma_sandwich(b);
  CHECK((s.sigma_theta - gj_inverse(Gtt)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nothing shared gives L = 0") {
  std::mt19937_64 rng(45);
  const auto b = blocks(rng, 4, 4, 2, {});
  const auto t3 = sigma_theorem3(b);
  CHECK(t3.L.norm() < 1e-12);
  CHECK((t3.sigma_theta - gj_inverse(b.G_tt())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("dimension conditions") {
  const auto sim = dimension_conditions(5, 3, 5, 8);
  CHECK(sim.necessary_holds);
  CHECK(sim.sufficient_holds);
  const auto ex1 = dimension_conditions(1, 3, 5, 10);
  CHECK(ex1.necessary_holds);
  CHECK(ex1.sufficient_holds);
  const auto poor = dimension_conditions(1, 3, 5, 8);
  CHECK_FALSE(poor.necessary_holds);
  CHECK_FALSE(poor.sufficient_holds);
  const auto ex2_h1 = dimension_conditions(1, 2, 2, 1);
  CHECK_FALSE(ex2_h1.necessary_holds);
  const auto ex2_h2 = dimension_conditions(2, 2, 2, 1);
  CHECK(ex2_h2.necessary_holds);
  CHECK_FALSE(ex2_h2.sufficient_holds);
}

TEST_CASE("square free block spans everything") {
  std::mt19937_64 rng(46);
  for (int rep = 0; rep < 10; ++rep) {
    // p = 3, K = 3, H = 2, two shared coordinates: H(K-1) = 4 = p(K-1) - m.
    const auto b = blocks(rng, 4, 6, 4, {1, 4});
    const auto diag = efficiency_diagnostic(b, 2, 3, 3, 2);
    CHECK_FALSE(diag.necessary_holds);
    CHECK(diag.colspace_residual < 1e-6);
    CHECK_FALSE(diag.gain_expected);
    const auto t3 = sigma_theorem3(b);
    const Matrix scale = b.G_lt() * gj_inverse(b.G_tt());
    CHECK(t3.L.norm() < 1e-6 * scale.norm());
  }
}

TEST_CASE("column space residual") {
  Matrix span(3, 1);
  span << 1, 0, 0;
  Matrix target(3, 2);
  target << 2, 0, 0, 1, 0, 0;
  CHECK(colspace_residual(target, span) == doctest::Approx(1.0 / std::sqrt(5.0)));
  CHECK(colspace_residual(span, span) < 1e-15);
}

TEST_CASE("empirical blocks at a fitted replicate") {
  auto cfg = ScenarioConfig::reference(ShiftSpec::Kind::none, false);
  cfg.seed = 5;
  const auto rep = generate_replicate(cfg, 0);
  const auto problem = FusionProblem::make(rep.primary, rep.predictions, cfg.map, cfg.basis_set(),
                                           cfg.layout);
  FmleOptions opt;
  opt.tau = cfg.tau;
  const auto fit = fit_fmle(problem, opt);
  const auto b = empirical_blocks(problem, fit);
  CHECK((b.G - b.G.transpose()).norm() < 1e-10);
  CHECK(b.G.block(b.theta_offset(), b.free_offset(), b.num_theta, b.num_free).norm() == 0.0);
  CHECK(b.J.block(b.free_offset(), b.free_offset(), b.num_free, b.num_free).norm() == 0.0);
  const auto diag = efficiency_diagnostic(b, problem.H(), cfg.K, cfg.p, cfg.layout.m());
  CHECK(diag.colspace_residual >= 0.0);
  CHECK(diag.colspace_residual <= 1.0);
  CHECK(diag.necessary_holds);
  CHECK(diag.sufficient_holds);
}

TEST_CASE("empirical identities improve with n") {
  // Oracle predictions for Z without the fifth column, truth parameters and
  // lambda = 0.
  auto gap = [](Index n) {
    auto cfg = ScenarioConfig::reference(ShiftSpec::Kind::none, true);
    cfg.n = n;
    cfg.N = 10;
    cfg.predictor.kind = PredictorSpec::Kind::oracle;
    cfg.seed = 9;
    const auto rep = generate_replicate(cfg, 0);
    const auto problem = FusionProblem::make(rep.primary, rep.predictions, cfg.map,
                                             cfg.basis_set(), cfg.layout);
    FmleFit fit;
    fit.converged = true;
    fit.params = {Vector::Zero(problem.num_lambda()), cfg.theta_true, cfg.phi_free_true};
    const auto b = empirical_blocks(problem, fit);
    return std::pair{(b.J_l() + b.G_ll()).norm() / b.J_l().norm(),
                     (b.J_t() - b.G_tt()).norm() / b.G_tt().norm()};
  };
  const auto small = gap(500);
  const auto large = gap(16000);
  CHECK(large.first < 0.5 * small.first);
  CHECK(large.second < 0.5 * small.second);
  CHECK(large.first < 0.05);
  CHECK(large.second < 0.05);
}

TEST_CASE("bootstrap") {
  std::mt19937_64 rng(47);
  const auto problem = testutil::random_problem(rng, 150, 3, 3);
  BootstrapOptions opt;
  opt.B = 2;
  opt.force_replicate_seed = 99;
  const auto same = bootstrap_se(problem, opt);
  CHECK(same.covariance.norm() == 0.0);

  opt.force_replicate_seed.reset();
  opt.B = 20;
  opt.seed = 5;
  const auto a = bootstrap_se(problem, opt);
  const auto b = bootstrap_se(problem, opt);
  CHECK(a.covariance == b.covariance);
  CHECK((a.covariance - a.covariance.transpose()).norm() < 1e-10);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(a.covariance).eigenvalues().minCoeff() >= -1e-10);
  opt.seed = 6;
  CHECK(bootstrap_se(problem, opt).covariance != a.covariance);
  opt.B = 1;
  CHECK_THROWS_AS(bootstrap_se(problem, opt), ValidationError);
}

TEST_CASE("normal quantiles and Wald intervals") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.75) == doctest::Approx(0.6744897501960817).epsilon(1e-12));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-10));
  CHECK(normal_quantile(0.5) == 0.0);
  Vector est(3), se(3);
  est << 0.0, 2.0, 1.0;
  se << 1.0, 3.0, 0.0;
  const auto ci = wald_ci(est.head(1), se.head(1), 0.95);
  CHECK(ci[0].lower == doctest::Approx(-1.959963984540054));
  CHECK(ci[0].upper == doctest::Approx(1.959963984540054));
  const auto half = wald_ci(est, se, 0.5);
  CHECK(half[1].lower == doctest::Approx(2.0 - 0.6744897501960817 * 3.0));
  CHECK(half[1].upper == doctest::Approx(2.0 + 0.6744897501960817 * 3.0));
  CHECK(half[2].degenerate);
  CHECK(half[2].lower == 1.0);
  CHECK(half[2].upper == 1.0);
  CHECK_THROWS_AS(wald_ci(est, se, 1.0), ValidationError);
}
