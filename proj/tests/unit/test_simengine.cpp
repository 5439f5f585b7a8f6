#include "doctest.h"
#include "helpers.hpp"

#include "elfuse/parallel.hpp"

#include <cmath>
#include <cstdlib>

using namespace elfuse;

namespace {

ScenarioConfig small_config() {
  auto cfg = ScenarioConfig::reference(ShiftSpec::Kind::none, false);
  cfg.n = 200;
  cfg.N = 1000;
  cfg.reps = 3;
  cfg.B = 0;
  cfg.eval_rows = 100;
  return cfg;
}

}  // namespace

TEST_CASE("covariate laws") {
  auto cfg = ScenarioConfig::reference(ShiftSpec::Kind::none, false);
  const Index N = 40000;
  std::mt19937_64 rng(51);
  const Matrix X = gen_covariates(cfg, Source::external, N, rng);
  CHECK(X.col(0) == Vector::Ones(N));
  for (Index j = 1; j < cfg.p; ++j) {
    const double mean = X.col(j).mean();
    const double var = (X.col(j).array() - mean).square().mean();
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(N)));
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(N)));
  }
  const double corr = ((X.col(1).array() - X.col(1).mean()) * (X.col(2).array() - X.col(2).mean())).mean();
  CHECK(corr == doctest::Approx(0.8).epsilon(0.03));

  auto shifted = ScenarioConfig::reference(ShiftSpec::Kind::mean, false);
  std::mt19937_64 rng2(52);
  const Matrix Y = gen_covariates(shifted, Source::external, N, rng2);
  const double expected[] = {0.06, -0.04, 0.08, 0.0};
  for (Index j = 1; j < shifted.p; ++j) {
    CHECK(std::abs(Y.col(j).mean() - expected[j - 1]) < 3.0 / std::sqrt(static_cast<double>(N)));
  }
  std::mt19937_64 rng3(52);
  CHECK(gen_covariates(shifted, Source::external, N, rng3) == Y);

  auto wide = ScenarioConfig::reference(ShiftSpec::Kind::variance, false);
  std::mt19937_64 rng4(53);
  const Matrix W = gen_covariates(wide, Source::external, N, rng4);
  CHECK(W.col(3).squaredNorm() / N == doctest::Approx(2.0).epsilon(0.05));
  const Matrix P = gen_covariates(wide, Source::primary, N, rng4);
  CHECK(P.col(3).squaredNorm() / N == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("label generation") {
  std::mt19937_64 rng(54);
  const Index n = 30000;
  const Matrix X = testutil::gaussian_design(rng, n, 3);
  const auto uniform = gen_labels(X, Vector::Zero(6), 3, rng);
  for (int k = 1; k <= 3; ++k) {
    const double freq = std::count(uniform.begin(), uniform.end(), k) / static_cast<double>(n);
    CHECK(std::abs(freq - 1.0 / 3.0) < 3.0 * std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / n));
  }
  Vector extreme = Vector::Zero(6);
  extreme(0) = 60.0;
  Matrix Xc = Matrix::Zero(500, 3);
  Xc.col(0).setOnes();
  for (int y : gen_labels(Xc, extreme, 3, rng)) CHECK(y == 1);

  auto cfg = ScenarioConfig::reference(ShiftSpec::Kind::none, false);
  const Matrix Xp = gen_covariates(cfg, Source::primary, n, rng);
  const auto labels = gen_labels(Xp, cfg.theta_true, cfg.K, rng);
  Vector mean_prob = Vector::Zero(cfg.K);
  for (Index i = 0; i < n; ++i) mean_prob += class_probs(Xp.row(i).transpose(), cfg.theta_true, cfg.K);
  mean_prob /= static_cast<double>(n);
  for (int k = 1; k <= cfg.K; ++k) {
    const double freq = std::count(labels.begin(), labels.end(), k) / static_cast<double>(n);
    const double p = mean_prob(k - 1);
    CHECK(std::abs(freq - p) < 4.0 * std::sqrt(p * (1.0 - p) / n));
  }
}

TEST_CASE("k nearest neighbour predictor") {
  std::mt19937_64 rng(55);
  const Index N = 200;
  const Matrix Z = testutil::gaussian_design(rng, N, 3).rightCols(2);
  std::vector<int> groups(static_cast<std::size_t>(N));
  std::uniform_int_distribution<int> pick(0, 2);
  for (auto& g : groups) g = pick(rng);

  const auto all = KnnPredictor::train(Z, groups, 3, static_cast<int>(N));
  const Matrix q = all.predict(Z.topRows(5));
  for (int l = 0; l < 2; ++l) {
    const double freq = std::count(groups.begin(), groups.end(), l) / static_cast<double>(N);
    CHECK((q.col(l).array() - freq).abs().maxCoeff() < 1e-15);
  }

  const auto one = KnnPredictor::train(Z, groups, 3, 1);
  const Matrix q1 = one.predict(Z);
  for (Index i = 0; i < N; ++i) {
    for (int l = 0; l < 2; ++l) CHECK(q1(i, l) == (groups[static_cast<std::size_t>(i)] == l ? 1.0 : 0.0));
  }
  CHECK_THROWS_AS(KnnPredictor::train(Z, groups, 3, 0), ValidationError);
  CHECK_THROWS_AS(KnnPredictor::train(Z, groups, 3, static_cast<int>(N) + 1), ValidationError);
}

TEST_CASE("k nearest neighbour error shrinks with the external sample size") {
  auto cfg = ScenarioConfig::reference(ShiftSpec::Kind::none, true);
  auto sup_error = [&](Index N) {
    cfg.N = N;
    std::mt19937_64 rng(56);
    const Matrix X = gen_covariates(cfg, Source::external, N, rng);
    const auto y = gen_labels(X, cfg.phi_full_true(), cfg.K, rng);
    std::vector<int> groups;
    for (int label : y) groups.push_back(*cfg.map.coarsen(label));
    const auto z = cfg.z_columns();
    Matrix Z(N, static_cast<Index>(z.size()) - 1);
    for (std::size_t c = 1; c < z.size(); ++c) Z.col(static_cast<Index>(c) - 1) = X.col(z[c]);
    const auto knn = KnnPredictor::train(Z, groups, cfg.map.num_groups(),
                                         static_cast<int>(std::ceil(std::sqrt(static_cast<double>(N)))));
    std::mt19937_64 eval(57);
    const Matrix E = gen_covariates(cfg, Source::primary, 400, eval);
    Matrix EZ(400, Z.cols());
    for (std::size_t c = 1; c < z.size(); ++c) EZ.col(static_cast<Index>(c) - 1) = E.col(z[c]);
    const Matrix truth = oracle_grouped_probs(E, cfg.phi_full_true(), cfg.K, cfg.map, cfg.drop_column,
                                              covariate_mean(cfg, false),
                                              covariate_covariance(cfg, false));
    return (knn.predict(EZ) - truth).cwiseAbs().maxCoeff();
  };
  const double coarse = sup_error(2000);
  const double fine = sup_error(10000);
  CHECK(fine < coarse);
}

TEST_CASE("Gauss-Hermite rule for the standard normal") {
  const auto gh = GaussHermite::standard_normal(40);
  CHECK(gh.weights.sum() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(gh.weights.dot(gh.nodes) == doctest::Approx(0.0).scale(1.0).epsilon(1e-13));
  CHECK(gh.weights.dot(gh.nodes.array().square().matrix()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gh.weights.dot(gh.nodes.array().pow(4).matrix()) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(gh.weights.dot(gh.nodes.array().cos().matrix()) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("oracle probabilities without an omitted column are the model probabilities") {
  auto cfg = ScenarioConfig::reference(ShiftSpec::Kind::none, false);
  std::mt19937_64 rng(58);
  const Matrix X = gen_covariates(cfg, Source::primary, 20, rng);
  const Matrix q = oracle_grouped_probs(X, cfg.phi_full_true(), cfg.K, cfg.map, std::nullopt,
                                        covariate_mean(cfg, false), covariate_covariance(cfg, false));
  const auto data = PrimaryDataset::make(std::vector<int>(20, 1), X, cfg.K);
  CHECK((q - testutil::grouped_probs(data, cfg.phi_full_true(), cfg.map)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("class probability error") {
  auto cfg = ScenarioConfig::reference(ShiftSpec::Kind::none, false);
  std::mt19937_64 rng(59);
  const Matrix X = gen_covariates(cfg, Source::primary, 50, rng);
  CHECK(class_prob_mse(cfg.theta_true, cfg.theta_true, X, cfg.K).norm() == 0.0);
  const Vector other = cfg.theta_true + 0.1 * Vector::Ones(cfg.theta_true.size());
  CHECK(class_prob_mse(other, cfg.theta_true, X, cfg.K).minCoeff() > 0.0);
}

TEST_CASE("replicate data are valid and coarsened faithfully") {
  const auto cfg = small_config();
  const auto rep = generate_replicate(cfg, 1);
  CHECK(rep.external_groups.size() == rep.external_labels.size());
  for (std::size_t i = 0; i < rep.external_labels.size(); ++i) {
    const auto g = cfg.map.coarsen(rep.external_labels[i]);
    CHECK(rep.external_groups[i] == (g ? *g + 1 : 0));
  }
  const Matrix& q = rep.predictions.values;
  CHECK(q.minCoeff() >= 0.0);
  CHECK(q.rowwise().sum().maxCoeff() <= 1.0);
  const auto again = generate_replicate(cfg, 1);
  CHECK(again.primary.design == rep.primary.design);
  CHECK(again.predictions.values == q);
  CHECK(generate_replicate(cfg, 2).primary.design != rep.primary.design);
}

TEST_CASE("seed derivation separates streams") {
  CHECK(derive_seed(1, 0, 1) != derive_seed(1, 0, 2));
  CHECK(derive_seed(1, 0, 1) != derive_seed(1, 1, 1));
  CHECK(derive_seed(1, 0, 1) != derive_seed(2, 0, 1));
  CHECK(derive_seed(7, 3, 4) == derive_seed(7, 3, 4));
}

TEST_CASE("replications are reproducible at any thread count") {
  auto cfg = small_config();
  setenv("ELFUSE_THREADS", "1", 1);
  const auto serial = run_replications(cfg);
  setenv("ELFUSE_THREADS", "3", 1);
  const auto threaded = run_replications(cfg);
  unsetenv("ELFUSE_THREADS");
  CHECK(serial.mle_estimates == threaded.mle_estimates);
  CHECK(serial.fmle_estimates == threaded.fmle_estimates);
  REQUIRE(serial.coordinates.size() == threaded.coordinates.size());
  for (std::size_t i = 0; i < serial.coordinates.size(); ++i) {
    CHECK(serial.coordinates[i].sd == threaded.coordinates[i].sd);
    CHECK(serial.coordinates[i].cp == threaded.coordinates[i].cp);
  }
}

TEST_CASE("a single replicate has zero-one coverage") {
  auto cfg = small_config();
  cfg.reps = 1;
  const auto table = run_replications(cfg);
  CHECK(table.reps == 1);
  for (const auto& c : table.coordinates) CHECK((c.cp == 0.0 || c.cp == 1.0));
  for (const auto& m : table.mse) CHECK(m.mse >= 0.0);
  CHECK(table.mse.size() == 6);
}

TEST_CASE("moment diagnostic") {
  auto cfg = ScenarioConfig::reference(ShiftSpec::Kind::none, true);
  cfg.predictor.kind = PredictorSpec::Kind::oracle;
  MarOptions opt;
  opt.draws = 20000;
  for (const auto& m : mar_moment_check(cfg, opt)) CHECK(std::abs(m.mean) <= 4.0 * m.se);
  opt.violate = true;
  double worst = 0.0;
  for (const auto& m : mar_moment_check(cfg, opt)) worst = std::max(worst, std::abs(m.mean) / m.se);
  CHECK(worst > 5.0);
}

TEST_CASE("scenario validation") {
  auto cfg = small_config();
  cfg.correlation = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = small_config();
  cfg.class_labels = {1, 1, 2};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = small_config();
  cfg.reps = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
