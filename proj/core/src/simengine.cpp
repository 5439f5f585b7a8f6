#include "elfuse/simengine.hpp"

#include "elfuse/csv.hpp"
#include "elfuse/inference.hpp"
#include "elfuse/mnlogit.hpp"
#include "elfuse/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace elfuse {

namespace {

constexpr std::uint64_t kStreamPrimaryX = 1;
constexpr std::uint64_t kStreamPrimaryY = 2;
constexpr std::uint64_t kStreamExternalX = 3;
constexpr std::uint64_t kStreamExternalY = 4;
constexpr std::uint64_t kStreamBootstrap = 5;
constexpr std::uint64_t kStreamEvalGrid = 6;

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::vector<double> grouped(const CoarseningMap& map, const double* probs) {
  std::vector<double> out(static_cast<std::size_t>(map.num_groups() - 1), 0.0);
  for (int l = 0; l + 1 < map.num_groups(); ++l) {
    for (int k : map.groups()[static_cast<std::size_t>(l)]) {
      out[static_cast<std::size_t>(l)] += probs[k - 1];
    }
  }
  return out;
}

Matrix predictor_columns(const Matrix& X, const std::vector<Index>& z_columns) {
  Matrix Z(X.rows(), static_cast<Index>(z_columns.size()) - 1);
  Index c = 0;
  for (Index col : z_columns) {
    if (col != 0) Z.col(c++) = X.col(col);
  }
  return Z;
}

}  // namespace

const char* to_string(ShiftSpec::Kind kind) {
  switch (kind) {
    case ShiftSpec::Kind::none: return "none";
    case ShiftSpec::Kind::mean: return "mean";
    case ShiftSpec::Kind::variance: return "variance";
    case ShiftSpec::Kind::mean_and_variance: return "mean_and_variance";
  }
  return "none";
}

ShiftSpec::Kind parse_shift_kind(const std::string& name) {
  if (name == "none") return ShiftSpec::Kind::none;
  if (name == "mean") return ShiftSpec::Kind::mean;
  if (name == "variance") return ShiftSpec::Kind::variance;
  if (name == "mean_and_variance") return ShiftSpec::Kind::mean_and_variance;
  throw ValidationError("unknown shift kind '" + name + "'");
}

const char* to_string(PredictorSpec::Kind kind) {
  switch (kind) {
    case PredictorSpec::Kind::knn: return "knn";
    case PredictorSpec::Kind::oracle: return "oracle";
    case PredictorSpec::Kind::file: return "file";
  }
  return "knn";
}

PredictorSpec::Kind parse_predictor_kind(const std::string& name) {
  if (name == "knn") return PredictorSpec::Kind::knn;
  if (name == "oracle") return PredictorSpec::Kind::oracle;
  if (name == "file") return PredictorSpec::Kind::file;
  throw ValidationError("unknown predictor kind '" + name + "'");
}

void ScenarioConfig::validate() const {
  if (p < 2) throw ValidationError("scenario: p must be at least 2");
  if (K < 2) throw ValidationError("scenario: K must be at least 2");
  if (n < 1 || N < 1) throw ValidationError("scenario: n and N must be positive");
  if (theta_true.size() != p * (K - 1)) {
    throw ValidationError("scenario: theta_true must have length p(K-1) = " +
                          std::to_string(p * (K - 1)));
  }
  if (layout.p() != p || layout.K() != K) {
    throw ValidationError("scenario: layout dimensions do not match (p, K)");
  }
  if (phi_free_true.size() != layout.num_free()) {
    throw ValidationError("scenario: phi_free_true must have length " +
                          std::to_string(layout.num_free()));
  }
  if (map.num_classes() != K) throw ValidationError("scenario: coarsening K mismatch");
  const double dim = static_cast<double>(p - 1);
  const double lower = dim > 1.0 ? -1.0 / (dim - 1.0) : -1.0;
  if (!(correlation > lower && correlation < 1.0)) {
    throw ValidationError("scenario: correlation must lie in (-1/(p-2), 1)");
  }
  if (shift.shifts_mean() && shift.mean.size() != p - 1) {
    throw ValidationError("scenario: shift mean must have length p-1 = " +
                          std::to_string(p - 1));
  }
  if (shift.shifts_variance() && !(shift.variance > 0.0)) {
    throw ValidationError("scenario: shift variance must be positive");
  }
  if (drop_column && (*drop_column < 1 || *drop_column >= p)) {
    throw ValidationError("scenario: drop_column must be a non-intercept design column");
  }
  if (predictor.k < 0 || predictor.k > N) {
    throw ValidationError("scenario: knn k must lie in [1, N] (0 selects the default)");
  }
  if (predictor.kind == PredictorSpec::Kind::file && predictor.file_pattern.empty()) {
    throw ValidationError("scenario: file predictor needs a file pattern");
  }
  basis_set().check_columns(z_columns());
  if (tau < 0.0) throw ValidationError("scenario: tau must be >= 0");
  if (reps < 1) throw ValidationError("scenario: reps must be at least 1");
  if (B < 0) throw ValidationError("scenario: B must be >= 0");
  if (eval_rows < 1) throw ValidationError("scenario: eval_rows must be positive");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("scenario: level must lie in (0,1)");
  if (!class_labels.empty()) {
    std::vector<int> sorted = class_labels;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < K; ++k) {
      if (static_cast<int>(sorted.size()) != K || sorted[static_cast<std::size_t>(k)] != k + 1) {
        throw ValidationError("scenario: class_labels must be a permutation of 1..K");
      }
    }
  }
}

int ScenarioConfig::class_label(int cls0) const {
  return class_labels.empty() ? cls0 + 1 : class_labels[static_cast<std::size_t>(cls0)];
}

std::vector<Index> ScenarioConfig::z_columns() const {
  std::vector<Index> out;
  for (Index j = 0; j < p; ++j) {
    if (!drop_column || *drop_column != j) out.push_back(j);
  }
  return out;
}

BasisSet ScenarioConfig::basis_set() const {
  if (basis) return *basis;
  const auto z = z_columns();
  return BasisSet::default_for(z);
}

Vector ScenarioConfig::phi_full_true() const {
  return layout.build_phi_full(theta_true, phi_free_true);
}

ScenarioConfig ScenarioConfig::reference(ShiftSpec::Kind shift, bool drop_fifth) {
  ScenarioConfig c;
  c.name = std::string("shift-") + to_string(shift) + (drop_fifth ? "-drop5" : "-full");
  c.theta_true.resize(10);
  c.theta_true << 0.2, 1, -1, 1, -1, -0.1, -1, 1, 1, 1;
  c.phi_free_true.resize(2);
  c.phi_free_true << 0.35, -0.25;
  c.layout = ParamLayout::free_intercepts(5, 3);
  c.map = CoarseningMap::make({{1, 3}, {2}}, 3);
  c.class_labels = {2, 3, 1};
  c.predictor.k = 10;
  c.tau = 0.03;
  Vector mean(4);
  mean << 0.06, -0.04, 0.08, 0.0;
  switch (shift) {
    case ShiftSpec::Kind::none: c.shift = ShiftSpec::none_shift(); break;
    case ShiftSpec::Kind::mean: c.shift = ShiftSpec::mean_shift(mean); break;
    case ShiftSpec::Kind::variance: c.shift = ShiftSpec::variance_shift(2.0); break;
    case ShiftSpec::Kind::mean_and_variance: c.shift = ShiftSpec::mean_and_variance(mean, 2.0); break;
  }
  if (drop_fifth) c.drop_column = 4;
  return c;
}

Matrix covariate_covariance(const ScenarioConfig& config, bool external) {
  const Index d = config.p - 1;
  Matrix cov = Matrix::Constant(d, d, config.correlation);
  cov.diagonal().setOnes();
  if (external && config.shift.shifts_variance()) cov *= config.shift.variance;
  return cov;
}

Vector covariate_mean(const ScenarioConfig& config, bool external) {
  if (external && config.shift.shifts_mean()) return config.shift.mean;
  return Vector::Zero(config.p - 1);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Matrix gen_gaussian_design(const Vector& mean, const Matrix& covariance, Index rows,
                           std::mt19937_64& rng) {
  const Index d = mean.size();
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("covariate covariance is not positive definite");
  }
  const Matrix chol = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(rows, d + 1);
  Vector z(d);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < d; ++j) z(j) = normal(rng);
    X(i, 0) = 1.0;
    X.row(i).tail(d) = (mean + chol * z).transpose();
  }
  return X;
}

Matrix gen_covariates(const ScenarioConfig& config, Source source, Index rows,
                      std::mt19937_64& rng) {
  const bool external = source == Source::external;
  return gen_gaussian_design(covariate_mean(config, external),
                             covariate_covariance(config, external), rows, rng);
}

std::vector<int> gen_labels(const Matrix& X, const Vector& theta, int K, std::mt19937_64& rng) {
  std::vector<int> labels(static_cast<std::size_t>(X.rows()));
  std::vector<double> probs(static_cast<std::size_t>(K));
  for (Index i = 0; i < X.rows(); ++i) {
    class_probs_into(X.row(i), theta, K, probs.data());
    const double u = uniform01(rng);
    double cum = 0.0;
    int y = K;
    for (int k = 0; k < K - 1; ++k) {
      cum += probs[static_cast<std::size_t>(k)];
      if (u < cum) {
        y = k + 1;
        break;
      }
    }
    labels[static_cast<std::size_t>(i)] = y;
  }
  return labels;
}

KnnPredictor KnnPredictor::train(const Matrix& Z, const std::vector<int>& groups,
                                 int num_groups, int k) {
  if (k < 1) throw ValidationError("knn: k must be at least 1");
  if (static_cast<Index>(groups.size()) != Z.rows()) {
    throw ValidationError("knn: label count does not match training rows");
  }
  if (k > Z.rows()) throw ValidationError("knn: k exceeds the training size");
  KnnPredictor out;
  out.k_ = k;
  out.num_groups_ = num_groups;
  out.groups_ = groups;
  out.mean_ = Z.colwise().mean();
  const Matrix centred = Z.rowwise() - out.mean_;
  out.scale_ = (centred.colwise().squaredNorm() / static_cast<double>(std::max<Index>(1, Z.rows() - 1)))
                   .cwiseSqrt();
  for (Index j = 0; j < out.scale_.size(); ++j) {
    if (!(out.scale_(j) > 0.0)) out.scale_(j) = 1.0;
  }
  out.train_ = centred.array().rowwise() / out.scale_.array();
  for (int g : groups) {
    if (g < 0 || g >= num_groups) throw ValidationError("knn: coarse label out of range");
  }
  return out;
}

Matrix KnnPredictor::predict(const Matrix& Z) const {
  const Index m = train_.rows();
  Matrix out(Z.rows(), num_groups_ - 1);
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(m));
  const Matrix query = (Z.rowwise() - mean_).array().rowwise() / scale_.array();
  for (Index i = 0; i < Z.rows(); ++i) {
    for (Index t = 0; t < m; ++t) {
      dist[static_cast<std::size_t>(t)] = {(train_.row(t) - query.row(i)).squaredNorm(), t};
    }
    std::nth_element(dist.begin(), dist.begin() + (k_ - 1), dist.end());
    std::vector<int> counts(static_cast<std::size_t>(num_groups_), 0);
    for (int j = 0; j < k_; ++j) {
      ++counts[static_cast<std::size_t>(groups_[static_cast<std::size_t>(dist[static_cast<std::size_t>(j)].second)])];
    }
    for (int l = 0; l + 1 < num_groups_; ++l) {
      out(i, l) = static_cast<double>(counts[static_cast<std::size_t>(l)]) / k_;
    }
  }
  return out;
}

Matrix KnnPredictor::variance(const Matrix& predictions) const {
  return (predictions.array() * (1.0 - predictions.array()) / static_cast<double>(k_)).matrix();
}

GaussHermite GaussHermite::standard_normal(int order) {
  if (order < 1) throw ValidationError("Gauss-Hermite order must be positive");
  Matrix jacobi = Matrix::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(static_cast<double>(i));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  GaussHermite out;
  out.nodes = eig.eigenvalues();
  out.weights = eig.eigenvectors().row(0).transpose().array().square();
  out.weights /= out.weights.sum();
  return out;
}

Matrix oracle_grouped_probs(const Matrix& X, const Vector& phi_full, int K,
                            const CoarseningMap& map, std::optional<Index> omitted,
                            const Vector& mean, const Matrix& covariance,
                            double conditional_mean_offset, int order) {
  const int groups = map.num_groups() - 1;
  Matrix out(X.rows(), groups);
  std::vector<double> probs(static_cast<std::size_t>(K));
  if (!omitted) {
    for (Index i = 0; i < X.rows(); ++i) {
      class_probs_into(X.row(i), phi_full, K, probs.data());
      const auto g = grouped(map, probs.data());
      for (int l = 0; l < groups; ++l) out(i, l) = g[static_cast<std::size_t>(l)];
    }
    return out;
  }
  const Index u = *omitted - 1;  // index among non-intercept columns
  const Index d = mean.size();
  std::vector<Index> others;
  for (Index j = 0; j < d; ++j) {
    if (j != u) others.push_back(j);
  }
  const auto r = static_cast<Index>(others.size());
  Matrix s_zz(r, r);
  Vector s_uz(r);
  for (Index a = 0; a < r; ++a) {
    s_uz(a) = covariance(u, others[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < r; ++b) {
      s_zz(a, b) = covariance(others[static_cast<std::size_t>(a)], others[static_cast<std::size_t>(b)]);
    }
  }
  const Vector beta = r > 0 ? Vector(s_zz.llt().solve(s_uz)) : Vector();
  const double cond_var = covariance(u, u) - (r > 0 ? s_uz.dot(beta) : 0.0);
  const double cond_sd = std::sqrt(std::max(0.0, cond_var));
  const GaussHermite gh = GaussHermite::standard_normal(order);
  Eigen::RowVectorXd x;
  for (Index i = 0; i < X.rows(); ++i) {
    double cm = mean(u) + conditional_mean_offset;
    for (Index a = 0; a < r; ++a) {
      const Index j = others[static_cast<std::size_t>(a)];
      cm += beta(a) * (X(i, j + 1) - mean(j));
    }
    x = X.row(i);
    std::vector<double> acc(static_cast<std::size_t>(groups), 0.0);
    for (Index t = 0; t < gh.nodes.size(); ++t) {
      x(u + 1) = cm + cond_sd * gh.nodes(t);
      class_probs_into(x, phi_full, K, probs.data());
      const auto g = grouped(map, probs.data());
      for (int l = 0; l < groups; ++l) acc[static_cast<std::size_t>(l)] += gh.weights(t) * g[static_cast<std::size_t>(l)];
    }
    for (int l = 0; l < groups; ++l) out(i, l) = acc[static_cast<std::size_t>(l)];
  }
  return out;
}

Vector class_prob_mse(const Vector& estimate, const Vector& truth, const Matrix& eval_X, int K) {
  Vector out = Vector::Zero(K);
  std::vector<double> a(static_cast<std::size_t>(K));
  std::vector<double> b(static_cast<std::size_t>(K));
  for (Index i = 0; i < eval_X.rows(); ++i) {
    class_probs_into(eval_X.row(i), estimate, K, a.data());
    class_probs_into(eval_X.row(i), truth, K, b.data());
    for (int k = 0; k < K; ++k) {
      const double diff = a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)];
      out(k) += diff * diff;
    }
  }
  return out / static_cast<double>(eval_X.rows());
}

ReplicateData generate_replicate(const ScenarioConfig& config, int rep) {
  const auto r = static_cast<std::uint64_t>(rep);
  std::mt19937_64 rng_px(derive_seed(config.seed, r, kStreamPrimaryX));
  std::mt19937_64 rng_py(derive_seed(config.seed, r, kStreamPrimaryY));
  std::mt19937_64 rng_ex(derive_seed(config.seed, r, kStreamExternalX));
  std::mt19937_64 rng_ey(derive_seed(config.seed, r, kStreamExternalY));
  const auto z_columns = config.z_columns();

  ReplicateData out;
  Matrix X = gen_covariates(config, Source::primary, config.n, rng_px);
  std::vector<int> y = gen_labels(X, config.theta_true, config.K, rng_py);
  out.primary = PrimaryDataset::make(std::move(y), std::move(X), config.K, z_columns);

  const Vector phi = config.phi_full_true();
  out.external_design = gen_covariates(config, Source::external, config.N, rng_ex);
  out.external_labels = gen_labels(out.external_design, phi, config.K, rng_ey);
  out.external_groups.reserve(out.external_labels.size());
  for (int label : out.external_labels) {
    const auto g = config.map.coarsen(label);
    out.external_groups.push_back(g ? *g + 1 : 0);
  }

  const Index rows = config.n;
  switch (config.predictor.kind) {
    case PredictorSpec::Kind::knn: {
      const Matrix z_all = predictor_columns(out.external_design, z_columns);
      std::vector<Index> keep;
      for (std::size_t i = 0; i < out.external_groups.size(); ++i) {
        if (out.external_groups[i] > 0) keep.push_back(static_cast<Index>(i));
      }
      Matrix z_train(static_cast<Index>(keep.size()), z_all.cols());
      std::vector<int> g_train(keep.size());
      for (std::size_t i = 0; i < keep.size(); ++i) {
        z_train.row(static_cast<Index>(i)) = z_all.row(keep[i]);
        g_train[i] = out.external_groups[static_cast<std::size_t>(keep[i])] - 1;
      }
      const int k = config.predictor.k > 0
                        ? config.predictor.k
                        : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(config.N))));
      const KnnPredictor knn =
          KnnPredictor::train(z_train, g_train, config.map.num_groups(), std::min<int>(k, static_cast<int>(keep.size())));
      const Matrix q = knn.predict(predictor_columns(out.primary.design, z_columns));
      out.predictions = ExternalPredictionSet::make(q, rows, knn.variance(q));
      break;
    }
    case PredictorSpec::Kind::oracle: {
      const Matrix q = oracle_grouped_probs(out.primary.design, phi, config.K, config.map,
                                            config.drop_column, covariate_mean(config, true),
                                            covariate_covariance(config, true));
      out.predictions = ExternalPredictionSet::make(q, rows);
      break;
    }
    case PredictorSpec::Kind::file: {
      const std::string path =
          replace_all(config.predictor.file_pattern, "{rep}", std::to_string(rep + 1));
      const NumericTable table = read_numeric_csv(path);
      Matrix q(table.values.rows(), config.map.num_groups() - 1);
      for (int l = 0; l + 1 < config.map.num_groups(); ++l) {
        const Index c = table.column("q" + std::to_string(l + 1));
        if (c < 0) throw ValidationError(path + ": missing column q" + std::to_string(l + 1));
        q.col(l) = table.values.col(c);
      }
      out.predictions = ExternalPredictionSet::make(q, rows);
      break;
    }
  }
  return out;
}

const CoordinateSummary& ReplicationTable::find(const std::string& name,
                                                const std::string& method) const {
  for (const auto& c : coordinates) {
    if (c.name == name && c.method == method) return c;
  }
  throw ValidationError("replication table: no row " + name + "/" + method);
}

double ReplicationTable::class_mse(int cls, const std::string& method) const {
  for (const auto& m : mse) {
    if (m.cls == cls && m.method == method) return m.mse;
  }
  throw ValidationError("replication table: no MSE row for class " + std::to_string(cls));
}

namespace {

struct ReplicateResult {
  bool ok = false;
  Vector mle;
  Vector mle_se;
  Vector fmle;
  Vector fmle_se;
  Vector mse_mle;
  Vector mse_fmle;
};

ReplicateResult run_one(const ScenarioConfig& config, int rep, const Matrix& eval_X) {
  ReplicateResult res;
  const ReplicateData data = generate_replicate(config, rep);
  const Index n = data.primary.n();
  const Index d = data.primary.param_dim();

  MleFit mle = fit_mle(data.primary);
  const Matrix info_inv = Eigen::LDLT<Matrix>(mle.info).solve(Matrix::Identity(d, d));
  res.mle = mle.theta_hat;
  res.mle_se = (info_inv.diagonal() / static_cast<double>(n)).cwiseMax(0.0).cwiseSqrt();

  const FusionProblem problem = FusionProblem::make(
      data.primary, data.predictions, config.map, config.basis_set(), config.layout);
  FmleOptions opts;
  opts.tau = config.tau;
  opts.penalty = config.penalty;
  opts.mle = mle;
  const FmleFit fit = fit_fmle(problem, opts);
  res.fmle = fit.params.theta;
  const Index q = problem.num_lambda();
  if (config.B >= 2) {
    BootstrapOptions bo;
    bo.B = config.B;
    bo.seed = derive_seed(config.seed, static_cast<std::uint64_t>(rep), kStreamBootstrap);
    bo.fit = opts;
    const BootstrapResult boot = bootstrap_se(problem, bo);
    res.fmle_se = boot.se.segment(q, d);
  } else {
    const BlockMatrices blocks = empirical_blocks(problem, fit);
    const SandwichResult sw = sigma_sandwich(blocks);
    res.fmle_se = (sw.sigma_theta.diagonal() / static_cast<double>(n)).cwiseMax(0.0).cwiseSqrt();
  }
  res.mse_mle = class_prob_mse(res.mle, config.theta_true, eval_X, config.K);
  res.mse_fmle = class_prob_mse(res.fmle, config.theta_true, eval_X, config.K);
  res.ok = res.mle.allFinite() && res.fmle.allFinite();
  return res;
}

Matrix stack_estimates(const std::vector<const ReplicateResult*>& ok, bool fused) {
  Matrix out(static_cast<Index>(ok.size()), ok.front()->mle.size());
  for (std::size_t r = 0; r < ok.size(); ++r) {
    out.row(static_cast<Index>(r)) = (fused ? ok[r]->fmle : ok[r]->mle).transpose();
  }
  return out;
}

}  // namespace

ReplicationTable run_replications(const ScenarioConfig& config) {
  config.validate();
  std::mt19937_64 grid_rng(derive_seed(config.seed, 0, kStreamEvalGrid));
  const Matrix eval_X = gen_covariates(config, Source::primary, config.eval_rows, grid_rng);

  std::vector<ReplicateResult> results(static_cast<std::size_t>(config.reps));
  parallel_for(config.reps, [&](std::int64_t rep) {
    try {
      results[static_cast<std::size_t>(rep)] = run_one(config, static_cast<int>(rep), eval_X);
    } catch (const Error&) {
      results[static_cast<std::size_t>(rep)].ok = false;
    }
  });

  ReplicationTable table;
  table.reps = config.reps;
  std::vector<const ReplicateResult*> ok;
  for (const auto& r : results) {
    if (r.ok) ok.push_back(&r);
  }
  table.failures = config.reps - static_cast<int>(ok.size());
  if (table.failures * 10 > config.reps || ok.empty()) {
    throw ConvergenceError("run_replications: " + std::to_string(table.failures) + " of " +
                               std::to_string(config.reps) + " replicates failed",
                           Vector(), static_cast<double>(table.failures));
  }

  const double z = normal_quantile(0.5 * (1.0 + config.level));
  const Index d = config.theta_true.size();
  const auto R = static_cast<Index>(ok.size());
  table.mle_estimates = stack_estimates(ok, false);
  table.fmle_estimates = stack_estimates(ok, true);
  const auto names = theta_names(config.p, config.K);
  for (Index j = 0; j < d; ++j) {
    for (int method = 0; method < 2; ++method) {
      const bool fused = method == 1;
      const Matrix& est = fused ? table.fmle_estimates : table.mle_estimates;
      CoordinateSummary row;
      row.name = names[static_cast<std::size_t>(j)];
      row.truth = config.theta_true(j);
      row.method = fused ? "FMLE" : "MLE";
      const double mean = est.col(j).mean();
      row.bias = mean - row.truth;
      row.sd = R > 1 ? std::sqrt((est.col(j).array() - mean).square().sum() / static_cast<double>(R - 1))
                     : 0.0;
      double se_sum = 0.0;
      double covered = 0.0;
      for (Index r = 0; r < R; ++r) {
        const ReplicateResult& res = *ok[static_cast<std::size_t>(r)];
        const double se = (fused ? res.fmle_se : res.mle_se)(j);
        se_sum += se;
        if (std::abs(est(r, j) - row.truth) <= z * se) covered += 1.0;
      }
      row.se = se_sum / static_cast<double>(R);
      row.cp = covered / static_cast<double>(R);
      table.coordinates.push_back(row);
    }
  }
  for (int k = 0; k < config.K; ++k) {
    for (int method = 0; method < 2; ++method) {
      double sum = 0.0;
      for (const ReplicateResult* r : ok) sum += (method == 1 ? r->mse_fmle : r->mse_mle)(k);
      table.mse.push_back({config.class_label(k), method == 1 ? "FMLE" : "MLE", sum / static_cast<double>(R)});
    }
  }
  std::stable_sort(table.mse.begin(), table.mse.end(),
                   [](const MseSummary& a, const MseSummary& b) { return a.cls < b.cls; });
  return table;
}

std::vector<MarMoment> mar_moment_check(const ScenarioConfig& config, const MarOptions& options) {
  config.validate();
  if (options.draws < 10000) throw ValidationError("mar check: need at least 10^4 draws");
  const Index omitted = config.drop_column ? *config.drop_column : config.p - 1;
  ScenarioConfig probe = config;
  probe.drop_column = omitted;
  const auto z_columns = probe.z_columns();
  const BasisSet basis = options.basis ? *options.basis : BasisSet::default_for(z_columns);

  std::mt19937_64 rng(options.seed);
  const Vector mean = covariate_mean(config, false);
  const Matrix cov = covariate_covariance(config, false);
  const Matrix X = gen_gaussian_design(mean, cov, options.draws, rng);
  const Vector phi = config.phi_full_true();
  const Matrix q = oracle_grouped_probs(X, phi, config.K, config.map, omitted, mean, cov,
                                        options.violate ? options.violation_shift : 0.0);
  std::vector<int> labels(static_cast<std::size_t>(X.rows()), 1);
  const PrimaryDataset data = PrimaryDataset::make(std::move(labels), X, config.K, z_columns);
  const Matrix h = eval_basis(basis, data);

  const int groups = config.map.num_groups() - 1;
  std::vector<double> probs(static_cast<std::size_t>(config.K));
  Matrix diff(X.rows(), groups);
  for (Index i = 0; i < X.rows(); ++i) {
    class_probs_into(X.row(i), phi, config.K, probs.data());
    const auto g = grouped(config.map, probs.data());
    for (int l = 0; l < groups; ++l) diff(i, l) = g[static_cast<std::size_t>(l)] - q(i, l);
  }
  std::vector<MarMoment> out;
  const double n = static_cast<double>(X.rows());
  for (int l = 0; l < groups; ++l) {
    for (Index c = 0; c < h.cols(); ++c) {
      const Vector v = (diff.col(l).array() * h.col(c).array()).matrix();
      const double m = v.mean();
      const double var = (v.array() - m).square().sum() / (n - 1.0);
      out.push_back({l, static_cast<int>(c), m, std::sqrt(var / n)});
    }
  }
  return out;
}

}  // namespace elfuse
