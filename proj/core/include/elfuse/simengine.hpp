#pragma once

#include "elfuse/basis.hpp"
#include "elfuse/elfusion.hpp"
#include "elfuse/types.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace elfuse {

struct ShiftSpec {
  enum class Kind { none, mean, variance, mean_and_variance };
  Kind kind = Kind::none;
  Vector mean;           // external mean of the non-intercept columns
  double variance = 2.0; // external marginal variance

  static ShiftSpec none_shift() { return {}; }
  static ShiftSpec mean_shift(Vector mean) { return {Kind::mean, std::move(mean), 2.0}; }
  static ShiftSpec variance_shift(double v = 2.0) { return {Kind::variance, Vector(), v}; }
  static ShiftSpec mean_and_variance(Vector mean, double v = 2.0) {
    return {Kind::mean_and_variance, std::move(mean), v};
  }
  bool shifts_mean() const { return kind == Kind::mean || kind == Kind::mean_and_variance; }
  bool shifts_variance() const {
    return kind == Kind::variance || kind == Kind::mean_and_variance;
  }
};

const char* to_string(ShiftSpec::Kind kind);
ShiftSpec::Kind parse_shift_kind(const std::string& name);

struct PredictorSpec {
  enum class Kind { knn, oracle, file };
  Kind kind = Kind::knn;
  int k = 0;                 // 0 selects ceil(sqrt(N))
  std::string file_pattern;  // "{rep}" is replaced by the 1-based replicate number
};

const char* to_string(PredictorSpec::Kind kind);
PredictorSpec::Kind parse_predictor_kind(const std::string& name);

struct ScenarioConfig {
  std::string name = "scenario";
  Index n = 500;
  Index N = 10000;
  Index p = 5;
  int K = 3;
  Vector theta_true;
  Vector phi_free_true;
  ParamLayout layout;
  CoarseningMap map;
  ShiftSpec shift;
  std::optional<Index> drop_column;  // design column (0-based) missing from Z
  double correlation = 0.8;
  PredictorSpec predictor;
  std::optional<BasisSet> basis;  // default: constant plus each Z coordinate
  double tau = 0.1;
  int B = 200;  // B < 2 uses plug-in sandwich SEs for the fused estimator
  int reps = 200;
  std::uint64_t seed = 1;
  Index eval_rows = 2000;
  double level = 0.95;
  PenaltyForm penalty = PenaltyForm::shrink;
  std::vector<int> class_labels;  // report label per class; empty means 1..K

  /// Throws ValidationError on any inconsistency.
  void validate() const;

  std::vector<Index> z_columns() const;
  BasisSet basis_set() const;
  Vector phi_full_true() const;
  int class_label(int cls0) const;

  /// The two-source design with p = 5, K = 3 and free intercepts. Classes are
  /// reported as 2, 3, 1 so that the reported class 1 is the reference; the
  /// coarsening merges reported classes 1 and 2.
  static ScenarioConfig reference(ShiftSpec::Kind shift, bool drop_fifth);
};

/// Covariance of the non-intercept columns for a given source.
Matrix covariate_covariance(const ScenarioConfig& config, bool external);
Vector covariate_mean(const ScenarioConfig& config, bool external);

enum class Source { primary, external };

/// rows x p matrix with a leading column of ones.
Matrix gen_covariates(const ScenarioConfig& config, Source source, Index rows,
                      std::mt19937_64& rng);

/// Multivariate normal draws with an intercept column prepended.
Matrix gen_gaussian_design(const Vector& mean, const Matrix& covariance, Index rows,
                           std::mt19937_64& rng);

/// One uniform per row, inverse-CDF over class_probs.
std::vector<int> gen_labels(const Matrix& X, const Vector& theta, int K,
                            std::mt19937_64& rng);

/// Uniform on [0,1) from the top 53 bits of one draw.
double uniform01(std::mt19937_64& rng);

class KnnPredictor {
 public:
  /// `groups` holds 0-based coarse labels (0..L-1); `Z` excludes the
  /// intercept column.
  static KnnPredictor train(const Matrix& Z, const std::vector<int>& groups,
                            int num_groups, int k);

  /// n x (L-1) grouped class frequencies among the k nearest training rows.
  Matrix predict(const Matrix& Z) const;
  /// q(1-q)/k for each entry of `predictions`.
  Matrix variance(const Matrix& predictions) const;

  int k() const { return k_; }

 private:
  Matrix train_;  // standardised
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
  std::vector<int> groups_;
  int num_groups_ = 0;
  int k_ = 1;
};

struct GaussHermite {
  Vector nodes;    // for the standard normal
  Vector weights;  // sum to 1
  static GaussHermite standard_normal(int order);
};

/// Grouped probabilities (first L-1 groups) under phi for rows of X when
/// column `omitted` (if any) is integrated out over its conditional normal
/// law given the other columns. `mean` and `covariance` describe the
/// non-intercept columns of the law used for integration.
Matrix oracle_grouped_probs(const Matrix& X, const Vector& phi_full, int K,
                            const CoarseningMap& map, std::optional<Index> omitted,
                            const Vector& mean, const Matrix& covariance,
                            double conditional_mean_offset = 0.0, int order = 40);

/// Per-class mean over rows of (p_k(x|estimate) - p_k(x|truth))^2.
Vector class_prob_mse(const Vector& estimate, const Vector& truth, const Matrix& eval_X,
                      int K);

struct ReplicateData {
  PrimaryDataset primary;
  Matrix external_design;
  std::vector<int> external_labels;  // fine labels
  std::vector<int> external_groups;  // 1-based coarse labels, 0 when in no group
  ExternalPredictionSet predictions;
};

/// Generates one replicate: primary and external samples plus predictions.
/// `rep` is 0-based.
ReplicateData generate_replicate(const ScenarioConfig& config, int rep);

struct CoordinateSummary {
  std::string name;
  double truth = 0.0;
  std::string method;  // "MLE" or "FMLE"
  double bias = 0.0;
  double sd = 0.0;
  double se = 0.0;
  double cp = 0.0;
};

struct MseSummary {
  int cls = 0;  // report label
  std::string method;
  double mse = 0.0;
};

struct ReplicationTable {
  std::vector<CoordinateSummary> coordinates;
  std::vector<MseSummary> mse;
  int reps = 0;
  int failures = 0;
  Matrix mle_estimates;   // successful replicates x p(K-1)
  Matrix fmle_estimates;

  const CoordinateSummary& find(const std::string& name, const std::string& method) const;
  double class_mse(int cls, const std::string& method) const;
};

/// Runs the replicates in parallel and aggregates them in replicate order.
/// Throws ConvergenceError when more than 10% of replicates fail.
ReplicationTable run_replications(const ScenarioConfig& config);

struct MarMoment {
  int group = 0;  // 0-based
  int basis = 0;  // 0-based
  double mean = 0.0;
  double se = 0.0;
};

struct MarOptions {
  bool violate = false;
  Index draws = 100000;
  double violation_shift = 1.0;
  std::uint64_t seed = 7;
  std::optional<BasisSet> basis;  // default: constant plus each Z coordinate
};

/// Monte Carlo mean and SE of {sum_{k in C_l} p_k(X|phi) - q_l(Z)} h(Z) under
/// the primary covariate law, with q_l from the external conditional law of
/// the omitted column (mean-shifted by `violation_shift` when `violate`).
std::vector<MarMoment> mar_moment_check(const ScenarioConfig& config, const MarOptions& options);

}  // namespace elfuse
