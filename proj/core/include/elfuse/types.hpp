#pragma once

#include "elfuse/error.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace elfuse {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Column and coordinate indices are 0-based throughout the C++ API. Class
// labels keep their domain values 1..K.

/// Labels and design matrix of the primary study.
struct PrimaryDataset {
  std::vector<int> labels;
  Matrix design;                  // n x p, column 0 is the intercept
  std::vector<Index> z_columns;   // design columns seen by the external source
  int num_classes = 0;

  /// Validates every invariant; an empty `z_columns` means "all columns".
  static PrimaryDataset make(std::vector<int> labels, Matrix design,
                             int num_classes,
                             std::vector<Index> z_columns = {});

  Index n() const { return design.rows(); }
  Index p() const { return design.cols(); }
  int K() const { return num_classes; }
  Index param_dim() const { return p() * (num_classes - 1); }

  /// Rows restricted to the z columns (intercept included).
  Matrix z() const;

  PrimaryDataset resample(std::span<const Index> rows) const;
};

/// Groups C_1..C_L of fine labels observed by the external source.
class CoarseningMap {
 public:
  static CoarseningMap make(std::vector<std::vector<int>> groups,
                            int num_classes);

  /// Group index l (0-based) containing y, or nullopt when y is in no group.
  std::optional<int> coarsen(int y) const;

  int num_groups() const { return static_cast<int>(groups_.size()); }
  int num_classes() const { return num_classes_; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  bool contains(int group, int label) const;

 private:
  std::vector<std::vector<int>> groups_;
  std::vector<int> group_of_;  // indexed by label-1, -1 when absent
  int num_classes_ = 0;
};

/// Shared / free structure linking primary parameters theta and external
/// parameters phi: phi[shared] = A * theta[shared], phi[free] = phi_free.
class ParamLayout {
 public:
  static ParamLayout make(Index p, int num_classes,
                          std::vector<Index> shared_index, Matrix A);
  /// theta == phi.
  static ParamLayout full(Index p, int num_classes);
  /// Slopes shared, intercepts free per class.
  static ParamLayout free_intercepts(Index p, int num_classes);
  /// Nothing shared.
  static ParamLayout disconnected(Index p, int num_classes);

  Index p() const { return p_; }
  int K() const { return num_classes_; }
  Index dim() const { return p_ * (num_classes_ - 1); }
  Index m() const { return static_cast<Index>(shared_.size()); }
  Index num_free() const { return dim() - m(); }
  const std::vector<Index>& shared_index() const { return shared_; }
  const std::vector<Index>& free_index() const { return free_; }
  const Matrix& A() const { return A_; }

  Vector build_phi_full(const Vector& theta, const Vector& phi_free) const;

  /// d(phi)/d(theta), dim x dim.
  const Matrix& phi_jacobian_theta() const { return jac_theta_; }
  /// d(phi)/d(phi_free), dim x num_free.
  const Matrix& phi_jacobian_free() const { return jac_free_; }

  Vector shared_part(const Vector& theta) const;
  Vector free_part(const Vector& theta) const;
  Vector assemble(const Vector& shared, const Vector& free) const;

 private:
  Index p_ = 0;
  int num_classes_ = 0;
  std::vector<Index> shared_;
  std::vector<Index> free_;
  Matrix A_;
  Matrix jac_theta_;
  Matrix jac_free_;
};

/// Row-aligned grouped external predictions, n x (L-1).
struct ExternalPredictionSet {
  Matrix values;
  // Optional per-entry predictor variance (diagnostic only).
  std::optional<Matrix> variance;

  static ExternalPredictionSet make(Matrix values, Index expected_rows,
                                    std::optional<Matrix> variance = {});
  Index rows() const { return values.rows(); }
  ExternalPredictionSet resample(std::span<const Index> rows) const;
};

/// Enlarged parameter gamma = (lambda, theta, phi_free).
struct FusedParams {
  Vector lambda;
  Vector theta;
  Vector phi_free;

  Index size() const { return lambda.size() + theta.size() + phi_free.size(); }
  Vector stacked() const;
  static FusedParams unstack(const Vector& gamma, Index num_lambda,
                             Index num_theta);
  bool all_finite() const;
};

enum class SeMethod { hessian, bootstrap };

struct CoordinateEstimate {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool degenerate = false;
};

struct EfficiencySummary {
  bool necessary_holds = false;
  bool sufficient_holds = false;
  double colspace_residual = 0.0;
  bool gain_expected = false;
};

struct EstimateReport {
  std::vector<CoordinateEstimate> mle;
  std::vector<CoordinateEstimate> fmle;
  Vector theta_hat;
  Vector phi_free_hat;
  Vector lambda_hat;
  SeMethod se_method = SeMethod::bootstrap;
  double level = 0.95;
  int mle_iterations = 0;
  int fmle_iterations = 0;
  double gradient_norm = 0.0;
  std::optional<EfficiencySummary> efficiency;
  int bootstrap_failures = 0;
  std::vector<std::string> warnings;
  std::string config_hash;
  std::uint64_t seed = 0;

  /// ci_lower <= estimate <= ci_upper for every coordinate.
  bool intervals_consistent() const;
};

/// Human readable names theta[k,j] for the stacked parameter vector.
std::vector<std::string> theta_names(Index p, int num_classes);

}  // namespace elfuse
