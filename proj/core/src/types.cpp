#include "elfuse/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace elfuse {

namespace {

std::string dims(Index r, Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

}  // namespace

PrimaryDataset PrimaryDataset::make(std::vector<int> labels, Matrix design,
                                    int num_classes,
                                    std::vector<Index> z_columns) {
  if (num_classes < 2) throw ValidationError("num_classes: K must be >= 2");
  if (design.rows() < 1) throw ValidationError("design: n must be >= 1");
  if (design.cols() < 2) throw ValidationError("design: p must be >= 2");
  if (static_cast<Index>(labels.size()) != design.rows()) {
    throw ValidationError("labels: length " + std::to_string(labels.size()) +
                          " does not match design rows " +
                          std::to_string(design.rows()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > num_classes) {
      throw ValidationError("labels: row " + std::to_string(i + 1) +
                            " has label " + std::to_string(labels[i]) +
                            " outside 1.." + std::to_string(num_classes));
    }
  }
  for (Index i = 0; i < design.rows(); ++i) {
    if (design(i, 0) != 1.0) {
      throw ValidationError("design: column 1 must be identically 1 (row " +
                            std::to_string(i + 1) + ")");
    }
  }
  if (!design.allFinite()) throw ValidationError("design: non-finite entry");

  if (z_columns.empty()) {
    z_columns.resize(static_cast<std::size_t>(design.cols()));
    std::iota(z_columns.begin(), z_columns.end(), Index{0});
  }
  if (!std::is_sorted(z_columns.begin(), z_columns.end()) ||
      std::adjacent_find(z_columns.begin(), z_columns.end()) !=
          z_columns.end()) {
    throw ValidationError("z_columns: must be sorted and duplicate-free");
  }
  if (z_columns.front() != 0) {
    throw ValidationError("z_columns: must contain the intercept column");
  }
  if (z_columns.back() >= design.cols()) {
    throw ValidationError("z_columns: index out of range");
  }
  PrimaryDataset d;
  d.labels = std::move(labels);
  d.design = std::move(design);
  d.z_columns = std::move(z_columns);
  d.num_classes = num_classes;
  return d;
}

Matrix PrimaryDataset::z() const {
  Matrix out(n(), static_cast<Index>(z_columns.size()));
  for (std::size_t j = 0; j < z_columns.size(); ++j) {
    out.col(static_cast<Index>(j)) = design.col(z_columns[j]);
  }
  return out;
}

PrimaryDataset PrimaryDataset::resample(std::span<const Index> rows) const {
  PrimaryDataset out;
  out.num_classes = num_classes;
  out.z_columns = z_columns;
  out.design.resize(static_cast<Index>(rows.size()), p());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.design.row(static_cast<Index>(i)) = design.row(rows[i]);
    out.labels[i] = labels[static_cast<std::size_t>(rows[i])];
  }
  return out;
}

CoarseningMap CoarseningMap::make(std::vector<std::vector<int>> groups,
                                  int num_classes) {
  if (num_classes < 2) throw ValidationError("coarsening: K must be >= 2");
  if (groups.size() < 2) throw ValidationError("coarsening: need L >= 2 groups");
  CoarseningMap map;
  map.num_classes_ = num_classes;
  map.group_of_.assign(static_cast<std::size_t>(num_classes), -1);
  for (std::size_t l = 0; l < groups.size(); ++l) {
    auto& g = groups[l];
    if (g.empty()) {
      throw ValidationError("coarsening: group " + std::to_string(l + 1) +
                            " is empty");
    }
    std::sort(g.begin(), g.end());
    for (int k : g) {
      if (k < 1 || k > num_classes) {
        throw ValidationError("coarsening: label " + std::to_string(k) +
                              " outside 1.." + std::to_string(num_classes));
      }
      auto& slot = map.group_of_[static_cast<std::size_t>(k - 1)];
      if (slot != -1) {
        throw ValidationError("coarsening: label " + std::to_string(k) +
                              " appears in more than one group");
      }
      slot = static_cast<int>(l);
    }
  }
  map.groups_ = std::move(groups);
  return map;
}

std::optional<int> CoarseningMap::coarsen(int y) const {
  if (y < 1 || y > num_classes_) {
    throw ValidationError("coarsen: label " + std::to_string(y) +
                          " outside 1.." + std::to_string(num_classes_));
  }
  const int g = group_of_[static_cast<std::size_t>(y - 1)];
  if (g < 0) return std::nullopt;
  return g;
}

bool CoarseningMap::contains(int group, int label) const {
  return label >= 1 && label <= num_classes_ &&
         group_of_[static_cast<std::size_t>(label - 1)] == group;
}

ParamLayout ParamLayout::make(Index p, int num_classes,
                              std::vector<Index> shared_index, Matrix A) {
  if (p < 2 || num_classes < 2) {
    throw ValidationError("layout: need p >= 2 and K >= 2");
  }
  ParamLayout lay;
  lay.p_ = p;
  lay.num_classes_ = num_classes;
  const Index d = lay.dim();
  const Index m = static_cast<Index>(shared_index.size());
  if (m > d) throw ValidationError("layout: shared_index longer than p(K-1)");
  std::set<Index> seen;
  for (Index s : shared_index) {
    if (s < 0 || s >= d) {
      throw ValidationError("layout: shared_index entry " + std::to_string(s) +
                            " out of range");
    }
    if (!seen.insert(s).second) {
      throw ValidationError("layout: shared_index entry " + std::to_string(s) +
                            " duplicated");
    }
  }
  if (m > 0) {
    if (A.rows() != m || A.cols() != m) {
      throw ValidationError("layout: A is " + dims(A.rows(), A.cols()) +
                            ", expected " + dims(m, m));
    }
    if (!A.allFinite()) throw ValidationError("layout: A has non-finite entries");
    Eigen::JacobiSVD<Matrix> svd(A);
    const double smin = svd.singularValues().minCoeff();
    if (!(smin > 1e-12)) {
      throw ValidationError("layout: A is not invertible (smallest singular value " +
                            std::to_string(smin) + ")");
    }
  } else {
    A.resize(0, 0);
  }
  for (Index i = 0; i < d; ++i) {
    if (!seen.count(i)) lay.free_.push_back(i);
  }
  lay.shared_ = std::move(shared_index);
  lay.A_ = std::move(A);

  lay.jac_theta_ = Matrix::Zero(d, d);
  for (Index r = 0; r < m; ++r) {
    for (Index c = 0; c < m; ++c) {
      lay.jac_theta_(lay.shared_[static_cast<std::size_t>(r)],
                     lay.shared_[static_cast<std::size_t>(c)]) = lay.A_(r, c);
    }
  }
  const Index f = lay.num_free();
  lay.jac_free_ = Matrix::Zero(d, f);
  for (Index j = 0; j < f; ++j) {
    lay.jac_free_(lay.free_[static_cast<std::size_t>(j)], j) = 1.0;
  }
  return lay;
}

ParamLayout ParamLayout::full(Index p, int num_classes) {
  const Index d = p * (num_classes - 1);
  std::vector<Index> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), Index{0});
  return make(p, num_classes, std::move(idx), Matrix::Identity(d, d));
}

ParamLayout ParamLayout::free_intercepts(Index p, int num_classes) {
  std::vector<Index> idx;
  for (int k = 0; k < num_classes - 1; ++k) {
    for (Index j = 1; j < p; ++j) idx.push_back(k * p + j);
  }
  const Index m = static_cast<Index>(idx.size());
  return make(p, num_classes, std::move(idx), Matrix::Identity(m, m));
}

ParamLayout ParamLayout::disconnected(Index p, int num_classes) {
  return make(p, num_classes, {}, Matrix());
}

Vector ParamLayout::build_phi_full(const Vector& theta,
                                   const Vector& phi_free) const {
  if (theta.size() != dim()) {
    throw ValidationError("build_phi_full: theta has length " +
                          std::to_string(theta.size()) + ", expected " +
                          std::to_string(dim()));
  }
  if (phi_free.size() != num_free()) {
    throw ValidationError("build_phi_full: phi_free has length " +
                          std::to_string(phi_free.size()) + ", expected " +
                          std::to_string(num_free()));
  }
  Vector phi(dim());
  if (m() > 0) {
    const Vector mapped = A_ * shared_part(theta);
    for (Index r = 0; r < m(); ++r) phi(shared_[static_cast<std::size_t>(r)]) = mapped(r);
  }
  for (Index j = 0; j < num_free(); ++j) {
    phi(free_[static_cast<std::size_t>(j)]) = phi_free(j);
  }
  return phi;
}

Vector ParamLayout::shared_part(const Vector& theta) const {
  Vector out(m());
  for (Index r = 0; r < m(); ++r) out(r) = theta(shared_[static_cast<std::size_t>(r)]);
  return out;
}

Vector ParamLayout::free_part(const Vector& theta) const {
  Vector out(num_free());
  for (Index j = 0; j < num_free(); ++j) out(j) = theta(free_[static_cast<std::size_t>(j)]);
  return out;
}

Vector ParamLayout::assemble(const Vector& shared, const Vector& free) const {
  if (shared.size() != m() || free.size() != num_free()) {
    throw ValidationError("assemble: block lengths do not match layout");
  }
  Vector theta(dim());
  for (Index r = 0; r < m(); ++r) theta(shared_[static_cast<std::size_t>(r)]) = shared(r);
  for (Index j = 0; j < num_free(); ++j) theta(free_[static_cast<std::size_t>(j)]) = free(j);
  return theta;
}

ExternalPredictionSet ExternalPredictionSet::make(Matrix values,
                                                  Index expected_rows,
                                                  std::optional<Matrix> variance) {
  if (values.rows() != expected_rows) {
    throw ValidationError("predictions: " + std::to_string(values.rows()) +
                          " rows, primary data has " +
                          std::to_string(expected_rows));
  }
  constexpr double slack = 1e-12;
  for (Index i = 0; i < values.rows(); ++i) {
    double sum = 0.0;
    for (Index l = 0; l < values.cols(); ++l) {
      const double v = values(i, l);
      if (!std::isfinite(v) || v < -slack || v > 1.0 + slack) {
        throw ValidationError("predictions: row " + std::to_string(i + 1) +
                              ", column q" + std::to_string(l + 1) +
                              " outside [0,1]");
      }
      sum += v;
    }
    if (sum > 1.0 + 1e-9) {
      throw ValidationError("predictions: row " + std::to_string(i + 1) +
                            " sums to more than 1");
    }
  }
  if (variance && (variance->rows() != values.rows() ||
                   variance->cols() != values.cols())) {
    throw ValidationError("predictions: variance shape mismatch");
  }
  return ExternalPredictionSet{std::move(values), std::move(variance)};
}

ExternalPredictionSet ExternalPredictionSet::resample(
    std::span<const Index> rows) const {
  ExternalPredictionSet out;
  out.values.resize(static_cast<Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Index>(i)) = values.row(rows[i]);
  }
  if (variance) {
    Matrix v(static_cast<Index>(rows.size()), variance->cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      v.row(static_cast<Index>(i)) = variance->row(rows[i]);
    }
    out.variance = std::move(v);
  }
  return out;
}

Vector FusedParams::stacked() const {
  Vector g(size());
  g << lambda, theta, phi_free;
  return g;
}

FusedParams FusedParams::unstack(const Vector& gamma, Index num_lambda,
                                 Index num_theta) {
  FusedParams out;
  out.lambda = gamma.head(num_lambda);
  out.theta = gamma.segment(num_lambda, num_theta);
  out.phi_free = gamma.tail(gamma.size() - num_lambda - num_theta);
  return out;
}

bool FusedParams::all_finite() const {
  return lambda.allFinite() && theta.allFinite() && phi_free.allFinite();
}

bool EstimateReport::intervals_consistent() const {
  auto ok = [](const std::vector<CoordinateEstimate>& v) {
    return std::all_of(v.begin(), v.end(), [](const CoordinateEstimate& c) {
      return c.ci_lower <= c.estimate && c.estimate <= c.ci_upper;
    });
  };
  return ok(mle) && ok(fmle);
}

std::vector<std::string> theta_names(Index p, int num_classes) {
  std::vector<std::string> names;
  for (int k = 1; k < num_classes; ++k) {
    for (Index j = 0; j < p; ++j) {
      names.push_back("theta" + std::to_string(k) + "_" + std::to_string(j + 1));
    }
  }
  return names;
}

}  // namespace elfuse
