#pragma once

#include "elfuse/types.hpp"

#include <span>
#include <vector>

namespace elfuse {

/// One basis function family h(Z). Columns refer to design columns (0-based)
/// and must be among the dataset's z columns.
struct BasisDescriptor {
  enum class Kind { constant, coordinate, spline };

  Kind kind = Kind::constant;
  Index column = 0;
  std::vector<double> quantiles;  // interior knot levels, spline only

  static BasisDescriptor constant() { return {}; }
  static BasisDescriptor coordinate(Index column) {
    return {Kind::coordinate, column, {}};
  }
  static BasisDescriptor spline(Index column,
                                std::vector<double> quantiles = {0.25, 0.5, 0.75}) {
    return {Kind::spline, column, std::move(quantiles)};
  }

  /// Number of columns this descriptor contributes.
  Index width() const;
};

class BasisSet {
 public:
  static BasisSet make(std::vector<BasisDescriptor> descriptors);
  /// {constant} plus one coordinate per non-intercept z column.
  static BasisSet default_for(std::span<const Index> z_columns);

  const std::vector<BasisDescriptor>& descriptors() const { return descriptors_; }
  /// Total number of basis columns H.
  Index size() const;

  /// Throws unless every referenced column is a z column.
  void check_columns(std::span<const Index> z_columns) const;

 private:
  std::vector<BasisDescriptor> descriptors_;
};

/// n x H matrix of h_j(Z_i).
Matrix eval_basis(const BasisSet& basis, const PrimaryDataset& data);

/// Natural cubic spline basis (truncated-power form, no constant column) for
/// the full knot sequence `knots` (boundary knots included, strictly
/// increasing). Returns x.size() x (knots.size()-1).
Matrix natural_spline_basis(std::span<const double> x,
                            std::span<const double> knots);

/// Linear-interpolation sample quantile (the usual "type 7" definition).
double sample_quantile(std::vector<double> values, double level);

}  // namespace elfuse
