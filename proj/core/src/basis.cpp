#include "elfuse/basis.hpp"

#include <algorithm>
#include <cmath>

namespace elfuse {

Index BasisDescriptor::width() const {
  switch (kind) {
    case Kind::constant:
    case Kind::coordinate:
      return 1;
    case Kind::spline:
      return static_cast<Index>(quantiles.size()) + 1;
  }
  return 0;
}

BasisSet BasisSet::make(std::vector<BasisDescriptor> descriptors) {
  if (descriptors.empty()) throw ValidationError("basis: need at least one descriptor");
  for (const auto& d : descriptors) {
    if (d.kind == BasisDescriptor::Kind::spline) {
      if (d.quantiles.empty()) {
        throw ValidationError("basis: spline needs at least one interior knot");
      }
      for (std::size_t i = 0; i < d.quantiles.size(); ++i) {
        const double q = d.quantiles[i];
        if (!(q > 0.0 && q < 1.0)) {
          throw ValidationError("basis: spline knot levels must lie in (0,1)");
        }
        if (i > 0 && !(q > d.quantiles[i - 1])) {
          throw ValidationError("basis: spline knot levels must be strictly increasing");
        }
      }
    }
    if (d.kind != BasisDescriptor::Kind::constant && d.column < 0) {
      throw ValidationError("basis: negative column index");
    }
  }
  BasisSet out;
  out.descriptors_ = std::move(descriptors);
  return out;
}

BasisSet BasisSet::default_for(std::span<const Index> z_columns) {
  std::vector<BasisDescriptor> d{BasisDescriptor::constant()};
  for (Index c : z_columns) {
    if (c != 0) d.push_back(BasisDescriptor::coordinate(c));
  }
  return make(std::move(d));
}

Index BasisSet::size() const {
  Index h = 0;
  for (const auto& d : descriptors_) h += d.width();
  return h;
}

void BasisSet::check_columns(std::span<const Index> z_columns) const {
  for (const auto& d : descriptors_) {
    if (d.kind == BasisDescriptor::Kind::constant) continue;
    if (std::find(z_columns.begin(), z_columns.end(), d.column) == z_columns.end()) {
      throw ValidationError("basis: column " + std::to_string(d.column + 1) +
                            " is not an external (z) column");
    }
  }
}

double sample_quantile(std::vector<double> values, double level) {
  if (values.empty()) throw ValidationError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Matrix natural_spline_basis(std::span<const double> x,
                            std::span<const double> knots) {
  const auto nk = static_cast<Index>(knots.size());
  if (nk < 2) throw ValidationError("natural spline: need at least two knots");
  for (Index k = 1; k < nk; ++k) {
    if (!(knots[static_cast<std::size_t>(k)] > knots[static_cast<std::size_t>(k - 1)])) {
      throw ValidationError("natural spline: knots must be strictly increasing");
    }
  }
  const double last = knots.back();
  const double before_last = knots[static_cast<std::size_t>(nk - 2)];
  auto cube_plus = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  auto d = [&](double xv, double knot) {
    return (cube_plus(xv - knot) - cube_plus(xv - last)) / (last - knot);
  };

  Matrix out(static_cast<Index>(x.size()), nk - 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xv = x[i];
    const auto r = static_cast<Index>(i);
    out(r, 0) = xv;
    const double tail = d(xv, before_last);
    for (Index k = 0; k + 2 < nk; ++k) {
      out(r, k + 1) = d(xv, knots[static_cast<std::size_t>(k)]) - tail;
    }
  }
  return out;
}

Matrix eval_basis(const BasisSet& basis, const PrimaryDataset& data) {
  basis.check_columns(data.z_columns);
  const Index n = data.n();
  Matrix out(n, basis.size());
  Index col = 0;
  for (const auto& d : basis.descriptors()) {
    switch (d.kind) {
      case BasisDescriptor::Kind::constant:
        out.col(col++).setOnes();
        break;
      case BasisDescriptor::Kind::coordinate:
        out.col(col++) = data.design.col(d.column);
        break;
      case BasisDescriptor::Kind::spline: {
        std::vector<double> values(data.design.col(d.column).data(),
                                   data.design.col(d.column).data() + n);
        std::vector<double> knots;
        knots.push_back(*std::min_element(values.begin(), values.end()));
        for (double q : d.quantiles) knots.push_back(sample_quantile(values, q));
        knots.push_back(*std::max_element(values.begin(), values.end()));
        for (std::size_t k = 1; k < knots.size(); ++k) {
          if (!(knots[k] > knots[k - 1])) {
            throw ValidationError("basis: spline knots collide for covariate column " +
                                  std::to_string(d.column + 1) +
                                  " (degenerate covariate)");
          }
        }
        const Matrix block = natural_spline_basis(values, knots);
        out.middleCols(col, block.cols()) = block;
        col += block.cols();
        break;
      }
    }
  }
  return out;
}

}  // namespace elfuse
