#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>

using namespace elfuse;

namespace {

// Natural cubic interpolating spline through (knots, y), linear outside the
// boundary knots. Second derivatives from the tridiagonal system.
double natural_interpolant(const std::vector<double>& t, const std::vector<double>& y, double x) {
  const std::size_t n = t.size();
  std::vector<double> h(n - 1), m(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = t[i + 1] - t[i];
  if (n > 2) {
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 0; i < k; ++i) {
      diag[i] = 2.0 * (h[i] + h[i + 1]);
      upper[i] = h[i + 1];
      rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double w = h[i] / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i >= 1; --i) m[i] = (rhs[i - 1] - upper[i - 1] * m[i + 1]) / diag[i - 1];
  }
  auto slope = [&](std::size_t i, bool right) {
    const double base = (y[i + 1] - y[i]) / h[i];
    return right ? base + h[i] * (2.0 * m[i + 1] + m[i]) / 6.0
                 : base - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
  };
  if (x <= t.front()) return y.front() + slope(0, false) * (x - t.front());
  if (x >= t.back()) return y.back() + slope(n - 2, true) * (x - t.back());
  std::size_t i = 0;
  while (x > t[i + 1]) ++i;
  const double a = (t[i + 1] - x) / h[i], b = (x - t[i]) / h[i];
  return a * y[i] + b * y[i + 1] +
         ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h[i] * h[i] / 6.0;
}

}  // namespace

TEST_CASE("constant and coordinate descriptors") {
  std::mt19937_64 rng(1);
  auto data = testutil::random_dataset(rng, 8, 3, 2);
  data = PrimaryDataset::make(data.labels, data.design, 2, {0, 2});
  const auto basis =
      BasisSet::make({BasisDescriptor::constant(), BasisDescriptor::coordinate(2)});
  const Matrix h = eval_basis(basis, data);
  CHECK(h.col(0) == Vector::Ones(8));
  CHECK(h.col(1) == data.design.col(2));
  CHECK_THROWS_AS(eval_basis(BasisSet::make({BasisDescriptor::coordinate(1)}), data),
                  ValidationError);
}

TEST_CASE("default basis skips the intercept") {
  const std::vector<Index> z{0, 1, 3};
  const auto basis = BasisSet::default_for(z);
  CHECK(basis.size() == 3);
  CHECK(basis.descriptors()[2].column == 3);
}

TEST_CASE("type 7 sample quantile") {
  CHECK(sample_quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(sample_quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
  CHECK(sample_quantile({5}, 0.9) == 5);
}

TEST_CASE("spline columns are natural splines on the quantile knots") {
  const std::vector<double> xs{-1.7, -0.9, -0.4, -0.1, 0.2, 0.3, 0.8, 1.1, 1.9, 2.6};
  Matrix X(10, 3);
  for (Index i = 0; i < 10; ++i) X.row(i) << 1.0, xs[static_cast<std::size_t>(i)], 0.0;
  const auto data = PrimaryDataset::make(std::vector<int>(10, 1), X, 2);
  const auto basis = BasisSet::make({BasisDescriptor::spline(1, {0.25, 0.5, 0.75})});
  const Matrix h = eval_basis(basis, data);
  REQUIRE(h.cols() == 4);

  std::vector<double> knots{-1.7, -0.325, 0.25, 1.025, 2.6};
  for (std::size_t k = 1; k + 1 < knots.size(); ++k) {
    CHECK(knots[k] == doctest::Approx(sample_quantile(xs, 0.25 * static_cast<double>(k))));
  }
  // Each column must be reproduced by the natural interpolant of its own
  // knot values, inside and outside the boundary knots.
  std::vector<double> probe = xs;
  probe.push_back(-3.0);
  probe.push_back(4.0);
  const Matrix at_knots = natural_spline_basis(knots, knots);
  const Matrix at_probe = natural_spline_basis(probe, knots);
  for (Index c = 0; c < h.cols(); ++c) {
    std::vector<double> y(knots.size());
    for (std::size_t k = 0; k < knots.size(); ++k) y[k] = at_knots(static_cast<Index>(k), c);
    for (std::size_t i = 0; i < probe.size(); ++i) {
      CHECK(at_probe(static_cast<Index>(i), c) ==
            doctest::Approx(natural_interpolant(knots, y, probe[i])).epsilon(1e-10));
    }
    for (Index i = 0; i < 10; ++i) CHECK(h(i, c) == doctest::Approx(at_probe(i, c)));
  }
  // Together with a constant the columns span the whole natural spline space.
  Matrix full(knots.size(), 5);
  full.col(0).setOnes();
  full.rightCols(4) = at_knots;
  CHECK(Eigen::FullPivLU<Matrix>(full).rank() == 5);
}

TEST_CASE("degenerate covariate is rejected") {
  Matrix X(6, 2);
  X.col(0).setOnes();
  X.col(1) << 0, 0, 0, 0, 0, 1;
  const auto data = PrimaryDataset::make(std::vector<int>(6, 1), X, 2);
  const auto basis = BasisSet::make({BasisDescriptor::spline(1)});
  CHECK_THROWS_WITH_AS(eval_basis(basis, data), doctest::Contains("column 2"), ValidationError);
}

TEST_CASE("identical z rows give identical basis rows") {
  std::mt19937_64 rng(2);
  Matrix X = testutil::gaussian_design(rng, 12, 3);
  X.row(7) = X.row(3);
  const auto data = PrimaryDataset::make(std::vector<int>(12, 1), X, 2);
  const auto basis = BasisSet::make({BasisDescriptor::constant(), BasisDescriptor::coordinate(2),
                                     BasisDescriptor::spline(1)});
  const Matrix h = eval_basis(basis, data);
  CHECK(h.row(7) == h.row(3));
}

TEST_CASE("spline knot levels are validated") {
  CHECK_THROWS_AS(BasisSet::make({BasisDescriptor::spline(1, {0.5, 0.5})}), ValidationError);
  CHECK_THROWS_AS(BasisSet::make({BasisDescriptor::spline(1, {0.0, 0.5})}), ValidationError);
  CHECK_THROWS_AS(BasisSet::make({}), ValidationError);
}
