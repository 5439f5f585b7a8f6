#include "doctest.h"
#include "helpers.hpp"

using namespace elfuse;

TEST_CASE("build_phi_full with the identity layout returns theta") {
  std::mt19937_64 rng(3);
  const auto layout = ParamLayout::full(4, 3);
  const Vector theta = testutil::gaussian_vector(rng, 8);
  CHECK(layout.num_free() == 0);
  CHECK((layout.build_phi_full(theta, Vector()) - theta).norm() == 0.0);
}

TEST_CASE("free intercepts replace the intercepts only") {
  const auto layout = ParamLayout::free_intercepts(5, 3);
  Vector theta(10);
  theta << 0.2, 1, -1, 1, -1, -0.1, -1, 1, 1, 1;
  Vector free(2);
  free << 0.35, -0.25;
  Vector expected(10);
  expected << 0.35, 1, -1, 1, -1, -0.25, -1, 1, 1, 1;
  CHECK(layout.m() == 8);
  CHECK((layout.build_phi_full(theta, free) - expected).norm() == 0.0);
}

TEST_CASE("disconnected layout copies phi_free verbatim") {
  std::mt19937_64 rng(4);
  const auto layout = ParamLayout::disconnected(3, 3);
  const Vector theta = testutil::gaussian_vector(rng, 6);
  const Vector free = testutil::gaussian_vector(rng, 6);
  CHECK((layout.build_phi_full(theta, free) - free).norm() == 0.0);
}

TEST_CASE("custom A maps the shared block") {
  Matrix A(2, 2);
  A << 2.0, 1.0, 0.0, -1.0;
  const auto layout = ParamLayout::make(2, 3, {1, 3}, A);
  Vector theta(4);
  theta << 10, 1, 20, 2;
  Vector free(2);
  free << 7, 8;
  const Vector phi = layout.build_phi_full(theta, free);
  CHECK(phi(1) == doctest::Approx(2 * 1 + 1 * 2));
  CHECK(phi(3) == doctest::Approx(-2));
  CHECK(phi(0) == 7);
  CHECK(phi(2) == 8);
}

TEST_CASE("build_phi_full is linear and the split round-trips") {
  std::mt19937_64 rng(5);
  Matrix A = Matrix::Identity(3, 3) + 0.3 * testutil::gaussian_design(rng, 3, 3);
  const auto layout = ParamLayout::make(3, 3, {0, 2, 5}, A);
  const Vector t1 = testutil::gaussian_vector(rng, 6), t2 = testutil::gaussian_vector(rng, 6);
  const Vector f1 = testutil::gaussian_vector(rng, 3), f2 = testutil::gaussian_vector(rng, 3);
  const double a = 0.7, b = -1.3;
  const Vector lhs = layout.build_phi_full(a * t1 + b * t2, a * f1 + b * f2);
  const Vector rhs = a * layout.build_phi_full(t1, f1) + b * layout.build_phi_full(t2, f2);
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((layout.assemble(layout.shared_part(t1), layout.free_part(t1)) - t1).norm() == 0.0);
}

TEST_CASE("layout validation") {
  CHECK_THROWS_AS(ParamLayout::make(2, 3, {0, 0}, Matrix::Identity(2, 2)), ValidationError);
  CHECK_THROWS_AS(ParamLayout::make(2, 3, {0, 4}, Matrix::Identity(2, 2)), ValidationError);
  CHECK_THROWS_AS(ParamLayout::make(2, 3, {0, 1}, Matrix::Zero(2, 2)), ValidationError);
  const auto layout = ParamLayout::full(2, 3);
  CHECK_THROWS_AS(layout.build_phi_full(Vector::Zero(3), Vector()), ValidationError);
}

TEST_CASE("coarsen_label") {
  const auto map = CoarseningMap::make({{1, 2}, {3}}, 3);
  CHECK(map.coarsen(2) == 0);
  CHECK(map.coarsen(1) == 0);
  CHECK(map.coarsen(3) == 1);
  const auto partial = CoarseningMap::make({{1}, {2}}, 3);
  CHECK_FALSE(partial.coarsen(3).has_value());
  CHECK_THROWS_AS(partial.coarsen(4), ValidationError);
  CHECK_THROWS_AS(partial.coarsen(0), ValidationError);
}

TEST_CASE("coarsening map validation") {
  CHECK_THROWS_AS(CoarseningMap::make({{1, 2}}, 3), ValidationError);
  CHECK_THROWS_AS(CoarseningMap::make({{1, 2}, {2}}, 3), ValidationError);
  CHECK_THROWS_AS(CoarseningMap::make({{1}, {}}, 3), ValidationError);
  CHECK_THROWS_AS(CoarseningMap::make({{1}, {4}}, 3), ValidationError);
}

TEST_CASE("primary dataset validation") {
  Matrix X(2, 2);
  X << 1, 0.5, 1, -0.5;
  CHECK_NOTHROW(PrimaryDataset::make({1, 2}, X, 2));
  CHECK_THROWS_AS(PrimaryDataset::make({1, 3}, X, 2), ValidationError);
  CHECK_THROWS_AS(PrimaryDataset::make({1}, X, 2), ValidationError);
  Matrix bad = X;
  bad(1, 0) = 2.0;
  CHECK_THROWS_AS(PrimaryDataset::make({1, 2}, bad, 2), ValidationError);
  CHECK_THROWS_AS(PrimaryDataset::make({1, 2}, X, 2, {1}), ValidationError);
  const auto d = PrimaryDataset::make({1, 2}, X, 2);
  CHECK(d.z_columns == std::vector<Index>{0, 1});
}

TEST_CASE("prediction set validation") {
  Matrix q(2, 2);
  q << 0.2, 0.3, 0.5, 0.5;
  CHECK_NOTHROW(ExternalPredictionSet::make(q, 2));
  CHECK_THROWS_AS(ExternalPredictionSet::make(q, 3), ValidationError);
  q(1, 1) = 0.6;
  CHECK_THROWS_AS(ExternalPredictionSet::make(q, 2), ValidationError);
  q(1, 1) = -0.1;
  CHECK_THROWS_AS(ExternalPredictionSet::make(q, 2), ValidationError);
}

TEST_CASE("fused parameters stack and unstack") {
  FusedParams g{Vector::Constant(2, 1.0), Vector::Constant(3, 2.0), Vector::Constant(1, 3.0)};
  const Vector s = g.stacked();
  CHECK(s.size() == 6);
  const auto back = FusedParams::unstack(s, 2, 3);
  CHECK(back.stacked() == s);
}
