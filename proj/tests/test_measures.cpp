#include <doctest.h>

#include <freestop/error.hpp>
#include <freestop/measures.hpp>

#include <numeric>

using namespace freestop;

namespace {
Vector v1(double a) { return Vector::Constant(1, a); }
DiscreteMeasure two_atoms(double a, double b) {
  return DiscreteMeasure({{v1(a), 0.5}, {v1(b), 0.5}});
}
}  // namespace

TEST_CASE("identity plan marginals") {
  auto mu = two_atoms(0, 1);
  Matrix pi(2, 2);
  pi << 0.5, 0, 0, 0.5;
  TransportPlan plan(mu, mu, pi);
  auto [r, c] = marginals(plan);
  CHECK(r.weight(0) == 0.5);
  CHECK(c.weight(1) == 0.5);
  CHECK(r.point(1) == mu.point(1));
}

TEST_CASE("product plan marginals") {
  DiscreteMeasure mu({{v1(0), 0.25}, {v1(1), 0.75}});
  DiscreteMeasure nu({{v1(-1), 0.5}, {v1(2), 0.3}, {v1(3), 0.2}});
  Matrix pi(2, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) pi(i, j) = mu.weight(i) * nu.weight(j);
  TransportPlan plan(mu, nu, pi);
  auto [r, c] = marginals(plan);
  for (std::size_t i = 0; i < 2; ++i) CHECK(r.weight(i) == doctest::Approx(mu.weight(i)).epsilon(1e-15));
  for (std::size_t j = 0; j < 3; ++j) CHECK(c.weight(j) == doctest::Approx(nu.weight(j)).epsilon(1e-15));
}

TEST_CASE("plan cost hand sums") {
  auto mu = two_atoms(-0.25, 0.25);
  auto nu = two_atoms(-1.5, 1.5);
  Matrix pi(2, 2);
  pi << 0.5, 0, 0, 0.5;
  TransportPlan plan(mu, nu, pi);
  auto [r, c] = marginals(plan);
  CHECK(r.weight(0) == 0.5);
  CHECK(c.weight(0) == 0.5);
  Matrix cost(2, 2);
  cost << 1.5625, 3.0625, 3.0625, 1.5625;
  CHECK(plan_cost(plan, cost) == 1.5625);
  CHECK(plan_cost(plan, Matrix::Zero(2, 2)) == 0.0);
  DiscreteMeasure one({{v1(0), 1.0}});
  Matrix c9(1, 1);
  c9 << 9;
  CHECK(plan_cost(TransportPlan(one, one, Matrix::Ones(1, 1)), c9) == 9.0);
  CHECK_THROWS_AS(plan_cost(plan, Matrix::Zero(3, 2)), Error);
}

TEST_CASE("plan constructor enforces marginals") {
  auto mu = two_atoms(0, 1);
  Matrix pi(2, 2);
  pi << 0.5, 0.1, 0, 0.4;
  CHECK_THROWS_AS(TransportPlan(mu, mu, pi), Error);
}

TEST_CASE("atoms merge and weights validate") {
  DiscreteMeasure m({{v1(0.3), 0.25}, {v1(0.3 + 1e-13), 0.25}, {v1(0.7), 0.5}});
  CHECK(m.size() == 2);
  CHECK(m.weight(0) == 0.5);
  CHECK_THROWS_AS(DiscreteMeasure({{v1(0), 0.4}}), Error);
  CHECK_THROWS_AS(DiscreteMeasure({{v1(0), 1.2}, {v1(1), -0.2}}), Error);
}

TEST_CASE("uniform densities atomize at midpoints") {
  auto mu = DiscreteMeasure::uniform_interval(-0.5, 0.5, 4);
  REQUIRE(mu.size() == 4);
  CHECK(mu.point(0)[0] == -0.375);
  CHECK(mu.point(3)[0] == 0.375);
  auto nu = DiscreteMeasure::mixture({{0.5, DiscreteMeasure::uniform_interval(-2, -1, 2)},
                                      {0.5, DiscreteMeasure::uniform_interval(1, 2, 2)}});
  CHECK(nu.size() == 4);
  CHECK(nu.weight(0) == 0.25);
}

TEST_CASE("snapping moves atoms to nearest nodes and sums collisions") {
  Lattice grid(0.5, 0.5, 1.0, v1(-0.75), v1(1.25));  // nodes at -0.75, -0.25, 0.25, ...
  DiscreteMeasure a({{v1(0.24), 1.0}});
  CHECK(snap_to_grid(a, grid).point(0)[0] == 0.25);
  DiscreteMeasure b({{v1(0.24), 0.5}, {v1(0.26), 0.5}});
  auto sb = snap_to_grid(b, grid);
  CHECK(sb.size() == 1);
  CHECK(sb.weight(0) == 1.0);
  DiscreteMeasure c({{v1(-0.25), 0.3}, {v1(0.75), 0.7}});
  auto sc = snap_to_grid(c, grid);
  CHECK(sc.point(0)[0] == -0.25);
  CHECK(sc.point(1)[0] == 0.75);
  CHECK(sc.total_mass() == c.total_mass());
  DiscreteMeasure far({{v1(5.0), 1.0}});
  CHECK_THROWS_AS(snap_to_grid(far, grid), Error);
}

TEST_CASE("largest-remainder quantization is exact") {
  std::vector<double> w{1.0 / 3, 1.0 / 3, 1.0 / 3};
  auto q = quantize_masses(w, 10);
  CHECK(std::accumulate(q.begin(), q.end(), std::int64_t{0}) == 10);
  CHECK(q[0] == 4);  // tie goes to the lowest index
  CHECK(q[1] == 3);
  auto big = quantize_masses(std::vector<double>(7, 1.0 / 7), kMassScale);
  CHECK(std::accumulate(big.begin(), big.end(), std::int64_t{0}) == 1000000000);
}
