#include <doctest.h>

#include <freestop/error.hpp>
#include <freestop/trajectory_cost.hpp>

#include <cmath>
#include <functional>
#include <random>

using namespace freestop;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

// Independent oracle: enumerate every +-1 control word up to the horizon and
// keep the cheapest word ending at y (Riemann sum of g' at left endpoints).
double brute_force_cost(const TimePenalty& g, double x, double y, double h, int max_steps) {
  double best = kInf;
  std::function<void(int, double, double)> walk = [&](int k, double q, double acc) {
    if (std::abs(q - y) < 1e-12) best = std::min(best, acc);
    if (k == max_steps || acc >= best) return;
    for (double a : {1.0, -1.0}) walk(k + 1, q + a * h, acc + g.derivative(k * h) * h);
  };
  walk(0, x, 0.0);
  return best;
}

}  // namespace

TEST_CASE("analytic cost is g(|y - x|)") {
  auto sq = ControlProblem::speed_limited_time_penalty(TimePenalty::power(2), 1);
  CHECK(point_cost_analytic(*sq, v1(0), v1(3)) == 9.0);
  CHECK(point_cost_analytic(*sq, v1(0.4), v1(0.4)) == 0.0);
  auto ex = ControlProblem::speed_limited_time_penalty(TimePenalty::one_minus_exp(1), 1);
  CHECK(point_cost_analytic(*ex, v1(-0.25), v1(-1.5)) ==
        doctest::Approx(1 - std::exp(-1.25)).epsilon(1e-15));
  CHECK(std::abs(point_cost_analytic(*ex, v1(-0.25), v1(-1.5)) - 0.7134952) < 5e-8);
  Vector x(2), y(2);
  x << 0, 0;
  y << 3, 4;
  auto sphere = ControlProblem::speed_limited_time_penalty(TimePenalty::linear(), 2);
  CHECK(point_cost_analytic(*sphere, x, y) == 5.0);
}

TEST_CASE("lattice cost on the quarter grid") {
  auto sq = ControlProblem::speed_limited_time_penalty(TimePenalty::power(2), 1);
  Lattice lat(0.25, 0.25, 2.0, v1(-2), v1(2));
  auto pc = point_cost_lattice(*sq, lat, v1(0), v1(1));
  // Left Riemann sum of g'(t) = 2t over [0, 1] at step 1/4.
  CHECK(pc.cost == doctest::Approx(2 * (0 + 0.25 + 0.5 + 0.75) * 0.25));
  CHECK(pc.path.end_time == 1.0);
  CHECK(pc.path.controls == std::vector<std::size_t>(4, 0));
  CHECK(std::abs(pc.cost - 1.0) <= 2.0 * 2.0 * 0.25 + 4.0 * 0.25);
  auto same = point_cost_lattice(*sq, lat, v1(0.5), v1(0.5));
  CHECK(same.cost == 0.0);
  CHECK(same.path.steps() == 0);
  CHECK(same.path.end_time == 0.0);
}

TEST_CASE("linear penalty gives the distance") {
  auto lin = ControlProblem::speed_limited_time_penalty(TimePenalty::linear(), 1);
  Lattice lat(0.125, 0.125, 3.0, v1(-2), v1(2));
  for (double x : {-1.0, 0.0, 0.375}) {
    for (double y : {-1.5, 0.25, 1.75}) {
      CHECK(point_cost_lattice(*lin, lat, v1(x), v1(y)).cost == doctest::Approx(std::abs(y - x)));
    }
  }
}

TEST_CASE("lattice DP matches brute-force enumeration") {
  const double h = 0.25;
  for (auto g : {TimePenalty::power(2), TimePenalty::one_minus_exp(1), TimePenalty::linear()}) {
    auto prob = ControlProblem::speed_limited_time_penalty(g, 1);
    Lattice lat(h, h, 2.0, v1(-2), v1(2));
    for (double x : {-0.5, 0.0, 0.25}) {
      for (double y : {-1.0, 0.5, 1.25}) {
        const double oracle = brute_force_cost(g, x, y, h, 8);
        CHECK(point_cost_lattice(*prob, lat, v1(x), v1(y)).cost == doctest::Approx(oracle).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("cost matrix rows and symmetry") {
  auto sq = ControlProblem::speed_limited_time_penalty(TimePenalty::power(2), 1);
  Matrix c = cost_matrix_analytic(*sq, {v1(-0.25), v1(0.25)}, {v1(-1.5), v1(1.5)});
  CHECK(c(0, 0) == 1.5625);
  CHECK(c(0, 1) == 3.0625);
  CHECK(c(1, 0) == 3.0625);
  CHECK(c(1, 1) == 1.5625);
  Lattice lat(0.25, 0.25, 3.0, v1(-3), v1(3));
  Matrix cl = cost_matrix_lattice(*sq, lat, {v1(0.5)}, {v1(0.5)});
  CHECK(cl(0, 0) == 0.0);
  std::vector<Vector> pts{v1(-1), v1(0), v1(0.75), v1(1.5)};
  Matrix sym = cost_matrix_analytic(*sq, pts, pts);
  CHECK((sym - sym.transpose()).norm() == 0.0);
  auto lin = ControlProblem::speed_limited_time_penalty(TimePenalty::linear(), 1);
  Matrix d = cost_matrix_lattice(*lin, lat, pts, pts);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(d(i, j) == doctest::Approx(std::abs(pts[i][0] - pts[j][0])));
  // Forward sweep and point query agree.
  Matrix m = cost_matrix_lattice(*sq, lat, pts, pts);
  CHECK(m(0, 3) == doctest::Approx(point_cost_lattice(*sq, lat, pts[0], pts[3]).cost).epsilon(1e-14));
}

TEST_CASE("lattice error within the first-order bound") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> node(-16, 16);
  for (auto g : {TimePenalty::power(2), TimePenalty::one_minus_exp(1), TimePenalty::linear()}) {
    auto prob = ControlProblem::speed_limited_time_penalty(g, 1);
    const double h = 1.0 / 16;
    Lattice lat(h, h, 3.0, v1(-2), v1(2));
    const double lip = g.kind() == TimePenalty::Kind::Power ? 2.0 : 1.0;
    const double bound = lip * lat.t_max() * h + g.derivative(lat.t_max()) * h;
    for (int k = 0; k < 10; ++k) {
      const Vector x = v1(node(rng) * h);
      const Vector y = v1(node(rng) * h);
      const double err = std::abs(point_cost_lattice(*prob, lat, x, y).cost - g.value(std::abs(y[0] - x[0])));
      CHECK(err <= bound);
    }
  }
}

TEST_CASE("concatenation bound for a stationary cost") {
  auto lin = ControlProblem::speed_limited_time_penalty(TimePenalty::linear(), 1);
  Lattice lat(0.25, 0.25, 4.0, v1(-3), v1(3));
  const double xz = point_cost_lattice(*lin, lat, v1(-1), v1(1.5)).cost;
  const double xy = point_cost_lattice(*lin, lat, v1(-1), v1(2)).cost;
  const double yz = point_cost_lattice(*lin, lat, v1(2), v1(1.5)).cost;
  CHECK(xz <= xy + yz + 1e-12);
}

TEST_CASE("errors") {
  auto sq = ControlProblem::speed_limited_time_penalty(TimePenalty::power(2), 1);
  Lattice lat(0.25, 0.25, 0.5, v1(-2), v1(2));
  CHECK_THROWS_WITH_AS(point_cost_lattice(*sq, lat, v1(0), v1(1.5)), doctest::Contains("unreachable"), Error);
  CHECK_THROWS_AS(point_cost_lattice(*sq, lat, v1(0.1), v1(0)), Error);
  CHECK_THROWS_AS(Lattice(0.25, 0.3, 1.0, v1(-1), v1(1)), Error);
  Lattice skew(0.25, 0.125, 1.0, v1(-1), v1(1));
  CHECK_THROWS_AS(point_cost_lattice(*sq, skew, v1(0), v1(0.25)), Error);
}
