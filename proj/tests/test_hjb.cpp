#include <doctest.h>

#include <freestop/error.hpp>
#include <freestop/hjb.hpp>
#include <freestop/oracle.hpp>

#include <cmath>
#include <random>

using namespace freestop;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

Lattice line(double dx, double dt, double t_max, double half_width) {
  return Lattice(dx, dt, t_max, v1(-half_width), v1(half_width));
}

template <class F>
std::vector<double> on_nodes(const Lattice& grid, F&& f) {
  std::vector<double> out(grid.node_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(grid.point(i)[0]);
  return out;
}

double at_point(const Lattice& grid, const std::vector<double>& values, double x) {
  return values[*grid.exact_node(v1(x))];
}

const TimePenalty kSquare = TimePenalty::power(2);
const TimePenalty kExp = TimePenalty::one_minus_exp(1);

struct ConvexCase {
  ProblemPtr problem = ControlProblem::speed_limited_time_penalty(kSquare, 1);
  Lattice grid;
  ValueField field;

  explicit ConvexCase(double dx = 1.0 / 64)
      : grid(line(dx, dx, 3, 3)),
        field(solve_qvi(*problem, grid, on_nodes(grid, [](double y) {
                          return oracle_psi(OracleCase::ConvexA, kSquare, y);
                        }))) {}
};

// Stopping allowed only on the target support 1 <= |y| <= 2, where the
// concave-case formulas hold.
std::vector<double> concave_psi(const Lattice& grid) {
  return on_nodes(grid, [](double y) {
    return std::abs(y) >= 1 - 1e-12 && std::abs(y) <= 2 + 1e-12
               ? oracle_psi(OracleCase::ConcaveB, kExp, y)
               : -kInf;
  });
}

}  // namespace

TEST_CASE("convex case: J(0, .), boundary and optimized pair") {
  ConvexCase c;
  const double dx = c.grid.dx();
  CHECK(c.field.time_class == TimeClass::TC);
  CHECK(c.field.scheme == Scheme::LatticeDP);
  CHECK(std::abs(c.field.interpolate(0, v1(0.25)) - 1.5625) <= 5 * dx);
  CHECK(std::abs(c.field.interpolate(0, v1(-0.25)) - 1.5625) <= 5 * dx);

  const FreeBoundary b = extract_free_boundary(c.field);
  CHECK_FALSE(b.stationary);
  CHECK(std::abs(at_point(c.grid, b.s, 1.5) - 1.25) <= 2 * dx);
  CHECK(std::abs(at_point(c.grid, b.s, -1.5) - 1.25) <= 2 * dx);

  const OptimizedPair pair = optimized_pair(c.field);
  CHECK(std::abs(at_point(c.grid, pair.phi_star, 0.25) - 1.5625) <= 5 * dx);
  // Non-increasing in time, so the minimum sits on the last layer, where J = psi.
  for (std::size_t i = 0; i < c.grid.node_count(); ++i) {
    CHECK(pair.psi_star[i] == c.field.psi[i]);
  }
}

TEST_CASE("convex case audits") {
  ConvexCase c;
  const auto ob = obstacle_check(c.field);
  CHECK(ob.pass);
  CHECK(ob.checked == c.grid.node_count() * static_cast<std::size_t>(c.grid.layers()));
  CHECK(monotonicity_check(c.field).pass);
  const auto closure = contact_closure_check(c.field);
  CHECK(closure.pass);
  CHECK(closure.failures == 0);
  CHECK(complementarity_check(*c.problem, c.field).pass);
  CHECK(c.field.eps_contact == doctest::Approx(1e-9 * (1 + 8.0)));
}

TEST_CASE("boundary equation residual near y = 1.5") {
  ConvexCase c;
  const FreeBoundary b = extract_free_boundary(c.field);
  std::vector<char> interest(c.grid.node_count(), 0);
  interest[*c.grid.exact_node(v1(1.5))] = 1;
  const auto res = boundary_equation_residual(*c.problem, c.field, b, &interest);
  REQUIRE(res.evaluated == 1);
  // |grad psi| = g'(1.25) = 2.5 and H = 2.5 - 2 s.
  CHECK(res.max_abs <= 4 * c.grid.dx());
}

TEST_CASE("zero obstacle with nonnegative cost stops at once") {
  auto problem = ControlProblem::speed_limited_time_penalty(kSquare, 1);
  const Lattice grid = line(0.25, 0.25, 2, 2);
  const ValueField f = solve_qvi(*problem, grid, std::vector<double>(grid.node_count(), 0.0));
  for (double j : f.J) CHECK(j == 0.0);
  const FreeBoundary b = extract_free_boundary(f);
  for (double s : b.s) CHECK(s == 0.0);
}

TEST_CASE("concave case with horizon stabilization") {
  auto problem = ControlProblem::speed_limited_time_penalty(kExp, 1);
  const double dx = 1.0 / 64;
  const Lattice grid = line(dx, dx, 6, 8);
  const ValueField f = solve_qvi(*problem, grid, concave_psi(grid));
  CHECK(f.time_class == TimeClass::TD);
  CHECK(f.horizon_gap <= f.horizon_tolerance);
  CHECK(f.valid_layers > 0);
  CHECK(f.valid_layers <= grid.layers());
  const double expected = -(1 - std::exp(-1.25)) / 3;
  CHECK(std::abs(f.interpolate(0, v1(0.25)) - expected) <= 5 * dx);
  CHECK(std::abs(f.interpolate(0, v1(-0.25)) - expected) <= 5 * dx);
  const FreeBoundary b = extract_free_boundary(f);
  CHECK(std::abs(at_point(grid, b.s, 1.5) - 1.25) <= 2 * dx);
  CHECK(std::abs(at_point(grid, b.s, -1.5) - 1.25) <= 2 * dx);
  CHECK(obstacle_check(f).pass);
  CHECK(monotonicity_check(f).pass);
  CHECK(contact_closure_check(f).pass);
  CHECK(complementarity_check(*problem, f).pass);
}

TEST_CASE("horizon check fails when t_max is too short") {
  auto problem = ControlProblem::speed_limited_time_penalty(kExp, 1);
  const Lattice grid = line(1.0 / 16, 1.0 / 16, 1, 4);
  CHECK_THROWS_AS(solve_qvi(*problem, grid, concave_psi(grid)), Error);
  QviOptions off;
  off.horizon_check = false;
  CHECK_NOTHROW(solve_qvi(*problem, grid, concave_psi(grid), off));
}

TEST_CASE("stationary problem: J equals psi") {
  auto problem = ControlProblem::speed_limited_time_penalty(TimePenalty::linear(), 1);
  const Lattice grid = line(1.0 / 32, 1.0 / 32, 2, 3);
  // 1-Lipschitz obstacle, so moving never gains more than it costs.
  const auto psi = on_nodes(grid, [](double y) { return std::abs(std::sin(y)); });
  const ValueField f = solve_qvi(*problem, grid, psi);
  CHECK(f.time_class == TimeClass::TS);
  CHECK(monotonicity_check(f).pass);
  const OptimizedPair pair = optimized_pair(f);
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    CHECK(pair.psi_star[i] == doctest::Approx(psi[i]).epsilon(1e-12));
    CHECK(pair.phi_star[i] == doctest::Approx(psi[i]).epsilon(1e-12));
  }
  const FreeBoundary b = extract_free_boundary(f);
  CHECK(b.stationary);
  const auto res = boundary_equation_residual(*problem, f, b);
  CHECK(res.evaluated > 0);
  // Supersolution: -H(q, grad psi) = 1 - |grad psi| >= 0.
  for (double r : res.residual) {
    if (!std::isnan(r)) CHECK(r >= -1e-9);
  }
}

TEST_CASE("Lax-Friedrichs agrees with the lattice scheme") {
  auto problem = ControlProblem::speed_limited_time_penalty(kSquare, 1);
  const double dx = 1.0 / 64;
  const Lattice grid = line(dx, dx / 2, 3, 3);
  const auto psi =
      on_nodes(grid, [](double y) { return oracle_psi(OracleCase::ConvexA, kSquare, y); });
  QviOptions lf;
  lf.scheme = Scheme::LaxFriedrichs;
  const ValueField f = solve_qvi(*problem, grid, psi, lf);
  CHECK(f.scheme == Scheme::LaxFriedrichs);
  CHECK(std::abs(f.interpolate(0, v1(0.25)) - 1.5625) <= 10 * dx);
  CHECK(obstacle_check(f).pass);
  CHECK(monotonicity_check(f).pass);
  QviOptions too_coarse = lf;
  too_coarse.cfl = 0.25;
  CHECK_THROWS_AS(solve_qvi(*problem, grid, psi, too_coarse), Error);
}

TEST_CASE("grid convergence of J(0, .) on the source interval") {
  std::vector<double> errors;
  for (double dx : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    ConvexCase c(dx);
    double err = 0.0;
    for (int i = 0; i <= 40; ++i) {
      const double x = -0.5 + i / 40.0;
      err = std::max(err, std::abs(c.field.interpolate(0, v1(x)) -
                                   oracle_J0(OracleCase::ConvexA, kSquare, x)));
    }
    errors.push_back(err);
  }
  REQUIRE(errors[0] > errors[1]);
  REQUIRE(errors[1] > errors[2]);
  CHECK(std::log2(errors[0] / errors[1]) >= 0.8);
  CHECK(std::log2(errors[1] / errors[2]) >= 0.8);
}

TEST_CASE("fixed horizon solution") {
  auto problem = ControlProblem::speed_limited_time_penalty(kSquare, 1);
  SUBCASE("linear obstacle has the Hopf-Lax value q + 1/4") {
    const double dx = 1.0 / 32;
    const Lattice grid = line(dx, dx / 4, 1, 3);
    const ValueField f = solve_fixed_horizon(*problem, grid, on_nodes(grid, [](double y) { return y; }));
    for (double q : {-1.0, 0.0, 0.5, 1.0}) {
      CHECK(f.interpolate(0, v1(q)) == doctest::Approx(q + 0.25).epsilon(1e-9));
    }
  }
  SUBCASE("constant obstacle stays constant") {
    const Lattice grid = line(0.125, 0.0625, 1, 2);
    const ValueField f = solve_fixed_horizon(*problem, grid, std::vector<double>(grid.node_count(), 3.0));
    for (double j : f.J) CHECK(j == doctest::Approx(3.0).epsilon(1e-14));
  }
  SUBCASE("matches the free end time value on the convex case") {
    const double dx = 1.0 / 64;
    const Lattice grid = line(dx, dx / 8, 1, 3);
    const auto psi =
        on_nodes(grid, [](double y) { return oracle_psi(OracleCase::ConvexA, kSquare, y); });
    const ValueField f = solve_fixed_horizon(*problem, grid, psi);
    CHECK(std::abs(f.interpolate(0, v1(0.25)) - 1.5625) <= 10 * dx);
  }
  SUBCASE("CFL violation") {
    const Lattice grid = line(1.0 / 32, 1.0 / 8, 1, 3);
    CHECK_THROWS_AS(
        solve_fixed_horizon(*problem, grid, on_nodes(grid, [](double y) { return y * y; })), Error);
  }
}

TEST_CASE("kink mask finds the corner of |y|") {
  const Lattice grid = line(1.0 / 16, 1.0 / 16, 1, 2);
  const auto mask = kink_mask(grid, on_nodes(grid, [](double y) { return std::abs(y); }));
  CHECK(mask[*grid.exact_node(v1(0))]);
  CHECK_FALSE(mask[*grid.exact_node(v1(1))]);
  const auto smooth = kink_mask(grid, on_nodes(grid, [](double y) { return y * y; }));
  for (char m : smooth) CHECK_FALSE(m);
}

TEST_CASE("path inequality") {
  ConvexCase c(1.0 / 32);
  const auto shifts = control_shifts(*c.problem, c.grid);
  const auto moves = move_table(c.grid, shifts);
  SUBCASE("optimal straight path holds with equality") {
    // From 0.25 straight right for 1.25: stops at y = 1.5 on the boundary.
    LatticePath path;
    path.nodes.push_back(*c.grid.exact_node(v1(0.25)));
    for (int k = 0; k < 40; ++k) {
      path.controls.push_back(0);
      path.nodes.push_back(moves.next(path.nodes.back(), 0));
    }
    const auto r = path_inequality_check(*c.problem, c.field, path);
    CHECK(r.holds);
    CHECK(std::abs(r.worst_excess) <= 1e-9);
  }
  SUBCASE("waiting at a contact point") {
    // Alternate +1/-1 around y = 1.5 after the boundary time.
    LatticePath path;
    path.nodes.push_back(*c.grid.exact_node(v1(1.5)));
    for (int k = 0; k < 20; ++k) {
      const std::size_t a = k % 2;
      path.controls.push_back(a);
      path.nodes.push_back(moves.next(path.nodes.back(), a));
    }
    CHECK(path_inequality_check(*c.problem, c.field, path, 48).holds);
  }
  SUBCASE("random paths") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> start(-32, 32);
    std::uniform_int_distribution<int> layer(0, 40);
    std::uniform_int_distribution<std::size_t> pick(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
      LatticePath path;
      path.nodes.push_back(*c.grid.exact_node(v1(start(rng) / 32.0)));
      const int k0 = layer(rng);
      for (int k = 0; k < 40; ++k) {
        const std::size_t a = pick(rng);
        path.controls.push_back(a);
        path.nodes.push_back(moves.next(path.nodes.back(), a));
      }
      CHECK(path_inequality_check(*c.problem, c.field, path, k0).holds);
    }
  }
}
