#include <doctest.h>

#include <freestop/control_problem.hpp>
#include <freestop/error.hpp>

#include <random>

using namespace freestop;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }
Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

ProblemPtr four_direction_unit_cost() {
  ControlProblem::Definition def;
  def.dimension = 2;
  def.controls = ControlSet::discrete({v2(1, 0), v2(0, 1), v2(-1, 0), v2(0, -1)});
  def.velocity = [](const Vector&, const Vector& a) { return a; };
  def.running_cost = [](double, const Vector&, const Vector&) { return 1.0; };
  def.time_class = TimeClass::TS;
  def.state_independent_velocity = true;
  return std::make_shared<const ControlProblem>(def);
}

}  // namespace

TEST_CASE("two-control model Hamiltonian is |p| - g'(t)") {
  auto p = ControlProblem::speed_limited_time_penalty(TimePenalty::power(2), 1);
  CHECK(hamiltonian(*p, 1.0, v1(0), v1(0.5)) == doctest::Approx(-1.5).epsilon(1e-15));
  CHECK(hamiltonian(*p, 0.3, v1(2), v1(-0.5)) == doctest::Approx(0.5 - 0.6));
}

TEST_CASE("zero momentum and zero cost give zero") {
  ControlProblem::Definition def;
  def.dimension = 1;
  def.controls = ControlSet::discrete({v1(1), v1(-1)});
  def.velocity = [](const Vector&, const Vector& a) { return a; };
  def.running_cost = [](double, const Vector&, const Vector&) { return 0.0; };
  ControlProblem p(def);
  CHECK(hamiltonian(p, 0.0, v1(0), v1(0)) == 0.0);
}

TEST_CASE("four-direction example: exhaustive max") {
  auto p = four_direction_unit_cost();
  const Vector mom = v2(3, 4);
  // Brute force over the list.
  double best = -kInf;
  for (const auto& a : p->controls().vectors()) best = std::max(best, mom.dot(a) - 1.0);
  CHECK(best == 3.0);
  CHECK(hamiltonian(*p, 0.0, v2(0, 0), mom) == 3.0);
  auto choice = argmax_control(*p, 0.0, v2(0, 0), mom);
  REQUIRE(choice.controls.size() == 1);
  CHECK(choice.controls[0] == v2(0, 1));
  CHECK_FALSE(choice.tie());
  auto slope = hamiltonian_p_slope(*p, 0.0, v2(0, 0), mom);
  REQUIRE(slope.size() == 1);
  CHECK(slope[0] == v2(0, 1));
}

TEST_CASE("argmax follows the sign of p and ties at zero") {
  auto p = ControlProblem::speed_limited_time_penalty(TimePenalty::power(2), 1);
  auto plus = argmax_control(*p, 0.5, v1(0), v1(2));
  REQUIRE(plus.controls.size() == 1);
  CHECK(plus.controls[0][0] == 1.0);
  auto tie = argmax_control(*p, 0.5, v1(0), v1(0));
  CHECK(tie.tie());
  CHECK(tie.controls.size() == 2);
  auto slope = hamiltonian_p_slope(*p, 0.5, v1(0), v1(0));
  CHECK(slope.size() == 2);
}

TEST_CASE("sphere argmax is p/|p| and whole sphere at zero") {
  auto p = ControlProblem::speed_limited_time_penalty(TimePenalty::power(2), 2);
  auto c = argmax_control(*p, 1.0, v2(0, 0), v2(3, 4));
  REQUIRE(c.controls.size() == 1);
  CHECK(c.controls[0][0] == doctest::Approx(0.6));
  CHECK(c.controls[0][1] == doctest::Approx(0.8));
  CHECK(hamiltonian(*p, 1.0, v2(0, 0), v2(3, 4)) == doctest::Approx(5.0 - 2.0));
  CHECK(argmax_control(*p, 1.0, v2(0, 0), v2(0, 0)).whole_sphere);
}

TEST_CASE("Hamiltonian is convex in p and argmax attains it") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3, 3);
  std::uniform_real_distribution<double> lam(0, 1);
  auto dir4 = four_direction_unit_cost();
  auto sphere = ControlProblem::speed_limited_time_penalty(TimePenalty::one_minus_exp(1), 2);
  for (const auto& prob : {dir4, sphere}) {
    for (int k = 0; k < 200; ++k) {
      const Vector a = v2(u(rng), u(rng));
      const Vector b = v2(u(rng), u(rng));
      const double l = lam(rng);
      const double t = std::abs(u(rng));
      const double lhs = hamiltonian(*prob, t, v2(0, 0), l * a + (1 - l) * b);
      const double rhs = l * hamiltonian(*prob, t, v2(0, 0), a) + (1 - l) * hamiltonian(*prob, t, v2(0, 0), b);
      CHECK(lhs <= rhs + 1e-12);
      auto c = argmax_control(*prob, t, v2(0, 0), a);
      const double h = hamiltonian(*prob, t, v2(0, 0), a);
      for (const auto& ctl : c.controls) {
        const double attained = a.dot(prob->velocity(v2(0, 0), ctl)) - prob->running_cost(t, v2(0, 0), ctl);
        CHECK(std::abs(attained - h) <= tie_tolerance(h));
      }
    }
  }
}

TEST_CASE("TC Hamiltonian decreases in time, TD increases") {
  auto tc = ControlProblem::speed_limited_time_penalty(TimePenalty::power(2), 1);
  auto td = ControlProblem::speed_limited_time_penalty(TimePenalty::one_minus_exp(1), 1);
  for (double t = 0; t < 3; t += 0.1) {
    CHECK(hamiltonian(*tc, t, v1(0), v1(1.3)) > hamiltonian(*tc, t + 0.1, v1(0), v1(1.3)));
    CHECK(hamiltonian(*td, t, v1(0), v1(1.3)) < hamiltonian(*td, t + 0.1, v1(0), v1(1.3)));
  }
  CHECK(tc->time_class() == TimeClass::TC);
  CHECK(td->time_class() == TimeClass::TD);
  auto ts = ControlProblem::speed_limited_time_penalty(TimePenalty::linear(), 1);
  CHECK(ts->time_class() == TimeClass::TS);
}

TEST_CASE("construction rejects bad problems") {
  ControlProblem::Definition def;
  def.dimension = 2;
  def.controls = ControlSet::discrete({v2(1, 0), v2(-1, 0)});
  def.velocity = [](const Vector&, const Vector& a) { return a; };
  def.running_cost = [](double, const Vector&, const Vector&) { return 1.0; };
  CHECK_THROWS_AS(ControlProblem{def}, Error);  // does not span R^2

  def.controls = ControlSet::discrete({v2(1, 0), v2(0, 1), v2(-1, -1)});
  def.running_cost = [](double, const Vector&, const Vector&) { return -1.0; };
  CHECK_THROWS_AS(ControlProblem{def}, Error);  // negative cost

  def.running_cost = [](double t, const Vector&, const Vector&) { return 1.0 + t; };
  def.time_class = TimeClass::TD;
  CHECK_THROWS_AS(ControlProblem{def}, Error);  // increasing cost declared TD
  def.time_class = TimeClass::TC;
  CHECK_NOTHROW(ControlProblem{def});

  CHECK_THROWS_AS(ControlSet::discrete({}), Error);
  CHECK_THROWS_AS(ControlSet::discrete({v1(1), v1(1)}), Error);
}

TEST_CASE("linear penalty conjugate is infinite above slope one") {
  auto g = TimePenalty::linear();
  CHECK(g.conjugate(0.5) == 0.0);
  CHECK_THROWS_AS(g.conjugate(1.5), Error);
  auto sq = TimePenalty::power(2);
  CHECK(sq.conjugate(3.0) == doctest::Approx(9.0 / 4.0));
  CHECK(sq.conjugate_derivative(3.0) == doctest::Approx(1.5));
}

TEST_CASE("penalty parsing") {
  CHECK(TimePenalty::parse("power:2").kind() == TimePenalty::Kind::Power);
  CHECK(TimePenalty::parse("power:3").parameter() == 3.0);
  CHECK(TimePenalty::parse("one_minus_exp").kind() == TimePenalty::Kind::OneMinusExp);
  CHECK(TimePenalty::parse("linear").kind() == TimePenalty::Kind::Linear);
  CHECK_THROWS_AS(TimePenalty::parse("cubic"), Error);
  CHECK_THROWS_AS(TimePenalty::parse("power:1"), Error);
}
