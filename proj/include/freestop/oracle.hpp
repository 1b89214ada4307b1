#pragma once

#include <freestop/control_problem.hpp>

#include <optional>
#include <string>

namespace freestop {

// Closed-form 1D solutions for mu = U[-1/2, 1/2] and
// nu = 1/2 U[-2, -1] + 1/2 U[1, 2] with the speed-one two-control model.
// Case A needs a convex g (running cost increasing), case B a concave one.
enum class OracleCase { ConvexA, ConcaveB };

const char* to_string(OracleCase c) noexcept;
OracleCase parse_oracle_case(const std::string& text);

// Throws InvalidArgument when the case and g's convexity disagree.
void require_consistent(OracleCase c, const TimePenalty& g);

// A: sign(x) + 2x; B: 2 sign(x) - 2x. x in [-1/2, 1/2], x != 0.
double oracle_monge(OracleCase c, double x);
// A: 1 + |x|; B: 2 - 3|x|.
double oracle_exit_time(OracleCase c, double x);
// A: 1/2 + |y|/2; B: -1 + 3|y|/2 (|y| <= 2 only).
double oracle_boundary(OracleCase c, double y);

struct OraclePotentials {
  double psi = 0.0;
  double J0 = 0.0;
  std::optional<double> Jt;  // present when t lies in the formula's region
};

// A: psi = 2 g(1/2 + |q|/2), J0 = g(1 + |q|), Jt = g(1 + |q| - t) + g(t), t < s(q).
// B: psi = 2/3 g(-1 + 3|q|/2), J0 = -1/3 g(2 - 3|q|),
//    Jt = -1/3 g(2 - 3(|q| - t)) + g(t), t > s(q).
OraclePotentials oracle_potentials(OracleCase c, const TimePenalty& g, double q, double t = 0.0);

double oracle_psi(OracleCase c, const TimePenalty& g, double y);
double oracle_J0(OracleCase c, const TimePenalty& g, double x);

// Integral of g(tau(x)) over mu by adaptive Gauss-Kronrod quadrature
// (absolute tolerance 1e-10).
double oracle_total_cost(OracleCase c, const TimePenalty& g);

// g(|y - x|).
double oracle_cost_identity(const TimePenalty& g, double x, double y);

}  // namespace freestop
