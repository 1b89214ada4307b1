#include <freestop/error.hpp>
#include <freestop/oracle.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

namespace freestop {

namespace {

double sign(double x) { return x > 0 ? 1.0 : -1.0; }

void check_source(double x) {
  require(std::abs(x) <= 0.5 + 1e-12, ErrorCode::InvalidArgument, "source point outside [-1/2, 1/2]");
}

}  // namespace

const char* to_string(OracleCase c) noexcept { return c == OracleCase::ConvexA ? "A" : "B"; }

OracleCase parse_oracle_case(const std::string& text) {
  if (text == "A" || text == "a" || text == "convex") return OracleCase::ConvexA;
  if (text == "B" || text == "b" || text == "concave") return OracleCase::ConcaveB;
  fail(ErrorCode::Parse, "unknown oracle case '" + text + "' (expected A or B)");
}

void require_consistent(OracleCase c, const TimePenalty& g) {
  if (c == OracleCase::ConvexA) {
    require(g.convex(), ErrorCode::InvalidArgument, "case A needs a convex g");
  } else {
    require(g.concave(), ErrorCode::InvalidArgument, "case B needs a concave g");
  }
}

double oracle_monge(OracleCase c, double x) {
  check_source(x);
  require(x != 0.0, ErrorCode::InvalidArgument, "x = 0 is a kink of the Monge map");
  return c == OracleCase::ConvexA ? sign(x) + 2.0 * x : 2.0 * sign(x) - 2.0 * x;
}

double oracle_exit_time(OracleCase c, double x) {
  check_source(x);
  return c == OracleCase::ConvexA ? 1.0 + std::abs(x) : 2.0 - 3.0 * std::abs(x);
}

double oracle_boundary(OracleCase c, double y) {
  if (c == OracleCase::ConvexA) return 0.5 + 0.5 * std::abs(y);
  require(std::abs(y) <= 2.0 + 1e-12, ErrorCode::InvalidArgument,
          "case B boundary formula holds only for |y| <= 2");
  return -1.0 + 1.5 * std::abs(y);
}

double oracle_psi(OracleCase c, const TimePenalty& g, double y) {
  if (c == OracleCase::ConvexA) return 2.0 * g.value(0.5 + 0.5 * std::abs(y));
  require(std::abs(y) <= 2.0 + 1e-12, ErrorCode::InvalidArgument,
          "case B obstacle formula holds only for |y| <= 2");
  return 2.0 / 3.0 * g.value(-1.0 + 1.5 * std::abs(y));
}

double oracle_J0(OracleCase c, const TimePenalty& g, double x) {
  check_source(x);
  if (c == OracleCase::ConvexA) return g.value(1.0 + std::abs(x));
  return -g.value(2.0 - 3.0 * std::abs(x)) / 3.0;
}

OraclePotentials oracle_potentials(OracleCase c, const TimePenalty& g, double q, double t) {
  require(t >= 0, ErrorCode::InvalidArgument, "negative time");
  OraclePotentials out;
  out.psi = oracle_psi(c, g, q);
  if (std::abs(q) <= 0.5) out.J0 = oracle_J0(c, g, q);
  else out.J0 = std::nan("");
  const double s = oracle_boundary(c, q);
  if (c == OracleCase::ConvexA) {
    if (t < s) out.Jt = g.value(1.0 + std::abs(q) - t) + g.value(t);
  } else {
    if (t > s) out.Jt = -g.value(2.0 - 3.0 * (std::abs(q) - t)) / 3.0 + g.value(t);
  }
  return out;
}

double oracle_total_cost(OracleCase c, const TimePenalty& g) {
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [&](double x) { return g.value(oracle_exit_time(c, x)); };
  double error = 0.0;
  // The exit time has a kink at 0; integrate each half separately.
  const double left = gauss_kronrod<double, 31>::integrate(integrand, -0.5, 0.0, 15, 1e-14, &error);
  const double e1 = error;
  const double right = gauss_kronrod<double, 31>::integrate(integrand, 0.0, 0.5, 15, 1e-14, &error);
  require(e1 + error <= 1e-10, ErrorCode::Numeric, "oracle quadrature did not converge");
  return left + right;
}

double oracle_cost_identity(const TimePenalty& g, double x, double y) {
  return g.value(std::abs(y - x));
}

}  // namespace freestop
