// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.
// Usage: acceptance <scenario dir>
#include "properties.hpp"

#include <freestop/oracle.hpp>
#include <freestop/pipeline.hpp>
#include <freestop/scenario.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

using namespace freestop;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double lerp_nodes(const Lattice& grid, const std::vector<double>& values, double x) {
  const double u = (x - grid.lower()[0]) / grid.dx();
  const int i = static_cast<int>(std::floor(u));
  const double w = u - i;
  const double a = values[static_cast<std::size_t>(i)];
  if (w == 0.0) return a;
  const double b = values[static_cast<std::size_t>(i + 1)];
  return (1 - w) * a + w * b;
}

struct OracleErrors {
  double boundary = 0.0;
  double j0 = 0.0;
  double monge = 0.0;
  double exit_time = 0.0;
};

// Errors against the closed forms, in absolute units.
OracleErrors oracle_errors(Pipeline& p, OracleCase c) {
  OracleErrors e;
  const TimePenalty& g = p.scenario().g;
  const ValueField& f = p.field();
  const double dx = f.grid.dx();
  const FreeBoundary& b = p.boundary();
  for (const auto& y : p.nu().atoms()) {
    const double q = y.point[0];
    if (c == OracleCase::ConcaveB && std::abs(q) > 2.0) continue;
    e.boundary = std::max(e.boundary, std::abs(lerp_nodes(f.grid, b.s, q) - oracle_boundary(c, q)));
  }
  // The potentials are determined up to an additive constant.
  double shift = 0.0;
  const auto& psi = p.plan().potentials.psi;
  for (std::size_t j = 0; j < p.nu().size(); ++j) {
    shift += oracle_psi(c, g, p.nu().point(j)[0]) - psi[static_cast<Eigen::Index>(j)];
  }
  shift /= static_cast<double>(p.nu().size());
  for (const auto& x : p.mu().atoms()) {
    e.j0 = std::max(e.j0, std::abs(f.interpolate(0, x.point) + shift - oracle_J0(c, g, x.point[0])));
  }
  MongeSolver solver(p.problem(), f);
  for (const auto& x : p.mu().atoms()) {
    const double q = x.point[0];
    if (std::abs(q) < 2 * dx) continue;
    for (const auto& br : solver.map(x.point).branches) {
      e.monge = std::max(e.monge, std::abs(br.y[0] - oracle_monge(c, q)));
      e.exit_time = std::max(e.exit_time, std::abs(br.tau - oracle_exit_time(c, q)));
    }
  }
  return e;
}

std::string dx_units(double err, double dx) { return fmt("%.3f dx", err / dx); }

void reproduction(int criterion, Pipeline& p, OracleCase c, double seconds, const std::string& extra,
                  bool extra_pass) {
  const double dx = p.field().grid.dx();
  const OracleErrors e = oracle_errors(p, c);
  const bool pass = e.boundary <= 3 * dx && e.j0 <= 5 * dx && e.monge <= 5 * dx && extra_pass;
  report(criterion, pass,
         "boundary " + dx_units(e.boundary, dx) + " (<= 3), J0 " + dx_units(e.j0, dx) +
             " (<= 5), Monge " + dx_units(e.monge, dx) + " (<= 5), " + extra +
             fmt("runtime %.1f s", seconds));
}

Pipeline load(const std::string& dir, const char* name) {
  return Pipeline(load_scenario(dir + "/" + name));
}

double eulerian_value(const std::string& dir, const char* name, double dx) {
  Scenario s = load_scenario(dir + "/" + name);
  s.eulerian_lattice->dx = dx;
  s.eulerian_lattice->dt = dx;
  Pipeline p(std::move(s));
  return p.flow().value;
}

bool strictly_monotone(const std::vector<double>& h, bool increasing) {
  for (std::size_t k = 1; k < h.size(); ++k) {
    if (increasing ? !(h[k] > h[k - 1]) : !(h[k] < h[k - 1])) return false;
  }
  return h.size() > 1;
}

struct TrajectoryTally {
  int count = 0;
  double mp = 0.0;
  int monotone_failures = 0;
  double tau = 0.0;
  int contact_failures = 0;
};

void audit_trajectories(Pipeline& p, OracleCase c, int wanted, TrajectoryTally& t) {
  const ValueField& f = p.field();
  const double dx = f.grid.dx();
  std::vector<Vector> atoms;
  for (const auto& a : p.mu().atoms()) {
    if (std::abs(a.point[0]) >= 2 * dx) atoms.push_back(a.point);
  }
  MongeSolver solver(p.problem(), f);
  const bool increasing = p.problem().time_class() == TimeClass::TD;
  for (int k = 0; k < wanted; ++k) {
    const std::size_t i = static_cast<std::size_t>((k + 0.5) * static_cast<double>(atoms.size()) / wanted);
    const double x = atoms[i][0];
    for (const auto& br : solver.map(atoms[i]).branches) {
      ++t.count;
      const auto mp = maximum_principle_audit(p.problem(), br.trajectory);
      t.mp = std::max(t.mp, mp.max_residual);
      if (!mp.matches_time_class || !strictly_monotone(mp.hamiltonian_profile, increasing)) {
        ++t.monotone_failures;
      }
      t.tau = std::max(t.tau, std::abs(br.tau - oracle_exit_time(c, x)));
      if (!endpoint_contact_check(f, br.y, br.tau).pass) ++t.contact_failures;
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <scenario dir>\n");
    return 2;
  }
  setenv("FREESTOP_THREADS", "1", 1);
  const std::string dir = argv[1];
  try {
    // 1. Convex case.
    Pipeline a = load(dir, "case_a.json");
    auto start = Clock::now();
    const VerificationReport ra = run(a);
    const double seconds_a = seconds_since(start);
    reproduction(1, a, OracleCase::ConvexA, seconds_a, "", seconds_a <= 60 && !ra.failure);

    // 2. Concave case with the horizon check.
    Pipeline b = load(dir, "case_b.json");
    start = Clock::now();
    const VerificationReport rb = run(b);
    const double seconds_b = seconds_since(start);
    const ValueField& fb = b.field();
    const bool horizon = fb.grid.t_max() == 6.0 && fb.horizon_gap <= fb.horizon_tolerance;
    reproduction(2, b, OracleCase::ConcaveB, seconds_b,
                 "horizon gap " + fmt("%.2e", fb.horizon_gap) + " (<= " +
                     fmt("%.2e", fb.horizon_tolerance) + "), ",
                 horizon && !rb.failure);

    // 3. Value agreement and refinement of W.
    {
      const double V = a.plan().value;
      const double D1 = a.plan().dual_value;
      const double oracle = oracle_total_cost(OracleCase::ConvexA, a.scenario().g);
      std::vector<double> err;
      for (double dx : {1.0 / 64, 1.0 / 128, 1.0 / 256}) {
        err.push_back(std::abs(V - eulerian_value(dir, "case_a.json", dx)));
      }
      const double o1 = std::log2(err[0] / err[1]);
      const double o2 = std::log2(err[1] / err[2]);
      const bool pass = std::abs(V - D1) <= 1e-8 && err[0] <= 0.08 && err[1] < err[0] &&
                        err[2] < err[1] && o1 >= 0.8 && o2 >= 0.8 && std::abs(V - oracle) <= 0.02;
      report(3, pass,
             "|V-D1| " + fmt("%.2e", std::abs(V - D1)) + ", |V-W| " + fmt("%.5f", err[0]) + " -> " +
                 fmt("%.5f", err[1]) + " -> " + fmt("%.5f", err[2]) + " (orders " + fmt("%.2f", o1) +
                 ", " + fmt("%.2f", o2) + "), |V-19/12| " + fmt("%.2e", std::abs(V - oracle)));
    }

    // 4. Slackness of the solved flows against their DP fields.
    {
      double stop = 0.0, move = 0.0;
      for (Pipeline* p : {&a, &b}) {
        const auto s = slackness_audit(p->problem(), p->network(), p->flow(), p->network_field());
        stop = std::max(stop, s.stop_violation_mass);
        move = std::max(move, s.move_violation_mass);
      }
      report(4, stop <= 1e-6 && move <= 1e-6,
             "stop mass " + fmt("%.2e", stop) + ", move mass " + fmt("%.2e", move) + " (<= 1e-6)");
    }

    // 5. Monotonicity and contact closure for TC, TD and TS fields.
    {
      Pipeline ts = load(dir, "ts_linear.json");
      std::size_t checked = 0, bad = 0;
      std::string classes;
      for (Pipeline* p : {&a, &b, &ts}) {
        const ValueField& f = p->field();
        const auto m = monotonicity_check(f);
        const auto c = contact_closure_check(f);
        checked += m.checked + c.checked;
        bad += m.failures + c.failures;
        classes += std::string(to_string(f.time_class)) + (m.pass && c.pass ? " ok " : " bad ");
      }
      report(5, bad == 0 && checked > 0,
             classes + "(" + std::to_string(bad) + " failures over " + std::to_string(checked) +
                 " checks)");
    }

    // 6. Pontryagin audits on 100 trajectories, 50 per case.
    {
      TrajectoryTally ta, tb;
      audit_trajectories(a, OracleCase::ConvexA, 50, ta);
      audit_trajectories(b, OracleCase::ConcaveB, 50, tb);
      const int count = ta.count + tb.count;
      const double mp = std::max(ta.mp, tb.mp);
      const double tau = std::max(ta.tau, tb.tau);
      const double dt = a.field().grid.dt();
      const int mono = ta.monotone_failures + tb.monotone_failures;
      const int contact = ta.contact_failures + tb.contact_failures;
      report(6, count >= 100 && mp <= 1e-10 && mono == 0 && tau <= 2 * dt && contact == 0,
             std::to_string(count) + " trajectories, MP residual " + fmt("%.2e", mp) +
                 ", H monotone failures " + std::to_string(mono) + ", tau error " +
                 fmt("%.3f dt", tau / dt) + " (<= 2), contact failures " + std::to_string(contact));
    }

    // 7. Lattice cost against g(|y - x|), and the fixed-horizon value.
    {
      const double h = 1.0 / 64;
      const double t_max = 3.0;
      const Lattice lat(h, h, t_max, Vector::Constant(1, -4.5), Vector::Constant(1, 4.5));
      std::mt19937_64 rng(77);
      std::uniform_int_distribution<int> node(-96, 96);
      double worst_ratio = 0.0;
      bool pass = true;
      for (int k = 0; k < 20; ++k) {
        const TimePenalty g = props::penalty(k);
        auto problem = ControlProblem::speed_limited_time_penalty(g, 1);
        const double x = node(rng) * h, y = node(rng) * h;
        const double lattice = point_cost_lattice(*problem, lat, Vector::Constant(1, x),
                                                  Vector::Constant(1, y)).cost;
        // Lipschitz constant of g' on [0, t_max]: sup |g''|, attained at 0 for this family.
        const double lip = std::abs(g.second_derivative(0.0));
        const double bound = lip * t_max * h + g.derivative(t_max) * h;
        const double err = std::abs(lattice - g.value(std::abs(y - x)));
        if (err > bound) pass = false;
        if (bound > 0) worst_ratio = std::max(worst_ratio, err / bound);
      }
      auto problem = ControlProblem::speed_limited_time_penalty(a.scenario().g, 1);
      const Lattice qgrid(h, h, 3, Vector::Constant(1, -3), Vector::Constant(1, 3));
      const Lattice fgrid(h, h / 8, 1, Vector::Constant(1, -3), Vector::Constant(1, 3));
      std::vector<double> psi(qgrid.node_count());
      for (std::size_t i = 0; i < psi.size(); ++i) {
        psi[i] = oracle_psi(OracleCase::ConvexA, a.scenario().g, qgrid.point(i)[0]);
      }
      const ValueField J = solve_qvi(*problem, qgrid, psi);
      const ValueField I = solve_fixed_horizon(*problem, fgrid, psi);
      double gap = 0.0;
      for (const auto& x : a.mu().atoms()) {
        gap = std::max(gap, std::abs(I.interpolate(0, x.point) - J.interpolate(0, x.point)));
      }
      pass = pass && gap <= 10 * h;
      report(7, pass,
             "20 pairs, worst error/bound " + fmt("%.3f", worst_ratio) + ", |I-J| " +
                 dx_units(gap, h) + " (<= 10)");
    }

    // 8. Property suites.
    {
      const auto wd = props::weak_duality(50, 20240501);
      const auto pi = props::path_inequality(200, 20240502);
      const auto pm = props::plan_marginals(100, 20240503);
      const auto fc = props::flow_conservation(30, 20240504);
      report(8, wd.pass() && pi.pass() && pm.pass() && fc.pass(),
             "weak duality " + std::to_string(wd.trials - wd.failures) + "/" +
                 std::to_string(wd.trials) + ", path inequality " +
                 std::to_string(pi.trials - pi.failures) + "/" + std::to_string(pi.trials) +
                 ", plan marginals " + std::to_string(pm.trials - pm.failures) + "/" +
                 std::to_string(pm.trials) + ", conservation " +
                 std::to_string(fc.trials - fc.failures) + "/" + std::to_string(fc.trials));
    }
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s\n", failures == 0 ? "all criteria pass" : "some criteria fail");
  return failures == 0 ? 0 : 1;
}
