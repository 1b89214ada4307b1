#include <freestop/io.hpp>
#include <freestop/oracle.hpp>
#include <freestop/parallel.hpp>
#include <freestop/pipeline.hpp>
#include <freestop/trajectory_cost.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace freestop {

namespace {

using Clock = std::chrono::steady_clock;
using Timings = std::vector<std::pair<std::string, double>>;

template <class F>
auto staged(Timings& timings, const std::string& stage, F&& body) {
  const auto start = Clock::now();
  auto record = [&] {
    const double s = std::chrono::duration<double>(Clock::now() - start).count();
    for (auto& [name, total] : timings) {
      if (name == stage) {
        total += s;
        return;
      }
    }
    timings.emplace_back(stage, s);
  };
  try {
    auto result = body();
    record();
    return result;
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.code(), e.what());
  } catch (const std::bad_alloc&) {
    throw StageError(stage, ErrorCode::Internal, "out of memory");
  } catch (const std::exception& e) {
    throw StageError(stage, ErrorCode::Internal, e.what());
  }
}

template <class F>
void labelled(const std::string& stage, F&& body) {
  Timings ignored;
  staged(ignored, stage, [&] {
    body();
    return 0;
  });
}

// Oracle acceptance bounds, in lattice units.
constexpr double kBoundaryDx = 3.0;
constexpr double kJ0Dx = 5.0;
constexpr double kMongeDx = 5.0;
constexpr double kMongeExclusionDx = 2.0;
constexpr double kExitTimeDt = 2.0;
constexpr double kOracleValue = 0.02;

double max_abs_entry(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// Linear interpolation of a per-node 1D profile; kInf propagates.
double interpolate_1d(const Lattice& grid, const std::vector<double>& values, double y) {
  const double r = (y - grid.lower()[0]) / grid.dx();
  const int i = std::clamp(static_cast<int>(std::floor(r)), 0, grid.extent(0) - 2);
  const double w = r - i;
  const double a = values[static_cast<std::size_t>(i)];
  const double b = values[static_cast<std::size_t>(i + 1)];
  if (w == 0.0) return a;
  if (!std::isfinite(a) || !std::isfinite(b)) return kInf;
  return (1 - w) * a + w * b;
}

AuditResult audit(std::string name, double residual, double tolerance, std::string detail = {}) {
  return {std::move(name), residual <= tolerance, residual, tolerance, std::move(detail)};
}

AuditResult audit(std::string name, const CheckReport& r, double tolerance, std::string detail) {
  return {std::move(name), r.pass, r.worst, tolerance,
          detail + "; failures " + std::to_string(r.failures) + " of " + std::to_string(r.checked)};
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

}  // namespace

bool VerificationReport::passed() const {
  if (failure) return false;
  for (const auto& a : audits) {
    if (!a.pass) return false;
  }
  return true;
}

std::string VerificationReport::to_json() const {
  std::ostringstream o;
  auto opt = [](const std::optional<double>& v) { return v ? json_number(*v) : "null"; };
  o << "{\n  \"scenario\": " << json_string(scenario) << ",\n";
  o << "  \"pass\": " << (passed() ? "true" : "false") << ",\n";
  o << "  \"values\": {\"V\": " << opt(V) << ", \"D1\": " << opt(D1) << ", \"D\": " << opt(D)
    << ", \"W\": " << opt(W) << ", \"oracle\": " << opt(oracle_value) << "},\n";
  auto gap = [&](const std::optional<double>& a, const std::optional<double>& b) {
    return a && b ? json_number(std::abs(*a - *b)) : std::string("null");
  };
  o << "  \"gaps\": {\"V_D1\": " << gap(V, D1) << ", \"V_D\": " << gap(V, D) << ", \"V_W\": "
    << gap(V, W) << ", \"V_oracle\": " << gap(V, oracle_value) << "},\n";
  o << "  \"audits\": [";
  for (std::size_t i = 0; i < audits.size(); ++i) {
    const auto& a = audits[i];
    o << (i ? ",\n" : "\n") << "    {\"name\": " << json_string(a.name)
      << ", \"pass\": " << (a.pass ? "true" : "false") << ", \"residual\": "
      << json_number(a.residual) << ", \"tolerance\": " << json_number(a.tolerance)
      << ", \"detail\": " << json_string(a.detail) << "}";
  }
  o << (audits.empty() ? "],\n" : "\n  ],\n");
  auto strings = [&](const char* key, const std::vector<std::string>& v) {
    o << "  \"" << key << "\": [";
    for (std::size_t i = 0; i < v.size(); ++i) o << (i ? ", " : "") << json_string(v[i]);
    o << "],\n";
  };
  strings("notes", notes);
  strings("files", files);
  o << "  \"stage_seconds\": {";
  for (std::size_t i = 0; i < stage_seconds.size(); ++i) {
    o << (i ? ", " : "") << json_string(stage_seconds[i].first) << ": "
      << json_number(stage_seconds[i].second);
  }
  o << "},\n  \"failure\": ";
  if (failure) {
    o << "{\"stage\": " << json_string(failure->stage)
      << ", \"code\": " << json_string(to_string(failure->code))
      << ", \"message\": " << json_string(failure->message) << "}";
  } else {
    o << "null";
  }
  o << "\n}\n";
  return o.str();
}

Pipeline::Pipeline(Scenario scenario) : scenario_(std::move(scenario)) {}

const Lattice& Pipeline::grid() {
  if (!grid_) {
    grid_ = staged(timings_, "scenario",
                   [&] { return resolve_lattice(scenario_, scenario_.lattice); });
  }
  return *grid_;
}

const Lattice& Pipeline::eulerian_grid() {
  if (!eulerian_grid_) {
    if (!scenario_.eulerian_lattice) {
      eulerian_grid_ = grid();
    } else {
      eulerian_grid_ = staged(timings_, "scenario", [&] {
        return resolve_lattice(scenario_, *scenario_.eulerian_lattice);
      });
    }
  }
  return *eulerian_grid_;
}

bool Pipeline::analytic_cost() {
  if (!analytic_) {
    analytic_ = staged(timings_, "trajectory_cost", [&] {
      switch (scenario_.pipeline.cost_model) {
        case CostModel::Lattice: return false;
        case CostModel::Analytic:
          require(has_analytic_cost(problem()), ErrorCode::Unsupported,
                  "no closed-form point cost for this problem");
          return true;
        case CostModel::Auto: break;
      }
      return has_analytic_cost(problem());
    });
  }
  return *analytic_;
}

const DiscreteMeasure& Pipeline::mu() {
  if (!mu_) {
    if (analytic_cost()) {
      mu_ = scenario_.mu;
    } else {
      const Lattice& g = grid();
      mu_ = staged(timings_, "trajectory_cost", [&] { return snap_to_grid(scenario_.mu, g); });
    }
  }
  return *mu_;
}

const DiscreteMeasure& Pipeline::nu() {
  if (!nu_) {
    if (analytic_cost()) {
      nu_ = scenario_.nu;
    } else {
      const Lattice& g = grid();
      nu_ = staged(timings_, "trajectory_cost", [&] { return snap_to_grid(scenario_.nu, g); });
    }
  }
  return *nu_;
}

const Matrix& Pipeline::cost() {
  if (!cost_) {
    const Lattice& g = grid();
    const DiscreteMeasure& m = mu();
    const DiscreteMeasure& n = nu();
    const bool analytic = analytic_cost();
    cost_ = staged(timings_, "trajectory_cost", [&]() -> Matrix {
      if (!analytic) return cost_matrix_lattice(problem(), g, m.points(), n.points());
      // The closed form ignores the horizon; the lattice stages do not.
      const double reach = g.t_max() * problem().speed_bound();
      for (const auto& x : m.atoms()) {
        for (const auto& y : n.atoms()) {
          const double d = (y.point - x.point).norm();
          if (d > reach * (1 + 1e-12) + 1e-12) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "unreachable: target " << y.point.transpose() << " lies " << d
                << " from source " << x.point.transpose() << ", beyond t_max * speed = " << reach;
            fail(ErrorCode::Unreachable, msg.str());
          }
        }
      }
      return cost_matrix_analytic(problem(), m.points(), n.points());
    });
  }
  return *cost_;
}

const PrimalDualSolution& Pipeline::plan() {
  if (!plan_) {
    const Matrix& c = cost();
    plan_ = staged(timings_, "kantorovich", [&] { return solve_primal_dual(c, mu(), nu()); });
  }
  return *plan_;
}

const std::vector<double>& Pipeline::obstacle() {
  if (!obstacle_) {
    const Lattice& g = grid();
    const PrimalDualSolution& sol = plan();
    const DiscreteMeasure& m = mu();
    const DiscreteMeasure& n = nu();
    const bool analytic = analytic_cost();
    obstacle_ = staged(timings_, "hjb", [&] {
      // psi is the c-transform of phi, kept only within obstacle_radius * dx of
      // the target atoms; elsewhere stopping is forbidden (-inf).
      const double radius = scenario_.tolerances.obstacle_radius * g.dx() * (1 + 1e-9);
      const int reach = static_cast<int>(std::ceil(scenario_.tolerances.obstacle_radius));
      std::vector<char> near(g.node_count(), 0);
      const int dim = g.dimension();
      for (const auto& y : n.atoms()) {
        std::vector<int> base(static_cast<std::size_t>(dim));
        for (int a = 0; a < dim; ++a) {
          base[static_cast<std::size_t>(a)] =
              static_cast<int>(std::floor((y.point[a] - g.lower()[a]) / g.dx()));
        }
        std::vector<int> offset(static_cast<std::size_t>(dim), -reach);
        while (true) {
          std::vector<int> idx(static_cast<std::size_t>(dim));
          bool inside = true;
          for (int a = 0; a < dim; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            idx[ua] = base[ua] + offset[ua];
            if (idx[ua] < 0 || idx[ua] >= g.extent(a)) inside = false;
          }
          if (inside) {
            const std::size_t node = g.node_of(idx);
            if ((g.point(node) - y.point).norm() <= radius) near[node] = 1;
          }
          // Odometer over offsets in [-reach, reach + 1] per axis.
          int axis = dim - 1;
          while (axis >= 0) {
            auto& o = offset[static_cast<std::size_t>(axis)];
            if (++o <= reach + 1) break;
            o = -reach;
            --axis;
          }
          if (axis < 0) break;
        }
      }
      std::vector<std::size_t> candidates;
      for (std::size_t node = 0; node < near.size(); ++node) {
        if (near[node]) candidates.push_back(node);
      }
      std::vector<double> psi(g.node_count(), -kInf);
      const Vector& phi = sol.potentials.phi;
      if (analytic) {
        parallel_for(candidates.size(), [&](std::size_t c) {
          const Vector q = g.point(candidates[c]);
          double best = kInf;
          for (std::size_t i = 0; i < m.size(); ++i) {
            best = std::min(best, point_cost_analytic(problem(), m.point(i), q) +
                                      phi[static_cast<Eigen::Index>(i)]);
          }
          psi[candidates[c]] = best;
        });
      } else {
        const ControlShifts shifts = control_shifts(problem(), g);
        const MoveTable moves = move_table(g, shifts);
        Matrix costs(static_cast<Eigen::Index>(m.size()),
                     static_cast<Eigen::Index>(candidates.size()));
        parallel_for(m.size(), [&](std::size_t i) {
          const auto from = g.exact_node(m.point(i));
          require(from.has_value(), ErrorCode::OffLattice, "source atom is not a grid node");
          const auto row = lattice_costs_from(problem(), g, shifts, moves, *from);
          for (std::size_t c = 0; c < candidates.size(); ++c) {
            costs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                row[candidates[c]] + phi[static_cast<Eigen::Index>(i)];
          }
        });
        for (std::size_t c = 0; c < candidates.size(); ++c) {
          const double best = costs.col(static_cast<Eigen::Index>(c)).minCoeff();
          if (std::isfinite(best)) psi[candidates[c]] = best;
        }
      }
      return psi;
    });
  }
  return *obstacle_;
}

const ValueField& Pipeline::field() {
  if (!field_) {
    const Lattice& g = grid();
    const std::vector<double>& psi = obstacle();
    field_ = staged(timings_, "hjb", [&] {
      QviOptions options;
      options.scheme = scenario_.pipeline.scheme;
      options.eps_contact = scenario_.tolerances.eps_contact;
      options.eps_mono = scenario_.tolerances.eps_mono;
      return solve_qvi(problem(), g, psi, options);
    });
  }
  return *field_;
}

void Pipeline::use_field(ValueField field) {
  field_ = std::move(field);
  boundary_.reset();
  monge_.reset();
}

const FreeBoundary& Pipeline::boundary() {
  if (!boundary_) {
    const ValueField& f = field();
    boundary_ = staged(timings_, "hjb", [&] { return extract_free_boundary(f); });
  }
  return *boundary_;
}

std::vector<std::size_t> Pipeline::monge_atoms() {
  const std::size_t n = mu().size();
  const auto want = static_cast<std::size_t>(scenario_.pipeline.monge_samples);
  std::vector<std::size_t> out;
  if (want == 0 || want >= n) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  for (std::size_t k = 0; k < want; ++k) {
    out.push_back(static_cast<std::size_t>((static_cast<double>(k) + 0.5) * n / want));
  }
  return out;
}

const std::vector<MongeResult>& Pipeline::monge() {
  if (!monge_) {
    const ValueField& f = field();
    const auto atoms = monge_atoms();
    std::vector<Vector> points;
    for (std::size_t i : atoms) points.push_back(mu().point(i));
    monge_ = staged(timings_, "pontryagin", [&] {
      require(problem().time_class() != TimeClass::TS, ErrorCode::Unsupported,
              "time-stationary problems have no transversality time");
      MongeSolver solver(problem(), f);
      return solver.map_all(points);
    });
  }
  return *monge_;
}

const FlowNetwork& Pipeline::network() {
  if (!network_) {
    const Lattice& g = eulerian_grid();
    network_ = staged(timings_, "eulerian", [&] {
      return build_network(problem(), g, snap_to_grid(scenario_.mu, g),
                           snap_to_grid(scenario_.nu, g));
    });
  }
  return *network_;
}

const FlowSolution& Pipeline::flow() {
  if (!flow_) {
    const FlowNetwork& net = network();
    flow_ = staged(timings_, "eulerian", [&] { return solve_flow(net); });
  }
  return *flow_;
}

const ValueField& Pipeline::network_field() {
  if (!network_field_) {
    const FlowNetwork& net = network();
    const FlowSolution& fl = flow();
    network_field_ = staged(timings_, "eulerian", [&] {
      QviOptions options;
      options.scheme = Scheme::LatticeDP;
      options.horizon_check = false;
      options.eps_contact = scenario_.tolerances.eps_contact;
      options.eps_mono = scenario_.tolerances.eps_mono;
      return solve_qvi(problem(), net.lattice, sink_obstacle(net, fl), options);
    });
  }
  return *network_field_;
}

namespace {

void kantorovich_audits(Pipeline& p, VerificationReport& r) {
  const PrimalDualSolution& sol = p.plan();
  const Matrix& c = p.cost();
  const Tolerances& tol = p.scenario().tolerances;
  r.V = sol.value;
  r.D1 = sol.dual_value;
  const double lp_tol = 1e-9 * (1.0 + max_abs_entry(c));
  r.audits.push_back(audit("lp_identity", duality_gap(sol), tol.lp_identity, "|V - D1|"));
  r.audits.push_back(audit("dual_feasibility", dual_feasibility_violation(c, sol.potentials), lp_tol,
                           "max psi_j - phi_i - c_ij"));
  r.audits.push_back(audit("plan_slackness", slackness_violation(c, sol.plan, sol.potentials),
                           lp_tol, "max |psi_j - phi_i - c_ij| on the plan support"));
  double marginal = 0.0;
  const Matrix& pi = sol.plan.coupling();
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    marginal = std::max(marginal, std::abs(pi.row(i).sum() - p.mu().weight(static_cast<std::size_t>(i))));
  }
  for (Eigen::Index j = 0; j < pi.cols(); ++j) {
    marginal = std::max(marginal, std::abs(pi.col(j).sum() - p.nu().weight(static_cast<std::size_t>(j))));
  }
  r.audits.push_back(audit("plan_marginals", marginal, TransportPlan::kMarginalTolerance,
                           "max marginal deviation"));
  std::int64_t unit_imbalance = 0;
  std::vector<std::int64_t> rows(sol.source_units.size(), 0);
  std::vector<std::int64_t> cols(sol.target_units.size(), 0);
  for (const auto& t : sol.support_units) {
    rows[static_cast<std::size_t>(t[0])] += t[2];
    cols[static_cast<std::size_t>(t[1])] += t[2];
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    unit_imbalance = std::max(unit_imbalance, std::abs(rows[i] - sol.source_units[i]));
  }
  for (std::size_t j = 0; j < cols.size(); ++j) {
    unit_imbalance = std::max(unit_imbalance, std::abs(cols[j] - sol.target_units[j]));
  }
  r.audits.push_back(audit("plan_marginals_exact", static_cast<double>(unit_imbalance), 0.0,
                           "integer mass units"));
}

void hjb_audits(Pipeline& p, VerificationReport& r) {
  const ValueField& f = p.field();
  const Tolerances& tol = p.scenario().tolerances;
  // Value of the optimized pair (psi, J(0, .)).
  double d = 0.0;
  for (const auto& y : p.nu().atoms()) d += y.weight * f.interpolate_psi(y.point);
  for (const auto& x : p.mu().atoms()) d -= x.weight * f.interpolate(0.0, x.point);
  r.D = d;
  if (r.V) {
    r.audits.push_back(audit("value_agreement_D", std::abs(*r.V - d), tol.value_agreement,
                             "|V - D| with D from psi and J(0, .)"));
  }
  r.audits.push_back(audit("obstacle", obstacle_check(f), f.eps_contact, "J >= psi - eps_contact"));
  if (f.time_class == TimeClass::TS) {
    r.notes.push_back("time-stationary running cost: free boundary undefined; J = psi checked "
                      "where psi is finite");
    r.audits.push_back(audit("stationary_identity", monotonicity_check(f), f.eps_mono,
                             "|J - psi| where psi is finite"));
  } else {
    r.audits.push_back(audit("monotonicity", monotonicity_check(f), f.eps_mono,
                             std::string(to_string(f.time_class)) + " time monotonicity"));
    r.audits.push_back(audit("contact_closure", contact_closure_check(f), 0.0,
                             "contact set closed in time"));
  }
  if (f.scheme == Scheme::LatticeDP) {
    r.audits.push_back(audit("complementarity", complementarity_check(p.problem(), f),
                             f.eps_contact, "J = max(psi, best move)"));
  }
  if (f.time_class == TimeClass::TD) {
    r.audits.push_back(audit("horizon_stabilization", f.horizon_gap, f.horizon_tolerance,
                             "J(0) change when t_max doubles; valid layers " +
                                 std::to_string(f.valid_layers) + " of " +
                                 std::to_string(f.grid.layers())));
  }
}

void pontryagin_audits(Pipeline& p, VerificationReport& r) {
  const ValueField& f = p.field();
  const auto& maps = p.monge();
  const Tolerances& tol = p.scenario().tolerances;
  double residual = 0.0;
  std::size_t wrong_direction = 0;
  std::size_t contact_failures = 0;
  double worst_contact = 0.0;
  std::size_t branches = 0;
  for (const auto& m : maps) {
    for (const auto& b : m.branches) {
      ++branches;
      const auto mp = maximum_principle_audit(p.problem(), b.trajectory);
      residual = std::max(residual, mp.max_residual);
      if (!mp.matches_time_class) ++wrong_direction;
      const auto ec = endpoint_contact_check(f, b.y, b.tau);
      worst_contact = std::max(worst_contact, ec.gap - ec.tolerance);
      if (!ec.pass) ++contact_failures;
    }
  }
  const std::string count = std::to_string(branches) + " trajectories";
  r.audits.push_back(audit("maximum_principle", residual, tol.mp_residual, count));
  r.audits.push_back(audit("hamiltonian_monotone", static_cast<double>(wrong_direction), 0.0,
                           count + " with the wrong or no strict direction counted"));
  r.audits.push_back(audit("endpoint_contact", static_cast<double>(contact_failures), 0.0,
                           count + "; worst gap beyond tolerance " + format_double(worst_contact)));
  r.notes.push_back("Hamiltonian growth hypothesis is assumed, not verified at runtime");
}

void eulerian_audits(Pipeline& p, VerificationReport& r) {
  const FlowNetwork& net = p.network();
  const FlowSolution& fl = p.flow();
  const Tolerances& tol = p.scenario().tolerances;
  r.W = fl.value;
  if (r.V) {
    r.audits.push_back(audit("value_agreement_W", std::abs(*r.V - fl.value), tol.value_agreement,
                             "|V - W|"));
  }
  const auto cons = conservation_check(net, fl);
  r.audits.push_back({"flow_conservation", cons.exact && cons.nonnegative && cons.targets_met,
                      static_cast<double>(cons.max_imbalance), 0.0, "integer mass units"});
  const ValueField& nf = p.network_field();
  const auto slack = slackness_audit(p.problem(), net, fl, nf);
  r.audits.push_back(audit("slackness_stop_mass", slack.stop_violation_mass, tol.slackness_mass,
                           std::to_string(slack.stop_arcs_checked) + " stop arcs"));
  r.audits.push_back(audit("slackness_move_mass", slack.move_violation_mass, tol.slackness_mass,
                           std::to_string(slack.move_arcs_checked) + " move arcs"));
  const auto wd = weak_duality_audit(net, fl, nf, fl.sink_potential);
  r.audits.push_back({"weak_duality", wd.pass,
                      std::max({wd.max_arc_residual, wd.max_stop_residual, -wd.gap}),
                      1e-9 * (1.0 + std::abs(fl.value)), "network duals from the flow"});
  if (p.scenario().eulerian_lattice) {
    r.notes.push_back("eulerian stage uses its own lattice (scenario eulerian_lattice)");
  }
}

void oracle_audits(Pipeline& p, VerificationReport& r, OracleCase c) {
  const TimePenalty& g = p.scenario().g;
  r.oracle_value = oracle_total_cost(c, g);
  if (r.V) {
    r.audits.push_back(audit("oracle_value", std::abs(*r.V - *r.oracle_value), kOracleValue,
                             "|V - closed form|"));
  }
  if (!p.scenario().pipeline.hjb) return;
  const ValueField& f = p.field();
  const Lattice& grid = f.grid;
  const double dx = grid.dx();
  const FreeBoundary& b = p.boundary();
  double err_s = 0.0;
  for (const auto& y : p.nu().atoms()) {
    if (c == OracleCase::ConcaveB && std::abs(y.point[0]) > 2.0) continue;
    err_s = std::max(err_s, std::abs(interpolate_1d(grid, b.s, y.point[0]) -
                                     oracle_boundary(c, y.point[0])));
  }
  r.audits.push_back(audit("oracle_boundary", err_s, kBoundaryDx * dx, "max over target atoms"));
  // Potentials carry an additive gauge; align on the target atoms.
  const auto& psi = p.plan().potentials.psi;
  double shift = 0.0;
  for (std::size_t j = 0; j < p.nu().size(); ++j) {
    shift += oracle_psi(c, g, p.nu().point(j)[0]) - psi[static_cast<Eigen::Index>(j)];
  }
  shift /= static_cast<double>(p.nu().size());
  double err_j = 0.0;
  for (const auto& x : p.mu().atoms()) {
    err_j = std::max(err_j, std::abs(f.interpolate(0.0, x.point) + shift -
                                     oracle_J0(c, g, x.point[0])));
  }
  r.audits.push_back(audit("oracle_J0", err_j, kJ0Dx * dx,
                           "max over source atoms after gauge shift " + format_double(shift)));
  if (!p.scenario().pipeline.pontryagin) return;
  const auto atoms = p.monge_atoms();
  const auto& maps = p.monge();
  double err_y = 0.0;
  double err_tau = 0.0;
  std::size_t counted = 0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    const double x = p.mu().point(atoms[k])[0];
    if (std::abs(x) < kMongeExclusionDx * dx) continue;
    ++counted;
    for (const auto& br : maps[k].branches) {
      err_y = std::max(err_y, std::abs(br.y[0] - oracle_monge(c, x)));
      err_tau = std::max(err_tau, std::abs(br.tau - oracle_exit_time(c, x)));
    }
  }
  const std::string detail = std::to_string(counted) + " atoms at least 2 dx from 0";
  r.audits.push_back(audit("oracle_monge", err_y, kMongeDx * dx, detail));
  r.audits.push_back(audit("oracle_exit_time", err_tau, kExitTimeDt * grid.dt(), detail));
}

}  // namespace

VerificationReport run(Pipeline& p, const std::string& output_dir) {
  VerificationReport r;
  const Scenario& s = p.scenario();
  const PipelineFlags& flags = s.pipeline;
  r.scenario = s.name;
  try {
    if (flags.kantorovich) {
      p.plan();
      if (flags.audits) labelled("kantorovich", [&] { kantorovich_audits(p, r); });
      else r.V = p.plan().value, r.D1 = p.plan().dual_value;
    }
    if (flags.hjb) {
      p.field();
      p.boundary();
      if (flags.audits) labelled("hjb", [&] { hjb_audits(p, r); });
      r.notes.push_back("obstacle restricted to " + format_double(s.tolerances.obstacle_radius) +
                        " dx around target atoms");
    }
    if (flags.pontryagin) {
      if (p.problem().time_class() == TimeClass::TS) {
        r.notes.push_back("time-stationary running cost: Monge map stage skipped");
      } else {
        p.monge();
        if (flags.audits) labelled("pontryagin", [&] { pontryagin_audits(p, r); });
      }
    }
    if (flags.eulerian) {
      p.flow();
      if (flags.audits) labelled("eulerian", [&] { eulerian_audits(p, r); });
      else r.W = p.flow().value;
    }
    if (s.oracle && flags.audits) {
      staged(r.stage_seconds, "oracle", [&] {
        oracle_audits(p, r, *s.oracle);
        return 0;
      });
    }
    if (!output_dir.empty()) {
      const bool any = flags.kantorovich || flags.hjb || flags.eulerian;
      if (any) std::filesystem::create_directories(output_dir);
      staged(r.stage_seconds, "output", [&] {
        if (flags.kantorovich) {
          write_plan(p, join_path(output_dir, "plan.json"));
          r.files.push_back(join_path(output_dir, "plan.json"));
        }
        if (flags.hjb) {
          write_field(p.field(), join_path(output_dir, "field.csv"));
          write_boundary(p.field(), p.boundary(), join_path(output_dir, "boundary.csv"));
          r.files.push_back(join_path(output_dir, "field.csv"));
          r.files.push_back(join_path(output_dir, "boundary.csv"));
          if (flags.pontryagin && p.problem().time_class() != TimeClass::TS) {
            write_map(p, join_path(output_dir, "map.csv"));
            r.files.push_back(join_path(output_dir, "map.csv"));
          }
          for (auto& f : write_figures(p, output_dir)) r.files.push_back(std::move(f));
        }
        if (flags.eulerian) {
          write_flow(p, join_path(output_dir, "flow.csv"));
          write_stops(p, join_path(output_dir, "stops.csv"));
          r.files.push_back(join_path(output_dir, "flow.csv"));
          r.files.push_back(join_path(output_dir, "stops.csv"));
        }
        return 0;
      });
    }
  } catch (const StageError& e) {
    const std::string prefix = e.stage() + ": ";
    std::string message = e.what();
    if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
    r.failure = StageFailure{e.stage(), e.code(), message};
  } catch (const std::exception& e) {
    r.failure = StageFailure{"report", ErrorCode::Internal, e.what()};
  }
  auto stages = p.timings();
  for (const auto& t : r.stage_seconds) stages.push_back(t);
  r.stage_seconds = std::move(stages);
  return r;
}

void write_costs(Pipeline& p, const std::string& pairs_csv, const std::string& out_csv) {
  Timings timings;
  const CsvTable pairs = staged(timings, "cost", [&] { return read_csv(pairs_csv); });
  const int dim = p.problem().dimension();
  require(static_cast<int>(pairs.header.size()) == 2 * dim, ErrorCode::Parse,
          pairs_csv + ": expected " + std::to_string(2 * dim) + " columns (x..., y...)");
  const bool analytic = p.analytic_cost();
  std::optional<Lattice> g;
  if (!analytic) g = p.grid();
  std::vector<double> costs(pairs.rows.size());
  staged(timings, "trajectory_cost", [&] {
    parallel_for(pairs.rows.size(), [&](std::size_t i) {
      Vector x(dim);
      Vector y(dim);
      for (int a = 0; a < dim; ++a) {
        x[a] = pairs.rows[i][static_cast<std::size_t>(a)];
        y[a] = pairs.rows[i][static_cast<std::size_t>(dim + a)];
      }
      costs[i] = analytic ? point_cost_analytic(p.problem(), x, y)
                          : point_cost_lattice(p.problem(), *g, x, y).cost;
    });
    return 0;
  });
  auto header = axis_names("x", dim);
  for (auto& n : axis_names("y", dim)) header.push_back(n);
  header.push_back("c");
  CsvWriter out(out_csv, header);
  for (std::size_t i = 0; i < pairs.rows.size(); ++i) {
    for (double v : pairs.rows[i]) out.cell(v);
    out.cell(costs[i]).end_row();
  }
  out.close();
}

void write_plan(Pipeline& p, const std::string& path) {
  const PrimalDualSolution& sol = p.plan();
  std::ostringstream o;
  o << "{\n  \"value\": " << json_number(sol.value) << ",\n  \"dual_value\": "
    << json_number(sol.dual_value) << ",\n  \"plan\": [";
  for (std::size_t k = 0; k < sol.support_units.size(); ++k) {
    const auto& t = sol.support_units[k];
    o << (k ? ",\n    " : "\n    ") << "[" << t[0] << ", " << t[1] << ", "
      << json_number(static_cast<double>(t[2]) / sol.scale) << "]";
  }
  o << "\n  ],\n  \"psi\": [";
  for (Eigen::Index j = 0; j < sol.potentials.psi.size(); ++j) {
    o << (j ? ", " : "") << json_number(sol.potentials.psi[j]);
  }
  o << "],\n  \"phi\": [";
  for (Eigen::Index i = 0; i < sol.potentials.phi.size(); ++i) {
    o << (i ? ", " : "") << json_number(sol.potentials.phi[i]);
  }
  o << "]\n}\n";
  write_text(path, o.str());
}

void write_field(const ValueField& f, const std::string& path) {
  auto header = std::vector<std::string>{"t"};
  for (auto& n : axis_names("q", f.grid.dimension())) header.push_back(n);
  header.insert(header.end(), {"J", "psi", "contact"});
  CsvWriter out(path, header);
  std::vector<Vector> points(f.nodes());
  for (std::size_t node = 0; node < f.nodes(); ++node) points[node] = f.grid.point(node);
  for (int k = 0; k < f.grid.layers(); ++k) {
    for (std::size_t node = 0; node < f.nodes(); ++node) {
      out.cell(f.grid.time(k)).cells(points[node]).cell(f.at(k, node)).cell(f.psi[node])
          .cell(static_cast<long long>(f.in_contact(k, node)));
      out.end_row();
    }
  }
  out.close();
}

void write_boundary(const ValueField& f, const FreeBoundary& b, const std::string& path) {
  auto header = axis_names("q", f.grid.dimension());
  header.push_back("s");
  CsvWriter out(path, header);
  for (std::size_t node = 0; node < f.nodes(); ++node) {
    out.cells(f.grid.point(node)).cell(b.stationary ? std::nan("") : b.s[node]);
    out.end_row();
  }
  out.close();
}

void write_map(Pipeline& p, const std::string& path) {
  const int dim = p.problem().dimension();
  const auto& maps = p.monge();
  auto header = axis_names("x", dim);
  for (auto& n : axis_names("y", dim)) header.push_back(n);
  header.push_back("tau");
  for (int a = 0; a < dim; ++a) header.push_back("p" + std::to_string(a));
  CsvWriter out(path, header);
  for (const auto& m : maps) {
    for (const auto& b : m.branches) {
      out.cells(m.x).cells(b.y).cell(b.tau).cells(b.beta);
      out.end_row();
    }
  }
  out.close();
}

void write_flow(Pipeline& p, const std::string& path) {
  const FlowNetwork& net = p.network();
  const FlowSolution& fl = p.flow();
  auto header = std::vector<std::string>{"t"};
  for (auto& n : axis_names("q", net.lattice.dimension())) header.push_back(n);
  header.insert(header.end(), {"A_index", "mass"});
  CsvWriter out(path, header);
  const std::size_t n = net.space_nodes();
  const std::size_t controls = net.controls();
  for (std::size_t i = 0; i < fl.move_flow.size(); ++i) {
    if (fl.move_flow[i] == 0) continue;
    const std::size_t a = i % controls;
    const std::size_t kn = i / controls;
    out.cell(net.lattice.time(static_cast<int>(kn / n))).cells(net.lattice.point(kn % n))
        .cell(static_cast<long long>(a)).cell(fl.move_mass(i));
    out.end_row();
  }
  out.close();
}

void write_stops(Pipeline& p, const std::string& path) {
  const FlowNetwork& net = p.network();
  auto header = std::vector<std::string>{"t"};
  for (auto& n : axis_names("q", net.lattice.dimension())) header.push_back(n);
  header.push_back("mass");
  CsvWriter out(path, header);
  for (const auto& s : stopping_distribution_profile(net, p.flow())) {
    out.cell(s.t).cells(s.q).cell(s.mass);
    out.end_row();
  }
  out.close();
}

std::vector<std::string> write_figures(Pipeline& p, const std::string& dir) {
  std::vector<std::string> files;
  const ValueField& f = p.field();
  const int dim = f.grid.dimension();
  {
    const std::string path = join_path(dir, "slices.csv");
    auto header = std::vector<std::string>{"t"};
    for (auto& n : axis_names("q", dim)) header.push_back(n);
    header.insert(header.end(), {"J", "psi"});
    CsvWriter out(path, header);
    constexpr int kSlices = 8;
    int previous = -1;
    for (int i = 0; i <= kSlices; ++i) {
      const int k = static_cast<int>(std::lround(static_cast<double>(i) * (f.valid_layers - 1) / kSlices));
      if (k == previous) continue;
      previous = k;
      for (std::size_t node = 0; node < f.nodes(); ++node) {
        out.cell(f.grid.time(k)).cells(f.grid.point(node)).cell(f.at(k, node)).cell(f.psi[node]);
        out.end_row();
      }
    }
    out.close();
    files.push_back(path);
  }
  if (p.scenario().pipeline.pontryagin && p.problem().time_class() != TimeClass::TS) {
    const std::string path = join_path(dir, "trajectories.csv");
    auto header = std::vector<std::string>{"atom", "branch", "t"};
    for (auto& n : axis_names("q", dim)) header.push_back(n);
    for (auto& n : axis_names("p", dim)) header.push_back(n);
    CsvWriter out(path, header);
    const auto& maps = p.monge();
    constexpr std::size_t kFan = 32;
    const std::size_t stride = std::max<std::size_t>(1, maps.size() / kFan);
    for (std::size_t m = 0; m < maps.size(); m += stride) {
      for (std::size_t b = 0; b < maps[m].branches.size(); ++b) {
        for (const auto& s : maps[m].branches[b].trajectory.samples) {
          out.cell(static_cast<long long>(m)).cell(static_cast<long long>(b)).cell(s.t)
              .cells(s.q).cells(s.p);
          out.end_row();
        }
      }
    }
    out.close();
    files.push_back(path);
  }
  return files;
}

ValueField read_field(Pipeline& p, const std::string& path) {
  const Lattice& grid = p.grid();
  const CsvTable table = read_csv(path);
  const int dim = grid.dimension();
  require(static_cast<int>(table.header.size()) == dim + 4, ErrorCode::Parse,
          path + ": expected columns t, q..., J, psi, contact");
  const std::size_t n = grid.node_count();
  require(table.rows.size() == n * static_cast<std::size_t>(grid.layers()), ErrorCode::Parse,
          path + ": row count does not match the scenario lattice");
  ValueField f{grid, p.problem().time_class(),
               p.scenario().pipeline.scheme.value_or(p.problem().controls().is_discrete()
                                                         ? Scheme::LatticeDP
                                                         : Scheme::LaxFriedrichs),
               {}, std::vector<double>(n), {}, 0.0, 0.0, grid.layers(), 0.0, 0.0};
  f.J.resize(table.rows.size());
  f.contact.resize(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const int k = static_cast<int>(i / n);
    const std::size_t node = i % n;
    const Vector q = grid.point(node);
    bool aligned = std::abs(row[0] - grid.time(k)) <= 1e-9 * (1 + grid.t_max());
    for (int a = 0; a < dim; ++a) {
      aligned = aligned && std::abs(row[static_cast<std::size_t>(1 + a)] - q[a]) <= 1e-9 * grid.dx();
    }
    require(aligned, ErrorCode::Parse,
            path + ": row " + std::to_string(i + 2) + " is not on the scenario lattice");
    f.J[i] = row[static_cast<std::size_t>(dim + 1)];
    if (k == 0) f.psi[node] = row[static_cast<std::size_t>(dim + 2)];
    f.contact[i] = row[static_cast<std::size_t>(dim + 3)] != 0.0;
  }
  double psi_max = 0.0;
  for (double v : f.psi) {
    if (std::isfinite(v)) psi_max = std::max(psi_max, std::abs(v));
  }
  f.eps_contact = p.scenario().tolerances.eps_contact.value_or(1e-9 * (1.0 + psi_max));
  f.eps_mono = p.scenario().tolerances.eps_mono.value_or(1e-9);
  return f;
}

void write_oracle_table(OracleCase c, const TimePenalty& g, const std::string& path, int points,
                        const std::vector<double>& times) {
  require_consistent(c, g);
  require(points >= 2, ErrorCode::InvalidArgument, "oracle table needs at least two points");
  std::vector<std::string> header{"z", "monge", "exit_time", "J0", "boundary", "psi"};
  for (double t : times) header.push_back("J_t" + format_double(t));
  CsvWriter out(path, header);
  const double nan = std::nan("");
  for (int i = 0; i < points; ++i) {
    const double z = -2.0 + 4.0 * i / (points - 1);
    out.cell(z);
    const bool source = std::abs(z) <= 0.5 && z != 0.0;
    out.cell(source ? oracle_monge(c, z) : nan);
    out.cell(source ? oracle_exit_time(c, z) : nan);
    out.cell(std::abs(z) <= 0.5 ? oracle_J0(c, g, z) : nan);
    out.cell(oracle_boundary(c, z));
    out.cell(oracle_psi(c, g, z));
    for (double t : times) {
      const auto pot = oracle_potentials(c, g, z, t);
      out.cell(pot.Jt ? *pot.Jt : nan);
    }
    out.end_row();
  }
  out.close();
}

}  // namespace freestop
