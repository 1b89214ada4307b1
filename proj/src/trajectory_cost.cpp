#include <freestop/error.hpp>
#include <freestop/parallel.hpp>
#include <freestop/trajectory_cost.hpp>

#include <cmath>
#include <sstream>

namespace freestop {

namespace {

std::size_t node_or_fail(const Lattice& lattice, const Vector& p, const char* what) {
  auto node = lattice.exact_node(p);
  if (!node) {
    std::ostringstream msg;
    msg << what << " is not a lattice node";
    fail(ErrorCode::OffLattice, msg.str());
  }
  return *node;
}

[[noreturn]] void unreachable(const Vector& x, const Vector& y) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "unreachable: target " << y.transpose() << " cannot be reached from " << x.transpose()
      << " within t_max";
  fail(ErrorCode::Unreachable, msg.str());
}

// Running cost per (layer, node, control), laid out [k][node][a].
std::vector<double> arc_costs(const ControlProblem& problem, const Lattice& lattice,
                              const ControlShifts& shifts) {
  const std::size_t n = lattice.node_count();
  const std::size_t na = shifts.size();
  std::vector<double> out(static_cast<std::size_t>(lattice.steps()) * n * na);
  parallel_for(static_cast<std::size_t>(lattice.steps()), [&](std::size_t k) {
    const double t = lattice.time(static_cast<int>(k));
    for (std::size_t node = 0; node < n; ++node) {
      const Vector q = lattice.point(node);
      for (std::size_t a = 0; a < na; ++a) {
        out[(k * n + node) * na + a] = problem.running_cost(t, q, shifts.controls[a]) * lattice.dt();
      }
    }
  });
  return out;
}

}  // namespace

bool has_analytic_cost(const ControlProblem& problem) {
  if (!problem.time_penalty()) return false;
  if (!problem.controls().is_discrete()) return problem.sphere_structure();
  if (problem.dimension() != 1) return false;
  bool plus = false;
  bool minus = false;
  for (const auto& a : problem.controls().vectors()) {
    if (std::abs(a[0]) > 1.0) return false;
    plus = plus || a[0] == 1.0;
    minus = minus || a[0] == -1.0;
  }
  return plus && minus;
}

double point_cost_analytic(const ControlProblem& problem, const Vector& x, const Vector& y) {
  require(has_analytic_cost(problem), ErrorCode::Unsupported,
          "analytic cost requires a registered speed-limited family");
  require(x.size() == problem.dimension() && y.size() == problem.dimension(),
          ErrorCode::DimensionMismatch, "point dimension mismatch");
  return problem.time_penalty()->value((y - x).norm());
}

double lattice_path_cost(const ControlProblem& problem, const Lattice& lattice,
                         const ControlShifts& shifts, const LatticePath& path) {
  require(path.nodes.size() == path.controls.size() + 1, ErrorCode::InvalidArgument,
          "path has inconsistent node and control counts");
  double cost = 0.0;
  for (std::size_t k = 0; k < path.controls.size(); ++k) {
    const std::size_t a = path.controls[k];
    require(a < shifts.size(), ErrorCode::InvalidArgument, "control index out of range");
    auto next = lattice.shifted(path.nodes[k], shifts.shifts[a]);
    require(next && *next == path.nodes[k + 1], ErrorCode::OffLattice,
            "path step does not follow its control");
    cost += problem.running_cost(lattice.time(static_cast<int>(k)), lattice.point(path.nodes[k]),
                                 shifts.controls[a]) *
            lattice.dt();
  }
  return cost;
}

std::vector<double> lattice_costs_from(const ControlProblem& problem, const Lattice& lattice,
                                       const ControlShifts& shifts, const MoveTable& moves,
                                       std::size_t source) {
  const std::size_t n = lattice.node_count();
  const std::size_t na = shifts.size();
  std::vector<double> layer(n, kInf);
  std::vector<double> next(n);
  std::vector<double> best(n, kInf);
  layer[source] = 0.0;
  best[source] = 0.0;
  std::vector<Vector> points(n);
  for (std::size_t node = 0; node < n; ++node) points[node] = lattice.point(node);
  for (int k = 0; k < lattice.steps(); ++k) {
    std::fill(next.begin(), next.end(), kInf);
    const double t = lattice.time(k);
    for (std::size_t node = 0; node < n; ++node) {
      if (layer[node] == kInf) continue;
      for (std::size_t a = 0; a < na; ++a) {
        const std::size_t to = moves.next(node, a);
        if (to == MoveTable::npos) continue;
        const double c =
            layer[node] + problem.running_cost(t, points[node], shifts.controls[a]) * lattice.dt();
        if (c < next[to]) next[to] = c;
      }
    }
    layer.swap(next);
    for (std::size_t node = 0; node < n; ++node) best[node] = std::min(best[node], layer[node]);
  }
  return best;
}

PointCost point_cost_lattice(const ControlProblem& problem, const Lattice& lattice,
                             const Vector& x, const Vector& y) {
  const std::size_t xs = node_or_fail(lattice, x, "source");
  const std::size_t yt = node_or_fail(lattice, y, "target");
  const ControlShifts shifts = control_shifts(problem, lattice);
  const MoveTable moves = move_table(lattice, shifts);
  const std::vector<double> costs = arc_costs(problem, lattice, shifts);
  const std::size_t n = lattice.node_count();
  const std::size_t na = shifts.size();
  const auto steps = static_cast<std::size_t>(lattice.steps());

  // Cost-to-go G[k][q] of reaching y from (k, q), stopping allowed on arrival.
  std::vector<double> go((steps + 1) * n, kInf);
  go[steps * n + yt] = 0.0;
  for (std::size_t k = steps; k-- > 0;) {
    for (std::size_t node = 0; node < n; ++node) {
      double v = node == yt ? 0.0 : kInf;
      for (std::size_t a = 0; a < na; ++a) {
        const std::size_t to = moves.next(node, a);
        if (to == MoveTable::npos) continue;
        const double tail = go[(k + 1) * n + to];
        if (tail == kInf) continue;
        v = std::min(v, costs[(k * n + node) * na + a] + tail);
      }
      go[k * n + node] = v;
    }
  }
  if (go[xs] == kInf) unreachable(x, y);

  PointCost out;
  out.cost = go[xs];
  out.path.nodes.push_back(xs);
  std::size_t node = xs;
  for (std::size_t k = 0; k < steps; ++k) {
    const double here = go[k * n + node];
    if (node == yt) break;  // K >= 0, so stopping on arrival is optimal
    const double tol = 1e-12 * (1.0 + std::abs(here));
    std::size_t chosen = na;
    for (std::size_t a = 0; a < na && chosen == na; ++a) {
      const std::size_t to = moves.next(node, a);
      if (to == MoveTable::npos) continue;
      const double tail = go[(k + 1) * n + to];
      if (tail != kInf && costs[(k * n + node) * na + a] + tail <= here + tol) chosen = a;
    }
    require(chosen < na, ErrorCode::Internal, "optimal path reconstruction failed");
    node = moves.next(node, chosen);
    out.path.controls.push_back(chosen);
    out.path.nodes.push_back(node);
  }
  require(node == yt, ErrorCode::Internal, "optimal path does not end at the target");
  out.path.end_time = lattice.time(static_cast<int>(out.path.controls.size()));
  out.path.cost = lattice_path_cost(problem, lattice, shifts, out.path);
  return out;
}

Matrix cost_matrix_lattice(const ControlProblem& problem, const Lattice& lattice,
                           const std::vector<Vector>& sources, const std::vector<Vector>& targets) {
  std::vector<std::size_t> src(sources.size());
  std::vector<std::size_t> dst(targets.size());
  for (std::size_t i = 0; i < sources.size(); ++i) src[i] = node_or_fail(lattice, sources[i], "source");
  for (std::size_t j = 0; j < targets.size(); ++j) dst[j] = node_or_fail(lattice, targets[j], "target");
  const ControlShifts shifts = control_shifts(problem, lattice);
  const MoveTable moves = move_table(lattice, shifts);
  Matrix c(static_cast<Eigen::Index>(sources.size()), static_cast<Eigen::Index>(targets.size()));
  parallel_for(sources.size(), [&](std::size_t i) {
    const std::vector<double> best = lattice_costs_from(problem, lattice, shifts, moves, src[i]);
    for (std::size_t j = 0; j < targets.size(); ++j) {
      if (best[dst[j]] == kInf) unreachable(sources[i], targets[j]);
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = best[dst[j]];
    }
  });
  return c;
}

Matrix cost_matrix_analytic(const ControlProblem& problem, const std::vector<Vector>& sources,
                            const std::vector<Vector>& targets) {
  Matrix c(static_cast<Eigen::Index>(sources.size()), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (std::size_t j = 0; j < targets.size(); ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          point_cost_analytic(problem, sources[i], targets[j]);
    }
  }
  return c;
}

}  // namespace freestop
