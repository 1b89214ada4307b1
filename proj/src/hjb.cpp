#include <freestop/error.hpp>
#include <freestop/hjb.hpp>
#include <freestop/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace freestop {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double max_abs_finite(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) m = std::max(m, std::abs(x));
  }
  return m;
}

bool on_edge(const Lattice& grid, std::size_t node) {
  const auto idx = grid.index_of(node);
  for (int axis = 0; axis < grid.dimension(); ++axis) {
    if (idx[static_cast<std::size_t>(axis)] == 0 ||
        idx[static_cast<std::size_t>(axis)] == grid.extent(axis) - 1) {
      return true;
    }
  }
  return false;
}

// One-sided slopes along an axis; a missing side copies the other.
struct Slopes {
  double plus;
  double minus;
};

Slopes axis_slopes(const Lattice& grid, const double* values, std::size_t node, int axis,
                   int index) {
  const std::ptrdiff_t stride = grid.stride(axis);
  const bool has_lo = index > 0;
  const bool has_hi = index < grid.extent(axis) - 1;
  const double here = values[node];
  double plus = kNaN;
  double minus = kNaN;
  if (has_hi) plus = (values[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + stride)] - here) / grid.dx();
  if (has_lo) minus = (here - values[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) - stride)]) / grid.dx();
  if (!has_hi) plus = minus;
  if (!has_lo) minus = plus;
  return {plus, minus};
}

void step_dp(const ControlProblem& problem, const Lattice& grid, const ControlShifts& shifts,
             const MoveTable& moves, const std::vector<Vector>& points, const double* next,
             double* out, const std::vector<double>& psi, int k) {
  const double t = grid.time(k);
  const std::size_t na = shifts.size();
  parallel_for(grid.node_count(), [&](std::size_t node) {
    double v = psi[node];
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t to = moves.next(node, a);
      if (to == MoveTable::npos) continue;
      const double cand = next[to] - problem.running_cost(t, points[node], shifts.controls[a]) * grid.dt();
      if (cand > v) v = cand;
    }
    out[node] = v;
  });
}

template <class Ham>
void step_lf(const Lattice& grid, double alpha, const std::vector<Vector>& points,
             const double* next, double* out, const std::vector<double>* psi, Ham&& ham) {
  const int n = grid.dimension();
  parallel_for(grid.node_count(), [&](std::size_t node) {
    const auto idx = grid.index_of(node);
    Vector pbar(n);
    double viscosity = 0.0;
    for (int axis = 0; axis < n; ++axis) {
      const Slopes s = axis_slopes(grid, next, node, axis, idx[static_cast<std::size_t>(axis)]);
      pbar[axis] = 0.5 * (s.plus + s.minus);
      viscosity += s.plus - s.minus;
    }
    double v = next[node] + grid.dt() * (ham(points[node], pbar) + 0.5 * alpha * viscosity);
    if (psi) v = std::max(v, (*psi)[node]);
    out[node] = v;
  });
}

void mark_contact(ValueField& f) {
  const std::size_t n = f.nodes();
  f.contact.assign(f.J.size(), 0);
  for (int k = 0; k < f.grid.layers(); ++k) {
    for (std::size_t node = 0; node < n; ++node) {
      const std::size_t i = static_cast<std::size_t>(k) * n + node;
      f.contact[i] = std::isfinite(f.psi[node]) && f.J[i] - f.psi[node] <= f.eps_contact;
    }
  }
}

ValueField march(const ControlProblem& problem, const Lattice& grid, const std::vector<double>& psi,
                 Scheme scheme, double cfl) {
  require(psi.size() == grid.node_count(), ErrorCode::DimensionMismatch,
          "obstacle size does not match the grid");
  require(problem.dimension() == grid.dimension(), ErrorCode::DimensionMismatch,
          "problem and grid dimensions differ");
  for (double v : psi) {
    require(!std::isnan(v) && v != kInf, ErrorCode::InvalidArgument,
            "obstacle values must be finite or -inf");
  }
  ValueField f{grid, problem.time_class(), scheme, {}, psi, {}, 0, 0, grid.layers(), 0, 0};
  const std::size_t n = grid.node_count();
  f.J.assign(static_cast<std::size_t>(grid.layers()) * n, 0.0);
  std::copy(psi.begin(), psi.end(), f.J.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(grid.steps()) * n));
  std::vector<Vector> points(n);
  for (std::size_t node = 0; node < n; ++node) points[node] = grid.point(node);

  if (scheme == Scheme::LatticeDP) {
    const ControlShifts shifts = control_shifts(problem, grid);
    const MoveTable moves = move_table(grid, shifts);
    for (int k = grid.steps() - 1; k >= 0; --k) {
      step_dp(problem, grid, shifts, moves, points, &f.J[static_cast<std::size_t>(k + 1) * n],
              &f.J[static_cast<std::size_t>(k) * n], psi, k);
    }
    f.eps_contact = 1e-9 * (1.0 + max_abs_finite(psi));
    f.eps_mono = 1e-9;
  } else {
    for (double v : psi) {
      require(std::isfinite(v), ErrorCode::InvalidArgument,
              "the Lax-Friedrichs scheme needs a finite obstacle");
    }
    const double alpha = problem.speed_bound();
    const double limit = std::min(cfl * grid.dx() / alpha, grid.dx() / (grid.dimension() * alpha));
    if (grid.dt() > limit * (1 + 1e-12)) {
      std::ostringstream msg;
      msg << "CFL violation: dt = " << grid.dt() << " exceeds " << limit;
      fail(ErrorCode::CflViolation, msg.str());
    }
    for (int k = grid.steps() - 1; k >= 0; --k) {
      const double t = grid.time(k);
      step_lf(grid, alpha, points, &f.J[static_cast<std::size_t>(k + 1) * n],
              &f.J[static_cast<std::size_t>(k) * n], &psi,
              [&](const Vector& q, const Vector& p) { return hamiltonian(problem, t, q, p); });
    }
    const double max_k = problem.max_running_cost(grid.t_max());
    f.eps_contact = 2.0 * grid.dt() * max_k + 1e-12 * (1.0 + max_abs_finite(psi));
    f.eps_mono = 5.0 * grid.dt() * max_k + 1e-12 * (1.0 + max_abs_finite(psi));
  }

  mark_contact(f);
  return f;
}

}  // namespace

const char* to_string(Scheme scheme) noexcept {
  return scheme == Scheme::LatticeDP ? "lattice_dp" : "lax_friedrichs";
}

std::vector<double> ValueField::layer(int k) const {
  require(k >= 0 && k < grid.layers(), ErrorCode::InvalidArgument, "layer out of range");
  const auto begin = J.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(k) * nodes());
  return {begin, begin + static_cast<std::ptrdiff_t>(nodes())};
}

namespace {

// Multilinear interpolation of one layer-sized array.
double interpolate_space(const Lattice& grid, const double* values, const Vector& q) {
  const int n = grid.dimension();
  require(q.size() == n, ErrorCode::DimensionMismatch, "point dimension mismatch");
  std::vector<int> base(static_cast<std::size_t>(n));
  std::vector<double> frac(static_cast<std::size_t>(n));
  for (int axis = 0; axis < n; ++axis) {
    const double r = (q[axis] - grid.lower()[axis]) / grid.dx();
    const int extent = grid.extent(axis);
    if (r < -1e-9 || r > extent - 1 + 1e-9) fail(ErrorCode::OffLattice, "point lies outside the grid");
    int i = static_cast<int>(std::floor(r));
    i = std::clamp(i, 0, std::max(0, extent - 2));
    base[static_cast<std::size_t>(axis)] = i;
    frac[static_cast<std::size_t>(axis)] = extent == 1 ? 0.0 : std::clamp(r - i, 0.0, 1.0);
  }
  double acc = 0.0;
  for (unsigned corner = 0; corner < (1u << n); ++corner) {
    double w = 1.0;
    std::vector<int> idx = base;
    for (int axis = 0; axis < n; ++axis) {
      const bool hi = (corner >> axis) & 1u;
      const double fa = frac[static_cast<std::size_t>(axis)];
      w *= hi ? fa : 1.0 - fa;
      if (hi) idx[static_cast<std::size_t>(axis)] += 1;
    }
    if (w == 0.0) continue;
    const double v = values[grid.node_of(idx)];
    if (v == -kInf) return -kInf;
    acc += w * v;
  }
  return acc;
}

}  // namespace

double ValueField::interpolate(double t, const Vector& q) const {
  const double r = t / grid.dt();
  if (r < -1e-9 || r > grid.steps() + 1e-9) fail(ErrorCode::OffLattice, "time lies outside the grid");
  int k = std::clamp(static_cast<int>(std::floor(r)), 0, std::max(0, grid.steps() - 1));
  const double w = grid.steps() == 0 ? 0.0 : std::clamp(r - k, 0.0, 1.0);
  const double lo = interpolate_space(grid, &J[static_cast<std::size_t>(k) * nodes()], q);
  if (w == 0.0) return lo;
  const double hi = interpolate_space(grid, &J[static_cast<std::size_t>(k + 1) * nodes()], q);
  if (w == 1.0) return hi;
  return (1 - w) * lo + w * hi;
}

double ValueField::interpolate_psi(const Vector& q) const {
  return interpolate_space(grid, psi.data(), q);
}

ValueField solve_qvi(const ControlProblem& problem, const Lattice& grid,
                     const std::vector<double>& psi, const QviOptions& options) {
  const Scheme scheme = options.scheme.value_or(
      problem.controls().is_discrete() ? Scheme::LatticeDP : Scheme::LaxFriedrichs);
  if (scheme == Scheme::LatticeDP) {
    require(problem.controls().is_discrete(), ErrorCode::Unsupported,
            "the lattice scheme needs a discrete control set");
  }
  ValueField field = march(problem, grid, psi, scheme, options.cfl);
  if (options.eps_contact || options.eps_mono) {
    field.eps_contact = options.eps_contact.value_or(field.eps_contact);
    field.eps_mono = options.eps_mono.value_or(field.eps_mono);
    mark_contact(field);
  }
  if (problem.time_class() != TimeClass::TD || !options.horizon_check) return field;

  const ValueField longer = march(problem, grid.with_horizon(2.0 * grid.t_max()), psi, scheme, options.cfl);
  const double eps = options.eps_horizon.value_or(1e-6 * (1.0 + max_abs_finite(psi)));
  const std::size_t n = grid.node_count();
  auto layer_gap = [&](int k) {
    double gap = 0.0;
    for (std::size_t node = 0; node < n; ++node) {
      const double a = field.at(k, node);
      const double b = longer.at(k, node);
      // Nodes that cannot reach a finite obstacle within t_max are outside
      // the domain the field describes.
      if (a == b || a == -kInf) continue;
      gap = std::max(gap, std::abs(a - b));
    }
    return gap;
  };
  field.horizon_gap = layer_gap(0);
  field.horizon_tolerance = eps;
  if (!(field.horizon_gap <= eps)) {
    std::ostringstream msg;
    msg << "horizon check failed: J(0) changes by " << field.horizon_gap
        << " when t_max is doubled (tolerance " << eps << ")";
    fail(ErrorCode::HorizonCheck, msg.str());
  }
  int valid = 1;
  while (valid < grid.layers() && layer_gap(valid) <= eps) ++valid;
  field.valid_layers = valid;
  return field;
}

FreeBoundary extract_free_boundary(const ValueField& field) {
  FreeBoundary b;
  b.time_class = field.time_class;
  const std::size_t n = field.nodes();
  if (field.time_class == TimeClass::TS) {
    b.stationary = true;
    b.s.assign(n, 0.0);
    return b;
  }
  b.s.assign(n, kInf);
  const int last = std::min(field.valid_layers, field.grid.steps());  // exclude forced terminal contact
  for (std::size_t node = 0; node < n; ++node) {
    if (field.time_class == TimeClass::TC) {
      for (int k = 0; k < last; ++k) {
        if (field.in_contact(k, node)) {
          b.s[node] = field.grid.time(k);
          break;
        }
      }
    } else {
      for (int k = last - 1; k >= 0; --k) {
        if (field.in_contact(k, node)) {
          b.s[node] = field.grid.time(k);
          break;
        }
      }
    }
  }
  return b;
}

OptimizedPair optimized_pair(const ValueField& field) {
  OptimizedPair out;
  const std::size_t n = field.nodes();
  out.phi_star = field.layer(0);
  out.psi_star.assign(n, kInf);
  for (int k = 0; k < field.valid_layers; ++k) {
    for (std::size_t node = 0; node < n; ++node) {
      out.psi_star[node] = std::min(out.psi_star[node], field.at(k, node));
    }
  }
  return out;
}

CheckReport obstacle_check(const ValueField& field) {
  CheckReport r;
  for (int k = 0; k < field.grid.layers(); ++k) {
    for (std::size_t node = 0; node < field.nodes(); ++node) {
      if (!std::isfinite(field.psi[node])) continue;
      ++r.checked;
      const double v = field.psi[node] - field.at(k, node);
      r.worst = std::max(r.worst, v);
      if (v > field.eps_contact) ++r.failures;
    }
  }
  r.pass = r.failures == 0;
  return r;
}

CheckReport monotonicity_check(const ValueField& field) {
  CheckReport r;
  const std::size_t n = field.nodes();
  const int layers = field.valid_layers;
  for (std::size_t node = 0; node < n; ++node) {
    if (field.time_class == TimeClass::TS) {
      for (int k = 0; k < layers; ++k) {
        const double v = std::abs(field.at(k, node) - field.psi[node]);
        if (!std::isfinite(field.psi[node])) continue;
        ++r.checked;
        r.worst = std::max(r.worst, v);
        if (v > field.eps_mono) ++r.failures;
      }
      continue;
    }
    for (int k = 0; k + 1 < layers; ++k) {
      const double a = field.at(k, node);
      const double b = field.at(k + 1, node);
      // -inf marks states with no admissible stop; J is undefined there.
      if (a == -kInf || b == -kInf) continue;
      ++r.checked;
      const double v = field.time_class == TimeClass::TC ? b - a : a - b;
      r.worst = std::max(r.worst, v);
      if (!(v <= field.eps_mono)) ++r.failures;
    }
  }
  r.pass = r.failures == 0;
  return r;
}

CheckReport contact_closure_check(const ValueField& field) {
  CheckReport r;
  const std::size_t n = field.nodes();
  const int layers = field.valid_layers;
  for (std::size_t node = 0; node < n; ++node) {
    ++r.checked;
    bool closed = true;
    if (field.time_class == TimeClass::TC) {
      bool seen = false;
      for (int k = 0; k < layers; ++k) {
        if (field.in_contact(k, node)) seen = true;
        else if (seen) closed = false;
      }
    } else if (field.time_class == TimeClass::TD) {
      bool seen = false;
      for (int k = layers - 1; k >= 0; --k) {
        if (field.in_contact(k, node)) seen = true;
        else if (seen) closed = false;
      }
    } else {
      for (int k = 0; k < layers; ++k) {
        if (std::isfinite(field.psi[node]) && !field.in_contact(k, node)) closed = false;
      }
    }
    if (!closed) ++r.failures;
  }
  r.worst = r.checked ? static_cast<double>(r.failures) / static_cast<double>(r.checked) : 0.0;
  r.pass = r.failures == 0;
  return r;
}

CheckReport complementarity_check(const ControlProblem& problem, const ValueField& field) {
  require(field.scheme == Scheme::LatticeDP, ErrorCode::Unsupported,
          "complementarity is exact only for the lattice scheme");
  CheckReport r;
  const Lattice& grid = field.grid;
  const ControlShifts shifts = control_shifts(problem, grid);
  const MoveTable moves = move_table(grid, shifts);
  const std::size_t n = grid.node_count();
  for (int k = 0; k < grid.steps(); ++k) {
    for (std::size_t node = 0; node < n; ++node) {
      const Vector q = grid.point(node);
      double best = -kInf;
      for (std::size_t a = 0; a < shifts.size(); ++a) {
        const std::size_t to = moves.next(node, a);
        if (to == MoveTable::npos) continue;
        best = std::max(best, field.at(k + 1, to) -
                                  problem.running_cost(grid.time(k), q, shifts.controls[a]) * grid.dt());
      }
      const double j = field.at(k, node);
      if (j == -kInf) continue;
      ++r.checked;
      // J - psi >= 0, J - best >= 0, and one of them vanishes.
      const double gap = std::min(j - field.psi[node], j - best);
      const double v = std::max({std::abs(gap), field.psi[node] - j, best - j});
      r.worst = std::max(r.worst, v);
      if (v > 1e-12 * (1.0 + std::abs(j))) ++r.failures;
    }
  }
  r.pass = r.failures == 0;
  return r;
}

Vector node_gradient(const Lattice& grid, const std::vector<double>& values, std::size_t node) {
  require(values.size() == grid.node_count(), ErrorCode::DimensionMismatch, "value size mismatch");
  const auto idx = grid.index_of(node);
  Vector g(grid.dimension());
  for (int axis = 0; axis < grid.dimension(); ++axis) {
    const Slopes s = axis_slopes(grid, values.data(), node, axis, idx[static_cast<std::size_t>(axis)]);
    g[axis] = 0.5 * (s.plus + s.minus);
  }
  return g;
}

std::vector<char> kink_mask(const Lattice& grid, const std::vector<double>& values) {
  require(values.size() == grid.node_count(), ErrorCode::DimensionMismatch, "value size mismatch");
  const std::size_t n = grid.node_count();
  std::vector<char> mask(n, 0);
  for (std::size_t node = 0; node < n; ++node) {
    const auto idx = grid.index_of(node);
    for (int axis = 0; axis < grid.dimension(); ++axis) {
      const int i = idx[static_cast<std::size_t>(axis)];
      if (i == 0 || i == grid.extent(axis) - 1) continue;
      const std::ptrdiff_t stride = grid.stride(axis);
      const double lo = values[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) - stride)];
      const double hi = values[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + stride)];
      const double mid = values[node];
      const bool finite = std::isfinite(lo) && std::isfinite(hi) && std::isfinite(mid);
      const double jump = finite ? std::abs((hi - mid) - (mid - lo)) / grid.dx() : kInf;
      if (jump > 10.0 * grid.dx()) {
        mask[node] = 1;
        mask[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) - stride)] = 1;
        mask[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + stride)] = 1;
      }
    }
  }
  return mask;
}

BoundaryResidual boundary_equation_residual(const ControlProblem& problem,
                                            const ValueField& field, const FreeBoundary& boundary,
                                            const std::vector<char>* nodes_of_interest) {
  const Lattice& grid = field.grid;
  const std::size_t n = grid.node_count();
  require(boundary.s.size() == n, ErrorCode::DimensionMismatch, "boundary size mismatch");
  BoundaryResidual out;
  out.residual.assign(n, kNaN);
  const std::vector<char> kinks = kink_mask(grid, field.psi);
  for (std::size_t node = 0; node < n; ++node) {
    if (nodes_of_interest && !(*nodes_of_interest)[node]) continue;
    if (!std::isfinite(field.psi[node]) || on_edge(grid, node)) continue;
    if (!boundary.stationary && !std::isfinite(boundary.s[node])) continue;
    if (kinks[node]) {
      out.excluded_kinks.push_back(node);
      continue;
    }
    const Vector q = grid.point(node);
    const Vector grad = node_gradient(grid, field.psi, node);
    const double h = hamiltonian(problem, boundary.stationary ? 0.0 : boundary.s[node], q, grad);
    ++out.evaluated;
    if (boundary.stationary) {
      out.residual[node] = -h;
      out.max_abs = std::max(out.max_abs, std::max(0.0, h));
    } else {
      out.residual[node] = h;
      out.max_abs = std::max(out.max_abs, std::abs(h));
    }
  }
  return out;
}

ValueField solve_fixed_horizon(const ControlProblem& problem, const Lattice& grid,
                               const std::vector<double>& psi, double cfl) {
  require(problem.time_penalty().has_value(), ErrorCode::Unsupported,
          "the fixed-horizon solver needs a registered time penalty");
  const TimePenalty& g = *problem.time_penalty();
  require(g.convex(), ErrorCode::Unsupported, "the fixed-horizon problem needs a convex g");
  const Lattice unit(grid.dx(), grid.dt(), 1.0, grid.lower(), grid.upper());
  require(psi.size() == unit.node_count(), ErrorCode::DimensionMismatch, "obstacle size mismatch");
  for (double v : psi) require(std::isfinite(v), ErrorCode::InvalidArgument, "terminal data must be finite");
  double max_grad = 0.0;
  for (std::size_t node = 0; node < unit.node_count(); ++node) {
    max_grad = std::max(max_grad, node_gradient(unit, psi, node).norm());
  }
  const double alpha = std::max(g.conjugate_derivative(max_grad), 1e-300);
  const double limit = std::min(cfl * unit.dx() / alpha, unit.dx() / (unit.dimension() * alpha));
  if (unit.dt() > limit * (1 + 1e-12)) {
    std::ostringstream msg;
    msg << "CFL violation: dt = " << unit.dt() << " exceeds " << limit
        << " for the fixed-horizon problem (alpha = " << alpha << ")";
    fail(ErrorCode::CflViolation, msg.str());
  }
  ValueField f{unit, TimeClass::TS, Scheme::LaxFriedrichs, {}, psi, {}, 0, 0, unit.layers(), 0, 0};
  const std::size_t n = unit.node_count();
  f.J.assign(static_cast<std::size_t>(unit.layers()) * n, 0.0);
  std::copy(psi.begin(), psi.end(), f.J.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(unit.steps()) * n));
  std::vector<Vector> points(n);
  for (std::size_t node = 0; node < n; ++node) points[node] = unit.point(node);
  for (int k = unit.steps() - 1; k >= 0; --k) {
    step_lf(unit, alpha, points, &f.J[static_cast<std::size_t>(k + 1) * n],
            &f.J[static_cast<std::size_t>(k) * n], nullptr,
            [&](const Vector&, const Vector& p) { return g.conjugate(p.norm()); });
  }
  f.contact.assign(f.J.size(), 0);
  return f;
}

PathInequality path_inequality_check(const ControlProblem& problem, const ValueField& field,
                                     const LatticePath& path, int start_layer, double tol) {
  require(path.nodes.size() == path.controls.size() + 1, ErrorCode::InvalidArgument,
          "path has inconsistent node and control counts");
  const Lattice& grid = field.grid;
  require(start_layer >= 0 && start_layer + static_cast<int>(path.steps()) <= grid.steps(),
          ErrorCode::OffLattice, "path leaves the time grid");
  const auto& controls = problem.controls().vectors();
  const ControlShifts shifts = control_shifts(problem, grid);
  // Prefix sums of the running cost.
  std::vector<double> prefix(path.nodes.size(), 0.0);
  for (std::size_t k = 0; k < path.steps(); ++k) {
    require(path.nodes[k] < grid.node_count(), ErrorCode::OffLattice, "path node off the grid");
    auto next = grid.shifted(path.nodes[k], shifts.shifts[path.controls[k]]);
    require(next && *next == path.nodes[k + 1], ErrorCode::OffLattice, "path step does not follow its control");
    const int layer = start_layer + static_cast<int>(k);
    prefix[k + 1] = prefix[k] + problem.running_cost(grid.time(layer), grid.point(path.nodes[k]),
                                                     controls[path.controls[k]]) *
                                    grid.dt();
  }
  PathInequality out;
  for (std::size_t a = 0; a < path.nodes.size(); ++a) {
    const double ja = field.at(start_layer + static_cast<int>(a), path.nodes[a]);
    for (std::size_t b = a + 1; b < path.nodes.size(); ++b) {
      const double jb = field.at(start_layer + static_cast<int>(b), path.nodes[b]);
      if (jb == -kInf) continue;
      const double excess = (jb - ja) - (prefix[b] - prefix[a]);
      out.worst_excess = std::max(out.worst_excess, excess);
      if (!(excess <= tol)) out.holds = false;
    }
  }
  return out;
}

}  // namespace freestop
