#include <freestop/error.hpp>
#include <freestop/pontryagin.hpp>
#include <freestop/parallel.hpp>

#include <algorithm>
#include <cmath>

namespace freestop {

namespace {

struct Derivative {
  Vector dq;
  Vector dp;
  Vector control;
  bool tie;
};

Derivative rhs(const ControlProblem& problem, double t, const Vector& q, const Vector& p) {
  ControlChoice choice = argmax_control(problem, t, q, p);
  Vector a;
  if (choice.whole_sphere) {
    a = Vector::Unit(problem.dimension(), 0);
  } else {
    a = choice.controls.front();
  }
  Derivative d;
  d.control = a;
  d.tie = choice.tie();
  d.dq = problem.velocity(q, a);
  d.dp = -(problem.velocity_jacobian(q, a).transpose() * p) + problem.cost_gradient(t, q, a);
  return d;
}

FlowSample sample(const ControlProblem& problem, double t, const Vector& q, const Vector& p) {
  const Derivative d = rhs(problem, t, q, p);
  return {t, q, p, d.control, d.tie};
}

// One midpoint step of length h (h may be negative).
std::pair<Vector, Vector> midpoint(const ControlProblem& problem, double t, const Vector& q,
                                   const Vector& p, double h, bool* tie) {
  const Derivative k1 = rhs(problem, t, q, p);
  const Vector qm = q + 0.5 * h * k1.dq;
  const Vector pm = p + 0.5 * h * k1.dp;
  const Derivative k2 = rhs(problem, t + 0.5 * h, qm, pm);
  if (tie) *tie = *tie || k1.tie || k2.tie;
  return {q + h * k2.dq, p + h * k2.dp};
}

}  // namespace

HamiltonianTrajectory integrate_flow(const ControlProblem& problem, double t1, double t2,
                                     const Vector& q, const Vector& beta, double step) {
  require(q.size() == problem.dimension() && beta.size() == problem.dimension(),
          ErrorCode::DimensionMismatch, "state or costate dimension mismatch");
  require(q.allFinite() && beta.allFinite() && std::isfinite(t1) && std::isfinite(t2),
          ErrorCode::InvalidArgument, "flow inputs must be finite");
  require(step > 0, ErrorCode::InvalidArgument, "flow step must be positive");
  HamiltonianTrajectory tr;
  tr.samples.push_back(sample(problem, t1, q, beta));
  tr.tie_flagged = tr.samples.back().tie;
  const double span = t2 - t1;
  const auto n = static_cast<long>(std::ceil(std::abs(span) / step - 1e-9));
  Vector qq = q;
  Vector pp = beta;
  for (long k = 0; k < n; ++k) {
    const double t = t1 + span * static_cast<double>(k) / static_cast<double>(n);
    const double h = span / static_cast<double>(n);
    std::tie(qq, pp) = midpoint(problem, t, qq, pp, h, &tr.tie_flagged);
    tr.samples.push_back(sample(problem, t1 + span * static_cast<double>(k + 1) / static_cast<double>(n), qq, pp));
    tr.tie_flagged = tr.tie_flagged || tr.samples.back().tie;
  }
  tr.end_time = t2;
  return tr;
}

namespace {

// Flow from (0, q, beta) until the Hamiltonian changes sign; returns the
// trajectory up to and including the crossing.
HamiltonianTrajectory flow_to_transversality(const ControlProblem& problem, const Vector& q,
                                             const Vector& beta, double t_max, double step) {
  require(problem.time_class() != TimeClass::TS, ErrorCode::Unsupported,
          "no transversality time: the Hamiltonian is constant along trajectories of a "
          "stationary problem");
  require(step > 0 && t_max > 0, ErrorCode::InvalidArgument, "bad flow horizon");
  HamiltonianTrajectory tr;
  tr.samples.push_back(sample(problem, 0.0, q, beta));
  tr.tie_flagged = tr.samples.back().tie;
  const double h0 = hamiltonian(problem, 0.0, q, beta);
  if (h0 == 0.0) return tr;
  const double sign0 = h0 > 0 ? 1.0 : -1.0;
  const auto n = static_cast<long>(std::ceil(t_max / step - 1e-9));
  const double h = t_max / static_cast<double>(n);
  Vector qq = q;
  Vector pp = beta;
  for (long k = 0; k < n; ++k) {
    const double t = h * static_cast<double>(k);
    auto [qn, pn] = midpoint(problem, t, qq, pp, h, &tr.tie_flagged);
    const double hn = hamiltonian(problem, t + h, qn, pn);
    if (hn * sign0 > 0) {
      qq = qn;
      pp = pn;
      tr.samples.push_back(sample(problem, t + h, qq, pp));
      continue;
    }
    // Bisect on the sub-step length from the last sample.
    double lo = 0.0;
    double hi = h;
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      auto [qm, pm] = midpoint(problem, t, qq, pp, mid, nullptr);
      if (hamiltonian(problem, t + mid, qm, pm) * sign0 > 0) lo = mid;
      else hi = mid;
    }
    const double tau = t + 0.5 * (lo + hi);
    auto [qe, pe] = midpoint(problem, t, qq, pp, tau - t, &tr.tie_flagged);
    tr.samples.push_back(sample(problem, tau, qe, pe));
    tr.end_time = tau;
    return tr;
  }
  fail(ErrorCode::Numeric, "no transversality time: the Hamiltonian keeps its sign up to t_max");
}

}  // namespace

double transversality_time(const ControlProblem& problem, const Vector& q, const Vector& beta,
                           double t_max, double step) {
  return flow_to_transversality(problem, q, beta, t_max, step).end_time;
}

MongeSolver::MongeSolver(const ControlProblem& problem, const ValueField& field)
    : problem_(problem), field_(field), j0_(field.layer(0)) {
  const Lattice& grid = field.grid;
  grad_.assign(static_cast<std::size_t>(grid.dimension()), std::vector<double>(grid.node_count()));
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    const Vector g = node_gradient(grid, j0_, node);
    for (int axis = 0; axis < grid.dimension(); ++axis) grad_[static_cast<std::size_t>(axis)][node] = g[axis];
  }
  kinks_ = kink_mask(grid, j0_);
}

namespace {

struct Cell {
  std::vector<int> base;
  std::vector<double> frac;
};

Cell enclosing_cell(const Lattice& grid, const Vector& x) {
  Cell c;
  for (int axis = 0; axis < grid.dimension(); ++axis) {
    const double r = (x[axis] - grid.lower()[axis]) / grid.dx();
    if (r < -1e-9 || r > grid.extent(axis) - 1 + 1e-9) fail(ErrorCode::OffLattice, "atom lies outside the grid");
    const int i = std::clamp(static_cast<int>(std::floor(r)), 0, std::max(0, grid.extent(axis) - 2));
    c.base.push_back(i);
    c.frac.push_back(std::clamp(r - i, 0.0, 1.0));
  }
  return c;
}

}  // namespace

Vector MongeSolver::gradient(const Vector& x) const {
  const Lattice& grid = field_.grid;
  const Cell cell = enclosing_cell(grid, x);
  const int n = grid.dimension();
  Vector g = Vector::Zero(n);
  for (unsigned corner = 0; corner < (1u << n); ++corner) {
    double w = 1.0;
    std::vector<int> idx = cell.base;
    for (int axis = 0; axis < n; ++axis) {
      const bool hi = (corner >> axis) & 1u;
      w *= hi ? cell.frac[static_cast<std::size_t>(axis)] : 1.0 - cell.frac[static_cast<std::size_t>(axis)];
      if (hi) idx[static_cast<std::size_t>(axis)] += 1;
    }
    if (w == 0.0) continue;
    const std::size_t node = grid.node_of(idx);
    for (int axis = 0; axis < n; ++axis) g[axis] += w * grad_[static_cast<std::size_t>(axis)][node];
  }
  require(g.allFinite(), ErrorCode::InvalidArgument,
          "J(0, .) is not finite around the atom; no gradient available");
  return g;
}

MongeResult MongeSolver::map(const Vector& x) const {
  const Lattice& grid = field_.grid;
  MongeResult out;
  out.x = x;
  const Cell cell = enclosing_cell(grid, x);
  std::vector<Vector> betas;
  bool near_kink = false;
  {
    const int n = grid.dimension();
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
      std::vector<int> idx = cell.base;
      for (int axis = 0; axis < n; ++axis) {
        if ((corner >> axis) & 1u) idx[static_cast<std::size_t>(axis)] += 1;
      }
      near_kink = near_kink || kinks_[grid.node_of(idx)];
    }
  }
  if (near_kink && grid.dimension() == 1) {
    // Left branch: slope left of the cell's lower node; right branch: slope
    // right of its upper node.
    const int i = cell.base[0];
    const int last = grid.extent(0) - 1;
    auto slope = [&](int a, int b) { return (j0_[static_cast<std::size_t>(b)] - j0_[static_cast<std::size_t>(a)]) / grid.dx(); };
    const double left = i > 0 ? slope(i - 1, i) : slope(i, i + 1);
    const double right = i + 1 < last ? slope(i + 1, i + 2) : slope(i, i + 1);
    require(std::isfinite(left) && std::isfinite(right), ErrorCode::InvalidArgument,
            "J(0, .) is not finite around the atom; no gradient available");
    betas.push_back(Vector::Constant(1, left));
    betas.push_back(Vector::Constant(1, right));
    out.unique = false;
  } else {
    betas.push_back(gradient(x));
    out.unique = !near_kink;
  }
  for (const auto& beta : betas) {
    MongeBranch b;
    b.beta = beta;
    b.trajectory = flow_to_transversality(problem_, x, beta, field_.grid.t_max(), field_.grid.dt());
    b.tau = b.trajectory.end_time;
    b.y = b.trajectory.back().q;
    out.branches.push_back(std::move(b));
  }
  return out;
}

std::vector<MongeResult> MongeSolver::map_all(const std::vector<Vector>& atoms) const {
  std::vector<MongeResult> out(atoms.size());
  parallel_for(atoms.size(), [&](std::size_t i) { out[i] = map(atoms[i]); });
  return out;
}

MongeResult monge_map(const ControlProblem& problem, const ValueField& field, const Vector& x) {
  return MongeSolver(problem, field).map(x);
}

MaximumPrincipleReport maximum_principle_audit(const ControlProblem& problem,
                                               const HamiltonianTrajectory& trajectory) {
  MaximumPrincipleReport r;
  for (const auto& s : trajectory.samples) {
    const double h = hamiltonian(problem, s.t, s.q, s.p);
    const double realized = s.p.dot(problem.velocity(s.q, s.control)) - problem.running_cost(s.t, s.q, s.control);
    r.max_residual = std::max(r.max_residual, std::abs(h - realized));
    r.hamiltonian_profile.push_back(h);
  }
  bool up = true;
  bool down = true;
  bool flat = true;
  const auto& hp = r.hamiltonian_profile;
  for (std::size_t k = 1; k < hp.size(); ++k) {
    // Consecutive samples closer than the bisection floor in time are not compared.
    if (std::abs(trajectory.samples[k].t - trajectory.samples[k - 1].t) < 1e-9) continue;
    if (!(hp[k] > hp[k - 1])) up = false;
    if (!(hp[k] < hp[k - 1])) down = false;
    if (hp[k] != hp[k - 1]) flat = false;
  }
  const bool forward = trajectory.samples.size() < 2 || trajectory.samples.back().t >= trajectory.samples.front().t;
  if (!forward) std::swap(up, down);
  if (hp.size() < 2) r.direction = "constant";
  else if (flat) r.direction = "constant";
  else if (up) r.direction = "increasing";
  else if (down) r.direction = "decreasing";
  else r.direction = "mixed";
  switch (problem.time_class()) {
    case TimeClass::TC: r.matches_time_class = r.direction == "decreasing"; break;
    case TimeClass::TD: r.matches_time_class = r.direction == "increasing"; break;
    case TimeClass::TS: r.matches_time_class = r.direction == "constant"; break;
  }
  return r;
}

EndpointContact endpoint_contact_check(const ValueField& field, const Vector& y, double tau) {
  const Lattice& grid = field.grid;
  EndpointContact out;
  const Cell cell = enclosing_cell(grid, y);
  const double r = std::clamp(tau / grid.dt(), 0.0, static_cast<double>(grid.steps()));
  const int k = std::clamp(static_cast<int>(std::floor(r)), 0, std::max(0, grid.steps() - 1));
  const double wt = grid.steps() > 0 ? r - k : 0.0;
  // Corners with psi = -inf are states where stopping is not allowed; the
  // gap is interpolated over the stoppable corners only.
  double weighted = 0.0;
  double weight = 0.0;
  double lo = kInf;
  double hi = -kInf;
  const int n = grid.dimension();
  for (int dk = 0; dk <= 1; ++dk) {
    const int layer = std::min(k + dk, grid.steps());
    const double w_time = dk ? wt : 1.0 - wt;
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
      std::vector<int> idx = cell.base;
      double w = w_time;
      for (int axis = 0; axis < n; ++axis) {
        const auto a = static_cast<std::size_t>(axis);
        const bool up = (corner >> axis) & 1u;
        if (up) idx[a] += 1;
        w *= up ? cell.frac[a] : 1.0 - cell.frac[a];
      }
      const std::size_t node = grid.node_of(idx);
      if (!std::isfinite(field.psi[node])) continue;
      const double d = field.at(layer, node) - field.psi[node];
      weighted += w * d;
      weight += w;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (!(lo <= hi)) {
    out.gap = kInf;
    out.tolerance = field.eps_contact;
    out.pass = false;
    return out;
  }
  out.gap = weight > 0 ? std::abs(weighted / weight) : std::abs(lo);
  out.tolerance = field.eps_contact + (hi - lo);
  out.pass = out.gap <= out.tolerance;
  return out;
}

}  // namespace freestop
