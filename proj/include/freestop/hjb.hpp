#pragma once

#include <freestop/control_problem.hpp>
#include <freestop/lattice.hpp>
#include <freestop/trajectory_cost.hpp>
#include <freestop/types.hpp>

#include <optional>
#include <vector>

namespace freestop {

enum class Scheme { LatticeDP, LaxFriedrichs };

const char* to_string(Scheme scheme) noexcept;

// J on a space-time grid with obstacle psi. psi may be -inf at nodes where
// stopping is not allowed; contact is only possible where psi is finite.
struct ValueField {
  Lattice grid;
  TimeClass time_class = TimeClass::TS;
  Scheme scheme = Scheme::LatticeDP;
  std::vector<double> J;        // J[k * nodes + node]
  std::vector<double> psi;      // per node
  std::vector<char> contact;    // same layout as J
  double eps_contact = 0.0;
  double eps_mono = 0.0;
  // Layers [0, valid_layers) are unaffected by the forced stop at t_max.
  // Equal to grid.layers() unless a horizon check trimmed it.
  int valid_layers = 0;
  double horizon_gap = 0.0;     // max |J^T(0) - J^2T(0)| when checked
  double horizon_tolerance = 0.0;

  std::size_t nodes() const noexcept { return grid.node_count(); }
  double at(int k, std::size_t node) const { return J[static_cast<std::size_t>(k) * nodes() + node]; }
  bool in_contact(int k, std::size_t node) const {
    return contact[static_cast<std::size_t>(k) * nodes() + node] != 0;
  }
  std::vector<double> layer(int k) const;

  // Multilinear interpolation in (t, q); throws OffLattice outside the grid.
  double interpolate(double t, const Vector& q) const;
  double interpolate_psi(const Vector& q) const;
};

struct QviOptions {
  std::optional<Scheme> scheme;     // default: DP for discrete controls, LF for the sphere
  double cfl = 0.5;
  bool horizon_check = true;        // applied to TD problems only
  std::optional<double> eps_horizon;
  // Overrides of the scheme's contact and monotonicity tolerances.
  std::optional<double> eps_contact;
  std::optional<double> eps_mono;
};

// Backward marching J(t - dt) = max(psi, step(J(t))) from J(t_max) = psi.
// Moves that leave the box are dropped (no inflow).
ValueField solve_qvi(const ControlProblem& problem, const Lattice& grid,
                     const std::vector<double>& psi, const QviOptions& options = {});

struct FreeBoundary {
  TimeClass time_class = TimeClass::TS;
  bool stationary = false;   // TS: boundary undefined, s = 0 everywhere
  std::vector<double> s;     // kInf when the node never stops in the valid window
};

// TC: first contact time; TD: last contact time inside the valid window.
// The forced contact on the terminal layer does not count.
FreeBoundary extract_free_boundary(const ValueField& field);

struct OptimizedPair {
  std::vector<double> psi_star;  // min over valid layers of J
  std::vector<double> phi_star;  // J(0, .)
};

OptimizedPair optimized_pair(const ValueField& field);

struct CheckReport {
  bool pass = true;
  double worst = 0.0;            // largest measured violation (>= 0)
  std::size_t checked = 0;
  std::size_t failures = 0;
};

// min (J - psi) >= -eps_contact over finite psi.
CheckReport obstacle_check(const ValueField& field);
// TC: J(k+1) <= J(k) + eps_mono; TD: reversed; TS: |J - psi| <= eps_mono.
CheckReport monotonicity_check(const ValueField& field);
// TC: contact at (k, q) implies contact at every later layer; TD: every
// earlier layer. Counted per node over the valid window.
CheckReport contact_closure_check(const ValueField& field);
// DP only: each node attains max(psi, best move) within round-off.
CheckReport complementarity_check(const ControlProblem& problem, const ValueField& field);

// Central-difference gradient at a node; one-sided at box edges.
Vector node_gradient(const Lattice& grid, const std::vector<double>& values, std::size_t node);

// Nodes whose one-sided slopes jump by more than 10 dx along some axis, and
// their neighbours along that axis.
std::vector<char> kink_mask(const Lattice& grid, const std::vector<double>& values);

struct BoundaryResidual {
  std::vector<double> residual;   // NaN where not evaluated
  std::vector<std::size_t> excluded_kinks;
  double max_abs = 0.0;
  std::size_t evaluated = 0;
};

// H(s(q), q, grad psi(q)) at nodes with finite s, away from kinks and edges.
// TS: reports -H(q, grad psi), which must be >= -tol (supersolution).
BoundaryResidual boundary_equation_residual(const ControlProblem& problem,
                                            const ValueField& field, const FreeBoundary& boundary,
                                            const std::vector<char>* nodes_of_interest = nullptr);

// Classical backward solution of dI/dt + g*(|grad I|) = 0 on [0, 1] with
// I(1) = psi, Lax-Friedrichs with alpha = g*'(max |grad psi|). Uses the
// grid's dx, dt and box; throws CflViolation when dt > cfl dx / alpha.
ValueField solve_fixed_horizon(const ControlProblem& problem, const Lattice& grid,
                               const std::vector<double>& psi, double cfl = 0.5);

struct PathInequality {
  bool holds = true;
  double worst_excess = -kInf;  // max over sub-segments of LHS - RHS
};

// J(t2, g(t2)) - J(t1, g(t1)) <= sum K dt over every sub-segment of a lattice
// path starting at layer start_layer.
PathInequality path_inequality_check(const ControlProblem& problem, const ValueField& field,
                                     const LatticePath& path, int start_layer = 0,
                                     double tol = 1e-9);

}  // namespace freestop
