#pragma once

#include <freestop/control_problem.hpp>
#include <freestop/lattice.hpp>
#include <freestop/types.hpp>

#include <cstddef>
#include <vector>

namespace freestop {

// Controlled lattice path: states[k] at time k * dt, controls[k] taken on
// [k dt, (k+1) dt). states.size() == controls.size() + 1.
struct LatticePath {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> controls;  // indices into the discrete control set
  double end_time = 0.0;
  double cost = 0.0;

  std::size_t steps() const noexcept { return controls.size(); }
};

struct PointCost {
  double cost = 0.0;
  LatticePath path;
};

// g(|y - x|) for the speed-limited family with the unit sphere, or with
// controls {+1, -1} in one dimension.
double point_cost_analytic(const ControlProblem& problem, const Vector& x, const Vector& y);

bool has_analytic_cost(const ControlProblem& problem);

// Left-endpoint lattice cost of the best path from (0, x) to (t, y) over
// t <= t_max, with the lexicographically smallest optimal control sequence
// (stopping counts as the smallest continuation). x and y must be nodes.
PointCost point_cost_lattice(const ControlProblem& problem, const Lattice& lattice,
                             const Vector& x, const Vector& y);

// Cost of a given path evaluated with the left-endpoint rule.
double lattice_path_cost(const ControlProblem& problem, const Lattice& lattice,
                         const ControlShifts& shifts, const LatticePath& path);

// Minimal lattice cost from the source node to every node, minimized over
// arrival times; kInf where unreachable within t_max.
std::vector<double> lattice_costs_from(const ControlProblem& problem, const Lattice& lattice,
                                       const ControlShifts& shifts, const MoveTable& moves,
                                       std::size_t source);

// Lattice costs for every (source, target) pair; one forward sweep per source.
Matrix cost_matrix_lattice(const ControlProblem& problem, const Lattice& lattice,
                           const std::vector<Vector>& sources, const std::vector<Vector>& targets);

Matrix cost_matrix_analytic(const ControlProblem& problem, const std::vector<Vector>& sources,
                            const std::vector<Vector>& targets);

}  // namespace freestop
