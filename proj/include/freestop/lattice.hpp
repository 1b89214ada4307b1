#pragma once

#include <freestop/control_problem.hpp>
#include <freestop/types.hpp>

#include <cstddef>
#include <optional>
#include <vector>

namespace freestop {

// Tensor space grid with step dx over an axis-aligned box, times 0..t_max with
// step dt. Serves both as the lattice of controlled paths and as the grid of
// the value-function solvers.
class Lattice {
 public:
  Lattice(double dx, double dt, double t_max, Vector lower, Vector upper);

  int dimension() const noexcept { return static_cast<int>(lower_.size()); }
  double dx() const noexcept { return dx_; }
  double dt() const noexcept { return dt_; }
  double t_max() const noexcept { return t_max_; }
  const Vector& lower() const noexcept { return lower_; }
  const Vector& upper() const noexcept { return upper_; }

  // Number of time steps; layers are 0..steps().
  int steps() const noexcept { return steps_; }
  int layers() const noexcept { return steps_ + 1; }
  double time(int layer) const noexcept { return layer * dt_; }

  std::size_t node_count() const noexcept { return node_count_; }
  int extent(int axis) const noexcept { return extents_[static_cast<std::size_t>(axis)]; }
  std::ptrdiff_t stride(int axis) const noexcept { return strides_[static_cast<std::size_t>(axis)]; }

  std::vector<int> index_of(std::size_t node) const;
  std::size_t node_of(const std::vector<int>& index) const;
  Vector point(std::size_t node) const;
  double coordinate(int axis, int i) const noexcept { return lower_[axis] + i * dx_; }

  bool contains(const Vector& p, double slack = 0.0) const;

  // Node whose point equals p within tol * dx on every axis.
  std::optional<std::size_t> exact_node(const Vector& p, double tol = 1e-9) const;
  // Nearest node; throws OffLattice when p lies outside the box by more than dx/2.
  std::size_t nearest_node(const Vector& p) const;

  // Node displaced by an integer shift, or nothing when it leaves the box.
  std::optional<std::size_t> shifted(std::size_t node, const std::vector<int>& shift) const;

  // Same grid over a different horizon.
  Lattice with_horizon(double t_max) const;

 private:
  double dx_;
  double dt_;
  double t_max_;
  Vector lower_;
  Vector upper_;
  int steps_ = 0;
  std::vector<int> extents_;
  std::vector<std::ptrdiff_t> strides_;
  std::size_t node_count_ = 0;
};

using LatticeSpec = Lattice;
using Grid = Lattice;

// Integer node shift dt * f(A) / dx for each discrete control. Requires a
// discrete control set with state-independent velocity aligned to the lattice.
struct ControlShifts {
  std::vector<std::vector<int>> shifts;
  std::vector<Vector> controls;

  std::size_t size() const noexcept { return shifts.size(); }
};

ControlShifts control_shifts(const ControlProblem& problem, const Lattice& lattice);

// Precomputed neighbour table: target[node * controls + a] or npos when the
// move leaves the box.
struct MoveTable {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t controls = 0;
  std::vector<std::size_t> target;

  std::size_t next(std::size_t node, std::size_t a) const noexcept {
    return target[node * controls + a];
  }
};

MoveTable move_table(const Lattice& lattice, const ControlShifts& shifts);

}  // namespace freestop
