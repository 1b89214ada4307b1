#pragma once

#include <freestop/lattice.hpp>
#include <freestop/types.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace freestop {

struct Atom {
  Vector point;
  double weight = 0.0;
};

// Probability measure with finitely many atoms. Atoms closer than 1e-12 are
// merged; weights are strictly positive and sum to one within 1e-12.
class DiscreteMeasure {
 public:
  explicit DiscreteMeasure(std::vector<Atom> atoms);

  // Midpoint-quadrature atomization of the uniform density on [a, b].
  static DiscreteMeasure uniform_interval(double a, double b, int n_atoms);

  // Convex combination of measures with the given mixture weights.
  static DiscreteMeasure mixture(const std::vector<std::pair<double, DiscreteMeasure>>& parts);

  std::size_t size() const noexcept { return atoms_.size(); }
  int dimension() const noexcept { return dimension_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const Vector& point(std::size_t i) const { return atoms_[i].point; }
  double weight(std::size_t i) const { return atoms_[i].weight; }
  double total_mass() const noexcept { return total_mass_; }

  std::vector<Vector> points() const;
  std::vector<double> weights() const;

 private:
  std::vector<Atom> atoms_;
  int dimension_ = 0;
  double total_mass_ = 0.0;
};

// Coupling between two discrete measures; rows index source atoms, columns
// target atoms. Marginals must reproduce the measures within 1e-9.
class TransportPlan {
 public:
  TransportPlan(DiscreteMeasure source, DiscreteMeasure target, Matrix coupling);

  const DiscreteMeasure& source() const noexcept { return source_; }
  const DiscreteMeasure& target() const noexcept { return target_; }
  const Matrix& coupling() const noexcept { return coupling_; }

  static constexpr double kMarginalTolerance = 1e-9;

 private:
  DiscreteMeasure source_;
  DiscreteMeasure target_;
  Matrix coupling_;
};

// Row and column sums as measures over the plan's atoms. Zero-mass rows or
// columns cannot occur for a valid plan.
std::pair<DiscreteMeasure, DiscreteMeasure> marginals(const TransportPlan& plan);

double plan_cost(const TransportPlan& plan, const Matrix& cost);

// Moves every atom to its nearest grid node and sums colliding weights.
DiscreteMeasure snap_to_grid(const DiscreteMeasure& measure, const Lattice& grid);

// Integer masses summing exactly to round(scale * sum(weights)), using
// largest-remainder rounding with ties broken by lowest index.
std::vector<std::int64_t> quantize_masses(std::span<const double> weights, double scale);

inline constexpr double kMassScale = 1e9;

}  // namespace freestop
