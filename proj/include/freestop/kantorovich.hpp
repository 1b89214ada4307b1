#pragma once

#include <freestop/measures.hpp>
#include <freestop/types.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace freestop {

// psi on target atoms, phi on source atoms; feasible when
// psi[j] - phi[i] <= c[i][j] for all pairs.
struct DualPotentials {
  Vector psi;
  Vector phi;
};

struct PrimalDualSolution {
  TransportPlan plan;
  DualPotentials potentials;
  double value = 0.0;       // plan cost
  double dual_value = 0.0;  // sum psi nu - sum phi mu over the quantized marginals
  double scale = kMassScale;
  std::vector<std::int64_t> source_units;
  std::vector<std::int64_t> target_units;
  std::vector<std::vector<std::int64_t>> support_units;  // (i, j, units) triples
};

// Exact transportation LP by min-cost flow on the bipartite network. Masses
// are quantized to integers at `scale`; the returned plan has forest support
// (at most m + n - 1 entries) and potentials normalized to min phi = 0.
PrimalDualSolution solve_primal_dual(const Matrix& cost, const DiscreteMeasure& mu,
                                     const DiscreteMeasure& nu, double scale = kMassScale);

// psi[j] = min_i c[i][j] + phi[i]
Vector c_transform(const Matrix& cost, const Vector& phi);
// phi[i] = max_j psi[j] - c[i][j]
Vector cbar_transform(const Matrix& cost, const Vector& psi);

double dual_objective(const DualPotentials& potentials, const DiscreteMeasure& mu,
                      const DiscreteMeasure& nu);

// |value - dual_value|.
double duality_gap(const PrimalDualSolution& solution);

// max over pairs of psi[j] - phi[i] - c[i][j], clipped below at 0.
double dual_feasibility_violation(const Matrix& cost, const DualPotentials& potentials);

// max over the plan support of |psi[j] - phi[i] - c[i][j]|.
double slackness_violation(const Matrix& cost, const TransportPlan& plan,
                           const DualPotentials& potentials);

std::size_t support_size(const TransportPlan& plan);

}  // namespace freestop
