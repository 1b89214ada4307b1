#pragma once

#include <freestop/control_problem.hpp>
#include <freestop/hjb.hpp>
#include <freestop/lattice.hpp>
#include <freestop/measures.hpp>
#include <freestop/trajectory_cost.hpp>

#include <cstdint>
#include <vector>

namespace freestop {

// Space-time lattice network: move arcs (k, q) -> (k+1, q + shift(A)) with
// cost K(t_k, q, A) dt, stop arcs from (k, y_j) to the sink of target atom j
// with cost 0, supplies on layer 0. Only nodes reachable from a supply and
// able to reach a sink are kept.
struct FlowNetwork {
  Lattice lattice;
  ControlShifts shifts;
  MoveTable moves;
  DiscreteMeasure mu;
  DiscreteMeasure nu;
  std::vector<std::size_t> source_nodes;  // space node of each mu atom
  std::vector<std::size_t> target_nodes;  // space node of each nu atom
  std::vector<std::int64_t> supply;       // quantized mu weights
  std::vector<std::int64_t> demand;       // quantized nu weights
  double scale = kMassScale;
  std::vector<char> active;               // per (k * nodes + node)
  std::vector<double> move_cost;          // per ((k * nodes + node) * controls + a)
  std::vector<long> target_of_node;       // target atom index per space node, or -1

  std::size_t space_nodes() const noexcept { return lattice.node_count(); }
  std::size_t controls() const noexcept { return shifts.size(); }
  std::size_t active_nodes() const;
  std::size_t move_arcs() const;
  std::size_t stop_arcs() const;
};

// mu and nu must already sit on lattice nodes (see snap_to_grid).
FlowNetwork build_network(const ControlProblem& problem, const Lattice& lattice,
                          const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                          double scale = kMassScale);

struct FlowSolution {
  std::vector<std::int64_t> move_flow;  // per ((k * nodes + node) * controls + a)
  std::vector<std::int64_t> stop_flow;  // per (k * targets + j)
  double value = 0.0;                   // sum of cost * mass
  double scale = kMassScale;
  std::vector<double> node_potential;   // per (k * nodes + node); NaN when inactive
  std::vector<double> sink_potential;   // per target atom

  double move_mass(std::size_t i) const { return static_cast<double>(move_flow[i]) / scale; }
};

FlowSolution solve_flow(const FlowNetwork& network);

// Superposition of one lattice path per plan entry; units are integer masses
// at the network scale, triples (i, j, units) over the network's atoms.
FlowSolution embed_plan(const FlowNetwork& network,
                        const std::vector<std::vector<std::int64_t>>& plan_units,
                        const std::vector<LatticePath>& paths);

struct ConservationReport {
  bool exact = true;
  std::int64_t max_imbalance = 0;
  bool nonnegative = true;
  bool targets_met = true;
};

ConservationReport conservation_check(const FlowNetwork& network, const FlowSolution& flow);

struct WeakDualityReport {
  double dual_objective = 0.0;    // sum psi nu - sum J(0, x) mu
  double primal_value = 0.0;
  double gap = 0.0;               // primal - dual
  double max_arc_residual = 0.0;  // max of J(k+1, q') - J(k, q) - K dt over move arcs
  double max_stop_residual = 0.0; // max of psi_j - J(k, y_j)
  bool pass = false;
};

// psi holds one value per target atom; the field must live on the network
// lattice. Tolerance 1e-9 (1 + |W|) on every inequality.
WeakDualityReport weak_duality_audit(const FlowNetwork& network, const FlowSolution& flow,
                                     const ValueField& field, const std::vector<double>& psi);

struct SlacknessReport {
  double stop_violation_mass = 0.0;  // stop mass where |J - psi| > eps_contact
  double move_violation_mass = 0.0;  // move mass on non-maximizing controls
  double total_mass = 0.0;
  std::size_t stop_arcs_checked = 0;
  std::size_t move_arcs_checked = 0;
};

// Uses the field's eps_contact for both conditions.
SlacknessReport slackness_audit(const ControlProblem& problem, const FlowNetwork& network,
                                const FlowSolution& flow, const ValueField& field);

// Obstacle for the network duals: sink potentials on target nodes, -inf elsewhere.
std::vector<double> sink_obstacle(const FlowNetwork& network, const FlowSolution& flow);

struct StopRecord {
  double t = 0.0;
  Vector q;
  std::size_t target = 0;
  double mass = 0.0;
};

std::vector<StopRecord> stopping_distribution_profile(const FlowNetwork& network,
                                                      const FlowSolution& flow);

// Per target atom, the fraction of its stop mass within `layers` time layers
// of expected[j]; atoms with expected = inf are skipped (fraction NaN).
std::vector<double> stop_concentration(const FlowNetwork& network, const FlowSolution& flow,
                                       const std::vector<double>& expected, int layers);

}  // namespace freestop
