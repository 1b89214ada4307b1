#pragma once

#include <freestop/control_problem.hpp>
#include <freestop/hjb.hpp>
#include <freestop/lattice.hpp>
#include <freestop/measures.hpp>
#include <freestop/oracle.hpp>

#include <optional>
#include <string>

namespace freestop {

struct LatticeConfig {
  double dx = 0.0;
  double dt = 0.0;
  std::optional<double> t_max;   // TD problems must set it
  std::optional<Vector> lower;   // both absent: "auto" box
  std::optional<Vector> upper;
};

enum class CostModel { Auto, Analytic, Lattice };

struct PipelineFlags {
  bool kantorovich = true;
  bool hjb = true;
  bool eulerian = true;
  bool pontryagin = true;
  bool audits = true;
  CostModel cost_model = CostModel::Auto;
  std::optional<Scheme> scheme;
  int monge_samples = 0;         // 0: every source atom
};

struct Tolerances {
  double lp_identity = 1e-8;
  double value_agreement = 0.08;
  double slackness_mass = 1e-6;
  double mp_residual = 1e-10;
  double obstacle_radius = 2.0;  // in units of dx around target atoms
  std::optional<double> eps_contact;
  std::optional<double> eps_mono;
};

struct Scenario {
  std::string name;
  TimePenalty g;
  ProblemPtr problem;
  DiscreteMeasure mu;
  DiscreteMeasure nu;
  LatticeConfig lattice;
  std::optional<LatticeConfig> eulerian_lattice;  // defaults to `lattice`
  PipelineFlags pipeline;
  Tolerances tolerances;
  std::optional<OracleCase> oracle;
  std::string output_dir;
};

// Throws Parse for malformed JSON and InvalidArgument for bad values.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

// { "atoms": [[x..., w], ...] }, a uniform density
// { "density": "uniform", "a": .., "b": .., "n_atoms": .. } (200 atoms per
// unit length by default) or { "mixture": [{ "weight": .., "measure": .. }] }.
DiscreteMeasure parse_measure(const std::string& json_text);

// Smallest box containing both supports.
std::pair<Vector, Vector> support_box(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// TC and TS: diameter(support box) / speed + 1. TD: required input.
double default_horizon(const ControlProblem& problem, const DiscreteMeasure& mu,
                       const DiscreteMeasure& nu);

// Resolves t_max and the box. "auto" inflates the support box by
// t_max * speed + 2 dx and rounds outward to multiples of dx. Explicit boxes
// must leave t_max * speed around the supports.
Lattice resolve_lattice(const Scenario& scenario, const LatticeConfig& config);

}  // namespace freestop
