#pragma once

#include <freestop/error.hpp>
#include <freestop/eulerian.hpp>
#include <freestop/hjb.hpp>
#include <freestop/kantorovich.hpp>
#include <freestop/pontryagin.hpp>
#include <freestop/scenario.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace freestop {

// Module error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorCode code, const std::string& message)
      : Error(code, stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct AuditResult {
  std::string name;
  bool pass = false;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct StageFailure {
  std::string stage;
  ErrorCode code = ErrorCode::Internal;
  std::string message;
};

struct VerificationReport {
  std::string scenario;
  std::optional<double> V;    // primal transport value
  std::optional<double> D1;   // Kantorovich dual value
  std::optional<double> D;    // value of the optimized (psi, J(0, .)) pair
  std::optional<double> W;    // Eulerian flow value
  std::optional<double> oracle_value;
  std::vector<AuditResult> audits;
  std::vector<std::string> notes;
  std::vector<std::string> files;
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::optional<StageFailure> failure;

  bool passed() const;
  std::string to_json() const;
};

// Lazily evaluated stages over one scenario; each accessor runs its
// prerequisites once and rethrows module errors as StageError.
class Pipeline {
 public:
  explicit Pipeline(Scenario scenario);

  const Scenario& scenario() const noexcept { return scenario_; }
  const ControlProblem& problem() const noexcept { return *scenario_.problem; }

  const Lattice& grid();                      // stage "scenario"
  bool analytic_cost();
  // Measures the cost matrix is indexed by: the scenario's atoms for the
  // analytic model, snapped to grid nodes for the lattice model.
  const DiscreteMeasure& mu();
  const DiscreteMeasure& nu();

  const Matrix& cost();                       // "trajectory_cost"
  const PrimalDualSolution& plan();           // "kantorovich"
  const std::vector<double>& obstacle();      // "hjb"
  const ValueField& field();                  // "hjb"
  const FreeBoundary& boundary();             // "hjb"
  void use_field(ValueField field);

  std::vector<std::size_t> monge_atoms();
  const std::vector<MongeResult>& monge();    // "pontryagin"

  const Lattice& eulerian_grid();             // "scenario"
  const FlowNetwork& network();               // "eulerian"
  const FlowSolution& flow();                 // "eulerian"
  const ValueField& network_field();          // "eulerian": DP field of the sink duals

  // Seconds spent per stage, in first-run order.
  const std::vector<std::pair<std::string, double>>& timings() const noexcept { return timings_; }

 private:
  Scenario scenario_;
  std::optional<Lattice> grid_;
  std::optional<Lattice> eulerian_grid_;
  std::optional<bool> analytic_;
  std::optional<DiscreteMeasure> mu_;
  std::optional<DiscreteMeasure> nu_;
  std::optional<Matrix> cost_;
  std::optional<PrimalDualSolution> plan_;
  std::optional<std::vector<double>> obstacle_;
  std::optional<ValueField> field_;
  std::optional<FreeBoundary> boundary_;
  std::optional<std::vector<MongeResult>> monge_;
  std::optional<FlowNetwork> network_;
  std::optional<FlowSolution> flow_;
  std::optional<ValueField> network_field_;
  std::vector<std::pair<std::string, double>> timings_;
};

// Runs every enabled stage and audit. Module errors end the run and are
// recorded in the report. Artifacts are written when output_dir is set.
VerificationReport run(Pipeline& pipeline, const std::string& output_dir = {});

// Artifact writers; all numbers use 17 significant digits.
void write_costs(Pipeline& pipeline, const std::string& pairs_csv, const std::string& out_csv);
void write_plan(Pipeline& pipeline, const std::string& path);
void write_field(const ValueField& field, const std::string& path);
void write_boundary(const ValueField& field, const FreeBoundary& boundary, const std::string& path);
void write_map(Pipeline& pipeline, const std::string& path);
void write_flow(Pipeline& pipeline, const std::string& path);
void write_stops(Pipeline& pipeline, const std::string& path);
// Time slices of J and psi plus trajectory fans; returns the files written.
std::vector<std::string> write_figures(Pipeline& pipeline, const std::string& dir);

// Reads a field written by write_field back onto the scenario grid.
ValueField read_field(Pipeline& pipeline, const std::string& path);

// Dense closed-form table over z in [-2, 2]: Monge map, exit time and J0 on
// the source interval, free boundary and psi wherever the formulas are
// defined, J(t, z) at the requested times inside the formula's region; NaN
// elsewhere.
void write_oracle_table(OracleCase c, const TimePenalty& g, const std::string& path, int points,
                        const std::vector<double>& times);

}  // namespace freestop
