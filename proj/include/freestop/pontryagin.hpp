#pragma once

#include <freestop/control_problem.hpp>
#include <freestop/hjb.hpp>
#include <freestop/types.hpp>

#include <string>
#include <vector>

namespace freestop {

struct FlowSample {
  double t = 0.0;
  Vector q;
  Vector p;
  Vector control;
  bool tie = false;  // several controls attained the Hamiltonian here
};

struct HamiltonianTrajectory {
  std::vector<FlowSample> samples;
  double end_time = 0.0;
  bool tie_flagged = false;

  const FlowSample& back() const { return samples.back(); }
};

// Explicit midpoint integration of dq/dt = f(q, A*), dp/dt = -p^T df/dq + dK/dq
// from (t1, q, beta) to t2 (t2 < t1 runs backward), with steps no longer than
// `step`. A* is the lowest-index maximizer; ties are flagged, not rejected.
HamiltonianTrajectory integrate_flow(const ControlProblem& problem, double t1, double t2,
                                     const Vector& q, const Vector& beta, double step);

// Time in (0, t_max] where t -> H(t, q(t), p(t)) changes sign along the flow
// from (0, q, beta); bracketed at resolution `step`, then bisected to 1e-10.
// Throws for stationary problems and when no sign change occurs.
double transversality_time(const ControlProblem& problem, const Vector& q, const Vector& beta,
                           double t_max, double step);

struct MongeBranch {
  Vector beta;
  Vector y;
  double tau = 0.0;
  HamiltonianTrajectory trajectory;
};

// One branch normally; two (left and right slopes) for a 1D atom whose cell
// touches a kink of J(0, .), in which case unique is false.
struct MongeResult {
  Vector x;
  bool unique = true;
  std::vector<MongeBranch> branches;
};

// Precomputes the interpolated gradient of J(0, .) once for many atoms.
class MongeSolver {
 public:
  MongeSolver(const ControlProblem& problem, const ValueField& field);

  Vector gradient(const Vector& x) const;
  MongeResult map(const Vector& x) const;
  std::vector<MongeResult> map_all(const std::vector<Vector>& atoms) const;

 private:
  const ControlProblem& problem_;
  const ValueField& field_;
  std::vector<double> j0_;
  std::vector<std::vector<double>> grad_;  // per axis, per node
  std::vector<char> kinks_;
};

MongeResult monge_map(const ControlProblem& problem, const ValueField& field, const Vector& x);

struct MaximumPrincipleReport {
  double max_residual = 0.0;             // max |H - (p.f - K)| with the realized control
  std::vector<double> hamiltonian_profile;
  std::string direction;                 // "increasing", "decreasing", "constant", "mixed"
  bool matches_time_class = false;
  bool h5_verified = false;              // growth hypothesis is never checked at runtime
};

MaximumPrincipleReport maximum_principle_audit(const ControlProblem& problem,
                                               const HamiltonianTrajectory& trajectory);

struct EndpointContact {
  bool pass = false;
  double gap = 0.0;        // J - psi interpolated over the stoppable cell corners
  double tolerance = 0.0;  // eps_contact + spread of J - psi over those corners
};

// Contact of the stopping point with the obstacle. Off-grid points only see
// the discrete contact set through interpolation, so the tolerance adds the
// variation of J - psi across the enclosing space-time cell. Corners where
// psi = -inf are skipped; a cell without stoppable corners fails.
EndpointContact endpoint_contact_check(const ValueField& field, const Vector& y, double tau);

}  // namespace freestop
