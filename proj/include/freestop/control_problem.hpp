#pragma once

#include <freestop/types.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace freestop {

// Time-dependence class of the running cost: stationary, compounded
// (strictly increasing in t) or discounted (strictly decreasing in t).
enum class TimeClass { TS, TC, TD };

const char* to_string(TimeClass tc) noexcept;

// Scalar time-penalty profile g with g(0) = 0, g' >= 0. The running cost of
// the speed-limited family is g'(t).
class TimePenalty {
 public:
  enum class Kind { Power, OneMinusExp, Linear };

  static TimePenalty power(double exponent);
  static TimePenalty one_minus_exp(double rate);
  static TimePenalty linear();

  // Accepts "power:2", "one_minus_exp:1", "one_minus_exp", "linear".
  static TimePenalty parse(const std::string& text);

  Kind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return param_; }

  double value(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;

  // Convex conjugate over v >= 0: g*(r) = sup_v (r v - g(v)); only defined
  // for the convex members of the family.
  double conjugate(double r) const;
  double conjugate_derivative(double r) const;

  bool convex() const noexcept { return kind_ != Kind::OneMinusExp; }
  bool concave() const noexcept { return kind_ != Kind::Power; }
  TimeClass time_class() const noexcept;

  std::string describe() const;

 private:
  TimePenalty(Kind kind, double param) : kind_(kind), param_(param) {}

  Kind kind_;
  double param_;
};

class ControlSet {
 public:
  static ControlSet discrete(std::vector<Vector> vectors);
  static ControlSet unit_sphere(int dimension);

  bool is_discrete() const noexcept { return discrete_; }
  int dimension() const noexcept { return dimension_; }
  const std::vector<Vector>& vectors() const noexcept { return vectors_; }
  std::size_t size() const noexcept { return vectors_.size(); }

 private:
  ControlSet(bool discrete, int dimension, std::vector<Vector> vectors)
      : discrete_(discrete), dimension_(dimension), vectors_(std::move(vectors)) {}

  bool discrete_;
  int dimension_;
  std::vector<Vector> vectors_;
};

class ControlProblem {
 public:
  using Velocity = std::function<Vector(const Vector& q, const Vector& a)>;
  using RunningCost = std::function<double(double t, const Vector& q, const Vector& a)>;
  using VelocityJacobian = std::function<Matrix(const Vector& q, const Vector& a)>;
  using CostGradient = std::function<Vector(double t, const Vector& q, const Vector& a)>;

  struct Definition {
    int dimension = 1;
    std::optional<ControlSet> controls;
    Velocity velocity;
    RunningCost running_cost;
    TimeClass time_class = TimeClass::TS;
    double lipschitz_bound = 0.0;
    double speed_bound = 1.0;
    // Optional derivatives in q; absent means identically zero.
    VelocityJacobian velocity_jacobian;
    CostGradient cost_gradient;
    // f(q, A) = A and K independent of A; enables the closed-form sphere
    // Hamiltonian |p| - K.
    bool sphere_structure = false;
    // f does not depend on q, so lattice shifts are node-independent.
    bool state_independent_velocity = false;
    // Time window sampled by the running-cost checks at construction.
    double sample_horizon = 10.0;
  };

  // Validates H0 (K >= 0), H1 (controls span R^n) and the declared time
  // class on a 64-point time grid.
  explicit ControlProblem(Definition def);

  // f(q, A) = A, K(t, q, A) = g'(t). Dimension 1 defaults to the two controls
  // {+1, -1}; higher dimensions default to the unit sphere.
  static std::shared_ptr<const ControlProblem> speed_limited_time_penalty(
      const TimePenalty& g, int dimension, std::optional<ControlSet> controls = {});

  int dimension() const noexcept { return def_.dimension; }
  const ControlSet& controls() const noexcept { return *def_.controls; }
  TimeClass time_class() const noexcept { return def_.time_class; }
  double lipschitz_bound() const noexcept { return def_.lipschitz_bound; }
  double speed_bound() const noexcept { return def_.speed_bound; }
  bool sphere_structure() const noexcept { return def_.sphere_structure; }
  bool state_independent_velocity() const noexcept { return def_.state_independent_velocity; }

  Vector velocity(const Vector& q, const Vector& a) const { return def_.velocity(q, a); }
  double running_cost(double t, const Vector& q, const Vector& a) const {
    return def_.running_cost(t, q, a);
  }
  Matrix velocity_jacobian(const Vector& q, const Vector& a) const;
  Vector cost_gradient(double t, const Vector& q, const Vector& a) const;

  // Registered speed-limited family, if this problem is one.
  const std::optional<TimePenalty>& time_penalty() const noexcept { return penalty_; }

  // Largest running cost over t in [0, horizon] for the sampled controls.
  double max_running_cost(double horizon) const;

 private:
  Definition def_;
  std::optional<TimePenalty> penalty_;
};

using ProblemPtr = std::shared_ptr<const ControlProblem>;

// Controls attaining the Hamiltonian supremum. For the sphere with p = 0 every
// unit vector is optimal, flagged by whole_sphere.
struct ControlChoice {
  std::vector<Vector> controls;
  std::vector<std::size_t> indices;  // into ControlSet::vectors() when discrete
  bool whole_sphere = false;
  double value = 0.0;

  bool tie() const noexcept { return whole_sphere || controls.size() > 1; }
};

double tie_tolerance(double hamiltonian_value) noexcept;

double hamiltonian(const ControlProblem& problem, double t, const Vector& q, const Vector& p);

ControlChoice argmax_control(const ControlProblem& problem, double t, const Vector& q,
                             const Vector& p);

// Velocities f(q, A*) over the maximizing controls: the elements of the
// p-subdifferential of H realized by the control set.
std::vector<Vector> hamiltonian_p_slope(const ControlProblem& problem, double t, const Vector& q,
                                        const Vector& p);

}  // namespace freestop
