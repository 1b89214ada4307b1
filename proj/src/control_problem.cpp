#include <freestop/control_problem.hpp>
#include <freestop/error.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace freestop {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Unreachable: return "unreachable";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::Numeric: return "numeric error";
    case ErrorCode::CflViolation: return "CFL violation";
    case ErrorCode::HorizonCheck: return "horizon check failed";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::OffLattice: return "off lattice";
    case ErrorCode::Internal: return "internal error";
  }
  return "unknown";
}

const char* to_string(TimeClass tc) noexcept {
  switch (tc) {
    case TimeClass::TS: return "TS";
    case TimeClass::TC: return "TC";
    case TimeClass::TD: return "TD";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// TimePenalty

TimePenalty TimePenalty::power(double exponent) {
  require(std::isfinite(exponent) && exponent > 1.0, ErrorCode::InvalidArgument,
          "power penalty requires exponent > 1");
  return TimePenalty(Kind::Power, exponent);
}

TimePenalty TimePenalty::one_minus_exp(double rate) {
  require(std::isfinite(rate) && rate > 0.0, ErrorCode::InvalidArgument,
          "one_minus_exp penalty requires rate > 0");
  return TimePenalty(Kind::OneMinusExp, rate);
}

TimePenalty TimePenalty::linear() { return TimePenalty(Kind::Linear, 1.0); }

TimePenalty TimePenalty::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::optional<double> param;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      param = std::stod(text.substr(colon + 1), &used);
      require(used == text.size() - colon - 1, ErrorCode::Parse, "trailing characters");
    } catch (const std::logic_error&) {
      fail(ErrorCode::Parse, "bad penalty parameter in '" + text + "'");
    }
  }
  if (name == "power") return power(param.value_or(2.0));
  if (name == "one_minus_exp") return one_minus_exp(param.value_or(1.0));
  if (name == "linear") return linear();
  fail(ErrorCode::Parse, "unknown penalty '" + text + "'");
}

double TimePenalty::value(double t) const {
  switch (kind_) {
    case Kind::Power: return std::copysign(std::pow(std::abs(t), param_), t);
    case Kind::OneMinusExp: return 1.0 - std::exp(-param_ * t);
    case Kind::Linear: return t;
  }
  return 0.0;
}

double TimePenalty::derivative(double t) const {
  switch (kind_) {
    case Kind::Power: return param_ * std::pow(std::abs(t), param_ - 1.0);
    case Kind::OneMinusExp: return param_ * std::exp(-param_ * t);
    case Kind::Linear: return 1.0;
  }
  return 0.0;
}

double TimePenalty::second_derivative(double t) const {
  switch (kind_) {
    case Kind::Power:
      return param_ * (param_ - 1.0) * std::pow(std::abs(t), param_ - 2.0) * (t < 0 ? -1.0 : 1.0);
    case Kind::OneMinusExp: return -param_ * param_ * std::exp(-param_ * t);
    case Kind::Linear: return 0.0;
  }
  return 0.0;
}

double TimePenalty::conjugate(double r) const {
  switch (kind_) {
    case Kind::Power: {
      if (r <= 0.0) return 0.0;
      const double v = std::pow(r / param_, 1.0 / (param_ - 1.0));
      return (param_ - 1.0) * std::pow(v, param_);
    }
    case Kind::Linear:
      require(r <= 1.0, ErrorCode::Numeric, "Hamiltonian infinite");
      return 0.0;
    case Kind::OneMinusExp: break;
  }
  fail(ErrorCode::Unsupported, "conjugate requires a convex penalty");
}

double TimePenalty::conjugate_derivative(double r) const {
  switch (kind_) {
    case Kind::Power:
      return r <= 0.0 ? 0.0 : std::pow(r / param_, 1.0 / (param_ - 1.0));
    case Kind::Linear:
      require(r <= 1.0, ErrorCode::Numeric, "Hamiltonian infinite");
      return 0.0;
    case Kind::OneMinusExp: break;
  }
  fail(ErrorCode::Unsupported, "conjugate requires a convex penalty");
}

TimeClass TimePenalty::time_class() const noexcept {
  switch (kind_) {
    case Kind::Power: return TimeClass::TC;
    case Kind::OneMinusExp: return TimeClass::TD;
    case Kind::Linear: return TimeClass::TS;
  }
  return TimeClass::TS;
}

std::string TimePenalty::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::Power: out << "power:" << param_; break;
    case Kind::OneMinusExp: out << "one_minus_exp:" << param_; break;
    case Kind::Linear: out << "linear"; break;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// ControlSet

ControlSet ControlSet::discrete(std::vector<Vector> vectors) {
  require(!vectors.empty(), ErrorCode::InvalidArgument, "discrete control set is empty");
  const auto dim = static_cast<int>(vectors.front().size());
  require(dim > 0, ErrorCode::InvalidArgument, "control vectors must be non-empty");
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    require(vectors[i].size() == dim, ErrorCode::DimensionMismatch,
            "control vectors have inconsistent dimensions");
    require(vectors[i].allFinite(), ErrorCode::InvalidArgument, "control vector not finite");
    for (std::size_t j = 0; j < i; ++j) {
      require((vectors[i] - vectors[j]).lpNorm<Eigen::Infinity>() > 1e-12,
              ErrorCode::InvalidArgument, "duplicate control vector");
    }
  }
  return ControlSet(true, dim, std::move(vectors));
}

ControlSet ControlSet::unit_sphere(int dimension) {
  require(dimension > 0, ErrorCode::InvalidArgument, "sphere dimension must be positive");
  // Axis directions are kept as sample controls for validation only.
  std::vector<Vector> samples;
  for (int i = 0; i < dimension; ++i) {
    samples.push_back(Vector::Unit(dimension, i));
    samples.push_back(-Vector::Unit(dimension, i));
  }
  return ControlSet(false, dimension, std::move(samples));
}

// ---------------------------------------------------------------------------
// ControlProblem

ControlProblem::ControlProblem(Definition def) : def_(std::move(def)) {
  const int n = def_.dimension;
  require(n > 0, ErrorCode::InvalidArgument, "dimension must be positive");
  require(def_.controls.has_value(), ErrorCode::InvalidArgument, "control set missing");
  require(def_.controls->dimension() == n, ErrorCode::DimensionMismatch,
          "control set dimension differs from problem dimension");
  require(static_cast<bool>(def_.velocity) && static_cast<bool>(def_.running_cost),
          ErrorCode::InvalidArgument, "velocity and running cost are required");
  require(def_.speed_bound > 0.0 && std::isfinite(def_.speed_bound), ErrorCode::InvalidArgument,
          "speed bound must be positive");

  const Vector origin = Vector::Zero(n);
  const auto& samples = def_.controls->vectors();

  // H1: controllability at the sample point.
  if (def_.controls->is_discrete()) {
    Matrix span(n, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      span.col(static_cast<Eigen::Index>(i)) = def_.velocity(origin, samples[i]);
    }
    Eigen::FullPivLU<Matrix> lu(span);
    require(lu.rank() == n, ErrorCode::InvalidArgument,
            "control velocities do not span the state space");
  }

  constexpr int kSamples = 64;
  const double h = def_.sample_horizon / (kSamples - 1);
  for (const auto& a : samples) {
    double previous = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const double t = i * h;
      const double k = def_.running_cost(t, origin, a);
      require(std::isfinite(k) && k >= 0.0, ErrorCode::InvalidArgument,
              "running cost must be finite and non-negative");
      if (i > 0) {
        switch (def_.time_class) {
          case TimeClass::TS:
            require(std::abs(k - previous) <= 1e-12 * (1.0 + std::abs(k)),
                    ErrorCode::InvalidArgument, "TS running cost varies in time");
            break;
          case TimeClass::TC:
            require(k > previous, ErrorCode::InvalidArgument,
                    "TC running cost is not strictly increasing in time");
            break;
          case TimeClass::TD:
            require(k < previous, ErrorCode::InvalidArgument,
                    "TD running cost is not strictly decreasing in time");
            break;
        }
      }
      previous = k;
    }
  }
}

std::shared_ptr<const ControlProblem> ControlProblem::speed_limited_time_penalty(
    const TimePenalty& g, int dimension, std::optional<ControlSet> controls) {
  require(dimension > 0, ErrorCode::InvalidArgument, "dimension must be positive");
  if (!controls) {
    if (dimension == 1) {
      controls = ControlSet::discrete({Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)});
    } else {
      controls = ControlSet::unit_sphere(dimension);
    }
  }
  double speed = 1.0;
  if (controls->is_discrete()) {
    speed = 0.0;
    for (const auto& a : controls->vectors()) speed = std::max(speed, a.norm());
  }

  Definition def;
  def.dimension = dimension;
  def.controls = std::move(controls);
  def.velocity = [](const Vector&, const Vector& a) { return a; };
  def.running_cost = [g](double t, const Vector&, const Vector&) { return g.derivative(t); };
  def.time_class = g.time_class();
  def.lipschitz_bound = 0.0;
  def.speed_bound = speed;
  def.sphere_structure = true;
  def.state_independent_velocity = true;

  auto problem = std::make_shared<ControlProblem>(std::move(def));
  problem->penalty_ = g;
  return problem;
}

Matrix ControlProblem::velocity_jacobian(const Vector& q, const Vector& a) const {
  if (def_.velocity_jacobian) return def_.velocity_jacobian(q, a);
  return Matrix::Zero(def_.dimension, def_.dimension);
}

Vector ControlProblem::cost_gradient(double t, const Vector& q, const Vector& a) const {
  if (def_.cost_gradient) return def_.cost_gradient(t, q, a);
  return Vector::Zero(def_.dimension);
}

double ControlProblem::max_running_cost(double horizon) const {
  const Vector origin = Vector::Zero(def_.dimension);
  double best = 0.0;
  constexpr int kSamples = 257;
  for (const auto& a : def_.controls->vectors()) {
    for (int i = 0; i < kSamples; ++i) {
      best = std::max(best, def_.running_cost(horizon * i / (kSamples - 1), origin, a));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Hamiltonian

double tie_tolerance(double hamiltonian_value) noexcept {
  return 1e-12 * (1.0 + std::abs(hamiltonian_value));
}

namespace {

void check_inputs(const ControlProblem& problem, double t, const Vector& q, const Vector& p) {
  require(q.size() == problem.dimension() && p.size() == problem.dimension(),
          ErrorCode::DimensionMismatch, "state/costate dimension mismatch");
  require(std::isfinite(t) && q.allFinite() && p.allFinite(), ErrorCode::InvalidArgument,
          "Hamiltonian inputs must be finite");
}

double sphere_cost(const ControlProblem& problem, double t, const Vector& q) {
  require(problem.sphere_structure(), ErrorCode::Unsupported,
          "sphere Hamiltonian requires f(q,A)=A and a control-independent cost");
  return problem.running_cost(t, q, Vector::Unit(problem.dimension(), 0));
}

}  // namespace

double hamiltonian(const ControlProblem& problem, double t, const Vector& q, const Vector& p) {
  check_inputs(problem, t, q, p);
  double best = -kInf;
  if (problem.controls().is_discrete()) {
    for (const auto& a : problem.controls().vectors()) {
      best = std::max(best, p.dot(problem.velocity(q, a)) - problem.running_cost(t, q, a));
    }
  } else {
    best = p.norm() - sphere_cost(problem, t, q);
  }
  require(!std::isinf(best) || best < 0, ErrorCode::Numeric, "Hamiltonian infinite");
  require(!std::isnan(best), ErrorCode::Numeric, "Hamiltonian is NaN");
  return best;
}

ControlChoice argmax_control(const ControlProblem& problem, double t, const Vector& q,
                             const Vector& p) {
  check_inputs(problem, t, q, p);
  ControlChoice choice;
  if (problem.controls().is_discrete()) {
    const auto& vectors = problem.controls().vectors();
    std::vector<double> values(vectors.size());
    double best = -kInf;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      values[i] = p.dot(problem.velocity(q, vectors[i])) - problem.running_cost(t, q, vectors[i]);
      best = std::max(best, values[i]);
    }
    const double tol = tie_tolerance(best);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (values[i] >= best - tol) {
        choice.controls.push_back(vectors[i]);
        choice.indices.push_back(i);
      }
    }
    choice.value = best;
    return choice;
  }
  const double k = sphere_cost(problem, t, q);
  const double norm = p.norm();
  choice.value = norm - k;
  if (norm > 0.0) {
    choice.controls.push_back(p / norm);
  } else {
    choice.whole_sphere = true;
  }
  return choice;
}

std::vector<Vector> hamiltonian_p_slope(const ControlProblem& problem, double t, const Vector& q,
                                        const Vector& p) {
  const ControlChoice choice = argmax_control(problem, t, q, p);
  std::vector<Vector> slopes;
  slopes.reserve(choice.controls.size());
  for (const auto& a : choice.controls) slopes.push_back(problem.velocity(q, a));
  return slopes;
}

}  // namespace freestop
