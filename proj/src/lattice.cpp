#include <freestop/error.hpp>
#include <freestop/lattice.hpp>

#include <cmath>
#include <sstream>

namespace freestop {

namespace {

int integral_ratio(double numerator, double step, const char* what) {
  const double ratio = numerator / step;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, std::abs(ratio))) {
    std::ostringstream msg;
    msg << what << " (" << numerator << ") is not an integer multiple of the step " << step;
    fail(ErrorCode::InvalidArgument, msg.str());
  }
  return static_cast<int>(rounded);
}

}  // namespace

Lattice::Lattice(double dx, double dt, double t_max, Vector lower, Vector upper)
    : dx_(dx), dt_(dt), t_max_(t_max), lower_(std::move(lower)), upper_(std::move(upper)) {
  require(dx > 0 && dt > 0 && std::isfinite(dx) && std::isfinite(dt), ErrorCode::InvalidArgument,
          "lattice steps must be positive");
  require(t_max >= 0 && std::isfinite(t_max), ErrorCode::InvalidArgument,
          "horizon must be non-negative");
  require(lower_.size() > 0 && lower_.size() == upper_.size(), ErrorCode::DimensionMismatch,
          "box bounds have inconsistent dimensions");
  steps_ = integral_ratio(t_max, dt, "horizon");
  const int n = dimension();
  extents_.resize(static_cast<std::size_t>(n));
  strides_.resize(static_cast<std::size_t>(n));
  for (int axis = 0; axis < n; ++axis) {
    require(upper_[axis] >= lower_[axis], ErrorCode::InvalidArgument, "empty box");
    extents_[static_cast<std::size_t>(axis)] =
        integral_ratio(upper_[axis] - lower_[axis], dx, "box extent") + 1;
  }
  // Row-major: the last axis is contiguous.
  std::ptrdiff_t stride = 1;
  for (int axis = n - 1; axis >= 0; --axis) {
    strides_[static_cast<std::size_t>(axis)] = stride;
    stride *= extents_[static_cast<std::size_t>(axis)];
  }
  node_count_ = static_cast<std::size_t>(stride);
}

std::vector<int> Lattice::index_of(std::size_t node) const {
  std::vector<int> index(extents_.size());
  for (std::size_t axis = 0; axis < extents_.size(); ++axis) {
    index[axis] = static_cast<int>((node / static_cast<std::size_t>(strides_[axis])) %
                                   static_cast<std::size_t>(extents_[axis]));
  }
  return index;
}

std::size_t Lattice::node_of(const std::vector<int>& index) const {
  std::size_t node = 0;
  for (std::size_t axis = 0; axis < extents_.size(); ++axis) {
    node += static_cast<std::size_t>(index[axis]) * static_cast<std::size_t>(strides_[axis]);
  }
  return node;
}

Vector Lattice::point(std::size_t node) const {
  Vector p(dimension());
  const auto index = index_of(node);
  for (int axis = 0; axis < dimension(); ++axis) p[axis] = coordinate(axis, index[axis]);
  return p;
}

bool Lattice::contains(const Vector& p, double slack) const {
  if (p.size() != dimension()) return false;
  for (int axis = 0; axis < dimension(); ++axis) {
    if (p[axis] < lower_[axis] - slack || p[axis] > upper_[axis] + slack) return false;
  }
  return true;
}

std::optional<std::size_t> Lattice::exact_node(const Vector& p, double tol) const {
  require(p.size() == dimension(), ErrorCode::DimensionMismatch, "point dimension mismatch");
  std::vector<int> index(static_cast<std::size_t>(dimension()));
  for (int axis = 0; axis < dimension(); ++axis) {
    const double r = (p[axis] - lower_[axis]) / dx_;
    const double i = std::round(r);
    if (std::abs(r - i) > tol || i < 0 || i >= extents_[static_cast<std::size_t>(axis)]) {
      return std::nullopt;
    }
    index[static_cast<std::size_t>(axis)] = static_cast<int>(i);
  }
  return node_of(index);
}

std::size_t Lattice::nearest_node(const Vector& p) const {
  require(p.size() == dimension(), ErrorCode::DimensionMismatch, "point dimension mismatch");
  std::vector<int> index(static_cast<std::size_t>(dimension()));
  for (int axis = 0; axis < dimension(); ++axis) {
    const double r = (p[axis] - lower_[axis]) / dx_;
    // Ties round toward the lower node so snapping is reproducible.
    double i = std::floor(r + 0.5);
    if (i - r == 0.5) i -= 1.0;
    const int extent = extents_[static_cast<std::size_t>(axis)];
    if (r < -0.5 - 1e-9 || r > extent - 0.5 + 1e-9) {
      std::ostringstream msg;
      msg << "point coordinate " << p[axis] << " lies outside the grid box";
      fail(ErrorCode::OffLattice, msg.str());
    }
    index[static_cast<std::size_t>(axis)] =
        static_cast<int>(std::clamp(i, 0.0, static_cast<double>(extent - 1)));
  }
  return node_of(index);
}

std::optional<std::size_t> Lattice::shifted(std::size_t node, const std::vector<int>& shift) const {
  std::ptrdiff_t offset = 0;
  for (std::size_t axis = 0; axis < extents_.size(); ++axis) {
    const int i = static_cast<int>((node / static_cast<std::size_t>(strides_[axis])) %
                                   static_cast<std::size_t>(extents_[axis])) +
                  shift[axis];
    if (i < 0 || i >= extents_[axis]) return std::nullopt;
    offset += shift[axis] * strides_[axis];
  }
  return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + offset);
}

Lattice Lattice::with_horizon(double t_max) const {
  return Lattice(dx_, dt_, t_max, lower_, upper_);
}

ControlShifts control_shifts(const ControlProblem& problem, const Lattice& lattice) {
  require(problem.controls().is_discrete(), ErrorCode::Unsupported,
          "lattice paths require a discrete control set");
  require(problem.state_independent_velocity(), ErrorCode::Unsupported,
          "lattice paths require a state-independent velocity");
  require(problem.dimension() == lattice.dimension(), ErrorCode::DimensionMismatch,
          "problem and lattice dimensions differ");
  ControlShifts out;
  const Vector origin = Vector::Zero(problem.dimension());
  for (const auto& a : problem.controls().vectors()) {
    const Vector step = problem.velocity(origin, a) * lattice.dt() / lattice.dx();
    std::vector<int> shift(static_cast<std::size_t>(problem.dimension()));
    for (int axis = 0; axis < problem.dimension(); ++axis) {
      const double r = std::round(step[axis]);
      if (std::abs(step[axis] - r) > 1e-9) {
        fail(ErrorCode::InvalidArgument,
             "dt * f(q, A) is not an integer multiple of dx on every axis");
      }
      shift[static_cast<std::size_t>(axis)] = static_cast<int>(r);
    }
    out.shifts.push_back(std::move(shift));
    out.controls.push_back(a);
  }
  return out;
}

MoveTable move_table(const Lattice& lattice, const ControlShifts& shifts) {
  MoveTable table;
  table.controls = shifts.size();
  table.target.assign(lattice.node_count() * table.controls, MoveTable::npos);
  for (std::size_t node = 0; node < lattice.node_count(); ++node) {
    for (std::size_t a = 0; a < table.controls; ++a) {
      if (auto next = lattice.shifted(node, shifts.shifts[a])) {
        table.target[node * table.controls + a] = *next;
      }
    }
  }
  return table;
}

}  // namespace freestop
