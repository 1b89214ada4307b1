#include <freestop/error.hpp>
#include <freestop/measures.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace freestop {

namespace {

constexpr double kMergeDistance = 1e-12;
constexpr double kMassTolerance = 1e-12;

bool lex_less(const Vector& a, const Vector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<Atom> atoms) {
  require(!atoms.empty(), ErrorCode::InvalidArgument, "measure has no atoms");
  dimension_ = static_cast<int>(atoms.front().point.size());
  require(dimension_ > 0, ErrorCode::InvalidArgument, "atoms must have dimension >= 1");
  for (const auto& a : atoms) {
    require(a.point.size() == dimension_, ErrorCode::DimensionMismatch,
            "atoms have inconsistent dimensions");
    require(a.point.allFinite(), ErrorCode::InvalidArgument, "atom location is not finite");
    require(std::isfinite(a.weight) && a.weight > 0, ErrorCode::InvalidArgument,
            "atom weights must be positive");
  }
  // Merge coincident atoms in input order; quadratic only in the number of
  // near-duplicates because candidates are checked after a lexicographic sort.
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return atoms[i].point[0] < atoms[j].point[0];
  });
  std::vector<long> owner(atoms.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (owner[i] >= 0) continue;
    owner[i] = static_cast<long>(i);
    for (std::size_t m = k + 1; m < order.size(); ++m) {
      const std::size_t j = order[m];
      if (atoms[j].point[0] - atoms[i].point[0] > kMergeDistance) break;
      if (owner[j] < 0 && (atoms[j].point - atoms[i].point).norm() <= kMergeDistance) {
        owner[j] = static_cast<long>(i);
      }
    }
  }
  std::vector<long> slot(atoms.size(), -1);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto root = static_cast<std::size_t>(owner[i]);
    if (slot[root] < 0) {
      slot[root] = static_cast<long>(atoms_.size());
      atoms_.push_back({atoms[root].point, 0.0});
    }
    atoms_[static_cast<std::size_t>(slot[root])].weight += atoms[i].weight;
  }
  total_mass_ = 0.0;
  for (const auto& a : atoms_) total_mass_ += a.weight;
  if (std::abs(total_mass_ - 1.0) > kMassTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "measure total mass " << total_mass_ << " differs from 1";
    fail(ErrorCode::InvalidArgument, msg.str());
  }
}

DiscreteMeasure DiscreteMeasure::uniform_interval(double a, double b, int n_atoms) {
  require(b > a, ErrorCode::InvalidArgument, "uniform density needs a < b");
  require(n_atoms >= 1, ErrorCode::InvalidArgument, "n_atoms must be positive");
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(n_atoms));
  const double h = (b - a) / n_atoms;
  for (int i = 0; i < n_atoms; ++i) {
    Vector p(1);
    p[0] = a + (i + 0.5) * h;
    atoms.push_back({p, 1.0 / n_atoms});
  }
  return DiscreteMeasure(std::move(atoms));
}

DiscreteMeasure DiscreteMeasure::mixture(
    const std::vector<std::pair<double, DiscreteMeasure>>& parts) {
  require(!parts.empty(), ErrorCode::InvalidArgument, "empty mixture");
  std::vector<Atom> atoms;
  for (const auto& [w, m] : parts) {
    require(w > 0, ErrorCode::InvalidArgument, "mixture weights must be positive");
    for (const auto& a : m.atoms()) atoms.push_back({a.point, w * a.weight});
  }
  return DiscreteMeasure(std::move(atoms));
}

std::vector<Vector> DiscreteMeasure::points() const {
  std::vector<Vector> out;
  out.reserve(atoms_.size());
  for (const auto& a : atoms_) out.push_back(a.point);
  return out;
}

std::vector<double> DiscreteMeasure::weights() const {
  std::vector<double> out;
  out.reserve(atoms_.size());
  for (const auto& a : atoms_) out.push_back(a.weight);
  return out;
}

TransportPlan::TransportPlan(DiscreteMeasure source, DiscreteMeasure target, Matrix coupling)
    : source_(std::move(source)), target_(std::move(target)), coupling_(std::move(coupling)) {
  require(coupling_.rows() == static_cast<Eigen::Index>(source_.size()) &&
              coupling_.cols() == static_cast<Eigen::Index>(target_.size()),
          ErrorCode::DimensionMismatch, "coupling shape does not match the measures");
  require(coupling_.allFinite() && coupling_.minCoeff() >= 0, ErrorCode::InvalidArgument,
          "coupling entries must be non-negative");
  for (Eigen::Index i = 0; i < coupling_.rows(); ++i) {
    require(std::abs(coupling_.row(i).sum() - source_.weight(static_cast<std::size_t>(i))) <=
                kMarginalTolerance,
            ErrorCode::InvalidArgument, "coupling row sums do not match the source weights");
  }
  for (Eigen::Index j = 0; j < coupling_.cols(); ++j) {
    require(std::abs(coupling_.col(j).sum() - target_.weight(static_cast<std::size_t>(j))) <=
                kMarginalTolerance,
            ErrorCode::InvalidArgument, "coupling column sums do not match the target weights");
  }
}

std::pair<DiscreteMeasure, DiscreteMeasure> marginals(const TransportPlan& plan) {
  const Matrix& pi = plan.coupling();
  std::vector<Atom> rows;
  std::vector<Atom> cols;
  const Eigen::VectorXd row_sums = pi.rowwise().sum();
  const Eigen::RowVectorXd col_sums = pi.colwise().sum();
  const double row_total = row_sums.sum();
  const double col_total = col_sums.sum();
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    rows.push_back({plan.source().point(static_cast<std::size_t>(i)), row_sums[i] / row_total});
  }
  for (Eigen::Index j = 0; j < pi.cols(); ++j) {
    cols.push_back({plan.target().point(static_cast<std::size_t>(j)), col_sums[j] / col_total});
  }
  return {DiscreteMeasure(std::move(rows)), DiscreteMeasure(std::move(cols))};
}

double plan_cost(const TransportPlan& plan, const Matrix& cost) {
  require(cost.rows() == plan.coupling().rows() && cost.cols() == plan.coupling().cols(),
          ErrorCode::DimensionMismatch, "cost matrix shape does not match the plan");
  double total = 0.0;
  const Matrix& pi = plan.coupling();
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      if (pi(i, j) != 0.0) total += cost(i, j) * pi(i, j);
    }
  }
  return total;
}

DiscreteMeasure snap_to_grid(const DiscreteMeasure& measure, const Lattice& grid) {
  require(measure.dimension() == grid.dimension(), ErrorCode::DimensionMismatch,
          "measure and grid dimensions differ");
  std::map<std::size_t, double> mass;
  for (const auto& a : measure.atoms()) mass[grid.nearest_node(a.point)] += a.weight;
  std::vector<Atom> atoms;
  atoms.reserve(mass.size());
  for (const auto& [node, w] : mass) atoms.push_back({grid.point(node), w});
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const Atom& a, const Atom& b) { return lex_less(a.point, b.point); });
  return DiscreteMeasure(std::move(atoms));
}

std::vector<std::int64_t> quantize_masses(std::span<const double> weights, double scale) {
  require(scale > 0 && std::isfinite(scale), ErrorCode::InvalidArgument, "bad mass scale");
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0, ErrorCode::InvalidArgument, "bad weight");
    total += w;
  }
  const auto target = static_cast<std::int64_t>(std::llround(total * scale));
  std::vector<std::int64_t> out(weights.size());
  std::vector<double> remainder(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double scaled = weights[i] * scale;
    out[i] = static_cast<std::int64_t>(std::floor(scaled));
    remainder[i] = scaled - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  std::int64_t missing = target - assigned;
  require(missing >= 0 && missing <= static_cast<std::int64_t>(weights.size()), ErrorCode::Internal,
          "largest-remainder rounding out of range");
  for (std::size_t k = 0; missing > 0; ++k, --missing) ++out[order[k]];
  return out;
}

}  // namespace freestop
