#include <freestop/error.hpp>
#include <freestop/kantorovich.hpp>
#include <freestop/min_cost_flow.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

namespace freestop {

namespace {

// Bipartite support as an undirected graph over m + n vertices. Removes
// cycles by shifting integer mass around each one; on the optimal support
// every cycle has zero reduced cost, so the plan stays optimal.
class SupportForest {
 public:
  SupportForest(std::size_t m, std::size_t n) : m_(m), adj_(m + n) {}

  void insert(std::size_t i, std::size_t j, std::int64_t units) {
    const std::size_t a = i;
    const std::size_t b = m_ + j;
    std::vector<std::size_t> path = find_path(b, a);
    if (path.empty()) {
      link(a, b, units);
      return;
    }
    // Cycle a -> b -> ... -> a with the new edge first. Edges at odd cycle
    // positions lose mass, even ones gain it.
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) edges.emplace_back(path[k], path[k + 1]);
    std::int64_t delta = INT64_MAX;
    std::size_t drop = 0;
    for (std::size_t k = 0; k < edges.size(); k += 2) {
      const std::int64_t f = mass(edges[k].first, edges[k].second);
      if (f < delta) {
        delta = f;
        drop = k;
      }
    }
    for (std::size_t k = 0; k < edges.size(); ++k) {
      add_mass(edges[k].first, edges[k].second, k % 2 == 0 ? -delta : delta);
    }
    unlink(edges[drop].first, edges[drop].second);
    link(a, b, units + delta);
  }

  std::vector<std::vector<std::int64_t>> triples() const {
    std::vector<std::vector<std::int64_t>> out;
    for (std::size_t i = 0; i < m_; ++i) {
      for (const auto& [v, f] : adj_[i]) {
        if (f > 0) {
          out.push_back({static_cast<std::int64_t>(i), static_cast<std::int64_t>(v - m_), f});
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<std::size_t> find_path(std::size_t from, std::size_t to) const {
    std::vector<std::size_t> parent(adj_.size(), static_cast<std::size_t>(-1));
    std::vector<std::size_t> stack{from};
    parent[from] = from;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      if (u == to) break;
      for (const auto& [v, f] : adj_[u]) {
        if (parent[v] == static_cast<std::size_t>(-1)) {
          parent[v] = u;
          stack.push_back(v);
        }
      }
    }
    if (parent[to] == static_cast<std::size_t>(-1)) return {};
    std::vector<std::size_t> path;
    for (std::size_t v = to; v != from; v = parent[v]) path.push_back(v);
    path.push_back(from);
    // path runs to -> ... -> from; prepend nothing, the new edge closes it.
    return path;
  }

  std::int64_t mass(std::size_t u, std::size_t v) const { return adj_[u].at(v); }
  void add_mass(std::size_t u, std::size_t v, std::int64_t d) {
    adj_[u][v] += d;
    adj_[v][u] += d;
  }
  void link(std::size_t u, std::size_t v, std::int64_t f) {
    adj_[u][v] = f;
    adj_[v][u] = f;
  }
  void unlink(std::size_t u, std::size_t v) {
    adj_[u].erase(v);
    adj_[v].erase(u);
  }

  std::size_t m_;
  std::vector<std::map<std::size_t, std::int64_t>> adj_;
};

}  // namespace

Vector c_transform(const Matrix& cost, const Vector& phi) {
  require(cost.rows() == phi.size(), ErrorCode::DimensionMismatch, "phi size mismatch");
  Vector psi(cost.cols());
  for (Eigen::Index j = 0; j < cost.cols(); ++j) psi[j] = (cost.col(j) + phi).minCoeff();
  return psi;
}

Vector cbar_transform(const Matrix& cost, const Vector& psi) {
  require(cost.cols() == psi.size(), ErrorCode::DimensionMismatch, "psi size mismatch");
  Vector phi(cost.rows());
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    phi[i] = (psi.transpose() - cost.row(i)).maxCoeff();
  }
  return phi;
}

double dual_objective(const DualPotentials& potentials, const DiscreteMeasure& mu,
                      const DiscreteMeasure& nu) {
  require(potentials.phi.size() == static_cast<Eigen::Index>(mu.size()) &&
              potentials.psi.size() == static_cast<Eigen::Index>(nu.size()),
          ErrorCode::DimensionMismatch, "potentials do not match the measures");
  double total = 0.0;
  for (std::size_t j = 0; j < nu.size(); ++j) total += potentials.psi[static_cast<Eigen::Index>(j)] * nu.weight(j);
  for (std::size_t i = 0; i < mu.size(); ++i) total -= potentials.phi[static_cast<Eigen::Index>(i)] * mu.weight(i);
  return total;
}

double duality_gap(const PrimalDualSolution& solution) {
  return std::abs(solution.value - solution.dual_value);
}

double dual_feasibility_violation(const Matrix& cost, const DualPotentials& potentials) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      worst = std::max(worst, potentials.psi[j] - potentials.phi[i] - cost(i, j));
    }
  }
  return worst;
}

double slackness_violation(const Matrix& cost, const TransportPlan& plan,
                           const DualPotentials& potentials) {
  double worst = 0.0;
  const Matrix& pi = plan.coupling();
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      if (pi(i, j) > 0) {
        worst = std::max(worst, std::abs(potentials.psi[j] - potentials.phi[i] - cost(i, j)));
      }
    }
  }
  return worst;
}

std::size_t support_size(const TransportPlan& plan) {
  return static_cast<std::size_t>((plan.coupling().array() > 0).count());
}

PrimalDualSolution solve_primal_dual(const Matrix& cost, const DiscreteMeasure& mu,
                                     const DiscreteMeasure& nu, double scale) {
  const std::size_t m = mu.size();
  const std::size_t n = nu.size();
  require(cost.rows() == static_cast<Eigen::Index>(m) && cost.cols() == static_cast<Eigen::Index>(n),
          ErrorCode::DimensionMismatch, "cost matrix shape does not match the measures");
  require(cost.allFinite() && cost.minCoeff() >= 0, ErrorCode::InvalidArgument,
          "costs must be finite and non-negative");
  require(std::abs(mu.total_mass() - nu.total_mass()) <= 1e-12, ErrorCode::Infeasible,
          "source and target masses differ");

  const auto mu_w = mu.weights();
  const auto nu_w = nu.weights();
  const auto su = quantize_masses(mu_w, scale);
  const auto tu = quantize_masses(nu_w, scale);
  const std::int64_t total = std::accumulate(su.begin(), su.end(), std::int64_t{0});
  require(total == std::accumulate(tu.begin(), tu.end(), std::int64_t{0}), ErrorCode::Infeasible,
          "quantized masses differ");

  const std::size_t s = m + n;
  const std::size_t t = m + n + 1;
  MinCostFlow flow(m + n + 2);
  for (std::size_t i = 0; i < m; ++i) flow.add_arc(s, i, su[i], 0.0);
  std::vector<std::size_t> pair_arc(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      pair_arc[i * n + j] = flow.add_arc(i, m + j, MinCostFlow::kUnbounded,
                                         cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  for (std::size_t j = 0; j < n; ++j) flow.add_arc(m + j, t, tu[j], 0.0);
  flow.solve(s, t, total);

  SupportForest forest(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::int64_t f = flow.flow(pair_arc[i * n + j]);
      if (f > 0) forest.insert(i, j, f);
    }
  }

  const auto support = forest.triples();
  Matrix coupling = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (const auto& e : support) coupling(e[0], e[1]) = static_cast<double>(e[2]) / scale;
  PrimalDualSolution out{TransportPlan(mu, nu, std::move(coupling)), {}, 0.0, 0.0, scale, su, tu,
                         support};

  Vector phi(static_cast<Eigen::Index>(m));
  Vector psi(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i) phi[static_cast<Eigen::Index>(i)] = flow.potential(i);
  for (std::size_t j = 0; j < n; ++j) psi[static_cast<Eigen::Index>(j)] = flow.potential(m + j);
  // Shortest-path potentials are feasible up to rounding; the double
  // c-transform makes feasibility exact in floating point.
  psi = c_transform(cost, phi);
  phi = cbar_transform(cost, psi);
  const double shift = phi.minCoeff();
  phi.array() -= shift;
  psi.array() -= shift;
  out.potentials = {psi, phi};

  out.value = plan_cost(out.plan, cost);
  double dual = 0.0;
  for (std::size_t j = 0; j < n; ++j) dual += psi[static_cast<Eigen::Index>(j)] * static_cast<double>(tu[j]);
  for (std::size_t i = 0; i < m; ++i) dual -= phi[static_cast<Eigen::Index>(i)] * static_cast<double>(su[i]);
  out.dual_value = dual / scale;
  return out;
}

}  // namespace freestop
