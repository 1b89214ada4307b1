#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace freestop {

// Successive shortest paths with Dijkstra on reduced costs. Capacities are
// integers so conservation is exact; costs must be non-negative. Ties in the
// shortest-path search are broken by lowest node index.
class MinCostFlow {
 public:
  static constexpr std::int64_t kUnbounded = INT64_MAX / 4;

  explicit MinCostFlow(std::size_t nodes);

  std::size_t node_count() const noexcept { return head_.size(); }

  // Returns the arc id; the residual twin is id ^ 1.
  std::size_t add_arc(std::size_t from, std::size_t to, std::int64_t capacity, double cost);

  // Pushes `amount` units from source to sink at minimum cost. Throws
  // Infeasible when the sink cannot absorb the whole amount.
  void solve(std::size_t source, std::size_t sink, std::int64_t amount);

  std::int64_t flow(std::size_t arc) const { return flow_[arc]; }
  std::size_t arc_from(std::size_t arc) const { return to_[arc ^ 1]; }
  std::size_t arc_to(std::size_t arc) const { return to_[arc]; }
  double arc_cost(std::size_t arc) const { return cost_[arc]; }
  std::size_t arc_count() const noexcept { return to_.size(); }

  // Node potentials after solve: for every residual arc u->v,
  // cost + potential(u) - potential(v) >= 0 up to rounding.
  double potential(std::size_t node) const { return potential_[node]; }
  const std::vector<double>& potentials() const noexcept { return potential_; }

  // Sum of cost * flow over forward arcs.
  double total_cost() const;
  std::size_t augmentations() const noexcept { return augmentations_; }

 private:
  std::vector<std::size_t> head_;
  std::vector<std::size_t> next_;
  std::vector<std::size_t> to_;
  std::vector<std::int64_t> cap_;
  std::vector<std::int64_t> flow_;
  std::vector<double> cost_;
  std::vector<double> potential_;
  std::size_t augmentations_ = 0;
};

}  // namespace freestop
