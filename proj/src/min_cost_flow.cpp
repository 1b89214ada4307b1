#include <freestop/error.hpp>
#include <freestop/min_cost_flow.hpp>
#include <freestop/types.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <utility>

namespace freestop {

namespace {
constexpr std::size_t kNone = static_cast<std::size_t>(-1);
}

MinCostFlow::MinCostFlow(std::size_t nodes) : head_(nodes, kNone), potential_(nodes, 0.0) {}

std::size_t MinCostFlow::add_arc(std::size_t from, std::size_t to, std::int64_t capacity,
                                 double cost) {
  require(from < head_.size() && to < head_.size(), ErrorCode::InvalidArgument,
          "arc endpoint out of range");
  require(capacity >= 0, ErrorCode::InvalidArgument, "negative arc capacity");
  require(std::isfinite(cost) && cost >= 0, ErrorCode::InvalidArgument,
          "arc costs must be finite and non-negative");
  const std::size_t id = to_.size();
  to_.push_back(to);
  cap_.push_back(capacity);
  flow_.push_back(0);
  cost_.push_back(cost);
  next_.push_back(head_[from]);
  head_[from] = id;
  to_.push_back(from);
  cap_.push_back(0);
  flow_.push_back(0);
  cost_.push_back(-cost);
  next_.push_back(head_[to]);
  head_[to] = id + 1;
  return id;
}

void MinCostFlow::solve(std::size_t source, std::size_t sink, std::int64_t amount) {
  const std::size_t n = head_.size();
  std::vector<double> dist(n);
  std::vector<std::size_t> via(n);
  std::vector<char> done(n);
  using Entry = std::pair<double, std::size_t>;
  std::int64_t remaining = amount;
  while (remaining > 0) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(via.begin(), via.end(), kNone);
    std::fill(done.begin(), done.end(), 0);
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (done[u]) continue;
      done[u] = 1;
      if (u == sink) break;
      for (std::size_t e = head_[u]; e != kNone; e = next_[e]) {
        if (cap_[e] - flow_[e] <= 0) continue;
        const std::size_t v = to_[e];
        if (done[v]) continue;
        const double reduced = std::max(0.0, cost_[e] + potential_[u] - potential_[v]);
        const double nd = d + reduced;
        if (nd < dist[v] || (nd == dist[v] && via[v] != kNone && to_[via[v] ^ 1] > u)) {
          dist[v] = nd;
          via[v] = e;
          heap.emplace(nd, v);
        }
      }
    }
    if (!done[sink]) {
      fail(ErrorCode::Infeasible, "min-cost flow infeasible: sink unreachable with remaining supply");
    }
    const double cap_dist = dist[sink];
    for (std::size_t v = 0; v < n; ++v) {
      potential_[v] += done[v] ? dist[v] : cap_dist;
    }
    std::int64_t push = remaining;
    for (std::size_t v = sink; v != source; v = to_[via[v] ^ 1]) {
      push = std::min(push, cap_[via[v]] - flow_[via[v]]);
    }
    for (std::size_t v = sink; v != source; v = to_[via[v] ^ 1]) {
      flow_[via[v]] += push;
      flow_[via[v] ^ 1] -= push;
    }
    remaining -= push;
    ++augmentations_;
  }
}

double MinCostFlow::total_cost() const {
  double total = 0.0;
  for (std::size_t e = 0; e < to_.size(); e += 2) {
    if (flow_[e] != 0) total += cost_[e] * static_cast<double>(flow_[e]);
  }
  return total;
}

}  // namespace freestop
