#include <doctest.h>

#include <freestop/error.hpp>
#include <freestop/min_cost_flow.hpp>

#include <algorithm>
#include <random>
#include <vector>

using namespace freestop;

TEST_CASE("two routes, the cheaper fills first") {
  MinCostFlow g(4);
  const auto a = g.add_arc(0, 1, 5, 1.0);
  const auto b = g.add_arc(0, 2, 5, 2.0);
  const auto c = g.add_arc(1, 3, 3, 0.0);
  const auto d = g.add_arc(2, 3, 5, 0.0);
  g.solve(0, 3, 6);
  CHECK(g.flow(a) == 3);
  CHECK(g.flow(c) == 3);
  CHECK(g.flow(b) == 3);
  CHECK(g.flow(d) == 3);
  CHECK(g.total_cost() == 9.0);
  CHECK(g.arc_from(b) == 0);
  CHECK(g.arc_to(b) == 2);
}

TEST_CASE("insufficient capacity is infeasible") {
  MinCostFlow g(2);
  g.add_arc(0, 1, 2, 1.0);
  CHECK_THROWS_AS(g.solve(0, 1, 3), Error);
}

TEST_CASE("potentials certify optimality on random bipartite instances") {
  // Oracle: brute force over all assignments for 4x4 unit supplies.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> cost(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4;
    std::vector<std::vector<double>> c(n, std::vector<double>(n));
    for (auto& row : c) for (double& v : row) v = cost(rng);
    MinCostFlow g(2 * n + 2);
    const std::size_t s = 2 * n, t = 2 * n + 1;
    for (int i = 0; i < n; ++i) g.add_arc(s, i, 1, 0.0);
    for (int j = 0; j < n; ++j) g.add_arc(n + j, t, 1, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g.add_arc(i, n + j, 1, c[i][j]);
    g.solve(s, t, n);

    std::vector<int> perm{0, 1, 2, 3};
    double best = 1e300;
    do {
      double v = 0;
      for (int i = 0; i < n; ++i) v += c[i][perm[i]];
      best = std::min(best, v);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(g.total_cost() == doctest::Approx(best).epsilon(1e-12));

    // Unit capacities: an unused arc is residual forward, a used one backward.
    for (std::size_t e = 0; e < g.arc_count(); e += 2) {
      const double reduced = g.arc_cost(e) + g.potential(g.arc_from(e)) - g.potential(g.arc_to(e));
      if (g.flow(e) == 0) CHECK(reduced >= -1e-9);
      else CHECK(reduced <= 1e-9);
    }
  }
}

TEST_CASE("ties resolve the same way on every run") {
  auto build = [] {
    MinCostFlow g(4);
    g.add_arc(0, 1, 1, 1.0);
    g.add_arc(0, 2, 1, 1.0);
    g.add_arc(1, 3, 1, 0.0);
    g.add_arc(2, 3, 1, 0.0);
    g.solve(0, 3, 1);
    return g.flow(0);
  };
  const auto first = build();
  for (int i = 0; i < 5; ++i) CHECK(build() == first);
}
