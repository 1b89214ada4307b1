#include <freestop/error.hpp>
#include <freestop/eulerian.hpp>
#include <freestop/min_cost_flow.hpp>
#include <freestop/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace freestop {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t exact_or_fail(const Lattice& lattice, const Vector& p, const char* what) {
  auto node = lattice.exact_node(p);
  if (!node) fail(ErrorCode::OffLattice, std::string(what) + " atom is not on a lattice node");
  return *node;
}

}  // namespace

std::size_t FlowNetwork::active_nodes() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), 1));
}

std::size_t FlowNetwork::move_arcs() const {
  const std::size_t n = space_nodes();
  std::size_t count = 0;
  for (int k = 0; k < lattice.steps(); ++k) {
    for (std::size_t node = 0; node < n; ++node) {
      if (!active[static_cast<std::size_t>(k) * n + node]) continue;
      for (std::size_t a = 0; a < controls(); ++a) {
        const std::size_t to = moves.next(node, a);
        if (to != MoveTable::npos && active[static_cast<std::size_t>(k + 1) * n + to]) ++count;
      }
    }
  }
  return count;
}

std::size_t FlowNetwork::stop_arcs() const {
  const std::size_t n = space_nodes();
  std::size_t count = 0;
  for (int k = 0; k < lattice.layers(); ++k) {
    for (std::size_t node : target_nodes) count += active[static_cast<std::size_t>(k) * n + node] ? 1 : 0;
  }
  return count;
}

FlowNetwork build_network(const ControlProblem& problem, const Lattice& lattice,
                          const DiscreteMeasure& mu, const DiscreteMeasure& nu, double scale) {
  ControlShifts shifts = control_shifts(problem, lattice);
  MoveTable moves = move_table(lattice, shifts);
  FlowNetwork net{lattice, shifts, moves, mu, nu, {}, {}, {}, {}, scale, {}, {}, {}};
  const std::size_t n = lattice.node_count();
  const std::size_t na = shifts.size();
  const auto layers = static_cast<std::size_t>(lattice.layers());
  for (const auto& a : mu.atoms()) net.source_nodes.push_back(exact_or_fail(lattice, a.point, "source"));
  net.target_of_node.assign(n, -1);
  for (std::size_t j = 0; j < nu.size(); ++j) {
    const std::size_t node = exact_or_fail(lattice, nu.point(j), "target");
    net.target_nodes.push_back(node);
    net.target_of_node[node] = static_cast<long>(j);
  }
  const auto mu_w = mu.weights();
  const auto nu_w = nu.weights();
  net.supply = quantize_masses(mu_w, scale);
  net.demand = quantize_masses(nu_w, scale);

  net.move_cost.assign(static_cast<std::size_t>(lattice.steps()) * n * na, 0.0);
  parallel_for(static_cast<std::size_t>(lattice.steps()), [&](std::size_t k) {
    const double t = lattice.time(static_cast<int>(k));
    for (std::size_t node = 0; node < n; ++node) {
      const Vector q = lattice.point(node);
      for (std::size_t a = 0; a < na; ++a) {
        net.move_cost[(k * n + node) * na + a] = problem.running_cost(t, q, shifts.controls[a]) * lattice.dt();
      }
    }
  });

  // Forward reachability from layer-0 supplies, backward from stop-capable nodes.
  std::vector<char> fwd(layers * n, 0);
  std::vector<char> bwd(layers * n, 0);
  for (std::size_t node : net.source_nodes) fwd[node] = 1;
  for (std::size_t k = 0; k + 1 < layers; ++k) {
    for (std::size_t node = 0; node < n; ++node) {
      if (!fwd[k * n + node]) continue;
      for (std::size_t a = 0; a < na; ++a) {
        const std::size_t to = moves.next(node, a);
        if (to != MoveTable::npos) fwd[(k + 1) * n + to] = 1;
      }
    }
  }
  for (std::size_t k = layers; k-- > 0;) {
    for (std::size_t node = 0; node < n; ++node) {
      char ok = net.target_of_node[node] >= 0;
      if (!ok && k + 1 < layers) {
        for (std::size_t a = 0; a < na && !ok; ++a) {
          const std::size_t to = moves.next(node, a);
          ok = to != MoveTable::npos && bwd[(k + 1) * n + to];
        }
      }
      bwd[k * n + node] = ok;
    }
  }
  net.active.assign(layers * n, 0);
  for (std::size_t i = 0; i < layers * n; ++i) net.active[i] = fwd[i] && bwd[i];
  for (std::size_t i = 0; i < net.source_nodes.size(); ++i) {
    require(net.active[net.source_nodes[i]], ErrorCode::Infeasible,
            "infeasible network: a source cannot reach any target within t_max");
  }
  for (std::size_t j = 0; j < net.target_nodes.size(); ++j) {
    bool reached = false;
    for (std::size_t k = 0; k < layers && !reached; ++k) reached = net.active[k * n + net.target_nodes[j]];
    require(reached, ErrorCode::Infeasible,
            "infeasible network: a target cannot be reached from any source within t_max");
  }
  return net;
}

FlowSolution solve_flow(const FlowNetwork& net) {
  const Lattice& lat = net.lattice;
  const std::size_t n = net.space_nodes();
  const std::size_t na = net.controls();
  const auto layers = static_cast<std::size_t>(lat.layers());
  const std::size_t m = net.target_nodes.size();

  // Compact ids for active lattice nodes, then sinks, source, terminal.
  std::vector<std::size_t> id(layers * n, static_cast<std::size_t>(-1));
  std::size_t next_id = 0;
  for (std::size_t i = 0; i < layers * n; ++i) {
    if (net.active[i]) id[i] = next_id++;
  }
  const std::size_t sink0 = next_id;
  const std::size_t s = sink0 + m;
  const std::size_t t = s + 1;
  MinCostFlow mcf(t + 1);

  std::vector<std::size_t> move_arc(layers * n * na, static_cast<std::size_t>(-1));
  std::vector<std::size_t> stop_arc(layers * m, static_cast<std::size_t>(-1));
  for (std::size_t k = 0; k < layers; ++k) {
    for (std::size_t node = 0; node < n; ++node) {
      const std::size_t i = k * n + node;
      if (!net.active[i]) continue;
      const long j = net.target_of_node[node];
      if (j >= 0) stop_arc[k * m + static_cast<std::size_t>(j)] = mcf.add_arc(id[i], sink0 + static_cast<std::size_t>(j), MinCostFlow::kUnbounded, 0.0);
      if (k + 1 == layers) continue;
      for (std::size_t a = 0; a < na; ++a) {
        const std::size_t to = net.moves.next(node, a);
        if (to == MoveTable::npos || !net.active[(k + 1) * n + to]) continue;
        move_arc[i * na + a] = mcf.add_arc(id[i], id[(k + 1) * n + to], MinCostFlow::kUnbounded, net.move_cost[i * na + a]);
      }
    }
  }
  std::vector<std::int64_t> supply_at(n, 0);
  for (std::size_t i = 0; i < net.source_nodes.size(); ++i) supply_at[net.source_nodes[i]] += net.supply[i];
  for (std::size_t node = 0; node < n; ++node) {
    if (supply_at[node] > 0) mcf.add_arc(s, id[node], supply_at[node], 0.0);
  }
  for (std::size_t j = 0; j < m; ++j) mcf.add_arc(sink0 + j, t, net.demand[j], 0.0);
  const std::int64_t total = std::accumulate(net.supply.begin(), net.supply.end(), std::int64_t{0});
  require(total == std::accumulate(net.demand.begin(), net.demand.end(), std::int64_t{0}),
          ErrorCode::Infeasible, "supply and demand differ");
  mcf.solve(s, t, total);

  FlowSolution out;
  out.scale = net.scale;
  out.move_flow.assign(layers * n * na, 0);
  out.stop_flow.assign(layers * m, 0);
  out.node_potential.assign(layers * n, kNaN);
  out.sink_potential.assign(m, 0.0);
  double value = 0.0;
  for (std::size_t i = 0; i < move_arc.size(); ++i) {
    if (move_arc[i] == static_cast<std::size_t>(-1)) continue;
    out.move_flow[i] = mcf.flow(move_arc[i]);
    value += static_cast<double>(out.move_flow[i]) * net.move_cost[i];
  }
  for (std::size_t i = 0; i < stop_arc.size(); ++i) {
    if (stop_arc[i] != static_cast<std::size_t>(-1)) out.stop_flow[i] = mcf.flow(stop_arc[i]);
  }
  for (std::size_t i = 0; i < layers * n; ++i) {
    if (net.active[i]) out.node_potential[i] = mcf.potential(id[i]);
  }
  for (std::size_t j = 0; j < m; ++j) out.sink_potential[j] = mcf.potential(sink0 + j);
  out.value = value / net.scale;
  return out;
}

FlowSolution embed_plan(const FlowNetwork& net, const std::vector<std::vector<std::int64_t>>& plan_units,
                        const std::vector<LatticePath>& paths) {
  require(plan_units.size() == paths.size(), ErrorCode::DimensionMismatch,
          "one path is needed per plan entry");
  const std::size_t n = net.space_nodes();
  const std::size_t na = net.controls();
  const auto layers = static_cast<std::size_t>(net.lattice.layers());
  const std::size_t m = net.target_nodes.size();
  FlowSolution out;
  out.scale = net.scale;
  out.move_flow.assign(layers * n * na, 0);
  out.stop_flow.assign(layers * m, 0);
  out.node_potential.assign(layers * n, kNaN);
  out.sink_potential.assign(m, kNaN);
  double value = 0.0;
  for (std::size_t e = 0; e < paths.size(); ++e) {
    require(plan_units[e].size() == 3, ErrorCode::InvalidArgument, "plan entries are (i, j, units)");
    const auto i = static_cast<std::size_t>(plan_units[e][0]);
    const auto j = static_cast<std::size_t>(plan_units[e][1]);
    const std::int64_t units = plan_units[e][2];
    require(i < net.source_nodes.size() && j < m && units >= 0, ErrorCode::InvalidArgument,
            "plan entry out of range");
    const LatticePath& path = paths[e];
    require(!path.nodes.empty() && path.nodes.front() == net.source_nodes[i] &&
                path.nodes.back() == net.target_nodes[j],
            ErrorCode::OffLattice, "path endpoints do not match the plan entry");
    require(path.steps() < layers, ErrorCode::OffLattice, "path exceeds the horizon");
    for (std::size_t k = 0; k < path.steps(); ++k) {
      const std::size_t a = path.controls[k];
      require(a < na && net.moves.next(path.nodes[k], a) == path.nodes[k + 1], ErrorCode::OffLattice,
              "path step does not follow its control");
      const std::size_t idx = (k * n + path.nodes[k]) * na + a;
      out.move_flow[idx] += units;
      value += static_cast<double>(units) * net.move_cost[idx];
    }
    out.stop_flow[path.steps() * m + j] += units;
  }
  out.value = value / net.scale;
  return out;
}

ConservationReport conservation_check(const FlowNetwork& net, const FlowSolution& flow) {
  ConservationReport r;
  const std::size_t n = net.space_nodes();
  const std::size_t na = net.controls();
  const auto layers = static_cast<std::size_t>(net.lattice.layers());
  const std::size_t m = net.target_nodes.size();
  std::vector<std::int64_t> inflow(layers * n, 0);
  for (std::size_t i = 0; i < net.source_nodes.size(); ++i) inflow[net.source_nodes[i]] += net.supply[i];
  std::vector<std::int64_t> sink_in(m, 0);
  for (std::size_t k = 0; k < layers; ++k) {
    for (std::size_t node = 0; node < n; ++node) {
      const std::size_t i = k * n + node;
      std::int64_t out = 0;
      for (std::size_t a = 0; a < na; ++a) {
        const std::int64_t f = flow.move_flow[i * na + a];
        if (f < 0) r.nonnegative = false;
        if (f == 0) continue;
        const std::size_t to = net.moves.next(node, a);
        require(to != MoveTable::npos && k + 1 < layers, ErrorCode::Internal, "flow on a missing arc");
        inflow[(k + 1) * n + to] += f;
        out += f;
      }
      const long j = net.target_of_node[node];
      if (j >= 0) {
        const std::int64_t f = flow.stop_flow[k * m + static_cast<std::size_t>(j)];
        if (f < 0) r.nonnegative = false;
        out += f;
        sink_in[static_cast<std::size_t>(j)] += f;
      }
      const std::int64_t imbalance = std::abs(inflow[i] - out);
      r.max_imbalance = std::max(r.max_imbalance, imbalance);
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (sink_in[j] != net.demand[j]) r.targets_met = false;
  }
  r.exact = r.max_imbalance == 0 && r.targets_met;
  return r;
}

WeakDualityReport weak_duality_audit(const FlowNetwork& net, const FlowSolution& flow,
                                     const ValueField& field, const std::vector<double>& psi) {
  const Lattice& lat = net.lattice;
  require(field.grid.node_count() == lat.node_count() && field.grid.layers() == lat.layers(),
          ErrorCode::DimensionMismatch, "field and network lattices differ");
  require(psi.size() == net.target_nodes.size(), ErrorCode::DimensionMismatch,
          "one obstacle value is needed per target atom");
  WeakDualityReport r;
  const std::size_t n = lat.node_count();
  const std::size_t na = net.controls();
  double dual = 0.0;
  for (std::size_t j = 0; j < psi.size(); ++j) dual += psi[j] * static_cast<double>(net.demand[j]);
  for (std::size_t i = 0; i < net.source_nodes.size(); ++i) {
    dual -= field.at(0, net.source_nodes[i]) * static_cast<double>(net.supply[i]);
  }
  r.dual_objective = dual / net.scale;
  r.primal_value = flow.value;
  r.gap = r.primal_value - r.dual_objective;
  r.max_arc_residual = -kInf;
  r.max_stop_residual = -kInf;
  for (int k = 0; k < lat.layers(); ++k) {
    for (std::size_t node = 0; node < n; ++node) {
      const std::size_t i = static_cast<std::size_t>(k) * n + node;
      if (!net.active[i]) continue;
      const long j = net.target_of_node[node];
      if (j >= 0) r.max_stop_residual = std::max(r.max_stop_residual, psi[static_cast<std::size_t>(j)] - field.at(k, node));
      if (k + 1 == lat.layers()) continue;
      for (std::size_t a = 0; a < na; ++a) {
        const std::size_t to = net.moves.next(node, a);
        if (to == MoveTable::npos || !net.active[static_cast<std::size_t>(k + 1) * n + to]) continue;
        r.max_arc_residual = std::max(r.max_arc_residual, field.at(k + 1, to) - field.at(k, node) - net.move_cost[i * na + a]);
      }
    }
  }
  const double tol = 1e-9 * (1.0 + std::abs(r.primal_value));
  r.pass = r.dual_objective <= r.primal_value + tol && r.max_arc_residual <= tol && r.max_stop_residual <= tol;
  return r;
}

std::vector<double> sink_obstacle(const FlowNetwork& net, const FlowSolution& flow) {
  std::vector<double> psi(net.space_nodes(), -kInf);
  for (std::size_t j = 0; j < net.target_nodes.size(); ++j) psi[net.target_nodes[j]] = flow.sink_potential[j];
  return psi;
}

SlacknessReport slackness_audit(const ControlProblem& problem, const FlowNetwork& net,
                                const FlowSolution& flow, const ValueField& field) {
  const Lattice& lat = net.lattice;
  require(field.grid.node_count() == lat.node_count() && field.grid.layers() == lat.layers(),
          ErrorCode::DimensionMismatch, "field and network lattices differ");
  (void)problem;
  SlacknessReport r;
  const std::size_t n = lat.node_count();
  const std::size_t na = net.controls();
  const std::size_t m = net.target_nodes.size();
  const double eps = field.eps_contact;
  for (int k = 0; k < lat.layers(); ++k) {
    for (std::size_t node = 0; node < n; ++node) {
      const std::size_t i = static_cast<std::size_t>(k) * n + node;
      const long j = net.target_of_node[node];
      if (j >= 0) {
        const std::int64_t f = flow.stop_flow[static_cast<std::size_t>(k) * m + static_cast<std::size_t>(j)];
        if (f > 0) {
          ++r.stop_arcs_checked;
          const double mass = static_cast<double>(f) / flow.scale;
          r.total_mass += mass;
          if (!(std::abs(field.at(k, node) - field.psi[node]) <= eps)) r.stop_violation_mass += mass;
        }
      }
      if (k + 1 == lat.layers()) continue;
      double best = -kInf;
      for (std::size_t a = 0; a < na; ++a) {
        const std::size_t to = net.moves.next(node, a);
        if (to == MoveTable::npos) continue;
        best = std::max(best, field.at(k + 1, to) - net.move_cost[i * na + a]);
      }
      for (std::size_t a = 0; a < na; ++a) {
        const std::int64_t f = flow.move_flow[i * na + a];
        if (f <= 0) continue;
        ++r.move_arcs_checked;
        const std::size_t to = net.moves.next(node, a);
        const double attained = field.at(k + 1, to) - net.move_cost[i * na + a];
        if (!(best - attained <= eps)) r.move_violation_mass += static_cast<double>(f) / flow.scale;
      }
    }
  }
  return r;
}

std::vector<StopRecord> stopping_distribution_profile(const FlowNetwork& net, const FlowSolution& flow) {
  std::vector<StopRecord> out;
  const std::size_t m = net.target_nodes.size();
  for (int k = 0; k < net.lattice.layers(); ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::int64_t f = flow.stop_flow[static_cast<std::size_t>(k) * m + j];
      if (f > 0) out.push_back({net.lattice.time(k), net.nu.point(j), j, static_cast<double>(f) / flow.scale});
    }
  }
  return out;
}

std::vector<double> stop_concentration(const FlowNetwork& net, const FlowSolution& flow,
                                       const std::vector<double>& expected, int layers) {
  const std::size_t m = net.target_nodes.size();
  require(expected.size() == m, ErrorCode::DimensionMismatch, "one expected time per target atom");
  std::vector<double> near(m, 0.0);
  std::vector<double> total(m, 0.0);
  for (int k = 0; k < net.lattice.layers(); ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      const double f = static_cast<double>(flow.stop_flow[static_cast<std::size_t>(k) * m + j]);
      total[j] += f;
      if (std::isfinite(expected[j]) &&
          std::abs(net.lattice.time(k) - expected[j]) <= layers * net.lattice.dt() + 1e-12) {
        near[j] += f;
      }
    }
  }
  std::vector<double> out(m, kNaN);
  for (std::size_t j = 0; j < m; ++j) {
    if (std::isfinite(expected[j]) && total[j] > 0) out[j] = near[j] / total[j];
  }
  return out;
}

}  // namespace freestop
