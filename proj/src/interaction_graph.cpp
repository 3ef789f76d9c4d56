#include "decnash/interaction_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "decnash/errors.hpp"
#include "decnash/path.hpp"

namespace decnash {

namespace {

void dfs_order(int node, const std::vector<std::vector<int>>& adj, std::vector<bool>& seen,
               std::vector<int>& order) {
  seen[node] = true;
  for (int next : adj[node]) {
    if (!seen[next]) dfs_order(next, adj, seen, order);
  }
  order.push_back(node);
}

void dfs_assign(int node, int component, const std::vector<std::vector<int>>& radj,
                std::vector<int>& assignment) {
  assignment[node] = component;
  for (int next : radj[node]) {
    if (assignment[next] < 0) dfs_assign(next, component, radj, assignment);
  }
}

}  // namespace

void validate(const ObservationModel& model) {
  if (!(model.range > 0.0)) {
    throw std::invalid_argument("observation range must be positive");
  }
  if (!(model.half_angle > 0.0) || model.half_angle > std::numbers::pi) {
    throw std::invalid_argument("observation half-angle must lie in (0, pi]");
  }
}

InteractionGraph build_graph(const std::vector<WorldVehicle>& vehicles,
                             const ObservationModel& model) {
  validate(model);
  const double cos_limit = std::cos(model.half_angle);

  InteractionGraph graph;
  graph.nodes.reserve(vehicles.size());
  std::vector<double> cos_h(vehicles.size()), sin_h(vehicles.size());
  std::vector<bool> usable(vehicles.size(), true);
  for (size_t i = 0; i < vehicles.size(); ++i) {
    graph.nodes.push_back(vehicles[i].state.id);
    try {
      const double h = heading(vehicles[i].params.path, vehicles[i].state.s);
      cos_h[i] = std::cos(h);
      sin_h[i] = std::sin(h);
    } catch (const DegenerateGeometryError&) {
      usable[i] = false;
      graph.degenerate.push_back(vehicles[i].state.id);
    }
  }
  std::sort(graph.nodes.begin(), graph.nodes.end());

  for (size_t i = 0; i < vehicles.size(); ++i) {
    if (!usable[i]) continue;
    for (size_t j = 0; j < vehicles.size(); ++j) {
      if (i == j) continue;
      const double dx = vehicles[j].state.p_x - vehicles[i].state.p_x;
      const double dy = vehicles[j].state.p_y - vehicles[i].state.p_y;
      const double dist = std::hypot(dx, dy);
      if (dist > model.range) continue;
      // Dot-product cone test; a coincident position counts as observed.
      if (dist > 0.0 && dx * cos_h[i] + dy * sin_h[i] < dist * cos_limit) continue;
      graph.edges.emplace_back(vehicles[i].state.id, vehicles[j].state.id);
    }
  }
  std::sort(graph.edges.begin(), graph.edges.end());
  std::sort(graph.degenerate.begin(), graph.degenerate.end());
  return graph;
}

SccDecomposition scc_decompose(const InteractionGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  std::map<int, int> index_of;
  for (int k = 0; k < n; ++k) {
    index_of[g.nodes[k]] = k;
  }

  std::vector<std::vector<int>> adj(n), radj(n);
  for (const auto& [from, to] : g.edges) {
    const auto it_from = index_of.find(from);
    const auto it_to = index_of.find(to);
    if (it_from == index_of.end() || it_to == index_of.end()) {
      throw std::invalid_argument("edge endpoint missing from node set");
    }
    if (from == to) {
      throw std::invalid_argument("self-edges are not allowed");
    }
    adj[it_from->second].push_back(it_to->second);
    radj[it_to->second].push_back(it_from->second);
  }

  // Pass 1: finish order on the forward graph.
  std::vector<bool> seen(n, false);
  std::vector<int> order;
  order.reserve(n);
  for (int k = 0; k < n; ++k) {
    if (!seen[k]) dfs_order(k, adj, seen, order);
  }

  // Pass 2: assign components on the transposed graph in reverse finish order.
  std::vector<int> assignment(n, -1);
  int n_components = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (assignment[*it] < 0) {
      dfs_assign(*it, n_components++, radj, assignment);
    }
  }

  SccDecomposition result;
  result.components.resize(n_components);
  result.outgoing.resize(n_components);
  for (int k = 0; k < n; ++k) {
    result.components[assignment[k]].push_back(g.nodes[k]);
  }
  std::vector<std::set<int>> out_sets(n_components);
  for (const auto& [from, to] : g.edges) {
    const int c_from = assignment[index_of[from]];
    const int c_to = assignment[index_of[to]];
    if (c_from != c_to) {
      out_sets[c_from].insert(to);
    }
  }
  for (int c = 0; c < n_components; ++c) {
    std::sort(result.components[c].begin(), result.components[c].end());
    result.outgoing[c].assign(out_sets[c].begin(), out_sets[c].end());
  }
  return result;
}

}  // namespace decnash
