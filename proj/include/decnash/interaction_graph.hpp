#pragma once

#include <numbers>
#include <utility>
#include <vector>

#include "decnash/vehicle.hpp"

namespace decnash {

// Who can see whom. Vehicle i observes j when j lies inside a forward cone
// anchored at i's position and aligned with i's path heading.
struct ObservationModel {
  double range = 20.0;                                // meters
  double half_angle = 2.0 * std::numbers::pi / 3.0;   // radians (120 degrees)
};

void validate(const ObservationModel& model);

struct InteractionGraph {
  std::vector<int> nodes;                  // sorted vehicle ids
  std::vector<std::pair<int, int>> edges;  // (i, j): i observes j; sorted
  std::vector<int> degenerate;             // ids with no usable heading (observe nothing)
};

struct SccDecomposition {
  std::vector<std::vector<int>> components;  // disjoint, each sorted, cover all nodes
  std::vector<std::vector<int>> outgoing;    // per component: observed ids outside it, sorted
};

InteractionGraph build_graph(const std::vector<WorldVehicle>& vehicles,
                             const ObservationModel& model);

// Kosaraju's two-pass decomposition into strongly connected components.
SccDecomposition scc_decompose(const InteractionGraph& g);

}  // namespace decnash
