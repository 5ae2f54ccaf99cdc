#pragma once

#include <string>
#include <vector>

#include "synctl/graph.hpp"

namespace synctl {

inline constexpr int kRootSentinel = -1;

// Actuator tree of one robot. The torso is a virtual root (sentinel -1), not
// an actuator; exactly the actuators get rows in adjacency/distance matrices.
struct MorphologyGraph {
  std::string robot_id;
  int state_dim = 0;
  std::vector<int> parent;  // parent[k] = index of k's parent actuator, or -1

  int num_actuators() const { return static_cast<int>(parent.size()); }

  // Throws InvalidMorphology on cycles, out-of-range parents, or K < 1.
  void validate() const;
};

// All-pairs hop counts between actuators.
struct DistanceMatrix {
  int n = 0;
  std::vector<int> d;  // row-major n*n

  int at(int i, int j) const { return d[static_cast<std::size_t>(i) * n + j]; }
  int& at(int i, int j) { return d[static_cast<std::size_t>(i) * n + j]; }
};

// Pre/in/post-order ranks of one actuator in the left-child-right-sibling
// binary tree; the triples of all actuators reconstruct the tree.
struct TraversalTriple {
  int pre = 0;
  int in = 0;
  int post = 0;
};

// Symmetric actuator adjacency: true iff parent/child, false diagonal.
BoolMat build_adjacency(const MorphologyGraph& g);

// Floyd-Warshall hop counts. Throws DisconnectedGraph if a pair is unreachable.
DistanceMatrix shortest_distances(const BoolMat& adj);

// LCRS traversal triples; children ordered by ascending actuator index.
std::vector<TraversalTriple> traversal_triples(const MorphologyGraph& g);

// JSON loader: {"robot_id": str, "state_dim": int, "parents": [int, ...]}.
MorphologyGraph load_morphology(const std::string& path);
MorphologyGraph morphology_from_json_text(const std::string& text);

}  // namespace synctl
