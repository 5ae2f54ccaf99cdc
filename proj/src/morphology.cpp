#include "synctl/morphology.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace synctl {

void MorphologyGraph::validate() const {
  const int k = num_actuators();
  require(k >= 1, "InvalidMorphology", "robot needs at least one actuator");
  for (int i = 0; i < k; ++i) {
    const int p = parent[static_cast<std::size_t>(i)];
    require(p == kRootSentinel || (0 <= p && p < k), "InvalidMorphology",
            "parent index out of range at actuator " + std::to_string(i));
    require(p != i, "InvalidMorphology", "actuator " + std::to_string(i) +
                                             " is its own parent");
  }
  // every actuator must reach the sentinel without revisiting a node
  for (int i = 0; i < k; ++i) {
    int cur = i, hops = 0;
    while (cur != kRootSentinel) {
      cur = parent[static_cast<std::size_t>(cur)];
      require(++hops <= k, "InvalidMorphology",
              "cycle through actuator " + std::to_string(i));
    }
  }
}

BoolMat build_adjacency(const MorphologyGraph& g) {
  g.validate();
  const int k = g.num_actuators();
  BoolMat adj(k, false);
  for (int i = 0; i < k; ++i) {
    const int p = g.parent[static_cast<std::size_t>(i)];
    if (p != kRootSentinel) {
      adj.set(i, p, true);
      adj.set(p, i, true);
    }
  }
  return adj;
}

DistanceMatrix shortest_distances(const BoolMat& adj) {
  const int n = adj.n;
  const int inf = n + 1;  // strictly above any true hop count
  DistanceMatrix dist;
  dist.n = n;
  dist.d.assign(static_cast<std::size_t>(n) * n, inf);
  for (int i = 0; i < n; ++i) {
    dist.at(i, i) = 0;
    for (int j = 0; j < n; ++j)
      if (adj.at(i, j)) dist.at(i, j) = 1;
  }
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i) {
      const int dim = dist.at(i, m);
      if (dim >= inf) continue;
      for (int j = 0; j < n; ++j)
        dist.at(i, j) = std::min(dist.at(i, j), dim + dist.at(m, j));
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      require(dist.at(i, j) < inf, "DisconnectedGraph",
              "actuators " + std::to_string(i) + " and " + std::to_string(j) +
                  " are unreachable");
  return dist;
}

namespace {

// Nodes 0..K-1 are actuators; K stands for the virtual root. LCRS: first
// child becomes the left child, next sibling (ascending index) the right.
struct LcrsTree {
  std::vector<int> left, right;
  int root;  // first actuator attached to the virtual root
};

LcrsTree to_lcrs(const MorphologyGraph& g) {
  const int k = g.num_actuators();
  std::vector<std::vector<int>> children(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i < k; ++i) {
    const int p = g.parent[static_cast<std::size_t>(i)];
    children[p == kRootSentinel ? static_cast<std::size_t>(k)
                                : static_cast<std::size_t>(p)]
        .push_back(i);
  }
  for (auto& c : children) std::sort(c.begin(), c.end());

  LcrsTree t;
  t.left.assign(static_cast<std::size_t>(k), -1);
  t.right.assign(static_cast<std::size_t>(k), -1);
  for (int p = 0; p < k; ++p) {
    const auto& c = children[static_cast<std::size_t>(p)];
    if (!c.empty()) t.left[static_cast<std::size_t>(p)] = c.front();
    for (std::size_t j = 0; j + 1 < c.size(); ++j)
      t.right[static_cast<std::size_t>(c[j])] = c[j + 1];
  }
  const auto& roots = children[static_cast<std::size_t>(k)];
  require(!roots.empty(), "InvalidMorphology", "no actuator attached to root");
  t.root = roots.front();
  for (std::size_t j = 0; j + 1 < roots.size(); ++j)
    t.right[static_cast<std::size_t>(roots[j])] = roots[j + 1];
  return t;
}

void pre_order(const LcrsTree& t, int node, int& rank, std::vector<TraversalTriple>& out) {
  if (node < 0) return;
  out[static_cast<std::size_t>(node)].pre = rank++;
  pre_order(t, t.left[static_cast<std::size_t>(node)], rank, out);
  pre_order(t, t.right[static_cast<std::size_t>(node)], rank, out);
}

void in_order(const LcrsTree& t, int node, int& rank, std::vector<TraversalTriple>& out) {
  if (node < 0) return;
  in_order(t, t.left[static_cast<std::size_t>(node)], rank, out);
  out[static_cast<std::size_t>(node)].in = rank++;
  in_order(t, t.right[static_cast<std::size_t>(node)], rank, out);
}

void post_order(const LcrsTree& t, int node, int& rank, std::vector<TraversalTriple>& out) {
  if (node < 0) return;
  post_order(t, t.left[static_cast<std::size_t>(node)], rank, out);
  post_order(t, t.right[static_cast<std::size_t>(node)], rank, out);
  out[static_cast<std::size_t>(node)].post = rank++;
}

}  // namespace

std::vector<TraversalTriple> traversal_triples(const MorphologyGraph& g) {
  g.validate();
  const LcrsTree t = to_lcrs(g);
  std::vector<TraversalTriple> out(static_cast<std::size_t>(g.num_actuators()));
  int rank = 0;
  pre_order(t, t.root, rank, out);
  rank = 0;
  in_order(t, t.root, rank, out);
  rank = 0;
  post_order(t, t.root, rank, out);
  return out;
}

MorphologyGraph morphology_from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  require(!j.is_discarded(), "InvalidMorphology", "malformed morphology JSON");
  require(j.contains("robot_id") && j.contains("state_dim") && j.contains("parents"),
          "InvalidMorphology", "morphology JSON needs robot_id, state_dim, parents");
  MorphologyGraph g;
  g.robot_id = j.at("robot_id").get<std::string>();
  g.state_dim = j.at("state_dim").get<int>();
  g.parent = j.at("parents").get<std::vector<int>>();
  require(g.state_dim > 0, "InvalidMorphology", "state_dim must be positive");
  g.validate();
  return g;
}

MorphologyGraph load_morphology(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "InvalidMorphology", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return morphology_from_json_text(ss.str());
}

}  // namespace synctl
