#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace fragflow::matching {

struct WeightedEdge {
  int u = 0;
  int v = 0;
  double w = 0.0;
};

// Maximum-weight matching on a general graph (Blossom, O(n^3)). Only edges
// with positive adjusted weight are ever selected; callers wanting maximum
// cardinality shift weights beforehand. Returns mate[v] (-1 if unmatched).
// Deterministic given input order. Weights are scaled to integers
// internally, so ties below ~1e-9 relative resolution may break either way.
std::vector<int> max_weight_matching(int n, const std::vector<WeightedEdge>& edges);

// Maximum-cardinality matching (unit weights).
std::vector<int> max_cardinality_matching(int n, const std::vector<std::pair<int, int>>& edges);

}  // namespace fragflow::matching
