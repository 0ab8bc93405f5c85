#include "fragflow/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fragflow/blossom.hpp"

namespace fragflow::coarse {

using chem::BondOrder;
using chem::Element;
using chem::MolGraph;

int CoarseGraph::edge_count() const {
  int c = 0;
  for (int i = 0; i < n(); ++i)
    for (int j = i + 1; j < n(); ++j) c += edge(i, j) ? 1 : 0;
  return c;
}

bool CoarseGraph::connected() const {
  if (n() == 0) return true;
  std::vector<bool> seen(n(), false);
  std::vector<int> stack{0};
  seen[0] = true;
  int visited = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v = 0; v < n(); ++v)
      if (!seen[v] && edge(u, v)) {
        seen[v] = true;
        ++visited;
        stack.push_back(v);
      }
  }
  return visited == n();
}

MatchProblem build_match_problem(const CoarseGraph& g, const frag::Vocabulary& vocab) {
  MatchProblem p;
  p.slot_base.resize(g.n());
  for (int i = 0; i < g.n(); ++i) {
    p.slot_base[i] = p.total_slots;
    p.total_slots += vocab.entry(g.node_ids[i]).arity;
  }
  for (int i = 0; i < g.n(); ++i)
    for (int j = i + 1; j < g.n(); ++j) {
      if (!g.edge(i, j)) continue;
      int ai = vocab.entry(g.node_ids[i]).arity;
      int aj = vocab.entry(g.node_ids[j]).arity;
      for (int si = 0; si < ai; ++si)
        for (int sj = 0; sj < aj; ++sj)
          p.candidates.push_back({{i, si}, {j, sj}});
    }
  return p;
}

Matching blossom_match(const MatchProblem& p, const std::vector<double>& weights) {
  if (weights.size() != p.candidates.size())
    throw CoarseError(CoarseError::Kind::InvalidMatching,
                      "weight count does not match candidate count");
  Matching m;
  if (p.candidates.empty()) return m;
  double shift = 1.0;
  for (double w : weights) {
    if (!std::isfinite(w))
      throw CoarseError(CoarseError::Kind::InvalidMatching, "non-finite weight");
    shift += std::abs(w);
  }
  std::vector<matching::WeightedEdge> edges;
  edges.reserve(p.candidates.size());
  for (size_t c = 0; c < p.candidates.size(); ++c)
    edges.push_back({p.slot_id(p.candidates[c].a), p.slot_id(p.candidates[c].b),
                     weights[c] + shift});
  auto mate = matching::max_weight_matching(p.total_slots, edges);
  // map matched slot pairs back to the best candidate between them
  std::map<std::pair<int, int>, int> best;
  for (size_t c = 0; c < p.candidates.size(); ++c) {
    int u = p.slot_id(p.candidates[c].a), v = p.slot_id(p.candidates[c].b);
    auto key = std::minmax(u, v);
    auto it = best.find({key.first, key.second});
    if (it == best.end() || weights[c] > weights[it->second])
      best[{key.first, key.second}] = static_cast<int>(c);
  }
  for (int u = 0; u < p.total_slots; ++u) {
    int v = mate[u];
    if (v > u) m.selected.push_back(best.at({u, v}));
  }
  std::sort(m.selected.begin(), m.selected.end());
  return m;
}

ToCoarseResult to_coarse(const MolGraph& mol, const frag::Vocabulary& vocab) {
  auto f = frag::fragment_molecule(mol);
  ToCoarseResult out;
  int n = static_cast<int>(f.fragments.size());
  out.graph = CoarseGraph::empty(n);
  out.node_atoms.resize(n);
  for (int i = 0; i < n; ++i) {
    int id = vocab.id_of(f.fragments[i].key);
    if (id < 0)
      throw CoarseError(CoarseError::Kind::UnknownFragment,
                        "fragment key not in vocabulary: " + f.fragments[i].key);
    out.graph.node_ids[i] = id;
    out.node_atoms[i] = f.fragments[i].atoms;
  }
  // coarse edges from cut bonds; remember the slot pair of each cut
  struct GtPair {
    SlotRef a, b;
  };
  std::vector<GtPair> gt;
  for (int cb : f.cut_bonds) {
    const auto& bond = mol.bond(cb);
    int fi = f.atom_fragment[bond.a];
    int fj = f.atom_fragment[bond.b];
    out.graph.set_edge(fi, fj, true);
    auto slot_of = [&](int frag_idx, int atom) {
      const auto& frag = f.fragments[frag_idx];
      for (size_t s = 0; s < frag.slots.size(); ++s)
        if (frag.slots[s].first == atom && frag.slots[s].second == cb)
          return frag.slot_to_canonical[s];
      throw CoarseError(CoarseError::Kind::InvalidMatching, "slot lookup failed");
    };
    gt.push_back({{fi, slot_of(fi, bond.a)}, {fj, slot_of(fj, bond.b)}});
  }
  out.problem = build_match_problem(out.graph, vocab);
  for (const auto& pair : gt) {
    bool found = false;
    for (size_t c = 0; c < out.problem.candidates.size(); ++c) {
      const auto& cand = out.problem.candidates[c];
      if ((cand.a == pair.a && cand.b == pair.b) ||
          (cand.a == pair.b && cand.b == pair.a)) {
        out.ground_truth.selected.push_back(static_cast<int>(c));
        found = true;
        break;
      }
    }
    if (!found)
      throw CoarseError(CoarseError::Kind::InvalidMatching,
                        "ground-truth pair missing from candidates");
  }
  std::sort(out.ground_truth.selected.begin(), out.ground_truth.selected.end());
  return out;
}

Assembly assemble(const CoarseGraph& g, const frag::Vocabulary& vocab) {
  Assembly a;
  a.slot_host.resize(g.n());
  a.slot_star.resize(g.n());
  for (int i = 0; i < g.n(); ++i) {
    const auto& entry = vocab.entry(g.node_ids[i]);
    std::vector<int> map(entry.graph.num_atoms());
    for (int v = 0; v < entry.graph.num_atoms(); ++v) {
      map[v] = a.graph.add_atom(entry.graph.atom(v));
      a.node_of_atom.push_back(i);
    }
    for (const auto& b : entry.graph.bonds())
      a.graph.add_bond(map[b.a], map[b.b], b.order);
    for (int s = 0; s < entry.arity; ++s) {
      a.slot_host[i].push_back(map[entry.slot_atoms[s]]);
      a.slot_star[i].push_back(map[entry.star_atoms[s]]);
    }
  }
  a.graph.finalize();
  return a;
}

MolGraph reconstruct(const CoarseGraph& g, const Matching& matching,
                     const frag::Vocabulary& vocab) {
  MatchProblem p = build_match_problem(g, vocab);
  // validate matching legality and coverage
  std::vector<int> slot_used(p.total_slots, 0);
  std::vector<uint8_t> edge_realized(static_cast<size_t>(g.n()) * g.n(), 0);
  for (int c : matching.selected) {
    if (c < 0 || c >= static_cast<int>(p.candidates.size()))
      throw CoarseError(CoarseError::Kind::InvalidMatching, "candidate out of range");
    const auto& cand = p.candidates[c];
    if (++slot_used[p.slot_id(cand.a)] > 1 || ++slot_used[p.slot_id(cand.b)] > 1)
      throw CoarseError(CoarseError::Kind::InvalidMatching, "slot used twice");
    edge_realized[cand.a.node * g.n() + cand.b.node] = 1;
    edge_realized[cand.b.node * g.n() + cand.a.node] = 1;
  }
  for (int i = 0; i < g.n(); ++i)
    for (int j = i + 1; j < g.n(); ++j)
      if (g.edge(i, j) && !edge_realized[i * g.n() + j])
        throw CoarseError(CoarseError::Kind::UnrealizedCoarseEdge,
                          "coarse edge " + std::to_string(i) + "-" +
                              std::to_string(j) + " received no matched slot pair");

  // Build the molecule: fragment atoms without wildcards.
  MolGraph mol;
  std::vector<std::vector<int>> map(g.n());
  std::vector<std::vector<int>> host(g.n());  // [node][slot] -> molecule atom
  std::vector<int> cap_count;                 // unmatched-slot hydrogen caps
  for (int i = 0; i < g.n(); ++i) {
    const auto& entry = vocab.entry(g.node_ids[i]);
    map[i].assign(entry.graph.num_atoms(), -1);
    std::vector<bool> is_star(entry.graph.num_atoms(), false);
    for (int s : entry.star_atoms) is_star[s] = true;
    for (int v = 0; v < entry.graph.num_atoms(); ++v) {
      if (is_star[v]) continue;
      map[i][v] = mol.add_atom(entry.graph.atom(v));
      cap_count.push_back(0);
    }
    for (const auto& b : entry.graph.bonds())
      if (map[i][b.a] >= 0 && map[i][b.b] >= 0)
        mol.add_bond(map[i][b.a], map[i][b.b], b.order);
    for (int s = 0; s < entry.arity; ++s)
      host[i].push_back(map[i][entry.slot_atoms[s]]);
  }
  for (int c : matching.selected) {
    const auto& cand = p.candidates[c];
    int u = host[cand.a.node][cand.a.slot];
    int v = host[cand.b.node][cand.b.slot];
    if (!mol.find_bond(u, v)) mol.add_bond(u, v, BondOrder::Single);
    // a duplicate atom pair collapses to the one bond already added
  }
  // Unmatched slots cap with hydrogen; pin the host's count so aromatic
  // nitrogens keep their donor class.
  for (int i = 0; i < g.n(); ++i) {
    const auto& entry = vocab.entry(g.node_ids[i]);
    for (int s = 0; s < entry.arity; ++s) {
      if (slot_used[p.slot_base[i] + s]) continue;
      int atom = host[i][s];
      int inst_h = entry.graph.hydrogen_count(entry.slot_atoms[s]);
      auto& at = mol.atom_mutable(atom);
      int base = at.explicit_h >= 0 ? at.explicit_h : inst_h;
      at.explicit_h = base + 1;
    }
  }
  mol.finalize();
  return mol;
}

}  // namespace fragflow::coarse
