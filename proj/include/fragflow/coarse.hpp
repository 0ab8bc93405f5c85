#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fragflow/chem.hpp"
#include "fragflow/frag.hpp"

namespace fragflow::coarse {

class CoarseError : public std::runtime_error {
 public:
  enum class Kind { UnknownFragment, UnrealizedCoarseEdge, InvalidMatching };
  CoarseError(Kind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Fragment-level graph. Nodes carry vocabulary ids; edges are a symmetric
// boolean matrix without self-edges.
struct CoarseGraph {
  std::vector<int> node_ids;
  std::vector<uint8_t> adj;  // n*n flattened

  int n() const { return static_cast<int>(node_ids.size()); }
  bool edge(int i, int j) const { return adj[i * n() + j] != 0; }
  void set_edge(int i, int j, bool v) {
    adj[i * n() + j] = adj[j * n() + i] = v ? 1 : 0;
  }
  static CoarseGraph empty(int n) {
    CoarseGraph g;
    g.node_ids.assign(n, -1);
    g.adj.assign(static_cast<size_t>(n) * n, 0);
    return g;
  }
  int edge_count() const;
  bool connected() const;
};

struct SlotRef {
  int node = 0;
  int slot = 0;  // canonical slot index within the fragment
  bool operator==(const SlotRef&) const = default;
};

// One candidate junction pairing between two coarse-adjacent fragments.
struct CandidatePair {
  SlotRef a, b;
};

// Junction-slot matching instance: match nodes are slots, candidate edges
// join slots of distinct fragments with a coarse edge between them.
struct MatchProblem {
  std::vector<int> slot_base;  // per node, first global slot id
  int total_slots = 0;
  std::vector<CandidatePair> candidates;

  int slot_id(const SlotRef& s) const { return slot_base[s.node] + s.slot; }
};

MatchProblem build_match_problem(const CoarseGraph& g, const frag::Vocabulary& vocab);

// Selected candidate indices; no slot is used twice.
struct Matching {
  std::vector<int> selected;
};

// Maximum-weight matching over the candidate slot pairs. All weights are
// shifted by 1 + sum |w| so maximum weight implies maximum cardinality
// (every coarse edge wants realizing; raw logits may be negative).
Matching blossom_match(const MatchProblem& p, const std::vector<double>& weights);

struct ToCoarseResult {
  CoarseGraph graph;
  Matching ground_truth;       // indices into build_match_problem(graph).candidates
  MatchProblem problem;
  // per coarse node, the extracted fragment's molecule atoms (for encoders)
  std::vector<std::vector<int>> node_atoms;
};

// Fragments the molecule and lifts it to the coarse level; the ground-truth
// matching records which canonical slot pairs were bonded.
ToCoarseResult to_coarse(const chem::MolGraph& mol, const frag::Vocabulary& vocab);

// Union of all fragment instance graphs (wildcard atoms included, marking
// junctions) plus bookkeeping to find slot hosts.
struct Assembly {
  chem::MolGraph graph;
  std::vector<int> node_of_atom;
  std::vector<std::vector<int>> slot_host;  // [node][slot] -> assembly atom
  std::vector<std::vector<int>> slot_star;  // [node][slot] -> wildcard atom
};

Assembly assemble(const CoarseGraph& g, const frag::Vocabulary& vocab);

// Glues fragments along the matched slot pairs: wildcards vanish, each
// matched pair becomes one single bond, unmatched slots cap with hydrogen.
// Throws UnrealizedCoarseEdge if some coarse edge gets no matched pair.
chem::MolGraph reconstruct(const CoarseGraph& g, const Matching& matching,
                           const frag::Vocabulary& vocab);

}  // namespace fragflow::coarse
