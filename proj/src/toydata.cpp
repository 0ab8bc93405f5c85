#include <algorithm>
#include <set>

#include "fragflow/app.hpp"
#include "fragflow/rng.hpp"

namespace fragflow::app {

namespace {

using chem::BondOrder;
using chem::Element;
using chem::MolGraph;

struct Block {
  const char* smiles;  // wildcard-marked attachment points
  double weight;
};

// rings and ring systems
const Block kRings[] = {
    {"[*]c1ccccc1", 6.0},   {"[*]c1ccc([*])cc1", 3.0}, {"[*]c1cccnc1", 2.0},
    {"[*]c1ccncc1", 1.5},   {"[*]c1ccco1", 1.2},       {"[*]c1cccs1", 1.2},
    {"[*]c1cc[nH]c1", 0.8}, {"[*]C1CCCCC1", 2.0},      {"[*]C1CCC([*])CC1", 1.0},
    {"[*]N1CCCCC1", 1.5},   {"[*]N1CCOCC1", 1.5},      {"[*]C1CCCC1", 1.0},
    {"[*]C1CCN([*])CC1", 1.0}, {"[*]c1ccc2ccccc2c1", 0.6},
    {"[*]c1ccc(cc1)C(F)(F)F", 0.5},
};

// two-slot linkers
const Block kLinkers[] = {
    {"[*]C[*]", 2.0},       {"[*]CC[*]", 2.5},      {"[*]CCC[*]", 1.0},
    {"[*]C(=O)N[*]", 2.5},  {"[*]C(=O)O[*]", 1.5},  {"[*]C(=O)[*]", 1.0},
    {"[*]O[*]", 1.5},       {"[*]CN([*])C", 0.8},   {"[*]C(C)C[*]", 0.8},
    {"[*]OCC[*]", 0.8},     {"[*]NC(=O)C[*]", 0.8},
};

// one-slot closers
const Block kTerminals[] = {
    {"[*]C", 3.0},        {"[*]CC", 2.0},        {"[*]O", 1.5},
    {"[*]OC", 1.5},       {"[*]N", 1.0},         {"[*]F", 1.0},
    {"[*]Cl", 1.0},       {"[*]Br", 0.5},        {"[*]C#N", 0.7},
    {"[*]C(F)(F)F", 0.7}, {"[*]C(C)C", 1.0},     {"[*]C(=O)O", 0.7},
    {"[*]C(=O)N", 0.7},   {"[*]N(C)C", 0.6},     {"[*]C(=O)C", 0.6},
};

struct ParsedBlock {
  MolGraph graph;          // wildcard atoms removed
  std::vector<int> hosts;  // attachment atoms, one per original wildcard
};

ParsedBlock parse_block(const char* smiles) {
  chem::ParseOptions opts;
  opts.allow_wildcard = true;
  MolGraph with_stars = chem::parse_smiles(smiles, opts);
  ParsedBlock out;
  std::vector<int> map(with_stars.num_atoms(), -1);
  for (int a = 0; a < with_stars.num_atoms(); ++a) {
    if (with_stars.atom(a).element == Element::Star) continue;
    map[a] = out.graph.add_atom(with_stars.atom(a));
  }
  for (const auto& b : with_stars.bonds()) {
    if (map[b.a] >= 0 && map[b.b] >= 0) {
      out.graph.add_bond(map[b.a], map[b.b], b.order);
    } else {
      out.hosts.push_back(map[b.a] >= 0 ? map[b.a] : map[b.b]);
    }
  }
  return out;
}

const std::vector<ParsedBlock>& ring_blocks() {
  static const std::vector<ParsedBlock> blocks = [] {
    std::vector<ParsedBlock> v;
    for (const auto& b : kRings) v.push_back(parse_block(b.smiles));
    return v;
  }();
  return blocks;
}
const std::vector<ParsedBlock>& linker_blocks() {
  static const std::vector<ParsedBlock> blocks = [] {
    std::vector<ParsedBlock> v;
    for (const auto& b : kLinkers) v.push_back(parse_block(b.smiles));
    return v;
  }();
  return blocks;
}
const std::vector<ParsedBlock>& terminal_blocks() {
  static const std::vector<ParsedBlock> blocks = [] {
    std::vector<ParsedBlock> v;
    for (const auto& b : kTerminals) v.push_back(parse_block(b.smiles));
    return v;
  }();
  return blocks;
}

std::vector<double> weights_of(const Block* blocks, size_t n) {
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) w[i] = blocks[i].weight;
  return w;
}

// Growing molecule: blocks glued star-to-star with single bonds.
struct Builder {
  MolGraph mol;
  std::vector<int> open_slots;  // atom indices with a free valence

  // returns the first slot of the added block, already bonded when attach >= 0
  void add(const ParsedBlock& block, int attach_slot_atom) {
    std::vector<int> map(block.graph.num_atoms());
    for (int a = 0; a < block.graph.num_atoms(); ++a)
      map[a] = mol.add_atom(block.graph.atom(a));
    for (const auto& b : block.graph.bonds())
      mol.add_bond(map[b.a], map[b.b], b.order);
    bool bonded = false;
    for (int host : block.hosts) {
      if (!bonded && attach_slot_atom >= 0) {
        mol.add_bond(attach_slot_atom, map[host], BondOrder::Single);
        bonded = true;
      } else {
        open_slots.push_back(map[host]);
      }
    }
  }
};

}  // namespace

std::vector<std::string> toy_corpus(int n, uint64_t seed) {
  rng::Engine rng(rng::splitmix64(seed ^ 0x746f79636f727bULL));
  const auto& rings = ring_blocks();
  const auto& linkers = linker_blocks();
  const auto& terminals = terminal_blocks();
  static const std::vector<double> ring_w = weights_of(kRings, std::size(kRings));
  static const std::vector<double> link_w = weights_of(kLinkers, std::size(kLinkers));
  static const std::vector<double> term_w =
      weights_of(kTerminals, std::size(kTerminals));

  std::set<std::string> seen;
  std::vector<std::string> out;
  int guard = 0;
  while (static_cast<int>(out.size()) < n && guard < n * 200) {
    ++guard;
    int target_blocks = 2 + rng.categorical({0.15, 0.35, 0.3, 0.15, 0.05});
    Builder b;
    b.add(rings[rng.categorical(ring_w)], -1);
    int placed = 1;
    while (!b.open_slots.empty()) {
      int slot_idx = rng.uniform_int(static_cast<int>(b.open_slots.size()));
      int slot_atom = b.open_slots[slot_idx];
      b.open_slots.erase(b.open_slots.begin() + slot_idx);
      if (placed >= target_blocks) {
        b.add(terminals[rng.categorical(term_w)], slot_atom);
      } else {
        double u = rng.uniform();
        if (u < 0.40)
          b.add(rings[rng.categorical(ring_w)], slot_atom);
        else if (u < 0.75)
          b.add(linkers[rng.categorical(link_w)], slot_atom);
        else
          b.add(terminals[rng.categorical(term_w)], slot_atom);
      }
      ++placed;
    }
    try {
      b.mol.finalize();
      if (b.mol.num_atoms() > 45) continue;
      std::string canonical = chem::canonical_smiles(b.mol);
      if (seen.insert(canonical).second) out.push_back(canonical);
    } catch (const chem::SmilesError&) {
      continue;  // rare valence clash from stacked substitutions
    }
  }
  if (static_cast<int>(out.size()) < n)
    throw DataError("toy corpus generator exhausted attempts");
  return out;
}

}  // namespace fragflow::app
