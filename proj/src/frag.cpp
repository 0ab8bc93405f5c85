#include "fragflow/frag.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace fragflow::frag {

using chem::BondOrder;
using chem::Element;
using chem::MolGraph;

namespace {

bool is_carbonyl_carbon(const MolGraph& mol, int a) {
  if (mol.atom(a).element != Element::C) return false;
  for (int bi : mol.bonds_of(a)) {
    const auto& b = mol.bond(bi);
    if (b.order == BondOrder::Double && mol.atom(b.other(a)).element == Element::O)
      return true;
  }
  return false;
}

bool is_sp3_carbon(const MolGraph& mol, int a) {
  const auto& at = mol.atom(a);
  if (at.element != Element::C || at.aromatic) return false;
  for (int bi : mol.bonds_of(a))
    if (mol.bond(bi).order != BondOrder::Single) return false;
  return true;
}

bool adjacent_to_ring(const MolGraph& mol, int a) {
  for (int bi : mol.bonds_of(a))
    if (mol.atom_in_ring(mol.bond(bi).other(a))) return true;
  return false;
}

bool is_carbonyl_adjacent(const MolGraph& mol, int a) {
  for (int bi : mol.bonds_of(a))
    if (is_carbonyl_carbon(mol, mol.bond(bi).other(a))) return true;
  return false;
}

}  // namespace

// Simplified BRICS-style environment table. A bond qualifies only if it is a
// single, acyclic (bridge) bond, and one of the patterns below matches in
// either orientation:
//   R1  ring atom      -- chain carbon with >= 2 heavy neighbours
//   R2  carbonyl C     -- N                               (amides & co.)
//   R3  carbonyl C     -- O with 2 heavy neighbours       (esters)
//   R4  acyclic ether O -- sp3 C with >= 2 heavy neighbours
//   R5  acyclic N (non-acyl) -- ring atom
//   R6  sp3 C next to a ring -- sp3 C away from rings (both >= 2 neighbours)
//   R7  ring atom      -- ring atom                       (biaryl bridges)
bool bond_matches_cut_rule(const MolGraph& mol, int bond_idx) {
  const auto& b = mol.bond(bond_idx);
  if (b.order != BondOrder::Single || mol.bond_in_ring(bond_idx)) return false;
  auto match = [&](int u, int v) {
    const auto& au = mol.atom(u);
    const auto& av = mol.atom(v);
    if (au.element == Element::Star || av.element == Element::Star) return false;
    bool u_ring = mol.atom_in_ring(u), v_ring = mol.atom_in_ring(v);
    // R1
    if (u_ring && !v_ring && av.element == Element::C && mol.degree(v) >= 2)
      return true;
    // R2
    if (is_carbonyl_carbon(mol, u) && av.element == Element::N) return true;
    // R3
    if (is_carbonyl_carbon(mol, u) && av.element == Element::O && mol.degree(v) == 2)
      return true;
    // R4
    if (au.element == Element::O && !u_ring && mol.degree(u) == 2 &&
        is_sp3_carbon(mol, v) && mol.degree(v) >= 2 && !is_carbonyl_carbon(mol, v))
      return true;
    // R5
    if (au.element == Element::N && !u_ring && !is_carbonyl_adjacent(mol, u) && v_ring)
      return true;
    // R6
    if (is_sp3_carbon(mol, u) && is_sp3_carbon(mol, v) && !u_ring && !v_ring &&
        mol.degree(u) >= 2 && mol.degree(v) >= 2 && adjacent_to_ring(mol, u) &&
        !adjacent_to_ring(mol, v))
      return true;
    // R7
    if (u_ring && v_ring) return true;
    return false;
  };
  return match(b.a, b.b) || match(b.b, b.a);
}

Fragmentation fragment_molecule(const MolGraph& mol) {
  Fragmentation out;
  int n = mol.num_atoms();
  std::vector<bool> cut(mol.num_bonds(), false);
  for (int bi = 0; bi < mol.num_bonds(); ++bi)
    if (bond_matches_cut_rule(mol, bi)) {
      cut[bi] = true;
      out.cut_bonds.push_back(bi);
    }

  out.atom_fragment.assign(n, -1);
  for (int seed = 0; seed < n; ++seed) {
    if (out.atom_fragment[seed] != -1) continue;
    int fid = static_cast<int>(out.fragments.size());
    out.fragments.emplace_back();
    auto& frag = out.fragments.back();
    std::vector<int> stack{seed};
    out.atom_fragment[seed] = fid;
    while (!stack.empty()) {
      int a = stack.back();
      stack.pop_back();
      frag.atoms.push_back(a);
      for (int bi : mol.bonds_of(a)) {
        if (cut[bi]) continue;
        int v = mol.bond(bi).other(a);
        if (out.atom_fragment[v] == -1) {
          out.atom_fragment[v] = fid;
          stack.push_back(v);
        }
      }
    }
    std::sort(frag.atoms.begin(), frag.atoms.end());
  }
  for (int bi : out.cut_bonds) {
    const auto& b = mol.bond(bi);
    out.fragments[out.atom_fragment[b.a]].slots.emplace_back(b.a, bi);
    out.fragments[out.atom_fragment[b.b]].slots.emplace_back(b.b, bi);
  }
  for (auto& frag : out.fragments) {
    std::sort(frag.slots.begin(), frag.slots.end());
    frag.key = canonical_fragment_key(mol, frag.atoms, frag.slots,
                                      &frag.slot_to_canonical);
  }
  return out;
}

std::string canonical_fragment_key(const MolGraph& mol,
                                   const std::vector<int>& atoms,
                                   const std::vector<std::pair<int, int>>& slots,
                                   std::vector<int>* slot_to_canonical) {
  // Augmented graph: the fragment subgraph plus one wildcard atom per slot.
  MolGraph aug;
  std::vector<int> map(mol.num_atoms(), -1);
  for (int a : atoms) map[a] = aug.add_atom(mol.atom(a));
  for (const auto& b : mol.bonds())
    if (map[b.a] >= 0 && map[b.b] >= 0) aug.add_bond(map[b.a], map[b.b], b.order);
  std::vector<int> star_ids;
  for (const auto& [host, bond] : slots) {
    chem::Atom star;
    star.element = Element::Star;
    star.explicit_h = 0;
    int s = aug.add_atom(star);
    aug.add_bond(map[host], s, BondOrder::Single);
    star_ids.push_back(s);
  }
  aug.finalize();
  auto canon = chem::canonical_smiles_ex(aug);
  if (slot_to_canonical) {
    // canonical slot index = rank of the slot's star among stars by emission
    std::vector<int> emit_pos(aug.num_atoms(), -1);
    for (size_t k = 0; k < canon.emission_order.size(); ++k)
      emit_pos[canon.emission_order[k]] = static_cast<int>(k);
    std::vector<std::pair<int, int>> order;  // (emission pos, slot idx)
    for (size_t s = 0; s < star_ids.size(); ++s)
      order.emplace_back(emit_pos[star_ids[s]], static_cast<int>(s));
    std::sort(order.begin(), order.end());
    slot_to_canonical->assign(star_ids.size(), 0);
    for (size_t rank = 0; rank < order.size(); ++rank)
      (*slot_to_canonical)[order[rank].second] = static_cast<int>(rank);
  }
  return canon.smiles;
}

void Vocabulary::index_entries() {
  index_.clear();
  total_ = 0;
  for (size_t i = 0; i < entries_.size(); ++i) {
    auto& e = entries_[i];
    index_[e.key] = static_cast<int>(i);
    total_ += e.count;
    chem::ParseOptions opts;
    opts.allow_wildcard = true;
    e.graph = chem::parse_smiles(e.key, opts);
    e.star_atoms.clear();
    e.slot_atoms.clear();
    for (int a = 0; a < e.graph.num_atoms(); ++a)
      if (e.graph.atom(a).element == Element::Star) {
        if (e.graph.degree(a) != 1)
          throw FragError(FragError::Kind::BadVocabFile, "malformed wildcard in key");
        e.star_atoms.push_back(a);
        e.slot_atoms.push_back(e.graph.bond(e.graph.bonds_of(a)[0]).other(a));
      }
    e.arity = static_cast<int>(e.star_atoms.size());
  }
}

Vocabulary Vocabulary::build(const std::vector<MolGraph>& corpus) {
  if (corpus.empty()) throw FragError(FragError::Kind::EmptyCorpus, "empty corpus");
  std::map<std::string, long long> counts;
  for (const auto& mol : corpus) {
    auto f = fragment_molecule(mol);
    for (const auto& frag : f.fragments) ++counts[frag.key];
  }
  Vocabulary vocab;
  for (auto& [key, count] : counts) {
    VocabEntry e;
    e.key = key;
    e.count = count;
    vocab.entries_.push_back(std::move(e));
  }
  vocab.index_entries();
  return vocab;
}

int Vocabulary::id_of(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? -1 : it->second;
}

std::vector<double> Vocabulary::marginals() const {
  std::vector<double> p(entries_.size());
  for (size_t i = 0; i < entries_.size(); ++i)
    p[i] = static_cast<double>(entries_[i].count) / static_cast<double>(total_);
  return p;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FragError(FragError::Kind::BadVocabFile, "cannot write " + path);
  out << "key\tcount\n";
  for (const auto& e : entries_) out << e.key << "\t" << e.count << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FragError(FragError::Kind::BadVocabFile, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "key\tcount")
    throw FragError(FragError::Kind::BadVocabFile, "bad vocabulary header");
  Vocabulary vocab;
  std::string prev_key;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FragError(FragError::Kind::BadVocabFile, "bad vocabulary row");
    VocabEntry e;
    e.key = line.substr(0, tab);
    e.count = std::stoll(line.substr(tab + 1));
    if (e.count < 1 || (!prev_key.empty() && !(prev_key < e.key)))
      throw FragError(FragError::Kind::BadVocabFile, "vocabulary rows not sorted");
    prev_key = e.key;
    vocab.entries_.push_back(std::move(e));
  }
  if (vocab.entries_.empty())
    throw FragError(FragError::Kind::EmptyCorpus, "empty vocabulary");
  vocab.index_entries();
  return vocab;
}

uint64_t Vocabulary::digest() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& e : entries_) {
    feed(e.key);
    feed("\t" + std::to_string(e.count) + "\n");
  }
  return h;
}

}  // namespace fragflow::frag
