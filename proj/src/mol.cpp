#include "fragflow/chem.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "fragflow/blossom.hpp"

namespace fragflow::chem {

namespace {

struct ElementInfo {
  const char* symbol;
  double mass;
  std::vector<int> valences;
};

// Valence table used for implicit-hydrogen filling and the validity check.
const ElementInfo kElements[kNumElements] = {
    {"B", 10.811, {3}},      {"C", 12.011, {4}},      {"N", 14.007, {3}},
    {"O", 15.999, {2}},      {"F", 18.998, {1}},      {"Si", 28.086, {4}},
    {"P", 30.974, {3, 5}},   {"S", 32.060, {2, 4, 6}}, {"Cl", 35.453, {1}},
    {"As", 74.922, {3, 5}},  {"Se", 78.971, {2, 4, 6}}, {"Br", 79.904, {1}},
    {"I", 126.904, {1}},     {"*", 0.0, {1}},
};

constexpr double kHydrogenMass = 1.008;

int order_value(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;  // kekulized contribution added separately
  }
  return 1;
}

}  // namespace

const char* element_symbol(Element e) { return kElements[static_cast<int>(e)].symbol; }
double atomic_mass(Element e) { return kElements[static_cast<int>(e)].mass; }
const std::vector<int>& element_valences(Element e) {
  return kElements[static_cast<int>(e)].valences;
}

int MolGraph::add_atom(const Atom& atom) {
  atoms_.push_back(atom);
  adj_.emplace_back();
  finalized_ = false;
  return static_cast<int>(atoms_.size()) - 1;
}

int MolGraph::add_bond(int a, int b, BondOrder order) {
  if (a == b) throw SmilesError(SmilesError::Kind::Syntax, "self bond");
  if (find_bond(a, b))
    throw SmilesError(SmilesError::Kind::Syntax, "duplicate bond");
  bonds_.push_back({a, b, order});
  int idx = static_cast<int>(bonds_.size()) - 1;
  adj_[a].push_back(idx);
  adj_[b].push_back(idx);
  finalized_ = false;
  return idx;
}

std::optional<int> MolGraph::find_bond(int a, int b) const {
  for (int bi : adj_[a]) {
    const Bond& bd = bonds_[bi];
    if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) return bi;
  }
  return std::nullopt;
}

void MolGraph::perceive_rings() {
  int n = num_atoms();
  int m = num_bonds();
  ring_bond_.assign(m, false);
  ring_atom_.assign(n, false);

  // Bridges via iterative Tarjan; a bond lies on a cycle iff it is not a bridge.
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  n_components_ = 0;
  for (int root = 0; root < n; ++root) {
    if (disc[root] != -1) continue;
    ++n_components_;
    // stack of (atom, incoming bond, next adjacency index)
    std::vector<std::array<int, 3>> stack{{root, -1, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      auto& [u, in_bond, it] = stack.back();
      if (it < static_cast<int>(adj_[u].size())) {
        int bi = adj_[u][it++];
        if (bi == in_bond) continue;
        int v = bonds_[bi].other(u);
        if (disc[v] == -1) {
          disc[v] = low[v] = timer++;
          stack.push_back({v, bi, 0});
        } else {
          low[u] = std::min(low[u], disc[v]);
          ring_bond_[bi] = true;  // non-tree edge always lies on a cycle
        }
      } else {
        int u_done = u, tree_bond = in_bond;
        stack.pop_back();
        if (!stack.empty()) {
          int parent = stack.back()[0];
          low[parent] = std::min(low[parent], low[u_done]);
          if (low[u_done] <= disc[parent] && tree_bond >= 0)
            ring_bond_[tree_bond] = true;  // not a bridge
        }
      }
    }
  }
  for (int bi = 0; bi < m; ++bi)
    if (ring_bond_[bi]) {
      ring_atom_[bonds_[bi].a] = true;
      ring_atom_[bonds_[bi].b] = true;
    }

  // Enumerate simple rings up to length 8 (ample for aromatic perception and
  // the aromatic-ring descriptor). DFS from each atom over ring bonds only;
  // dedup by sorted atom set.
  rings_.clear();
  std::set<std::vector<int>> seen;
  std::vector<int> path;
  std::vector<bool> on_path(n, false);
  std::function<void(int, int, int)> dfs = [&](int start, int u, int in_bond) {
    path.push_back(u);
    on_path[u] = true;
    for (int bi : adj_[u]) {
      if (bi == in_bond || !ring_bond_[bi]) continue;
      int v = bonds_[bi].other(u);
      if (v == start && path.size() >= 3) {
        std::vector<int> key = path;
        std::sort(key.begin(), key.end());
        if (seen.insert(key).second) rings_.push_back(path);
      } else if (!on_path[v] && v > start && path.size() < 8) {
        dfs(start, v, bi);
      }
    }
    path.pop_back();
    on_path[u] = false;
  };
  for (int a = 0; a < n; ++a)
    if (ring_atom_[a]) dfs(a, a, -1);
}

namespace {

bool sp2_candidate_element(Element e) {
  switch (e) {
    case Element::B:
    case Element::C:
    case Element::N:
    case Element::O:
    case Element::P:
    case Element::S:
    case Element::Se:
    case Element::As:
      return true;
    default:
      return false;
  }
}

}  // namespace

void MolGraph::perceive_aromaticity() {
  int n = num_atoms();

  // Non-ring bonds written aromatic (implicit bond between two lowercase
  // atoms, e.g. the biphenyl bridge) demote to single.
  for (auto& b : bonds_)
    if (b.order == BondOrder::Aromatic && !ring_bond_[&b - bonds_.data()])
      b.order = BondOrder::Single;

  // Upgrade Kekule-style rings: 5-7-membered rings of sp2-capable atoms
  // where every pi contribution is in-ring and the electron count satisfies
  // 4k+2. Exocyclic double bonds disqualify the ring. Iterated to a fixpoint
  // so fused systems aromatize ring by ring; atoms already aromatic count
  // with their delocalized contribution.
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<int> double_deg(n, 0), triple_deg(n, 0), order_sum(n, 0);
    for (const auto& b : bonds_) {
      int val = order_value(b.order);
      order_sum[b.a] += val;
      order_sum[b.b] += val;
      if (b.order == BondOrder::Double) {
        ++double_deg[b.a];
        ++double_deg[b.b];
      }
      if (b.order == BondOrder::Triple) {
        ++triple_deg[b.a];
        ++triple_deg[b.b];
      }
    }
    auto lone_pair_donor = [&](int a) {
      const Atom& at = atoms_[a];
      switch (at.element) {
        case Element::O:
        case Element::S:
        case Element::Se:
          return true;
        case Element::N:
        case Element::P:
        case Element::As: {
          int h = at.explicit_h >= 0
                      ? at.explicit_h
                      : std::max(0, element_valences(at.element)[0] - order_sum[a]);
          return h >= 1 || degree(a) >= 3;
        }
        default:
          return false;
      }
    };
    for (const auto& ring : rings_) {
      if (ring.size() < 5 || ring.size() > 7) continue;
      bool all_arom = true;
      for (int a : ring) all_arom = all_arom && atoms_[a].aromatic;
      if (all_arom) continue;
      std::vector<bool> in_ring(n, false);
      for (int a : ring) in_ring[a] = true;
      int pi = 0;
      bool ok = true;
      std::vector<std::pair<int, int>> pin_h;
      for (int a : ring) {
        const Atom& at = atoms_[a];
        if (at.aromatic) {
          pi += lone_pair_donor(a) ? 2 : 1;
          continue;
        }
        if (!sp2_candidate_element(at.element) || triple_deg[a] > 0 ||
            double_deg[a] > 1) {
          ok = false;
          break;
        }
        if (double_deg[a] == 1) {
          bool partner_in = false;
          for (int bi : adj_[a]) {
            const Bond& bd = bonds_[bi];
            if (bd.order == BondOrder::Double && in_ring[bd.other(a)]) partner_in = true;
          }
          if (!partner_in) {
            ok = false;
            break;
          }
          pi += 1;
        } else if (at.element == Element::B) {
          pi += 0;  // empty p orbital
        } else if (lone_pair_donor(a)) {
          pi += 2;
          if (at.element == Element::N || at.element == Element::P ||
              at.element == Element::As) {
            int h = at.explicit_h >= 0
                        ? at.explicit_h
                        : std::max(0, element_valences(at.element)[0] - order_sum[a]);
            pin_h.emplace_back(a, h);  // keep the H that made it a donor
          }
        } else {
          ok = false;
          break;
        }
      }
      if (!ok || pi % 4 != 2) continue;
      for (auto [a, h] : pin_h) atoms_[a].explicit_h = h;
      for (int a : ring) atoms_[a].aromatic = true;
      for (size_t i = 0; i < ring.size(); ++i) {
        int u = ring[i], v = ring[(i + 1) % ring.size()];
        bonds_[*find_bond(u, v)].order = BondOrder::Aromatic;
      }
      changed = true;
    }
  }

  // Every aromatic atom must sit on a cycle of aromatic bonds.
  for (int a = 0; a < n; ++a) {
    if (!atoms_[a].aromatic) continue;
    int arom_deg = 0;
    for (int bi : adj_[a])
      if (bonds_[bi].order == BondOrder::Aromatic && ring_bond_[bi]) ++arom_deg;
    if (arom_deg < 2)
      throw SmilesError(SmilesError::Kind::Valence,
                        "aromatic atom outside an aromatic ring");
  }
  // Aromatic bonds must join two aromatic atoms.
  for (const auto& b : bonds_)
    if (b.order == BondOrder::Aromatic &&
        (!atoms_[b.a].aromatic || !atoms_[b.b].aromatic))
      throw SmilesError(SmilesError::Kind::Valence,
                        "aromatic bond on non-aromatic atom");
}

void MolGraph::kekulize_check() {
  int n = num_atoms();
  needs_double_.assign(n, 0);
  for (int a = 0; a < n; ++a) {
    const Atom& at = atoms_[a];
    if (!at.aromatic) continue;
    switch (at.element) {
      case Element::C:
        needs_double_[a] = 1;
        break;
      case Element::N:
      case Element::P:
      case Element::As: {
        // bare pyridine-type gets a double bond; H-bearing or trisubstituted
        // (pyrrole-type) keeps the lone pair in the ring
        int h = at.explicit_h >= 0 ? at.explicit_h : 0;
        bool pyrrole_like = h >= 1 || degree(a) >= 3;
        needs_double_[a] = pyrrole_like ? 0 : 1;
        break;
      }
      case Element::O:
      case Element::S:
      case Element::Se:
      case Element::B:
        needs_double_[a] = 0;
        break;
      default:
        throw SmilesError(SmilesError::Kind::Valence, "element cannot be aromatic");
    }
    // an exocyclic double bond uses up the p orbital
    for (int bi : adj_[a])
      if (bonds_[bi].order == BondOrder::Double)
        throw SmilesError(SmilesError::Kind::Valence,
                          "double bond on aromatic atom");
  }

  // Kekulizability: the atoms needing one double bond must admit a perfect
  // matching over aromatic bonds.
  std::vector<int> need_ids;
  std::vector<int> need_index(n, -1);
  for (int a = 0; a < n; ++a)
    if (needs_double_[a]) {
      need_index[a] = static_cast<int>(need_ids.size());
      need_ids.push_back(a);
    }
  if (need_ids.empty()) return;
  std::vector<std::pair<int, int>> edges;
  for (const auto& b : bonds_)
    if (b.order == BondOrder::Aromatic && need_index[b.a] >= 0 && need_index[b.b] >= 0)
      edges.emplace_back(need_index[b.a], need_index[b.b]);
  auto mate = matching::max_cardinality_matching(static_cast<int>(need_ids.size()), edges);
  for (size_t i = 0; i < mate.size(); ++i)
    if (mate[i] < 0)
      throw SmilesError(SmilesError::Kind::Valence, "aromatic ring cannot be kekulized");
}

void MolGraph::assign_hydrogens() {
  int n = num_atoms();
  h_count_.assign(n, 0);
  for (int a = 0; a < n; ++a) {
    const Atom& at = atoms_[a];
    int sum = 0;
    for (int bi : adj_[a]) sum += order_value(bonds_[bi].order);
    sum += needs_double_[a];
    const auto& valences = element_valences(at.element);
    if (at.element == Element::Star) {
      if (at.explicit_h > 0 || sum > 1)
        throw SmilesError(SmilesError::Kind::Valence, "overloaded wildcard atom");
      h_count_[a] = 0;
      continue;
    }
    if (at.explicit_h >= 0) {
      int total = sum + at.explicit_h;
      if (std::find(valences.begin(), valences.end(), total) == valences.end())
        throw SmilesError(SmilesError::Kind::Valence,
                          std::string("valence ") + std::to_string(total) +
                              " not allowed for " + element_symbol(at.element));
      h_count_[a] = at.explicit_h;
    } else {
      auto it = std::find_if(valences.begin(), valences.end(),
                             [&](int v) { return v >= sum; });
      if (it == valences.end())
        throw SmilesError(SmilesError::Kind::Valence,
                          std::string("bond order sum ") + std::to_string(sum) +
                              " exceeds valence of " + element_symbol(at.element));
      h_count_[a] = *it - sum;
    }
  }
}

void MolGraph::finalize() {
  perceive_rings();
  perceive_aromaticity();
  kekulize_check();
  assign_hydrogens();
  finalized_ = true;
}

bool check_valence(const MolGraph& mol) {
  if (!mol.finalized()) return false;
  for (int a = 0; a < mol.num_atoms(); ++a) {
    const Atom& at = mol.atom(a);
    int sum = 0;
    for (int bi : mol.bonds_of(a)) sum += order_value(mol.bond(bi).order);
    sum += mol.aromatic_double(a) + mol.hydrogen_count(a);
    const auto& valences = element_valences(at.element);
    if (at.element == Element::Star) {
      if (sum > 1) return false;
      continue;
    }
    if (std::find(valences.begin(), valences.end(), sum) == valences.end())
      return false;
    if (at.formal_charge != 0) return false;
  }
  return true;
}

MolGraph MolGraph::induced_subgraph(const std::vector<int>& keep,
                                    std::vector<int>* old_to_new) const {
  std::vector<int> map(num_atoms(), -1);
  MolGraph sub;
  for (int a : keep) {
    Atom at = atoms_[a];
    map[a] = sub.add_atom(at);
  }
  for (const auto& b : bonds_)
    if (map[b.a] >= 0 && map[b.b] >= 0) sub.add_bond(map[b.a], map[b.b], b.order);
  sub.finalize();
  if (old_to_new) *old_to_new = std::move(map);
  return sub;
}

}  // namespace fragflow::chem
