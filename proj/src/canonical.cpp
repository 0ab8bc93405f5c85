#include <algorithm>
#include <map>
#include <set>

#include "fragflow/chem.hpp"

namespace fragflow::chem {

namespace {

int bond_class(BondOrder o) { return static_cast<int>(o); }

// Hydrogen count the parser would assign to this atom written bare
// (organic subset, no bracket). Used to decide whether a bracket is needed.
int bare_hydrogens(const MolGraph& mol, int a) {
  const Atom& at = mol.atom(a);
  int sum = 0;
  for (int bi : mol.bonds_of(a)) {
    BondOrder o = mol.bond(bi).order;
    sum += o == BondOrder::Aromatic ? 1 : static_cast<int>(o);
  }
  int nd = 0;
  if (at.aromatic) {
    switch (at.element) {
      case Element::C: nd = 1; break;
      case Element::N:
      case Element::P:
      case Element::As: nd = mol.degree(a) >= 3 ? 0 : 1; break;
      default: nd = 0;
    }
  }
  sum += nd;
  for (int v : element_valences(at.element))
    if (v >= sum) return v - sum;
  return -1;
}

bool organic_subset(Element e) {
  switch (e) {
    case Element::B:
    case Element::C:
    case Element::N:
    case Element::O:
    case Element::P:
    case Element::S:
    case Element::F:
    case Element::Cl:
    case Element::Br:
    case Element::I:
      return true;
    default:
      return false;
  }
}

std::string atom_token(const MolGraph& mol, int a) {
  const Atom& at = mol.atom(a);
  if (at.element == Element::Star) return "[*]";
  std::string sym = element_symbol(at.element);
  if (at.aromatic)
    for (auto& c : sym) c = static_cast<char>(std::tolower(c));
  int h = mol.hydrogen_count(a);
  if (organic_subset(at.element) && bare_hydrogens(mol, a) == h) return sym;
  std::string out = "[" + sym;
  if (h == 1)
    out += "H";
  else if (h > 1)
    out += "H" + std::to_string(h);
  return out + "]";
}

struct Canonicalizer {
  const MolGraph& mol;
  int n;
  std::string best;
  std::vector<int> best_order;
  int emits = 0;
  static constexpr int kMaxEmits = 4096;

  explicit Canonicalizer(const MolGraph& m) : mol(m), n(m.num_atoms()) {}

  static std::vector<int> densify(std::vector<std::pair<std::vector<long long>, int>>& keys) {
    std::sort(keys.begin(), keys.end());
    std::vector<int> ranks(keys.size());
    int rank = -1;
    for (size_t i = 0; i < keys.size(); ++i) {
      if (i == 0 || keys[i].first != keys[i - 1].first) ++rank;
      ranks[keys[i].second] = rank;
    }
    return ranks;
  }

  std::vector<int> initial_ranks() const {
    std::vector<std::pair<std::vector<long long>, int>> keys(n);
    for (int a = 0; a < n; ++a) {
      const Atom& at = mol.atom(a);
      keys[a] = {{static_cast<long long>(at.element), at.aromatic ? 1 : 0,
                  mol.degree(a), mol.hydrogen_count(a), mol.atom_in_ring(a) ? 1 : 0},
                 a};
    }
    return densify(keys);
  }

  std::vector<int> refine(std::vector<int> ranks) const {
    int classes = *std::max_element(ranks.begin(), ranks.end()) + 1;
    for (;;) {
      std::vector<std::pair<std::vector<long long>, int>> keys(n);
      for (int a = 0; a < n; ++a) {
        std::vector<long long> key{ranks[a]};
        std::vector<long long> nb;
        for (int bi : mol.bonds_of(a)) {
          const Bond& b = mol.bond(bi);
          nb.push_back(bond_class(b.order) * 1000000LL + ranks[b.other(a)]);
        }
        std::sort(nb.begin(), nb.end());
        key.insert(key.end(), nb.begin(), nb.end());
        keys[a] = {std::move(key), a};
      }
      auto next = densify(keys);
      int next_classes = *std::max_element(next.begin(), next.end()) + 1;
      ranks = std::move(next);
      if (next_classes == classes) break;
      classes = next_classes;
    }
    return ranks;
  }

  void search(const std::vector<int>& ranks) {
    if (emits >= kMaxEmits) return;
    std::vector<int> count(n, 0);
    for (int r : ranks) ++count[r];
    int tied = -1;
    for (int r = 0; r < n; ++r)
      if (count[r] > 1) {
        tied = r;
        break;
      }
    if (tied < 0) {
      ++emits;
      std::vector<int> order;
      std::string s = emit(ranks, &order);
      if (best.empty() || s < best) {
        best = std::move(s);
        best_order = std::move(order);
      }
      return;
    }
    for (int a = 0; a < n; ++a) {
      if (ranks[a] != tied) continue;
      std::vector<int> split(n);
      for (int i = 0; i < n; ++i)
        split[i] = ranks[i] * 2 + (ranks[i] == tied && i != a ? 1 : 0);
      search(refine(split));
    }
  }

  std::string emit(const std::vector<int>& ranks, std::vector<int>* emitted_order) const {
    int root = static_cast<int>(std::min_element(ranks.begin(), ranks.end()) -
                                ranks.begin());

    // Classify bonds into tree and ring-closure edges along the canonical DFS.
    std::vector<bool> visited(n, false);
    std::vector<int> order;
    std::vector<std::vector<int>> children(n);  // tree bonds, in visit order
    std::vector<std::vector<int>> openings(n);  // closure bonds opened at atom
    std::vector<bool> bond_done(mol.num_bonds(), false);
    auto sorted_bonds = [&](int a) {
      std::vector<int> bs(mol.bonds_of(a).begin(), mol.bonds_of(a).end());
      std::sort(bs.begin(), bs.end(), [&](int x, int y) {
        return ranks[mol.bond(x).other(a)] < ranks[mol.bond(y).other(a)];
      });
      return bs;
    };
    {
      std::vector<std::pair<int, int>> stack{{root, -1}};
      while (!stack.empty()) {
        auto [a, in_bond] = stack.back();
        stack.pop_back();
        if (visited[a]) continue;
        visited[a] = true;
        order.push_back(a);
        auto bs = sorted_bonds(a);
        // push children in reverse so lowest rank is visited first
        std::vector<std::pair<int, int>> to_push;
        for (int bi : bs) {
          if (bi == in_bond || bond_done[bi]) continue;
          int b = mol.bond(bi).other(a);
          if (visited[b]) {
            openings[b].push_back(bi);  // closure opened at the earlier atom
            bond_done[bi] = true;
          } else {
            to_push.emplace_back(b, bi);
          }
        }
        for (auto it = to_push.rbegin(); it != to_push.rend(); ++it)
          stack.push_back(*it);
      }
    }
    // Recursive emission over the committed tree.
    std::vector<int> closure_digit(mol.num_bonds(), 0);
    std::set<int> free_digits;
    for (int d = 1; d < 100; ++d) free_digits.insert(d);

    std::string out;
    auto bond_symbol = [&](const Bond& b) -> std::string {
      switch (b.order) {
        case BondOrder::Double: return "=";
        case BondOrder::Triple: return "#";
        case BondOrder::Aromatic: return "";
        case BondOrder::Single:
          return (mol.atom(b.a).aromatic && mol.atom(b.b).aromatic) ? "-" : "";
      }
      return "";
    };
    auto digit_str = [](int d) {
      return d < 10 ? std::to_string(d) : "%" + std::to_string(d);
    };

    std::vector<bool> emitted(n, false);
    auto rec = [&](auto&& self, int a, int in_bond) -> void {
      emitted[a] = true;
      if (emitted_order) emitted_order->push_back(a);
      out += atom_token(mol, a);
      // closures opened here, ordered by partner rank
      auto open_here = openings[a];
      std::sort(open_here.begin(), open_here.end(), [&](int x, int y) {
        return ranks[mol.bond(x).other(a)] < ranks[mol.bond(y).other(a)];
      });
      for (int bi : open_here) {
        int d = *free_digits.begin();
        free_digits.erase(free_digits.begin());
        closure_digit[bi] = d;
        out += bond_symbol(mol.bond(bi));
        out += digit_str(d);
      }
      // closures terminating here (opened at an earlier atom)
      std::vector<int> closing;
      for (int bi : mol.bonds_of(a))
        if (closure_digit[bi] > 0 && emitted[mol.bond(bi).other(a)] &&
            mol.bond(bi).other(a) != a)
          closing.push_back(bi);
      // keep only ones not yet closed: digit freed on close
      std::sort(closing.begin(), closing.end(),
                [&](int x, int y) { return closure_digit[x] < closure_digit[y]; });
      for (int bi : closing) {
        int d = closure_digit[bi];
        out += digit_str(d);
        closure_digit[bi] = 0;
        free_digits.insert(d);
      }
      // tree children in rank order
      std::vector<int> kids;
      for (int bi : sorted_bonds(a)) {
        if (bi == in_bond) continue;
        int b = mol.bond(bi).other(a);
        if (!emitted[b] && !bond_done[bi]) kids.push_back(bi);
      }
      for (size_t k = 0; k < kids.size(); ++k) {
        int bi = kids[k];
        int b = mol.bond(bi).other(a);
        bool last = k + 1 == kids.size();
        if (!last) out += "(";
        out += bond_symbol(mol.bond(bi));
        self(self, b, bi);
        if (!last) out += ")";
      }
    };
    rec(rec, root, -1);
    return out;
  }
};

}  // namespace

std::string canonical_smiles(const MolGraph& mol) {
  return canonical_smiles_ex(mol).smiles;
}

CanonicalResult canonical_smiles_ex(const MolGraph& mol) {
  if (mol.num_atoms() == 0) return {"", {}};
  Canonicalizer canon(mol);
  canon.search(canon.refine(canon.initial_ranks()));
  return {std::move(canon.best), std::move(canon.best_order)};
}

}  // namespace fragflow::chem
