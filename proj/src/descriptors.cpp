#include <algorithm>
#include <bit>
#include <stdexcept>

#include "fragflow/chem.hpp"

namespace fragflow::chem {

Descriptors descriptors(const MolGraph& mol) {
  Descriptors d;
  d.heavy_atom_count = mol.num_atoms();
  for (int a = 0; a < mol.num_atoms(); ++a) {
    const Atom& at = mol.atom(a);
    d.molecular_weight += atomic_mass(at.element);
    d.molecular_weight += mol.hydrogen_count(a) * 1.008;
    if (at.element == Element::N || at.element == Element::O) {
      ++d.hba_count;
      if (mol.hydrogen_count(a) >= 1) ++d.hbd_count;
    }
  }
  d.ring_count = mol.num_bonds() - mol.num_atoms() + mol.num_components();
  for (const auto& ring : mol.rings()) {
    bool arom = true;
    for (size_t i = 0; i < ring.size() && arom; ++i) {
      int u = ring[i], v = ring[(i + 1) % ring.size()];
      arom = mol.bond(*mol.find_bond(u, v)).order == BondOrder::Aromatic;
    }
    if (arom) ++d.aromatic_ring_count;
  }
  return d;
}

namespace {

uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

}  // namespace

std::vector<uint64_t> morgan_environments(const MolGraph& mol, int radius) {
  int n = mol.num_atoms();
  std::vector<uint64_t> cur(n), out;
  for (int a = 0; a < n; ++a) {
    const Atom& at = mol.atom(a);
    uint64_t h = 0x12345678abcdef01ULL;
    h = mix(h, static_cast<uint64_t>(at.element));
    h = mix(h, at.aromatic ? 1 : 0);
    h = mix(h, mol.degree(a));
    h = mix(h, mol.hydrogen_count(a));
    h = mix(h, mol.atom_in_ring(a) ? 1 : 0);
    cur[a] = h;
    out.push_back(h);
  }
  for (int r = 1; r <= radius; ++r) {
    std::vector<uint64_t> next(n);
    for (int a = 0; a < n; ++a) {
      std::vector<uint64_t> nb;
      for (int bi : mol.bonds_of(a)) {
        const Bond& b = mol.bond(bi);
        nb.push_back(mix(static_cast<uint64_t>(b.order), cur[b.other(a)]));
      }
      std::sort(nb.begin(), nb.end());
      uint64_t h = mix(0xfeedface00c0ffeeULL, cur[a]);
      for (uint64_t v : nb) h = mix(h, v);
      next[a] = h;
      out.push_back(h);
    }
    cur = std::move(next);
  }
  return out;
}

Fingerprint::Fingerprint(int width) : width_(width) {
  if (width <= 0 || (width & (width - 1)) != 0)
    throw std::invalid_argument("fingerprint width must be a power of two");
  words_.assign(width / 64 + (width % 64 ? 1 : 0), 0);
}

void Fingerprint::set(uint64_t hash) {
  uint64_t bit = hash & (static_cast<uint64_t>(width_) - 1);
  words_[bit / 64] |= 1ULL << (bit % 64);
}

bool Fingerprint::test(uint64_t hash) const {
  uint64_t bit = hash & (static_cast<uint64_t>(width_) - 1);
  return words_[bit / 64] & (1ULL << (bit % 64));
}

int Fingerprint::popcount() const {
  int c = 0;
  for (uint64_t w : words_) c += std::popcount(w);
  return c;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.width() != b.width())
    throw std::invalid_argument("fingerprint widths differ");
  int inter = 0, uni = 0;
  for (size_t i = 0; i < a.words_.size(); ++i) {
    inter += std::popcount(a.words_[i] & b.words_[i]);
    uni += std::popcount(a.words_[i] | b.words_[i]);
  }
  if (uni == 0) return 1.0;  // two empty sets are identical
  return static_cast<double>(inter) / uni;
}

Fingerprint morgan_fingerprint(const MolGraph& mol, int radius, int width) {
  Fingerprint fp(width);
  for (uint64_t env : morgan_environments(mol, radius)) fp.set(env);
  return fp;
}

MolGraph murcko_scaffold(const MolGraph& mol) {
  int n = mol.num_atoms();
  std::vector<bool> alive(n, true);
  std::vector<int> deg(n);
  for (int a = 0; a < n; ++a) deg[a] = mol.degree(a);
  std::vector<int> pruned_neighbors(n, 0);
  for (bool changed = true; changed;) {
    changed = false;
    for (int a = 0; a < n; ++a) {
      if (!alive[a] || deg[a] > 1) continue;
      alive[a] = false;
      changed = true;
      for (int bi : mol.bonds_of(a)) {
        int b = mol.bond(bi).other(a);
        if (alive[b]) {
          --deg[b];
          ++pruned_neighbors[b];
        }
      }
    }
  }
  MolGraph scaffold;
  std::vector<int> map(n, -1);
  for (int a = 0; a < n; ++a) {
    if (!alive[a]) continue;
    Atom at = mol.atom(a);
    if (at.aromatic) {
      // keep the hydrogen class (pyrrole vs pyridine nitrogen) stable
      at.explicit_h = mol.hydrogen_count(a) + pruned_neighbors[a];
    } else {
      at.explicit_h = -1;
    }
    map[a] = scaffold.add_atom(at);
  }
  for (const auto& b : mol.bonds())
    if (map[b.a] >= 0 && map[b.b] >= 0)
      scaffold.add_bond(map[b.a], map[b.b], b.order);
  scaffold.finalize();
  return scaffold;
}

}  // namespace fragflow::chem
