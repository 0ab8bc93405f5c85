#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fragflow::chem {

// Supported heavy elements. Star is the junction wildcard used in fragment
// keys; it never appears in dataset molecules.
enum class Element : uint8_t {
  B, C, N, O, F, Si, P, S, Cl, As, Se, Br, I, Star,
};
inline constexpr int kNumElements = 14;

const char* element_symbol(Element e);
double atomic_mass(Element e);
// Allowed total valences, ascending (e.g. S -> {2,4,6}).
const std::vector<int>& element_valences(Element e);

enum class BondOrder : uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  Element element = Element::C;
  bool aromatic = false;
  // Hydrogen count fixed by a bracket atom; -1 means implicit (filled to the
  // smallest permitted valence).
  int explicit_h = -1;
  int formal_charge = 0;  // always 0 for accepted molecules
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
  int other(int atom) const { return atom == a ? b : a; }
};

class SmilesError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnsupportedElement, Valence, UnclosedRing, MultiComponent };
  SmilesError(Kind kind, std::string msg, size_t pos = std::string::npos)
      : std::runtime_error(pos == std::string::npos
                               ? msg
                               : msg + " (at position " + std::to_string(pos) + ")"),
        kind_(kind), pos_(pos) {}
  Kind kind() const { return kind_; }
  size_t position() const { return pos_; }

 private:
  Kind kind_;
  size_t pos_;
};

// Immutable after finalize(); all queries are const and thread-safe.
class MolGraph {
 public:
  int add_atom(const Atom& atom);
  int add_bond(int a, int b, BondOrder order);

  // Perceives rings and aromaticity, assigns implicit hydrogens, verifies
  // valences and kekulizability. Throws SmilesError on violations.
  void finalize();

  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }
  const Atom& atom(int i) const { return atoms_[i]; }
  Atom& atom_mutable(int i) { return atoms_[i]; }
  const Bond& bond(int i) const { return bonds_[i]; }
  Bond& bond_mutable(int i) { return bonds_[i]; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<int>& bonds_of(int atom) const { return adj_[atom]; }
  int degree(int atom) const { return static_cast<int>(adj_[atom].size()); }
  std::optional<int> find_bond(int a, int b) const;

  bool finalized() const { return finalized_; }
  bool bond_in_ring(int bond_idx) const { return ring_bond_[bond_idx]; }
  bool atom_in_ring(int atom_idx) const { return ring_atom_[atom_idx]; }
  // Total hydrogen count (explicit for bracket atoms, derived otherwise).
  int hydrogen_count(int atom_idx) const { return h_count_[atom_idx]; }
  // 1 if the atom takes one double bond in any kekulized form of its
  // aromatic system, 0 otherwise. Only meaningful for aromatic atoms.
  int aromatic_double(int atom_idx) const { return needs_double_[atom_idx]; }
  int num_components() const { return n_components_; }

  // Simple rings up to length 8, each a cycle of atom indices.
  const std::vector<std::vector<int>>& rings() const { return rings_; }

  // Subgraph induced on `keep` (atom indices); returned graph is finalized.
  MolGraph induced_subgraph(const std::vector<int>& keep,
                            std::vector<int>* old_to_new = nullptr) const;

 private:
  void perceive_rings();
  void perceive_aromaticity();
  void assign_hydrogens();
  void kekulize_check();

  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<int>> adj_;
  std::vector<bool> ring_bond_;
  std::vector<bool> ring_atom_;
  std::vector<int> h_count_;
  std::vector<int> needs_double_;
  std::vector<std::vector<int>> rings_;
  int n_components_ = 0;
  bool finalized_ = false;
};

struct ParseOptions {
  // Accept "*" / "[*]" junction wildcards (fragment keys only).
  bool allow_wildcard = false;
};

// Parses a single-component SMILES string. Grammar: organic-subset and
// bracket atoms, bonds - = # :, branches, ring closures (digits and %nn),
// aromatic lowercase. Charges, isotopes and stereo markers are rejected.
MolGraph parse_smiles(std::string_view text, const ParseOptions& opts = {});

// Canonical SMILES via iterative invariant refinement with tie-break
// branching, then deterministic DFS emission. Aromatic atoms are written
// lowercase. Empty graph yields "".
std::string canonical_smiles(const MolGraph& mol);

struct CanonicalResult {
  std::string smiles;
  std::vector<int> emission_order;  // emission_order[k] = atom written k-th
};
CanonicalResult canonical_smiles_ex(const MolGraph& mol);

// True when every atom's bond-order sum (plus hydrogens and the kekulized
// aromatic contribution) hits a permitted valence.
bool check_valence(const MolGraph& mol);

struct Descriptors {
  double molecular_weight = 0.0;
  int heavy_atom_count = 0;
  int ring_count = 0;           // cycle rank |B| - |A| + components
  int aromatic_ring_count = 0;  // rings (<= 8 atoms) with all bonds aromatic
  int hba_count = 0;            // N + O atoms
  int hbd_count = 0;            // N/O atoms bearing >= 1 H
};

Descriptors descriptors(const MolGraph& mol);

class Fingerprint {
 public:
  Fingerprint() = default;
  Fingerprint(int width);
  void set(uint64_t hash);
  bool test(uint64_t hash) const;
  int width() const { return width_; }
  int popcount() const;
  const std::vector<uint64_t>& words() const { return words_; }
  friend double tanimoto(const Fingerprint& a, const Fingerprint& b);

 private:
  int width_ = 0;
  std::vector<uint64_t> words_;
};

// ECFP-style hashed circular fingerprint. width must be a power of two.
Fingerprint morgan_fingerprint(const MolGraph& mol, int radius = 2, int width = 2048);
double tanimoto(const Fingerprint& a, const Fingerprint& b);

// Circular atom-environment identifiers for radius 0..radius, one per
// (atom, r); shared by the fingerprint and the fragment-frequency scoring.
std::vector<uint64_t> morgan_environments(const MolGraph& mol, int radius);

// Bemis-Murcko scaffold: terminal atoms pruned until fixpoint. Acyclic
// molecules give an empty graph.
MolGraph murcko_scaffold(const MolGraph& mol);

}  // namespace fragflow::chem
