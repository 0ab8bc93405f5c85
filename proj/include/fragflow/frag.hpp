#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fragflow/chem.hpp"

namespace fragflow::frag {

class FragError : public std::runtime_error {
 public:
  enum class Kind { EmptyCorpus, UnknownFragment, BadVocabFile };
  FragError(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// One fragment cut out of a molecule. Slots mark severed-bond endpoints; the
// canonical key encodes them as [*] atoms.
struct ExtractedFragment {
  std::vector<int> atoms;                  // molecule atom indices
  std::vector<std::pair<int, int>> slots;  // (molecule atom, molecule bond) per cut end
  std::string key;
  std::vector<int> slot_to_canonical;      // extraction slot -> key's [*] position
};

struct Fragmentation {
  std::vector<ExtractedFragment> fragments;
  std::vector<int> cut_bonds;     // molecule bond indices, ascending
  std::vector<int> atom_fragment; // molecule atom -> fragment index
};

// Applies the documented single-acyclic-bond cut table and splits the
// molecule into connected fragments. Zero matches give one fragment.
Fragmentation fragment_molecule(const chem::MolGraph& mol);

// True when the cut table matches this bond (must be single and acyclic).
bool bond_matches_cut_rule(const chem::MolGraph& mol, int bond_idx);

// Canonical key of a fragment: the subgraph with one [*] per slot. Also
// yields the map from extraction slots to the key's wildcard order.
std::string canonical_fragment_key(const chem::MolGraph& mol,
                                   const std::vector<int>& atoms,
                                   const std::vector<std::pair<int, int>>& slots,
                                   std::vector<int>* slot_to_canonical = nullptr);

struct VocabEntry {
  std::string key;
  long long count = 0;
  // Instance graph parsed from the key; wildcard atoms stay in the graph and
  // mark junctions. slot_atoms[k] is the host atom of the k-th wildcard.
  chem::MolGraph graph;
  std::vector<int> star_atoms;
  std::vector<int> slot_atoms;
  int arity = 0;
};

class Vocabulary {
 public:
  // Counts fragment occurrences over the corpus; ids are dense in key order.
  static Vocabulary build(const std::vector<chem::MolGraph>& corpus);

  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(entries_.size()); }
  long long total_count() const { return total_; }
  const VocabEntry& entry(int id) const { return entries_[id]; }
  int id_of(const std::string& key) const;  // -1 when absent
  double marginal(int id) const {
    return static_cast<double>(entries_[id].count) / static_cast<double>(total_);
  }
  std::vector<double> marginals() const;
  uint64_t digest() const;  // FNV-1a over the serialized form

 private:
  void index_entries();
  std::vector<VocabEntry> entries_;
  std::map<std::string, int> index_;
  long long total_ = 0;
};

}  // namespace fragflow::frag
