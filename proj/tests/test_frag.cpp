#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "fragflow/app.hpp"
#include "fragflow/frag.hpp"
#include "fragflow/rng.hpp"

using namespace fragflow;

TEST_CASE("ethylbenzene cuts once at the ring") {
  auto mol = chem::parse_smiles("CCc1ccccc1");
  auto f = frag::fragment_molecule(mol);
  CHECK(f.cut_bonds.size() == 1);
  CHECK(f.fragments.size() == 2);
  std::set<std::string> keys;
  for (const auto& frag : f.fragments) keys.insert(frag.key);
  CHECK(keys.count("CC[*]") == 1);
  CHECK(keys.count("c1ccc(cc1)[*]") == 1);
}

TEST_CASE("benzene stays whole") {
  auto mol = chem::parse_smiles("c1ccccc1");
  auto f = frag::fragment_molecule(mol);
  CHECK(f.cut_bonds.empty());
  CHECK(f.fragments.size() == 1);
  CHECK(f.fragments[0].slots.empty());
}

TEST_CASE("cut bonds are always single and acyclic") {
  auto corpus = app::toy_corpus(300, 31);
  for (const auto& s : corpus) {
    auto mol = chem::parse_smiles(s);
    auto f = frag::fragment_molecule(mol);
    for (int bi : f.cut_bonds) {
      CHECK(mol.bond(bi).order == chem::BondOrder::Single);
      CHECK_FALSE(mol.bond_in_ring(bi));
    }
    // fragment adjacency is a tree: #fragments == #cuts + 1
    CHECK(f.fragments.size() == f.cut_bonds.size() + 1);
  }
}

TEST_CASE("fragment keys are isomorphism invariant") {
  // both cut orientations of butylbenzene's symmetric core
  auto m1 = chem::parse_smiles("CCCCc1ccccc1");
  auto m2 = chem::parse_smiles("c1ccccc1CCCC");
  auto f1 = frag::fragment_molecule(m1);
  auto f2 = frag::fragment_molecule(m2);
  std::multiset<std::string> k1, k2;
  for (const auto& f : f1.fragments) k1.insert(f.key);
  for (const auto& f : f2.fragments) k2.insert(f.key);
  CHECK(k1 == k2);
}

TEST_CASE("two-junction fragment key stable over relabelings") {
  // para-disubstituted ring fragment from a 3-block molecule
  auto mol = chem::parse_smiles("CCc1ccc(CC)cc1");
  auto f = frag::fragment_molecule(mol);
  const frag::ExtractedFragment* ring = nullptr;
  for (const auto& frag : f.fragments)
    if (frag.slots.size() == 2) ring = &frag;
  REQUIRE(ring != nullptr);
  // reparse the key and re-derive: 50 shuffled parses agree
  std::set<std::string> keys{ring->key};
  rng::Engine rng(17);
  for (int k = 0; k < 50; ++k) {
    // different textual forms of the same molecule
    auto mol2 = chem::parse_smiles(k % 2 ? "c1cc(CC)ccc1CC" : "C(C)c1ccc(CC)cc1");
    auto f2 = frag::fragment_molecule(mol2);
    for (const auto& frag : f2.fragments)
      if (frag.slots.size() == 2) keys.insert(frag.key);
  }
  CHECK(keys.size() == 1);
}

TEST_CASE("vocabulary counts occurrences and normalizes") {
  std::vector<chem::MolGraph> corpus;
  corpus.push_back(chem::parse_smiles("CCO"));
  corpus.push_back(chem::parse_smiles("CCO"));
  auto vocab2 = frag::Vocabulary::build(corpus);
  corpus.pop_back();
  auto vocab1 = frag::Vocabulary::build(corpus);
  REQUIRE(vocab1.size() == vocab2.size());
  double sum = 0.0;
  for (int i = 0; i < vocab2.size(); ++i) {
    CHECK(vocab2.entry(i).count == 2 * vocab1.entry(i).count);
    CHECK(vocab2.marginal(i) == doctest::Approx(vocab1.marginal(i)));
    sum += vocab2.marginal(i);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vocabulary matches an independent recount") {
  auto smiles = app::toy_corpus(100, 77);
  std::vector<chem::MolGraph> corpus;
  for (const auto& s : smiles) corpus.push_back(chem::parse_smiles(s));
  auto vocab = frag::Vocabulary::build(corpus);
  // second pass: recount keys independently of Vocabulary
  std::map<std::string, long long> counts;
  for (const auto& mol : corpus) {
    auto f = frag::fragment_molecule(mol);
    for (const auto& frag : f.fragments) ++counts[frag.key];
  }
  REQUIRE(static_cast<int>(counts.size()) == vocab.size());
  for (const auto& [key, count] : counts) {
    int id = vocab.id_of(key);
    REQUIRE(id >= 0);
    CHECK(vocab.entry(id).count == count);
  }
}

TEST_CASE("vocabulary is order independent") {
  auto smiles = app::toy_corpus(120, 5);
  std::vector<chem::MolGraph> corpus;
  for (const auto& s : smiles) corpus.push_back(chem::parse_smiles(s));
  auto v1 = frag::Vocabulary::build(corpus);
  std::reverse(corpus.begin(), corpus.end());
  auto v2 = frag::Vocabulary::build(corpus);
  CHECK(v1.digest() == v2.digest());
}

TEST_CASE("vocabulary file reload is bit exact") {
  auto smiles = app::toy_corpus(80, 13);
  std::vector<chem::MolGraph> corpus;
  for (const auto& s : smiles) corpus.push_back(chem::parse_smiles(s));
  auto vocab = frag::Vocabulary::build(corpus);
  vocab.save("test_vocab.tsv");
  auto loaded = frag::Vocabulary::load("test_vocab.tsv");
  CHECK(loaded.digest() == vocab.digest());
  CHECK(loaded.size() == vocab.size());
  loaded.save("test_vocab2.tsv");
  std::ifstream a("test_vocab.tsv", std::ios::binary);
  std::ifstream b("test_vocab2.tsv", std::ios::binary);
  std::string ca((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);
}

TEST_CASE("empty corpus rejected") {
  std::vector<chem::MolGraph> corpus;
  CHECK_THROWS_AS(frag::Vocabulary::build(corpus), frag::FragError);
}
