#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <functional>
#include <set>

#include "doctest.h"
#include "fragflow/app.hpp"
#include "fragflow/coarse.hpp"
#include "fragflow/rng.hpp"

using namespace fragflow;

namespace {

frag::Vocabulary toy_vocab(int n_mols, uint64_t seed,
                           std::vector<chem::MolGraph>* mols_out = nullptr) {
  auto smiles = app::toy_corpus(n_mols, seed);
  std::vector<chem::MolGraph> mols;
  for (const auto& s : smiles) mols.push_back(chem::parse_smiles(s));
  auto vocab = frag::Vocabulary::build(mols);
  if (mols_out) *mols_out = std::move(mols);
  return vocab;
}

// exhaustive maximum of sum(w + C) over matchings
double brute_force_best(const coarse::MatchProblem& p,
                        const std::vector<double>& weights, double shift) {
  double best = 0.0;
  std::vector<bool> used(p.total_slots, false);
  std::function<void(size_t, double)> rec = [&](size_t c, double acc) {
    best = std::max(best, acc);
    if (c >= p.candidates.size()) return;
    rec(c + 1, acc);
    int u = p.slot_id(p.candidates[c].a);
    int v = p.slot_id(p.candidates[c].b);
    if (!used[u] && !used[v]) {
      used[u] = used[v] = true;
      rec(c + 1, acc + weights[c] + shift);
      used[u] = used[v] = false;
    }
  };
  rec(0, 0.0);
  return best;
}

}  // namespace

TEST_CASE("to_coarse on ethylbenzene") {
  std::vector<chem::MolGraph> mols;
  mols.push_back(chem::parse_smiles("CCc1ccccc1"));
  auto vocab = frag::Vocabulary::build(mols);
  auto tc = coarse::to_coarse(mols[0], vocab);
  CHECK(tc.graph.n() == 2);
  CHECK(tc.graph.edge_count() == 1);
  CHECK(tc.ground_truth.selected.size() == 1);
  CHECK(tc.problem.candidates.size() == 1);
}

TEST_CASE("single-fragment molecule gives an empty matching") {
  std::vector<chem::MolGraph> mols;
  mols.push_back(chem::parse_smiles("c1ccccc1"));
  auto vocab = frag::Vocabulary::build(mols);
  auto tc = coarse::to_coarse(mols[0], vocab);
  CHECK(tc.graph.n() == 1);
  CHECK(tc.graph.edge_count() == 0);
  CHECK(tc.ground_truth.selected.empty());
}

TEST_CASE("unknown fragment raises") {
  std::vector<chem::MolGraph> mols;
  mols.push_back(chem::parse_smiles("CCc1ccccc1"));
  auto vocab = frag::Vocabulary::build(mols);
  auto other = chem::parse_smiles("CCCCN1CCOCC1");
  CHECK_THROWS_AS(coarse::to_coarse(other, vocab), coarse::CoarseError);
}

TEST_CASE("coarse graphs from data are trees") {
  std::vector<chem::MolGraph> mols;
  auto vocab = toy_vocab(400, 21, &mols);
  for (const auto& mol : mols) {
    auto tc = coarse::to_coarse(mol, vocab);
    CHECK(tc.graph.edge_count() == tc.graph.n() - 1);
    CHECK(tc.graph.connected());
    // junction arities add up to twice the edges
    int arity = 0;
    for (int id : tc.graph.node_ids) arity += vocab.entry(id).arity;
    CHECK(arity == 2 * tc.graph.edge_count());
  }
}

TEST_CASE("ground-truth roundtrip is exact on the toy corpus") {
  std::vector<chem::MolGraph> mols;
  auto vocab = toy_vocab(400, 22, &mols);
  int ok = 0;
  for (const auto& mol : mols) {
    auto tc = coarse::to_coarse(mol, vocab);
    auto rec = coarse::reconstruct(tc.graph, tc.ground_truth, vocab);
    if (chem::canonical_smiles(rec) == chem::canonical_smiles(mol)) ++ok;
  }
  CHECK(ok == static_cast<int>(mols.size()));
}

TEST_CASE("omitting a coarse edge raises UnrealizedCoarseEdge") {
  std::vector<chem::MolGraph> mols;
  mols.push_back(chem::parse_smiles("CCc1ccccc1"));
  auto vocab = frag::Vocabulary::build(mols);
  auto tc = coarse::to_coarse(mols[0], vocab);
  coarse::Matching empty;
  try {
    coarse::reconstruct(tc.graph, empty, vocab);
    CHECK(false);
  } catch (const coarse::CoarseError& e) {
    CHECK(e.kind() == coarse::CoarseError::Kind::UnrealizedCoarseEdge);
  }
}

TEST_CASE("blossom matches brute force on random problems") {
  rng::Engine rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    // random slot structure: 2-5 nodes with arity 0-3
    int n = 2 + rng.uniform_int(4);
    coarse::MatchProblem p;
    p.slot_base.resize(n);
    std::vector<int> arity(n);
    for (int i = 0; i < n; ++i) {
      p.slot_base[i] = p.total_slots;
      arity[i] = rng.uniform_int(4);
      p.total_slots += arity[i];
    }
    if (p.total_slots > 10) continue;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        if (rng.uniform() > 0.6) continue;
        for (int si = 0; si < arity[i]; ++si)
          for (int sj = 0; sj < arity[j]; ++sj)
            p.candidates.push_back({{i, si}, {j, sj}});
      }
    std::vector<double> weights(p.candidates.size());
    for (auto& w : weights) w = rng.uniform() * 10.0 - 5.0;
    double shift = 1.0;
    for (double w : weights) shift += std::abs(w);
    auto matching = coarse::blossom_match(p, weights);
    // legality
    std::set<int> used;
    double achieved = 0.0;
    for (int c : matching.selected) {
      CHECK(used.insert(p.slot_id(p.candidates[c].a)).second);
      CHECK(used.insert(p.slot_id(p.candidates[c].b)).second);
      achieved += weights[c] + shift;
    }
    double best = brute_force_best(p, weights, shift);
    CHECK(achieved == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("blossom picks the heavy edge of a triangle") {
  coarse::MatchProblem p;
  p.slot_base = {0, 1, 2};
  p.total_slots = 3;
  p.candidates = {{{0, 0}, {1, 0}}, {{1, 0}, {2, 0}}, {{0, 0}, {2, 0}}};
  auto m = coarse::blossom_match(p, {3.0, 2.0, 1.0});
  REQUIRE(m.selected.size() == 1);
  CHECK(m.selected[0] == 0);
}

TEST_CASE("blossom on a path prefers the heavier end") {
  coarse::MatchProblem p;
  p.slot_base = {0, 1, 2};
  p.total_slots = 3;
  p.candidates = {{{0, 0}, {1, 0}}, {{1, 0}, {2, 0}}};
  auto m = coarse::blossom_match(p, {1.0, 5.0});
  REQUIRE(m.selected.size() == 1);
  CHECK(m.selected[0] == 1);
}

TEST_CASE("blossom empty candidates") {
  coarse::MatchProblem p;
  auto m = coarse::blossom_match(p, {});
  CHECK(m.selected.empty());
}
