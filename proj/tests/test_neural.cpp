#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fragflow/nets.hpp"
#include "fragflow/pipeline.hpp"

using namespace fragflow;
using neural::Tape;
using neural::Tensor;
using Var = Tape::Var;

namespace {

neural::ModelConfig small_config() {
  neural::ModelConfig cfg;
  cfg.frag_hidden = 8;
  cfg.frag_embed = 6;
  cfg.frag_rounds = 2;
  cfg.coarse_hidden = 10;
  cfg.coarse_edge_hidden = 5;
  cfg.coarse_rounds = 2;
  cfg.time_dim = 4;
  cfg.latent_dim = 3;
  cfg.rrwp_len = 3;
  cfg.ae_hidden = 8;
  cfg.ae_rounds = 2;
  cfg.pred_hidden = 6;
  return cfg;
}

frag::VocabEntry make_entry(const std::string& key) {
  frag::VocabEntry e;
  e.key = key;
  chem::ParseOptions opts;
  opts.allow_wildcard = true;
  e.graph = chem::parse_smiles(key, opts);
  for (int a = 0; a < e.graph.num_atoms(); ++a)
    if (e.graph.atom(a).element == chem::Element::Star) {
      e.star_atoms.push_back(a);
      e.slot_atoms.push_back(e.graph.bond(e.graph.bonds_of(a)[0]).other(a));
    }
  e.arity = static_cast<int>(e.star_atoms.size());
  return e;
}

// central finite differences vs analytic gradients over sampled parameters
void fd_check(neural::ParamStore& ps,
              const std::function<double(neural::ParamStore&, std::vector<Tensor>*)>& loss_fn,
              int trials, uint64_t seed) {
  std::vector<Tensor> grads;
  loss_fn(ps, &grads);
  rng::Engine pick(seed);
  double max_rel = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    int pi = pick.uniform_int(static_cast<int>(ps.values.size()));
    if (ps.values[pi].data.empty()) continue;
    int ei = pick.uniform_int(static_cast<int>(ps.values[pi].data.size()));
    double eps = 1e-6 * std::max(1.0, std::abs(ps.values[pi].data[ei]));
    double orig = ps.values[pi].data[ei];
    ps.values[pi].data[ei] = orig + eps;
    double lp = loss_fn(ps, nullptr);
    ps.values[pi].data[ei] = orig - eps;
    double lm = loss_fn(ps, nullptr);
    ps.values[pi].data[ei] = orig;
    double fd = (lp - lm) / (2 * eps);
    double an = grads[pi].data[ei];
    double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
    max_rel = std::max(max_rel, rel);
  }
  CHECK(max_rel < 1e-4);
}

}  // namespace

TEST_CASE("quadratic toy loss has the analytic gradient") {
  Tape tape;
  Tensor w(2, 2);
  w.at(0, 0) = 1.0;
  w.at(0, 1) = -2.0;
  w.at(1, 0) = 0.5;
  w.at(1, 1) = 3.0;
  Var wv = tape.input(w, true);
  Tensor x(2, 1);
  x.at(0, 0) = 1.0;
  x.at(1, 0) = 2.0;
  Tensor y(2, 1);
  y.at(0, 0) = 0.5;
  y.at(1, 0) = -1.0;
  Var pred = tape.matmul(wv, tape.input(x));
  Var loss = tape.mse_sum(pred, tape.input(y));
  tape.backward(loss);
  // d/dW ||Wx - y||^2 = 2 (Wx - y) x^T
  double r0 = 1.0 * 1 + (-2.0) * 2 - 0.5;   // -3.5
  double r1 = 0.5 * 1 + 3.0 * 2 - (-1.0);   // 7.5
  const Tensor& g = tape.grad(wv);
  CHECK(g.at(0, 0) == doctest::Approx(2 * r0 * 1).epsilon(1e-8));
  CHECK(g.at(0, 1) == doctest::Approx(2 * r0 * 2).epsilon(1e-8));
  CHECK(g.at(1, 0) == doctest::Approx(2 * r1 * 1).epsilon(1e-8));
  CHECK(g.at(1, 1) == doctest::Approx(2 * r1 * 2).epsilon(1e-8));
}

TEST_CASE("fragment embedder is permutation invariant and zero at zero") {
  auto cfg = small_config();
  neural::ParamStore ps;
  rng::Engine rng(3);
  neural::frag_embedder_init(ps, cfg, "fe.", rng);
  auto e1 = make_entry("CCN(C)[*]");
  // same fragment written differently (atom order permuted by the parser)
  auto e2 = make_entry("[*]N(C)CC");
  Tape tape;
  auto pv = neural::load_params(tape, ps);
  auto v1 = neural::frag_embedder_forward(tape, pv, cfg, "fe.", e1);
  auto v2 = neural::frag_embedder_forward(tape, pv, cfg, "fe.", e2);
  for (int j = 0; j < cfg.frag_embed; ++j)
    CHECK(tape.val(v1).at(0, j) == doctest::Approx(tape.val(v2).at(0, j)).epsilon(1e-9));

  // different fragments embed differently under random params
  auto e3 = make_entry("CC[*]");
  auto v3 = neural::frag_embedder_forward(tape, pv, cfg, "fe.", e3);
  double diff = 0.0;
  for (int j = 0; j < cfg.frag_embed; ++j)
    diff += std::abs(tape.val(v1).at(0, j) - tape.val(v3).at(0, j));
  CHECK(diff > 1e-6);

  // zero parameters give a zero embedding
  neural::ParamStore zeros = ps;
  for (auto& t : zeros.values)
    for (auto& v : t.data) v = 0.0;
  Tape tape2;
  auto pz = neural::load_params(tape2, zeros);
  auto vz = neural::frag_embedder_forward(tape2, pz, cfg, "fe.", e1);
  for (int j = 0; j < cfg.frag_embed; ++j)
    CHECK(tape2.val(vz).at(0, j) == doctest::Approx(0.0));
}

TEST_CASE("coarse network is node-permutation equivariant") {
  auto cfg = small_config();
  neural::ParamStore ps;
  rng::Engine rng(4);
  neural::coarse_net_init(ps, cfg, "cn.", rng);

  coarse::CoarseGraph g = coarse::CoarseGraph::empty(3);
  g.node_ids = {0, 1, 2};
  g.set_edge(0, 1, true);
  g.set_edge(1, 2, false);
  g.set_edge(0, 2, true);

  Tensor embs(3, cfg.frag_embed);
  rng::Engine er(9);
  for (auto& v : embs.data) v = er.normal();

  auto run = [&](const coarse::CoarseGraph& graph, const Tensor& se) {
    Tape tape;
    auto pv = neural::load_params(tape, ps);
    neural::CoarseInputs in;
    in.state_embs = tape.input(se);
    Tensor eps(graph.n() * (graph.n() - 1), 2);
    int p = 0;
    for (int i = 0; i < graph.n(); ++i)
      for (int j = 0; j < graph.n(); ++j) {
        if (i == j) continue;
        eps.at(p, graph.edge(i, j) ? 1 : 0) = 1.0;
        ++p;
      }
    in.eps_onehot = tape.input(eps);
    Tensor z(1, cfg.latent_dim);
    z.at(0, 0) = 0.7;
    in.z = tape.input(z);
    in.t = 0.4;
    in.graph = &graph;
    auto out = neural::coarse_net_forward(tape, pv, cfg, "cn.", in);
    return std::pair(tape.val(out.node_embed), tape.val(out.velocity));
  };

  auto [h0, v0] = run(g, embs);
  // permute nodes by the cycle 0->1->2->0
  int perm[3] = {2, 0, 1};  // new index of old node
  coarse::CoarseGraph g2 = coarse::CoarseGraph::empty(3);
  Tensor embs2(3, cfg.frag_embed);
  for (int i = 0; i < 3; ++i) {
    g2.node_ids[perm[i]] = g.node_ids[i];
    for (int j = 0; j < cfg.frag_embed; ++j) embs2.at(perm[i], j) = embs.at(i, j);
  }
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) g2.set_edge(perm[i], perm[j], g.edge(i, j));
  auto [h1, v1] = run(g2, embs2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < cfg.frag_embed; ++j)
      CHECK(h1.at(perm[i], j) == doctest::Approx(h0.at(i, j)).epsilon(1e-9));
  for (int j = 0; j < cfg.latent_dim; ++j)
    CHECK(v1.at(0, j) == doctest::Approx(v0.at(0, j)).epsilon(1e-9));
}

TEST_CASE("time embedding distinguishes t=0 from t=1") {
  auto cfg = small_config();
  neural::ParamStore ps;
  rng::Engine rng(6);
  neural::coarse_net_init(ps, cfg, "cn.", rng);
  coarse::CoarseGraph g = coarse::CoarseGraph::empty(2);
  g.node_ids = {0, 0};
  g.set_edge(0, 1, true);
  auto run = [&](double t) {
    Tape tape;
    auto pv = neural::load_params(tape, ps);
    neural::CoarseInputs in;
    Tensor se(2, cfg.frag_embed);
    in.state_embs = tape.input(se);
    Tensor eps(2, 2);
    eps.at(0, 1) = eps.at(1, 1) = 1.0;
    in.eps_onehot = tape.input(eps);
    in.z = tape.input(Tensor(1, cfg.latent_dim));
    in.t = t;
    in.graph = &g;
    auto out = neural::coarse_net_forward(tape, pv, cfg, "cn.", in);
    return tape.val(out.edge_logits).at(0, 0);
  };
  CHECK(run(0.0) != doctest::Approx(run(0.93)).epsilon(1e-12));
}

TEST_CASE("single-node coarse graph has no edge logits") {
  auto cfg = small_config();
  neural::ParamStore ps;
  rng::Engine rng(6);
  neural::coarse_net_init(ps, cfg, "cn.", rng);
  coarse::CoarseGraph g = coarse::CoarseGraph::empty(1);
  g.node_ids = {0};
  Tape tape;
  auto pv = neural::load_params(tape, ps);
  neural::CoarseInputs in;
  in.state_embs = tape.input(Tensor(1, cfg.frag_embed));
  in.eps_onehot = tape.input(Tensor(0, 2));
  in.z = tape.input(Tensor(1, cfg.latent_dim));
  in.t = 0.5;
  in.graph = &g;
  auto out = neural::coarse_net_forward(tape, pv, cfg, "cn.", in);
  CHECK(tape.val(out.edge_logits).rows == 0);
  CHECK(tape.val(out.node_embed).rows == 1);
}

TEST_CASE("finite differences across every network head") {
  auto cfg = small_config();
  neural::ParamStore ps;
  rng::Engine rng(42);
  neural::frag_embedder_init(ps, cfg, "fe.", rng);
  neural::coarse_net_init(ps, cfg, "cn.", rng);
  neural::property_head_init(ps, cfg.coarse_hidden, cfg.pred_hidden, "cn.", rng);
  neural::ae_encoder_init(ps, cfg, rng);
  neural::ae_decoder_init(ps, cfg, rng);

  auto e1 = make_entry("CC[*]");
  auto e2 = make_entry("c1ccc(cc1)[*]");
  coarse::CoarseGraph g = coarse::CoarseGraph::empty(2);
  g.node_ids = {0, 1};
  g.set_edge(0, 1, true);
  auto mol = chem::parse_smiles("CCc1ccccc1");
  std::vector<int> jc(mol.num_atoms(), 0);

  auto loss_fn = [&](neural::ParamStore& p, std::vector<Tensor>* grads) {
    Tape tape;
    auto pv = neural::load_params(tape, p);
    auto emb1 = neural::frag_embedder_forward(tape, pv, cfg, "fe.", e1);
    auto emb2 = neural::frag_embedder_forward(tape, pv, cfg, "fe.", e2);
    neural::CoarseInputs in;
    in.state_embs = tape.concat_rows({emb1, emb2});
    Tensor eps(2, 2);
    eps.at(0, 1) = eps.at(1, 1) = 1.0;
    in.eps_onehot = tape.input(eps);
    Tensor z(1, cfg.latent_dim);
    z.at(0, 1) = -0.4;
    in.z = tape.input(z);
    in.t = 0.37;
    in.graph = &g;
    auto out = neural::coarse_net_forward(tape, pv, cfg, "cn.", in);
    auto head = neural::property_head_forward(tape, pv, cfg, "cn.", out.node_h);
    auto enc = neural::ae_encoder_forward(tape, pv, cfg, mol, jc);
    // exercise node, edge, velocity, property, and encoder heads at once
    Var logits = tape.matmul(out.node_embed, tape.transpose(in.state_embs));
    Var ce = tape.cross_entropy_rows(logits, {0, 1});
    Tensor elab(1, 1);
    elab.at(0, 0) = 1.0;
    Var bce = tape.bce_logits_sum(out.edge_logits, elab);
    Var vmse = tape.mse_sum(out.velocity, tape.input(Tensor(1, cfg.latent_dim)));
    Var kl = tape.sum_all(tape.add(tape.square(enc.mean), tape.square(enc.logvar)));
    Var total = tape.add(tape.add(ce, bce),
                         tape.add(vmse, tape.add(tape.sum_all(tape.square(head)), kl)));
    tape.backward(total);
    if (grads) *grads = neural::collect_grads(tape, pv, p);
    return tape.val(total).data[0];
  };
  fd_check(ps, loss_fn, 250, 99);
}

TEST_CASE("decoder gradients match finite differences") {
  auto cfg = small_config();
  std::vector<chem::MolGraph> mols;
  mols.push_back(chem::parse_smiles("CCc1ccccc1"));
  auto vocab = frag::Vocabulary::build(mols);
  auto tc = coarse::to_coarse(mols[0], vocab);
  auto assembly = coarse::assemble(tc.graph, vocab);

  neural::ParamStore ps;
  rng::Engine rng(7);
  neural::ae_decoder_init(ps, cfg, rng);
  auto loss_fn = [&](neural::ParamStore& p, std::vector<Tensor>* grads) {
    Tape tape;
    auto pv = neural::load_params(tape, p);
    Tensor z(1, cfg.latent_dim);
    z.at(0, 0) = 0.3;
    auto logits = neural::ae_decoder_forward(tape, pv, cfg, assembly, tc.problem,
                                             tape.input(z));
    Tensor labels(static_cast<int>(tc.problem.candidates.size()), 1);
    for (int c : tc.ground_truth.selected) labels.at(c, 0) = 1.0;
    Var loss = tape.bce_logits_sum(logits, labels);
    tape.backward(loss);
    if (grads) *grads = neural::collect_grads(tape, pv, p);
    return tape.val(loss).data[0];
  };
  fd_check(ps, loss_fn, 150, 55);
}

TEST_CASE("adamw and ema"){
  neural::ParamStore ps;
  ps.create("w", 1, 2);
  ps.get("w").data = {1.0, -2.0};
  neural::AdamW opt;
  opt.lr = 0.1;
  opt.clip = 1.0;
  opt.init(ps);
  std::vector<Tensor> grads;
  Tensor g(1, 2);
  g.data = {10.0, 0.0};  // will be clipped to norm 1
  grads.push_back(g);
  opt.step(ps, grads);
  CHECK(ps.get("w").data[0] < 1.0);
  CHECK(ps.get("w").data[0] > 0.8);  // |update| <= lr / (1 - beta...) scale
  CHECK(ps.get("w").data[1] == doctest::Approx(-2.0));

  // EMA with decay 1.0 never moves
  neural::ParamStore ps2;
  ps2.create("w", 1, 1).data = {5.0};
  neural::Ema ema;
  ema.decay = 1.0;
  ema.init(ps2);
  ps2.get("w").data[0] = -100.0;
  ema.update(ps2);
  CHECK(ema.shadow[0].data[0] == doctest::Approx(5.0));
  // and decay 0 tracks instantly
  ema.decay = 0.0;
  ema.update(ps2);
  CHECK(ema.shadow[0].data[0] == doctest::Approx(-100.0));
}

TEST_CASE("deterministic training trajectory") {
  // two identical mini-runs produce bit-identical params
  auto run = [&]() {
    auto cfg = small_config();
    neural::ParamStore ps;
    rng::Engine rng(1);
    neural::frag_embedder_init(ps, cfg, "fe.", rng);
    neural::AdamW opt;
    opt.init(ps);
    auto entry = make_entry("CC[*]");
    for (int step = 0; step < 100; ++step) {
      Tape tape;
      auto pv = neural::load_params(tape, ps);
      auto emb = neural::frag_embedder_forward(tape, pv, cfg, "fe.", entry);
      Var loss = tape.sum_all(tape.square(emb));
      tape.backward(loss);
      auto grads = neural::collect_grads(tape, pv, ps);
      opt.step(ps, grads);
    }
    return ps;
  };
  auto a = run();
  auto b = run();
  for (size_t i = 0; i < a.values.size(); ++i)
    for (size_t k = 0; k < a.values[i].data.size(); ++k)
      CHECK(a.values[i].data[k] == b.values[i].data[k]);
}

TEST_CASE("checkpoint save-load-save is byte identical") {
  auto cfg = small_config();
  neural::ParamStore ps;
  rng::Engine rng(12);
  neural::frag_embedder_init(ps, cfg, "fe.", rng);
  neural::Checkpoint ck;
  ck.config_digest = cfg.digest();
  ck.vocab_digest = 777;
  ck.put_params(ps);
  ck.save("test_ck1.bin");
  auto loaded = neural::Checkpoint::load("test_ck1.bin");
  CHECK(loaded.vocab_digest == 777);
  loaded.save("test_ck2.bin");
  std::ifstream a("test_ck1.bin", std::ios::binary);
  std::ifstream b("test_ck2.bin", std::ios::binary);
  std::string ca((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);
  CHECK(!ca.empty());
}

TEST_CASE("rrwp rows are probability rows") {
  coarse::CoarseGraph g = coarse::CoarseGraph::empty(4);
  g.node_ids = {0, 0, 0, 0};
  g.set_edge(0, 1, true);
  g.set_edge(1, 2, true);
  // node 3 isolated
  std::vector<std::vector<double>> nf, ef;
  neural::rrwp_features(g, 4, &nf, &ef);
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < 4; ++i) {
      double row = 0.0;
      for (int j = 0; j < 4; ++j)
        row += (i == j) ? nf[i][k] : ef[i * 4 + j][k];
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("non-finite gradient raises") {
  Tape tape;
  Tensor x(1, 1);
  x.at(0, 0) = 0.0;
  Var v = tape.input(x, true);
  Var bad = tape.log_(v);  // d log(x)/dx at 0 is infinite
  Var loss = tape.sum_all(bad);
  CHECK_THROWS_AS(tape.backward(loss), neural::NonFiniteGradient);
}
