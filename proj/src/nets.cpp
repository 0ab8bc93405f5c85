#include "fragflow/nets.hpp"

#include <algorithm>
#include <cmath>

namespace fragflow::neural {

using Var = Tape::Var;

// ---------- ParamStore ----------

Tensor& ParamStore::create(const std::string& name, int rows, int cols) {
  if (has(name)) throw std::logic_error("duplicate param " + name);
  index[name] = static_cast<int>(values.size());
  names.push_back(name);
  values.emplace_back(rows, cols);
  return values.back();
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index.find(name);
  if (it == index.end()) throw std::logic_error("missing param " + name);
  return values[it->second];
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) throw std::logic_error("missing param " + name);
  return values[it->second];
}

uint64_t ModelConfig::digest() const {
  int fields[] = {frag_hidden, frag_embed,  frag_rounds,   coarse_hidden,
                  coarse_edge_hidden, coarse_rounds, time_dim, latent_dim,
                  rrwp_len,    ae_hidden,   ae_rounds,     pred_hidden,
                  pred_rounds};
  uint64_t h = 0xcbf29ce484222325ULL;
  for (int f : fields) {
    for (int b = 0; b < 4; ++b) {
      h ^= (f >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// ---------- featurization ----------

int atom_feature_dim() { return chem::kNumElements + 6 + 3; }

std::vector<double> atom_features(const chem::MolGraph& mol, int atom) {
  std::vector<double> f(atom_feature_dim(), 0.0);
  const auto& at = mol.atom(atom);
  f[static_cast<int>(at.element)] = 1.0;
  int deg = std::min(mol.degree(atom), 5);
  f[chem::kNumElements + deg] = 1.0;
  int base = chem::kNumElements + 6;
  f[base + 0] = at.aromatic ? 1.0 : 0.0;
  f[base + 1] = mol.hydrogen_count(atom) / 4.0;
  f[base + 2] = mol.atom_in_ring(atom) ? 1.0 : 0.0;
  return f;
}

int fragment_descriptor_dim() { return 4; }

std::vector<double> fragment_descriptor_features(const frag::VocabEntry& e) {
  auto d = chem::descriptors(e.graph);
  double heavy = e.graph.num_atoms() - e.arity;
  return {heavy / 10.0, e.arity / 4.0, d.ring_count / 4.0,
          d.molecular_weight / 100.0};
}

std::vector<double> time_features(double t, int dim) {
  std::vector<double> f(dim, 0.0);
  for (int k = 0; k < dim / 2; ++k) {
    double w = std::pow(2.0, k) * M_PI;
    f[2 * k] = std::sin(w * t);
    f[2 * k + 1] = std::cos(w * t);
  }
  return f;
}

void rrwp_features(const coarse::CoarseGraph& g, int K,
                   std::vector<std::vector<double>>* node_feats,
                   std::vector<std::vector<double>>* edge_feats) {
  int n = g.n();
  std::vector<double> M(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    int deg = 0;
    for (int j = 0; j < n; ++j)
      if (j != i && g.edge(i, j)) ++deg;
    if (deg == 0) {
      M[i * n + i] = 1.0;  // self-loop keeps the row stochastic
    } else {
      for (int j = 0; j < n; ++j)
        if (j != i && g.edge(i, j)) M[i * n + j] = 1.0 / deg;
    }
  }
  node_feats->assign(n, std::vector<double>(K, 0.0));
  edge_feats->assign(static_cast<size_t>(n) * n, std::vector<double>(K, 0.0));
  std::vector<double> P(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) P[i * n + i] = 1.0;  // k = 0: identity
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j)
          (*node_feats)[i][k] = P[i * n + j];
        (*edge_feats)[i * n + j][k] = P[i * n + j];
      }
    if (k + 1 == K) break;
    std::vector<double> Q(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) {
        double x = P[i * n + l];
        if (x == 0.0) continue;
        for (int j = 0; j < n; ++j) Q[i * n + j] += x * M[l * n + j];
      }
    P = std::move(Q);
  }
}

// ---------- parameter plumbing ----------

Var ParamVars::operator()(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw std::logic_error("param var missing: " + name);
  return it->second;
}

ParamVars load_params(Tape& tape, const ParamStore& ps) {
  ParamVars pv;
  for (size_t i = 0; i < ps.values.size(); ++i)
    pv.vars[ps.names[i]] = tape.input(ps.values[i], /*requires_grad=*/true);
  return pv;
}

std::vector<Tensor> collect_grads(Tape& tape, const ParamVars& pv,
                                  const ParamStore& ps) {
  std::vector<Tensor> grads;
  grads.reserve(ps.values.size());
  for (size_t i = 0; i < ps.values.size(); ++i) {
    Var v = pv(ps.names[i]);
    Tensor g = tape.grad(v);
    if (g.numel() == 0) g = Tensor(ps.values[i].rows, ps.values[i].cols);
    grads.push_back(std::move(g));
  }
  return grads;
}

void init_linear(ParamStore& ps, const std::string& name, int fan_in, int fan_out,
                 rng::Engine& rng) {
  Tensor& w = ps.create(name + ".W", fan_in, fan_out);
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : w.data) v = (rng.uniform() * 2.0 - 1.0) * limit;
  ps.create(name + ".b", 1, fan_out);
}

namespace {

// silu(x W + b)
Var dense(Tape& tape, const ParamVars& pv, const std::string& name, Var x) {
  return tape.silu(tape.add_rowvec(tape.matmul(x, pv(name + ".W")), pv(name + ".b")));
}

Var dense_linear(Tape& tape, const ParamVars& pv, const std::string& name, Var x) {
  return tape.add_rowvec(tape.matmul(x, pv(name + ".W")), pv(name + ".b"));
}

Tensor bond_feature_rows(const chem::MolGraph& mol, std::vector<int>* src,
                         std::vector<int>* dst) {
  int m = mol.num_bonds();
  Tensor feats(2 * m, 4);
  src->clear();
  dst->clear();
  for (int bi = 0; bi < m; ++bi) {
    const auto& b = mol.bond(bi);
    int cls = static_cast<int>(b.order) - 1;
    feats.at(2 * bi, cls) = 1.0;
    feats.at(2 * bi + 1, cls) = 1.0;
    src->push_back(b.a);
    dst->push_back(b.b);
    src->push_back(b.b);
    dst->push_back(b.a);
  }
  return feats;
}

// shared MPNN trunk over an atom graph
Var atom_mpnn(Tape& tape, const ParamVars& pv, const std::string& prefix, int rounds,
              const chem::MolGraph& mol, Var x, Var edge_feats,
              const std::vector<int>& src, const std::vector<int>& dst) {
  Var h = dense(tape, pv, prefix + "in", x);
  for (int r = 0; r < rounds; ++r) {
    std::string rs = std::to_string(r);
    Var h_src = tape.gather_rows(h, src);
    Var m = dense(tape, pv, prefix + "msg" + rs,
                  tape.concat_cols({h_src, edge_feats}));
    Var agg = tape.segment_sum(m, dst, mol.num_atoms());
    h = dense(tape, pv, prefix + "upd" + rs, tape.concat_cols({h, agg}));
  }
  return h;
}

void atom_mpnn_init(ParamStore& ps, const std::string& prefix, int in_dim,
                    int hidden, int rounds, int edge_dim, rng::Engine& rng) {
  init_linear(ps, prefix + "in", in_dim, hidden, rng);
  for (int r = 0; r < rounds; ++r) {
    std::string rs = std::to_string(r);
    init_linear(ps, prefix + "msg" + rs, hidden + edge_dim, hidden, rng);
    init_linear(ps, prefix + "upd" + rs, 2 * hidden, hidden, rng);
  }
}

}  // namespace

// ---------- fragment embedder ----------

void frag_embedder_init(ParamStore& ps, const ModelConfig& cfg,
                        const std::string& prefix, rng::Engine& rng) {
  atom_mpnn_init(ps, prefix, atom_feature_dim(), cfg.frag_hidden, cfg.frag_rounds, 4,
                 rng);
  init_linear(ps, prefix + "out", cfg.frag_hidden + fragment_descriptor_dim(),
              cfg.frag_embed, rng);
}

Var frag_embedder_forward(Tape& tape, const ParamVars& pv, const ModelConfig& cfg,
                          const std::string& prefix, const frag::VocabEntry& entry) {
  const auto& mol = entry.graph;
  Tensor x(mol.num_atoms(), atom_feature_dim());
  for (int a = 0; a < mol.num_atoms(); ++a) {
    auto f = atom_features(mol, a);
    for (int j = 0; j < x.cols; ++j) x.at(a, j) = f[j];
  }
  std::vector<int> src, dst;
  Tensor efeat = bond_feature_rows(mol, &src, &dst);
  Var h = atom_mpnn(tape, pv, prefix, cfg.frag_rounds, mol, tape.input(std::move(x)),
                    tape.input(std::move(efeat)), src, dst);
  Var pooled = tape.sum_rows(h);
  Var desc = tape.input(Tensor::row(fragment_descriptor_features(entry)));
  return dense_linear(tape, pv, prefix + "out", tape.concat_cols({pooled, desc}));
}

// ---------- coarse network ----------

void coarse_net_init(ParamStore& ps, const ModelConfig& cfg,
                     const std::string& prefix, rng::Engine& rng) {
  int node_in = cfg.frag_embed + cfg.time_dim + cfg.latent_dim + cfg.rrwp_len;
  int edge_in = 2 + cfg.rrwp_len;
  int H = cfg.coarse_hidden, EH = cfg.coarse_edge_hidden;
  init_linear(ps, prefix + "nin", node_in, H, rng);
  init_linear(ps, prefix + "ein", edge_in, EH, rng);
  for (int r = 0; r < cfg.coarse_rounds; ++r) {
    std::string rs = std::to_string(r);
    init_linear(ps, prefix + "msg" + rs, 2 * H + EH, H, rng);
    init_linear(ps, prefix + "eup" + rs, EH + H, EH, rng);
    init_linear(ps, prefix + "upd" + rs, 2 * H, H, rng);
  }
  init_linear(ps, prefix + "embed", H, cfg.frag_embed, rng);
  init_linear(ps, prefix + "edge1", H + EH, H, rng);
  init_linear(ps, prefix + "edge2", H, 1, rng);
  init_linear(ps, prefix + "vel1", H, H, rng);
  init_linear(ps, prefix + "vel2", H, cfg.latent_dim, rng);
  ps.create(prefix + "mask_embed", 1, cfg.frag_embed);
}

CoarseOutputs coarse_net_forward(Tape& tape, const ParamVars& pv,
                                 const ModelConfig& cfg, const std::string& prefix,
                                 const CoarseInputs& in, bool with_heads) {
  const auto& g = *in.graph;
  int n = g.n();
  std::vector<std::vector<double>> rr_node, rr_edge;
  rrwp_features(g, cfg.rrwp_len, &rr_node, &rr_edge);

  Tensor time_c(n, cfg.time_dim);
  auto tf = time_features(in.t, cfg.time_dim);
  Tensor rr_node_c(n, cfg.rrwp_len);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < cfg.time_dim; ++j) time_c.at(i, j) = tf[j];
    for (int k = 0; k < cfg.rrwp_len; ++k) rr_node_c.at(i, k) = rr_node[i][k];
  }
  Tensor ones(n, 1);
  for (double& v : ones.data) v = 1.0;
  Var z_rep = tape.matmul(tape.input(std::move(ones)), in.z);
  Var node_in = tape.concat_cols(
      {in.state_embs, tape.input(std::move(time_c)), z_rep,
       tape.input(std::move(rr_node_c))});
  Var h = dense(tape, pv, prefix + "nin", node_in);

  // ordered pairs (i receives from j)
  std::vector<int> ilist, jlist;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) {
        ilist.push_back(i);
        jlist.push_back(j);
      }
  int P = static_cast<int>(ilist.size());
  Tensor rr_edge_c(P, cfg.rrwp_len);
  for (int p = 0; p < P; ++p)
    for (int k = 0; k < cfg.rrwp_len; ++k)
      rr_edge_c.at(p, k) = rr_edge[ilist[p] * n + jlist[p]][k];
  Var e = dense(tape, pv, prefix + "ein",
                tape.concat_cols({in.eps_onehot, tape.input(std::move(rr_edge_c))}));

  for (int r = 0; r < cfg.coarse_rounds; ++r) {
    std::string rs = std::to_string(r);
    Var hi = tape.gather_rows(h, ilist);
    Var hj = tape.gather_rows(h, jlist);
    Var m = dense(tape, pv, prefix + "msg" + rs, tape.concat_cols({hi, hj, e}));
    Var agg = tape.segment_sum(m, ilist, n);
    e = dense(tape, pv, prefix + "eup" + rs, tape.concat_cols({e, m}));
    h = dense(tape, pv, prefix + "upd" + rs, tape.concat_cols({h, agg}));
  }

  CoarseOutputs out;
  out.node_h = h;
  if (!with_heads) return out;
  out.node_embed = dense_linear(tape, pv, prefix + "embed", h);

  // unordered pairs i<j; the pair row of (i,j) in the ordered list
  auto prow = [&](int i, int j) { return i * (n - 1) + (j < i ? j : j - 1); };
  std::vector<int> rows_ij, rows_ji, rows_i, rows_j;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      out.pairs.emplace_back(i, j);
      rows_ij.push_back(prow(i, j));
      rows_ji.push_back(prow(j, i));
      rows_i.push_back(i);
      rows_j.push_back(j);
    }
  Var e_sym = tape.add(tape.gather_rows(e, rows_ij), tape.gather_rows(e, rows_ji));
  Var h_sym = tape.add(tape.gather_rows(h, rows_i), tape.gather_rows(h, rows_j));
  Var edge_hidden =
      dense(tape, pv, prefix + "edge1", tape.concat_cols({h_sym, e_sym}));
  out.edge_logits = dense_linear(tape, pv, prefix + "edge2", edge_hidden);

  Var pooled = tape.mean_rows(h);
  out.velocity = dense_linear(tape, pv, prefix + "vel2",
                              dense(tape, pv, prefix + "vel1", pooled));
  return out;
}

void property_head_init(ParamStore& ps, int in_dim, int hidden,
                        const std::string& prefix, rng::Engine& rng) {
  init_linear(ps, prefix + "head1", in_dim, hidden, rng);
  init_linear(ps, prefix + "head2", hidden, 1, rng);
}

Var property_head_forward(Tape& tape, const ParamVars& pv, const ModelConfig& cfg,
                          const std::string& prefix, Var node_h) {
  (void)cfg;
  Var pooled = tape.mean_rows(node_h);
  return dense_linear(tape, pv, prefix + "head2",
                      dense(tape, pv, prefix + "head1", pooled));
}

// ---------- autoencoder ----------

void ae_encoder_init(ParamStore& ps, const ModelConfig& cfg, rng::Engine& rng) {
  atom_mpnn_init(ps, "ae.enc.", atom_feature_dim() + 1, cfg.ae_hidden, cfg.ae_rounds,
                 4, rng);
  init_linear(ps, "ae.enc.mu", cfg.ae_hidden, cfg.latent_dim, rng);
  init_linear(ps, "ae.enc.logvar", cfg.ae_hidden, cfg.latent_dim, rng);
}

AeEncodeOut ae_encoder_forward(Tape& tape, const ParamVars& pv, const ModelConfig& cfg,
                               const chem::MolGraph& mol,
                               const std::vector<int>& junction_count) {
  Tensor x(mol.num_atoms(), atom_feature_dim() + 1);
  for (int a = 0; a < mol.num_atoms(); ++a) {
    auto f = atom_features(mol, a);
    for (size_t j = 0; j < f.size(); ++j) x.at(a, j) = f[j];
    x.at(a, atom_feature_dim()) = junction_count[a];
  }
  std::vector<int> src, dst;
  Tensor efeat = bond_feature_rows(mol, &src, &dst);
  Var h = atom_mpnn(tape, pv, "ae.enc.", cfg.ae_rounds, mol, tape.input(std::move(x)),
                    tape.input(std::move(efeat)), src, dst);
  Var pooled = tape.sum_rows(h);
  AeEncodeOut out;
  out.mean = dense_linear(tape, pv, "ae.enc.mu", pooled);
  out.logvar = dense_linear(tape, pv, "ae.enc.logvar", pooled);
  return out;
}

void ae_decoder_init(ParamStore& ps, const ModelConfig& cfg, rng::Engine& rng) {
  atom_mpnn_init(ps, "ae.dec.", atom_feature_dim() + cfg.latent_dim, cfg.ae_hidden,
                 cfg.ae_rounds, 5, rng);
  init_linear(ps, "ae.dec.cand1", 2 * cfg.ae_hidden, cfg.ae_hidden, rng);
  init_linear(ps, "ae.dec.cand2", cfg.ae_hidden, 1, rng);
}

Var ae_decoder_forward(Tape& tape, const ParamVars& pv, const ModelConfig& cfg,
                       const coarse::Assembly& assembly,
                       const coarse::MatchProblem& problem, Tape::Var z) {
  const auto& mol = assembly.graph;
  int n = mol.num_atoms();
  Tensor x(n, atom_feature_dim());
  for (int a = 0; a < n; ++a) {
    auto f = atom_features(mol, a);
    for (size_t j = 0; j < f.size(); ++j) x.at(a, j) = f[j];
  }
  Tensor ones(n, 1);
  for (double& v : ones.data) v = 1.0;
  Var z_rep = tape.matmul(tape.input(std::move(ones)), z);
  Var xin = tape.concat_cols({tape.input(std::move(x)), z_rep});

  // real bonds + deduplicated candidate atom pairs, both directions
  std::vector<int> src, dst;
  std::vector<std::array<double, 5>> efeat_rows;
  for (const auto& b : mol.bonds()) {
    std::array<double, 5> f{};
    f[static_cast<int>(b.order) - 1] = 1.0;
    efeat_rows.push_back(f);
    efeat_rows.push_back(f);
    src.push_back(b.a);
    dst.push_back(b.b);
    src.push_back(b.b);
    dst.push_back(b.a);
  }
  std::vector<std::pair<int, int>> cand_atoms(problem.candidates.size());
  std::map<std::pair<int, int>, int> uniq;
  for (size_t c = 0; c < problem.candidates.size(); ++c) {
    const auto& cand = problem.candidates[c];
    int u = assembly.slot_host[cand.a.node][cand.a.slot];
    int v = assembly.slot_host[cand.b.node][cand.b.slot];
    auto key = std::minmax(u, v);
    cand_atoms[c] = {key.first, key.second};
    if (uniq.emplace(std::pair(key.first, key.second), 1).second) {
      std::array<double, 5> f{};
      f[4] = 1.0;
      efeat_rows.push_back(f);
      efeat_rows.push_back(f);
      src.push_back(key.first);
      dst.push_back(key.second);
      src.push_back(key.second);
      dst.push_back(key.first);
    }
  }
  Tensor efeat(static_cast<int>(efeat_rows.size()), 5);
  for (size_t r = 0; r < efeat_rows.size(); ++r)
    for (int j = 0; j < 5; ++j) efeat.at(static_cast<int>(r), j) = efeat_rows[r][j];

  Var h = atom_mpnn(tape, pv, "ae.dec.", cfg.ae_rounds, mol, xin,
                    tape.input(std::move(efeat)), src, dst);

  std::vector<int> us, vs;
  for (const auto& [u, v] : cand_atoms) {
    us.push_back(u);
    vs.push_back(v);
  }
  Var hu = tape.gather_rows(h, us);
  Var hv = tape.gather_rows(h, vs);
  Var sym = tape.concat_cols({tape.add(hu, hv), tape.mul(hu, hv)});
  return dense_linear(tape, pv, "ae.dec.cand2",
                      dense(tape, pv, "ae.dec.cand1", sym));
}

// ---------- optimizer ----------

void AdamW::init(const ParamStore& ps) {
  m.clear();
  v.clear();
  for (const auto& t : ps.values) {
    m.emplace_back(t.rows, t.cols);
    v.emplace_back(t.rows, t.cols);
  }
  steps = 0;
}

void AdamW::step(ParamStore& ps, std::vector<Tensor>& grads) {
  if (weight_decay != 0.0)
    for (auto& p : ps.values)
      for (double& x : p.data) x *= 1.0 - lr * weight_decay;
  double norm_sq = 0.0;
  for (const auto& g : grads)
    for (double x : g.data) norm_sq += x * x;
  double norm = std::sqrt(norm_sq);
  double scale = (clip > 0.0 && norm > clip) ? clip / norm : 1.0;
  ++steps;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  for (size_t i = 0; i < ps.values.size(); ++i) {
    auto& p = ps.values[i];
    for (size_t k = 0; k < p.data.size(); ++k) {
      double g = grads[i].data[k] * scale;
      m[i].data[k] = beta1 * m[i].data[k] + (1.0 - beta1) * g;
      v[i].data[k] = beta2 * v[i].data[k] + (1.0 - beta2) * g * g;
      double mhat = m[i].data[k] / bc1;
      double vhat = v[i].data[k] / bc2;
      p.data[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void Ema::init(const ParamStore& ps) {
  shadow.clear();
  for (const auto& t : ps.values) shadow.push_back(t);
}

void Ema::update(const ParamStore& ps) {
  for (size_t i = 0; i < shadow.size(); ++i)
    for (size_t k = 0; k < shadow[i].data.size(); ++k)
      shadow[i].data[k] =
          decay * shadow[i].data[k] + (1.0 - decay) * ps.values[i].data[k];
}

void Ema::copy_to(ParamStore& ps) const {
  for (size_t i = 0; i < shadow.size(); ++i) ps.values[i] = shadow[i];
}

}  // namespace fragflow::neural
