#include "fragflow/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "fragflow/guidance.hpp"

namespace fragflow::flow {

using neural::Tape;
using neural::Tensor;

Distortion distortion_from_string(const std::string& s) {
  if (s == "uniform") return Distortion::Uniform;
  if (s == "polydec") return Distortion::Polydec;
  throw FlowError(FlowError::Kind::BadConfig, "unknown distortion: " + s);
}

std::vector<double> time_grid(int steps, Distortion d) {
  if (steps < 1) throw FlowError(FlowError::Kind::BadConfig, "steps must be >= 1");
  std::vector<double> grid(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    double u = static_cast<double>(k) / steps;
    grid[k] = d == Distortion::Uniform ? u : 2.0 * u - u * u;
  }
  grid[0] = 0.0;
  grid[steps] = 1.0;
  return grid;
}

// ---------- forward noising ----------

TrainingTriple sample_training_triple_at(double t, const coarse::CoarseGraph& g1,
                                         const std::vector<double>& z1,
                                         rng::Engine& rng) {
  TrainingTriple out;
  out.t = t;
  out.noisy = g1;
  int n = g1.n();
  for (int i = 0; i < n; ++i)
    if (!rng.bernoulli(t)) out.noisy.node_ids[i] = kMask;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!rng.bernoulli(t)) out.noisy.set_edge(i, j, rng.bernoulli(0.5));
  out.z0.resize(z1.size());
  out.z_t.resize(z1.size());
  for (size_t k = 0; k < z1.size(); ++k) {
    out.z0[k] = rng.normal();
    out.z_t[k] = (1.0 - t) * out.z0[k] + t * z1[k];
  }
  return out;
}

TrainingTriple sample_training_triple(const coarse::CoarseGraph& g1,
                                      const std::vector<double>& z1,
                                      rng::Engine& rng) {
  return sample_training_triple_at(rng.uniform(), g1, z1, rng);
}

// ---------- rates ----------

double node_rate_unmask(double t) { return 1.0 / (1.0 - t); }
double edge_rate_toward_target(double t) { return 1.0 / (1.0 - t); }

double db_node_rate_unmask(double t, double eta) { return eta * t / (1.0 - t); }
double db_node_rate_remask(double eta) { return eta; }

double db_edge_rate(int eps_from, int eps_to, int eps1, double t, double eta) {
  if (eps_from == eps_to) return 0.0;
  double r = 0.0;
  if (eps_from == eps1) r += 1.0;
  if (eps_to == eps1) r += (1.0 + t) / (1.0 - t);
  return eta * r;
}

// ---------- kernels ----------

void clamp_normalize(KernelRow& row) {
  double off_sum = 0.0;
  for (size_t i = 0; i < row.probs.size(); ++i) {
    if (static_cast<int>(i) == row.current_index) continue;
    if (row.probs[i] < 0.0) row.probs[i] = 0.0;
    off_sum += row.probs[i];
  }
  if (row.current_index >= 0) {
    // diagonal absorbs the residual; excess off-diagonal mass renormalizes
    row.probs[row.current_index] = std::max(0.0, 1.0 - off_sum);
  }
  double total = 0.0;
  for (double p : row.probs) total += p;
  if (total <= 1e-12)
    throw FlowError(FlowError::Kind::InvalidKernel, "kernel row sums to zero");
  if (std::abs(total - 1.0) > 1e-9)
    for (double& p : row.probs) p /= total;
}

KernelRow node_kernel(int current, const bag::Bag& bag,
                      const std::vector<double>& posterior, double p_current,
                      double t, double dt, double eta, bool final_step) {
  KernelRow row;
  row.states = bag.ids;
  int mask_pos = static_cast<int>(row.states.size());
  row.states.push_back(kMask);
  row.probs.assign(row.states.size(), 0.0);

  if (current == kMask) {
    row.current_index = mask_pos;
    if (final_step) {
      for (int k = 0; k < bag.size(); ++k) row.probs[k] = posterior[k];
      row.probs[mask_pos] = 0.0;
    } else {
      double rate_scale = (node_rate_unmask(t) + db_node_rate_unmask(t, eta)) * dt;
      for (int k = 0; k < bag.size(); ++k) row.probs[k] = posterior[k] * rate_scale;
    }
  } else {
    int pos = bag.find(current);
    if (pos < 0) {
      row.states.push_back(current);
      row.probs.push_back(0.0);
      pos = static_cast<int>(row.states.size()) - 1;
    }
    row.current_index = pos;
    row.probs[mask_pos] = db_node_rate_remask(eta) * p_current * dt;
    if (final_step) row.probs[mask_pos] = 0.0;  // t=1 admits no masks
  }
  clamp_normalize(row);
  return row;
}

KernelRow edge_kernel(int current, double g1, double t, double dt, double eta,
                      bool final_step) {
  (void)final_step;  // dt = 1-t exactly on the last grid step; no special case
  KernelRow row;
  row.states = {0, 1};
  row.probs = {0.0, 0.0};
  row.current_index = current;
  int other = 1 - current;
  double g_other = current == 0 ? g1 : 1.0 - g1;
  double g_cur = 1.0 - g_other;
  // base de-noising rate flips toward eps1 only; the binary expectation is
  // exact: flip rate = g(other)/(1-t)
  double rate = g_other * edge_rate_toward_target(t);
  // detailed-balance extension, expectation over the posterior
  rate += g_cur * db_edge_rate(current, other, current, t, eta);
  rate += g_other * db_edge_rate(current, other, other, t, eta);
  row.probs[other] = rate * dt;
  clamp_normalize(row);
  return row;
}

void euler_latent_step(std::vector<double>& z, const std::vector<double>& v, double dt) {
  for (size_t i = 0; i < z.size(); ++i) z[i] += v[i] * dt;
}

// ---------- sampling ----------

const char* sample_status_name(SampleStatus s) {
  switch (s) {
    case SampleStatus::Valid: return "valid";
    case SampleStatus::ParseFail: return "parse-fail";
    case SampleStatus::UnrealizedEdge: return "unrealized-edge";
    case SampleStatus::MultiComponent: return "multi-component";
  }
  return "?";
}

Tensor embed_vocabulary(const neural::ParamStore& params,
                        const neural::ModelConfig& cfg, const std::string& prefix,
                        const frag::Vocabulary& vocab) {
  Tensor out(vocab.size(), cfg.frag_embed);
  for (int id = 0; id < vocab.size(); ++id) {
    Tape tape;
    auto pv = neural::load_params(tape, params);
    auto emb = neural::frag_embedder_forward(tape, pv, cfg, prefix, vocab.entry(id));
    const Tensor& e = tape.val(emb);
    for (int j = 0; j < cfg.frag_embed; ++j) out.at(id, j) = e.at(0, j);
  }
  return out;
}

namespace {

struct SamplerShared {
  const FlowModel* model;
  const AeModel* ae;
  const frag::Vocabulary* vocab;
  const SampleConfig* cfg;
  const PredictorModel* guide;
  Tensor vocab_embeds;        // flow-model fragment embeddings [V, E]
  Tensor guide_embeds;        // predictor fragment embeddings (if guided)
  std::vector<double> marginal;  // possibly property-reweighted
  std::vector<double> count_probs;
  std::vector<double> grid;
};

Tensor state_embedding_rows(const SamplerShared& sh, const coarse::CoarseGraph& g) {
  int n = g.n();
  int E = sh.model->cfg.frag_embed;
  Tensor rows(n, E);
  const Tensor& mask_embed = sh.model->params.get("cn.mask_embed");
  for (int i = 0; i < n; ++i) {
    int id = g.node_ids[i];
    for (int j = 0; j < E; ++j)
      rows.at(i, j) = id == kMask ? mask_embed.at(0, j) : sh.vocab_embeds.at(id, j);
  }
  return rows;
}

Tensor eps_onehot_rows(const coarse::CoarseGraph& g) {
  int n = g.n();
  Tensor rows(n * (n - 1), 2);
  int p = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      rows.at(p, g.edge(i, j) ? 1 : 0) = 1.0;
      ++p;
    }
  return rows;
}

SampleResult run_one(const SamplerShared& sh, uint64_t sample_index) {
  const auto& cfg = *sh.cfg;
  const auto& mcfg = sh.model->cfg;
  rng::Engine rng(rng::derive_seed(cfg.seed, 1, sample_index));

  // prior state
  int n = rng.categorical(sh.count_probs);
  if (n < 1) n = 1;
  FlowState st;
  st.graph = coarse::CoarseGraph::empty(n);
  for (int i = 0; i < n; ++i) st.graph.node_ids[i] = kMask;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) st.graph.set_edge(i, j, rng.bernoulli(0.5));
  st.z.resize(mcfg.latent_dim);
  for (auto& v : st.z) v = rng.normal();

  int steps = cfg.steps;
  for (int k = 0; k < steps; ++k) {
    double t = sh.grid[k];
    double dt = sh.grid[k + 1] - t;
    bool final_step = (k + 1 == steps);
    st.t = t;

    auto bag = bag::sample_bag_inference(sh.marginal, cfg.bag_size, cfg.t_bag, rng);

    // model forward
    Tape tape;
    auto pv = neural::load_params(tape, sh.model->params);
    neural::CoarseInputs in;
    in.state_embs = tape.input(state_embedding_rows(sh, st.graph));
    in.eps_onehot = tape.input(eps_onehot_rows(st.graph));
    in.z = tape.input(Tensor::row(st.z));
    in.t = t;
    in.graph = &st.graph;
    auto out = neural::coarse_net_forward(tape, pv, mcfg, "cn.", in);

    const Tensor& H = tape.val(out.node_embed);       // [n, E]
    const Tensor& elog = tape.val(out.edge_logits);   // [pairs, 1]
    const Tensor& vel = tape.val(out.velocity);       // [1, L]

    // guidance factors at the current state
    guidance::GuidanceFactors gf;
    bool guided = cfg.condition && cfg.condition->lambda_x > 0.0 && sh.guide;
    if (guided)
      gf = guidance::guidance_factors(*sh.guide, st, sh.guide_embeds,
                                      cfg.condition->value, cfg.condition->lambda_x,
                                      cfg.condition->sigma2);

    // nodes
    for (int i = 0; i < n; ++i) {
      std::vector<double> logits(bag.size());
      for (int b = 0; b < bag.size(); ++b) {
        double dot = 0.0;
        for (int j = 0; j < mcfg.frag_embed; ++j)
          dot += H.at(i, j) * sh.vocab_embeds.at(bag.ids[b], j);
        logits[b] = dot;
      }
      auto posterior = bag::infonce_posterior_logits(logits, cfg.t_pred);
      double p_current = 0.0;
      int cur = st.graph.node_ids[i];
      if (cur != kMask) {
        int pos = bag.find(cur);
        if (pos >= 0) {
          p_current = posterior[pos];
        } else {
          double dot = 0.0;
          for (int j = 0; j < mcfg.frag_embed; ++j)
            dot += H.at(i, j) * sh.vocab_embeds.at(cur, j);
          double mx = dot / cfg.t_pred;
          for (int b = 0; b < bag.size(); ++b)
            mx = std::max(mx, logits[b] / cfg.t_pred);
          double denom = std::exp(dot / cfg.t_pred - mx);
          double self_term = denom;
          for (int b = 0; b < bag.size(); ++b)
            denom += std::exp(logits[b] / cfg.t_pred - mx);
          p_current = self_term / denom;
        }
      }
      auto row = node_kernel(cur, bag, posterior, p_current, t, dt,
                             cfg.eta_node, final_step);
      if (guided) {
        std::vector<double> mult(row.states.size());
        for (size_t s = 0; s < row.states.size(); ++s) {
          auto se = guidance::predictor_state_embed(*sh.guide, sh.guide_embeds,
                                                    row.states[s]);
          mult[s] = guidance::node_multiplier(gf, i, se);
        }
        row.probs = guidance::conditioned_kernel(row.probs, mult);
      }
      int next;
      if (final_step && cur == kMask) {
        next = row.states[0];
        double best = row.probs[0];
        for (size_t s = 1; s < row.states.size(); ++s)
          if (row.probs[s] > best && row.states[s] != kMask) {
            best = row.probs[s];
            next = row.states[s];
          }
      } else {
        next = row.states[rng.categorical(row.probs)];
      }
      st.graph.node_ids[i] = next;
    }

    // edges (i<j rows of edge_logits)
    for (size_t pidx = 0; pidx < out.pairs.size(); ++pidx) {
      auto [i, j] = out.pairs[pidx];
      double g1 = 1.0 / (1.0 + std::exp(-elog.at(static_cast<int>(pidx), 0)));
      int cur = st.graph.edge(i, j) ? 1 : 0;
      auto row = edge_kernel(cur, g1, t, dt, cfg.eta_edge, final_step);
      if (guided) {
        std::vector<double> mult(2);
        for (int s = 0; s < 2; ++s)
          mult[s] = guidance::edge_multiplier(gf, static_cast<int>(pidx), s);
        row.probs = guidance::conditioned_kernel(row.probs, mult);
      }
      int next = row.states[rng.categorical(row.probs)];
      st.graph.set_edge(i, j, next == 1);
    }

    // latent
    std::vector<double> v(mcfg.latent_dim);
    for (int j = 0; j < mcfg.latent_dim; ++j) v[j] = vel.at(0, j);
    if (guided)
      for (int j = 0; j < mcfg.latent_dim; ++j) v[j] += gf.latent_shift[j];
    euler_latent_step(st.z, v, dt);
  }

  // decode
  SampleResult res;
  res.graph = st.graph;
  res.z = st.z;
  if (!st.graph.connected() && st.graph.n() > 1) {
    res.status = SampleStatus::MultiComponent;
    return res;
  }
  try {
    auto assembly = coarse::assemble(st.graph, *sh.vocab);
    auto problem = coarse::build_match_problem(st.graph, *sh.vocab);
    std::vector<double> weights;
    if (!problem.candidates.empty()) {
      Tape tape;
      auto pv = neural::load_params(tape, sh.ae->params);
      auto scores = neural::ae_decoder_forward(tape, pv, sh.ae->cfg, assembly,
                                               problem, tape.input(Tensor::row(st.z)));
      const Tensor& sc = tape.val(scores);
      weights.resize(problem.candidates.size());
      for (size_t c = 0; c < weights.size(); ++c)
        weights[c] = sc.at(static_cast<int>(c), 0);
    }
    auto matching = coarse::blossom_match(problem, weights);
    auto mol = coarse::reconstruct(st.graph, matching, *sh.vocab);
    if (mol.num_components() != 1) {
      res.status = SampleStatus::MultiComponent;
      return res;
    }
    if (!chem::check_valence(mol)) {
      res.status = SampleStatus::ParseFail;
      return res;
    }
    std::string smiles = chem::canonical_smiles(mol);
    // the canonical form must reparse cleanly
    chem::parse_smiles(smiles);
    res.status = SampleStatus::Valid;
    res.smiles = smiles;
  } catch (const coarse::CoarseError& e) {
    res.status = e.kind() == coarse::CoarseError::Kind::UnrealizedCoarseEdge
                     ? SampleStatus::UnrealizedEdge
                     : SampleStatus::ParseFail;
  } catch (const chem::SmilesError&) {
    res.status = SampleStatus::ParseFail;
  }
  return res;
}

}  // namespace

std::vector<SampleResult> sample_molecules(const FlowModel& model, const AeModel& ae,
                                           const frag::Vocabulary& vocab,
                                           const SampleConfig& cfg,
                                           const PredictorModel* guide) {
  SamplerShared sh;
  sh.model = &model;
  sh.ae = &ae;
  sh.vocab = &vocab;
  sh.cfg = &cfg;
  sh.guide = guide;
  sh.vocab_embeds = embed_vocabulary(model.params, model.cfg, "fe.", vocab);
  sh.marginal = vocab.marginals();
  if (cfg.condition && guide) {
    sh.guide_embeds = embed_vocabulary(guide->params, guide->cfg, "npfe.", vocab);
    if (cfg.condition->lambda_bag > 0.0) {
      // fragment-level property predictions reweight the bag marginal
      std::vector<double> mu(vocab.size());
      for (int id = 0; id < vocab.size(); ++id) {
        Tape tape;
        auto pv = neural::load_params(tape, guide->params);
        auto emb = neural::frag_embedder_forward(tape, pv, guide->cfg, "fpfe.",
                                                 vocab.entry(id));
        auto pred = tape.add_rowvec(tape.matmul(tape.silu(tape.add_rowvec(
                                        tape.matmul(emb, pv("fp.head1.W")),
                                        pv("fp.head1.b"))),
                                    pv("fp.head2.W")),
                                    pv("fp.head2.b"));
        mu[id] = tape.val(pred).at(0, 0) * guide->norm_std + guide->norm_mean;
      }
      sh.marginal = bag::conditional_reweight(sh.marginal, mu, cfg.condition->value,
                                              cfg.condition->lambda_bag);
    }
  }
  if (model.frag_count_hist.empty())
    throw FlowError(FlowError::Kind::BadConfig, "flow model lacks fragment-count histogram");
  sh.count_probs.assign(model.frag_count_hist.begin(), model.frag_count_hist.end());
  sh.grid = time_grid(cfg.steps, cfg.distortion);

  std::vector<SampleResult> results(cfg.n_samples);
  int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    for (int k = 0; k < cfg.n_samples; ++k)
      results[k] = run_one(sh, static_cast<uint64_t>(k));
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next_index{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          int k = next_index.fetch_add(1);
          if (k >= cfg.n_samples) return;
          results[k] = run_one(sh, static_cast<uint64_t>(k));
        }
      });
    for (auto& th : pool) th.join();
  }
  return results;
}

}  // namespace fragflow::flow
