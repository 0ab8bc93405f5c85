#include "fragflow/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

namespace fragflow::pipeline {

using neural::Tape;
using neural::Tensor;
using Var = Tape::Var;

double property_value(const chem::MolGraph& mol, const std::string& name) {
  auto d = chem::descriptors(mol);
  if (name == "ring_count") return d.ring_count;
  if (name == "heavy_atoms") return d.heavy_atom_count;
  if (name == "mol_weight") return d.molecular_weight;
  if (name == "hba") return d.hba_count;
  if (name == "hbd") return d.hbd_count;
  if (name == "aromatic_rings") return d.aromatic_ring_count;
  throw std::invalid_argument("unknown property: " + name);
}

std::vector<EncodedMol> prepare_dataset(const std::vector<chem::MolGraph>& mols,
                                        const frag::Vocabulary& vocab) {
  std::vector<EncodedMol> out;
  out.reserve(mols.size());
  for (const auto& mol : mols) {
    EncodedMol e;
    e.tc = coarse::to_coarse(mol, vocab);
    e.assembly = coarse::assemble(e.tc.graph, vocab);
    e.junction_count.assign(mol.num_atoms(), 0);
    auto f = frag::fragment_molecule(mol);
    for (const auto& frag : f.fragments)
      for (const auto& [atom, bond] : frag.slots) ++e.junction_count[atom];
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

Tensor gt_labels(const EncodedMol& mol) {
  Tensor labels(static_cast<int>(mol.tc.problem.candidates.size()), 1);
  for (int c : mol.tc.ground_truth.selected) labels.at(c, 0) = 1.0;
  return labels;
}

struct AeForwardOut {
  Var mean, logvar, logits;
};

AeForwardOut ae_forward(Tape& tape, const neural::ParamVars& pv,
                        const neural::ModelConfig& cfg, const chem::MolGraph& mol,
                        const EncodedMol& enc, const std::vector<double>* noise) {
  AeForwardOut out;
  auto encoded = neural::ae_encoder_forward(tape, pv, cfg, mol, enc.junction_count);
  out.mean = encoded.mean;
  out.logvar = encoded.logvar;
  Var z = encoded.mean;
  if (noise) {
    Var sigma = tape.exp_(tape.scale(encoded.logvar, 0.5));
    z = tape.add(encoded.mean, tape.mul(sigma, tape.input(Tensor::row(*noise))));
  }
  out.logits = neural::ae_decoder_forward(tape, pv, cfg, enc.assembly,
                                          enc.tc.problem, z);
  return out;
}

Var kl_to_standard_normal(Tape& tape, Var mean, Var logvar) {
  // 0.5 * sum(exp(logvar) + mean^2 - 1 - logvar)
  Var term = tape.sub(tape.add(tape.exp_(logvar), tape.square(mean)),
                      tape.add_const(logvar, 1.0));
  return tape.scale(tape.sum_all(term), 0.5);
}

}  // namespace

neural::ParamStore make_ae_params(const neural::ModelConfig& cfg, uint64_t seed) {
  neural::ParamStore ps;
  rng::Engine rng(rng::derive_seed(seed, 10, 0));
  neural::ae_encoder_init(ps, cfg, rng);
  neural::ae_decoder_init(ps, cfg, rng);
  return ps;
}

neural::ParamStore make_flow_params(const neural::ModelConfig& cfg, uint64_t seed) {
  neural::ParamStore ps;
  rng::Engine rng(rng::derive_seed(seed, 11, 0));
  neural::frag_embedder_init(ps, cfg, "fe.", rng);
  neural::coarse_net_init(ps, cfg, "cn.", rng);
  return ps;
}

neural::ParamStore make_predictor_params(const neural::ModelConfig& cfg, uint64_t seed) {
  neural::ParamStore ps;
  rng::Engine rng(rng::derive_seed(seed, 12, 0));
  neural::frag_embedder_init(ps, cfg, "npfe.", rng);
  neural::coarse_net_init(ps, cfg, "np.", rng);
  neural::property_head_init(ps, cfg.coarse_hidden, cfg.pred_hidden, "np.", rng);
  neural::frag_embedder_init(ps, cfg, "fpfe.", rng);
  neural::property_head_init(ps, cfg.frag_embed, cfg.pred_hidden, "fp.", rng);
  return ps;
}

flow::AeModel train_autoencoder(const std::vector<chem::MolGraph>& train_mols,
                                const std::vector<EncodedMol>& train,
                                const std::vector<chem::MolGraph>& val_mols,
                                const std::vector<EncodedMol>& val,
                                const frag::Vocabulary& vocab,
                                const neural::ModelConfig& cfg,
                                const TrainAeOptions& opts) {
  flow::AeModel model;
  model.cfg = cfg;
  model.vocab_digest = vocab.digest();
  model.params = make_ae_params(cfg, opts.seed);

  neural::AdamW opt;
  opt.lr = opts.lr;
  opt.clip = opts.grad_clip;
  opt.weight_decay = opts.weight_decay;
  opt.init(model.params);

  rng::Engine rng(rng::derive_seed(opts.seed, 20, 0));
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  auto validation_bce = [&]() {
    double total = 0.0;
    long long pairs = 0;
    for (size_t i = 0; i < val.size(); ++i) {
      if (val[i].tc.problem.candidates.empty()) continue;
      Tape tape;
      auto pv = neural::load_params(tape, model.params);
      auto out = ae_forward(tape, pv, cfg, val_mols[i], val[i], nullptr);
      Var bce = tape.bce_logits_sum(out.logits, gt_labels(val[i]));
      total += tape.val(bce).data[0];
      pairs += static_cast<long long>(val[i].tc.problem.candidates.size());
    }
    return pairs ? total / pairs : 0.0;
  };

  double best_val = 1e300;
  neural::ParamStore best_params = model.params;
  int since_best = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    // deterministic shuffle per epoch
    rng::Engine shuffle_rng(rng::derive_seed(opts.seed, 21, epoch));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += opts.batch) {
      size_t stop = std::min(order.size(), start + opts.batch);
      Tape tape;
      auto pv = neural::load_params(tape, model.params);
      std::vector<Var> losses;
      for (size_t k = start; k < stop; ++k) {
        const auto& enc = train[order[k]];
        std::vector<double> noise(cfg.latent_dim);
        for (auto& v : noise) v = rng.normal();
        auto out = ae_forward(tape, pv, cfg, train_mols[order[k]], enc, &noise);
        Var kl = kl_to_standard_normal(tape, out.mean, out.logvar);
        Var loss = tape.scale(kl, opts.beta);
        if (!enc.tc.problem.candidates.empty())
          loss = tape.add(tape.bce_logits_sum(out.logits, gt_labels(enc)), loss);
        losses.push_back(loss);
      }
      Var batch_loss = losses.size() == 1
                           ? losses[0]
                           : tape.sum_all(tape.concat_rows(losses));
      batch_loss = tape.scale(batch_loss, 1.0 / static_cast<double>(losses.size()));
      tape.backward(batch_loss);
      auto grads = neural::collect_grads(tape, pv, model.params);
      opt.step(model.params, grads);
      epoch_loss += tape.val(batch_loss).data[0];
      ++batches;
    }
    double val_bce = validation_bce();
    if (opts.log)
      *opts.log << "ae epoch " << epoch << " train_loss "
                << (batches ? epoch_loss / batches : 0.0) << " val_bce " << val_bce
                << "\n";
    if (val_bce < best_val - 1e-9) {
      best_val = val_bce;
      best_params = model.params;
      since_best = 0;
    } else if (++since_best > opts.patience) {
      break;  // early stop on validation BCE
    }
  }
  model.params = best_params;
  return model;
}

void encode_dataset(const flow::AeModel& ae, const std::vector<chem::MolGraph>& mols,
                    std::vector<EncodedMol>& data) {
  for (size_t i = 0; i < data.size(); ++i) {
    Tape tape;
    auto pv = neural::load_params(tape, ae.params);
    auto enc = neural::ae_encoder_forward(tape, pv, ae.cfg, mols[i],
                                          data[i].junction_count);
    const Tensor& mean = tape.val(enc.mean);
    const Tensor& logvar = tape.val(enc.logvar);
    data[i].enc_mean.assign(mean.data.begin(), mean.data.end());
    data[i].enc_logvar.assign(logvar.data.begin(), logvar.data.end());
  }
}

FlowLossTerms flow_loss_one(Tape& tape, const neural::ParamVars& pv,
                            const neural::ModelConfig& cfg, const EncodedMol& mol,
                            const flow::TrainingTriple& triple,
                            const std::vector<double>& z1, const bag::Bag& bag,
                            Var bag_embeds, const flow::LossWeights& weights) {
  int n = triple.noisy.n();
  // node input rows: bag embedding of the current state, mask row otherwise
  std::vector<Var> rows;
  rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    int id = triple.noisy.node_ids[i];
    if (id == flow::kMask) {
      rows.push_back(pv("cn.mask_embed"));
    } else {
      int pos = bag.find(id);
      if (pos < 0)
        throw std::logic_error("training bag must contain every positive");
      rows.push_back(tape.gather_rows(bag_embeds, {pos}));
    }
  }
  neural::CoarseInputs in;
  in.state_embs = tape.concat_rows(rows);
  Tensor eps(n * (n - 1), 2);
  {
    int p = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        eps.at(p, triple.noisy.edge(i, j) ? 1 : 0) = 1.0;
        ++p;
      }
  }
  in.eps_onehot = tape.input(std::move(eps));
  in.z = tape.input(Tensor::row(triple.z_t));
  in.t = triple.t;
  in.graph = &triple.noisy;
  auto out = neural::coarse_net_forward(tape, pv, cfg, "cn.", in);

  FlowLossTerms terms;
  // Info-NCE over the shared bag, every node scored against it
  Var logits = tape.matmul(out.node_embed, tape.transpose(bag_embeds));
  std::vector<int> targets(n);
  for (int i = 0; i < n; ++i) {
    targets[i] = bag.find(mol.tc.graph.node_ids[i]);
    if (targets[i] < 0) throw std::logic_error("positive missing from bag");
  }
  terms.node_ce = tape.cross_entropy_rows(logits, targets);

  // edge BCE against the clean edges
  if (!out.pairs.empty()) {
    Tensor labels(static_cast<int>(out.pairs.size()), 1);
    for (size_t p = 0; p < out.pairs.size(); ++p)
      labels.at(static_cast<int>(p), 0) =
          mol.tc.graph.edge(out.pairs[p].first, out.pairs[p].second) ? 1.0 : 0.0;
    terms.edge_bce = tape.bce_logits_sum(out.edge_logits, labels);
  } else {
    terms.edge_bce = tape.input(Tensor::scalar(0.0));
  }

  // latent velocity regression toward z1 - z0
  std::vector<double> target(z1.size());
  for (size_t k = 0; k < z1.size(); ++k) target[k] = z1[k] - triple.z0[k];
  terms.latent_mse = tape.mse_sum(out.velocity, tape.input(Tensor::row(target)));

  terms.total = tape.add(terms.node_ce,
                         tape.add(tape.scale(terms.edge_bce, weights.alpha_edge),
                                  tape.scale(terms.latent_mse, weights.alpha_latent)));
  return terms;
}

namespace {

std::vector<double> sample_z1(const EncodedMol& mol, rng::Engine& rng) {
  std::vector<double> z(mol.enc_mean.size());
  for (size_t k = 0; k < z.size(); ++k)
    z[k] = mol.enc_mean[k] + std::exp(0.5 * mol.enc_logvar[k]) * rng.normal();
  return z;
}

Var stack_bag_embeddings(Tape& tape, const neural::ParamVars& pv,
                         const neural::ModelConfig& cfg, const std::string& prefix,
                         const frag::Vocabulary& vocab, const std::vector<int>& ids) {
  std::vector<Var> rows;
  rows.reserve(ids.size());
  for (int id : ids)
    rows.push_back(
        neural::frag_embedder_forward(tape, pv, cfg, prefix, vocab.entry(id)));
  return tape.concat_rows(rows);
}

}  // namespace

flow::FlowModel train_flow(const std::vector<EncodedMol>& train,
                           const std::vector<EncodedMol>& val,
                           const frag::Vocabulary& vocab,
                           const neural::ModelConfig& cfg,
                           const TrainFlowOptions& opts) {
  flow::FlowModel model;
  model.cfg = cfg;
  model.vocab_digest = vocab.digest();
  model.params = make_flow_params(cfg, opts.seed);

  // fragment-count histogram for the sampler
  int max_n = 0;
  for (const auto& m : train) max_n = std::max(max_n, m.tc.graph.n());
  model.frag_count_hist.assign(max_n + 1, 0);
  for (const auto& m : train) ++model.frag_count_hist[m.tc.graph.n()];

  neural::AdamW opt;
  opt.lr = opts.lr;
  opt.clip = opts.grad_clip;
  opt.weight_decay = opts.weight_decay;
  opt.init(model.params);
  neural::Ema ema;
  ema.decay = opts.ema_decay;
  ema.init(model.params);

  auto marginal = vocab.marginals();
  rng::Engine rng(rng::derive_seed(opts.seed, 30, 0));
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  auto validation_loss = [&](const neural::ParamStore& params) {
    rng::Engine vrng(rng::derive_seed(opts.seed, 31, 0));
    double total = 0.0;
    int count = 0;
    for (size_t start = 0; start < val.size(); start += opts.batch) {
      size_t stop = std::min(val.size(), start + opts.batch);
      std::set<int> positive_set;
      for (size_t k = start; k < stop; ++k)
        for (int id : val[k].tc.graph.node_ids) positive_set.insert(id);
      std::vector<int> positives(positive_set.begin(), positive_set.end());
      auto bag = bag::sample_bag_train(positives, marginal, opts.bag_size, vrng);
      Tape tape;
      auto pv = neural::load_params(tape, params);
      Var bag_embeds = stack_bag_embeddings(tape, pv, cfg, "fe.", vocab, bag.ids);
      for (size_t k = start; k < stop; ++k) {
        auto z1 = sample_z1(val[k], vrng);
        auto triple = flow::sample_training_triple(val[k].tc.graph, z1, vrng);
        auto terms =
            flow_loss_one(tape, pv, cfg, val[k], triple, z1, bag, bag_embeds, opts.weights);
        total += tape.val(terms.total).data[0];
        ++count;
      }
    }
    return count ? total / count : 0.0;
  };

  double best_val = 1e300;
  neural::ParamStore best_ema = model.params;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng::Engine shuffle_rng(rng::derive_seed(opts.seed, 32, epoch));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += opts.batch) {
      size_t stop = std::min(order.size(), start + opts.batch);
      std::set<int> positive_set;
      for (size_t k = start; k < stop; ++k)
        for (int id : train[order[k]].tc.graph.node_ids) positive_set.insert(id);
      std::vector<int> positives(positive_set.begin(), positive_set.end());
      auto bag = bag::sample_bag_train(positives, marginal, opts.bag_size, rng);

      Tape tape;
      auto pv = neural::load_params(tape, model.params);
      Var bag_embeds = stack_bag_embeddings(tape, pv, cfg, "fe.", vocab, bag.ids);
      std::vector<Var> losses;
      for (size_t k = start; k < stop; ++k) {
        const auto& enc = train[order[k]];
        auto z1 = sample_z1(enc, rng);
        auto triple = flow::sample_training_triple(enc.tc.graph, z1, rng);
        losses.push_back(
            flow_loss_one(tape, pv, cfg, enc, triple, z1, bag, bag_embeds, opts.weights)
                .total);
      }
      Var batch_loss = losses.size() == 1
                           ? losses[0]
                           : tape.sum_all(tape.concat_rows(losses));
      batch_loss = tape.scale(batch_loss, 1.0 / static_cast<double>(losses.size()));
      tape.backward(batch_loss);
      auto grads = neural::collect_grads(tape, pv, model.params);
      opt.step(model.params, grads);
      ema.update(model.params);
      epoch_loss += tape.val(batch_loss).data[0];
      ++batches;
    }
    neural::ParamStore ema_params = model.params;
    ema.copy_to(ema_params);
    double val_loss = validation_loss(ema_params);
    if (opts.log)
      *opts.log << "flow epoch " << epoch << " train_loss "
                << (batches ? epoch_loss / batches : 0.0) << " val_loss " << val_loss
                << "\n";
    if (val_loss < best_val - 1e-9) {
      best_val = val_loss;
      best_ema = ema_params;
    }
  }
  // sampling runs on the EMA shadow with the best validation loss
  model.params = best_ema;
  return model;
}

flow::PredictorModel train_predictor(const std::vector<chem::MolGraph>& mols,
                                     const std::vector<EncodedMol>& data,
                                     const frag::Vocabulary& vocab,
                                     const neural::ModelConfig& cfg,
                                     const TrainPredictorOptions& opts) {
  flow::PredictorModel model;
  model.cfg = cfg;
  model.property = opts.property;
  model.vocab_digest = vocab.digest();
  model.params = make_predictor_params(cfg, opts.seed);

  std::vector<double> props(mols.size());
  double mean = 0.0;
  for (size_t i = 0; i < mols.size(); ++i) {
    props[i] = property_value(mols[i], opts.property);
    mean += props[i];
  }
  mean /= props.size();
  double var = 0.0;
  for (double p : props) var += (p - mean) * (p - mean);
  double stdv = std::sqrt(var / props.size());
  model.norm_mean = mean;
  model.norm_std = stdv > 1e-9 ? stdv : 1.0;

  neural::AdamW opt;
  opt.lr = opts.lr;
  opt.clip = opts.grad_clip;
  opt.init(model.params);

  rng::Engine rng(rng::derive_seed(opts.seed, 40, 0));
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng::Engine shuffle_rng(rng::derive_seed(opts.seed, 41, epoch));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += opts.batch) {
      size_t stop = std::min(order.size(), start + opts.batch);
      Tape tape;
      auto pv = neural::load_params(tape, model.params);
      // distinct fragment ids appearing in this batch's noisy states
      std::vector<flow::TrainingTriple> triples;
      std::set<int> id_set;
      for (size_t k = start; k < stop; ++k) {
        const auto& enc = data[order[k]];
        auto z1 = sample_z1(enc, rng);
        triples.push_back(flow::sample_training_triple(enc.tc.graph, z1, rng));
        for (int id : triples.back().noisy.node_ids)
          if (id != flow::kMask) id_set.insert(id);
        for (int id : enc.tc.graph.node_ids) id_set.insert(id);
      }
      std::vector<int> ids(id_set.begin(), id_set.end());
      std::map<int, int> id_pos;
      for (size_t i = 0; i < ids.size(); ++i) id_pos[ids[i]] = static_cast<int>(i);
      Var embeds = stack_bag_embeddings(tape, pv, cfg, "npfe.", vocab, ids);
      Var fp_embeds = stack_bag_embeddings(tape, pv, cfg, "fpfe.", vocab, ids);

      std::vector<Var> losses;
      for (size_t k = start; k < stop; ++k) {
        const auto& enc = data[order[k]];
        const auto& triple = triples[k - start];
        double target = (props[order[k]] - model.norm_mean) / model.norm_std;
        int n = triple.noisy.n();
        std::vector<Var> rows;
        for (int i = 0; i < n; ++i) {
          int id = triple.noisy.node_ids[i];
          rows.push_back(id == flow::kMask
                             ? pv("np.mask_embed")
                             : tape.gather_rows(embeds, {id_pos[id]}));
        }
        neural::CoarseInputs in;
        in.state_embs = tape.concat_rows(rows);
        Tensor eps(n * (n - 1), 2);
        int p = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            eps.at(p, triple.noisy.edge(i, j) ? 1 : 0) = 1.0;
            ++p;
          }
        in.eps_onehot = tape.input(std::move(eps));
        in.z = tape.input(Tensor::row(triple.z_t));
        in.t = triple.t;
        in.graph = &triple.noisy;
        auto bb = neural::coarse_net_forward(tape, pv, cfg, "np.", in, false);
        Var mu = neural::property_head_forward(tape, pv, cfg, "np.", bb.node_h);
        losses.push_back(
            tape.mse_sum(mu, tape.input(Tensor::scalar(target))));
        // fragment-level targets: each clean node predicts its molecule value
        for (int id : enc.tc.graph.node_ids) {
          Var fmu = neural::property_head_forward(
              tape, pv, cfg, "fp.", tape.gather_rows(fp_embeds, {id_pos[id]}));
          losses.push_back(
              tape.scale(tape.mse_sum(fmu, tape.input(Tensor::scalar(target))), 0.5));
        }
      }
      Var batch_loss = tape.scale(tape.sum_all(tape.concat_rows(losses)),
                                  1.0 / static_cast<double>(stop - start));
      tape.backward(batch_loss);
      auto grads = neural::collect_grads(tape, pv, model.params);
      opt.step(model.params, grads);
      epoch_loss += tape.val(batch_loss).data[0];
      ++batches;
    }
    if (opts.log)
      *opts.log << "predictor epoch " << epoch << " train_loss "
                << (batches ? epoch_loss / batches : 0.0) << "\n";
  }
  return model;
}

RoundtripReport roundtrip_eval(const std::vector<chem::MolGraph>& mols,
                               const std::vector<EncodedMol>& data,
                               const frag::Vocabulary& vocab, const flow::AeModel& ae,
                               bool random_z, uint64_t seed) {
  RoundtripReport report;
  rng::Engine rng(rng::derive_seed(seed, 50, 0));
  for (size_t i = 0; i < mols.size(); ++i) {
    const auto& enc = data[i];
    std::vector<double> z;
    if (random_z) {
      z.resize(ae.cfg.latent_dim);
      for (auto& v : z) v = rng.normal();
    } else {
      z = enc.enc_mean;
    }
    std::vector<double> weights;
    if (!enc.tc.problem.candidates.empty()) {
      Tape tape;
      auto pv = neural::load_params(tape, ae.params);
      Var logits = neural::ae_decoder_forward(tape, pv, ae.cfg, enc.assembly,
                                              enc.tc.problem,
                                              tape.input(Tensor::row(z)));
      const Tensor& sc = tape.val(logits);
      weights.resize(enc.tc.problem.candidates.size());
      for (size_t c = 0; c < weights.size(); ++c)
        weights[c] = sc.at(static_cast<int>(c), 0);
    }
    ++report.n;
    report.bonds_total += static_cast<long long>(enc.tc.ground_truth.selected.size());
    try {
      auto matching = coarse::blossom_match(enc.tc.problem, weights);
      std::set<int> selected(matching.selected.begin(), matching.selected.end());
      for (int c : enc.tc.ground_truth.selected)
        if (selected.count(c)) ++report.bonds_correct;
      auto rec = coarse::reconstruct(enc.tc.graph, matching, vocab);
      if (chem::canonical_smiles(rec) == chem::canonical_smiles(mols[i]))
        ++report.graphs_correct;
    } catch (const coarse::CoarseError&) {
    } catch (const chem::SmilesError&) {
    }
  }
  return report;
}

// ---------- checkpoint adapters ----------

namespace {

Tensor meta_row(const std::vector<double>& v) { return Tensor::row(v); }

}  // namespace

void save_ae(const flow::AeModel& ae, const std::string& path) {
  neural::Checkpoint ck;
  ck.config_digest = ae.cfg.digest();
  ck.vocab_digest = ae.vocab_digest;
  ck.put_params(ae.params);
  ck.save(path);
}

flow::AeModel load_ae(const std::string& path, const neural::ModelConfig& cfg) {
  auto ck = neural::Checkpoint::load(path);
  if (ck.config_digest != cfg.digest())
    throw neural::CheckpointError(neural::CheckpointError::Kind::DigestMismatch,
                                  "autoencoder checkpoint built with a different "
                                  "model configuration");
  flow::AeModel ae;
  ae.cfg = cfg;
  ae.vocab_digest = ck.vocab_digest;
  ae.params = make_ae_params(cfg, 0);
  ck.read_params(ae.params);
  return ae;
}

void save_flow(const flow::FlowModel& model, const neural::ParamStore& raw,
               const std::string& path) {
  neural::Checkpoint ck;
  ck.config_digest = model.cfg.digest();
  ck.vocab_digest = model.vocab_digest;
  ck.put_params(raw, "raw.");
  ck.put_params(model.params, "ema.");
  std::vector<double> hist(model.frag_count_hist.begin(), model.frag_count_hist.end());
  ck.put("meta.frag_count_hist", meta_row(hist));
  ck.save(path);
}

flow::FlowModel load_flow(const std::string& path, const neural::ModelConfig& cfg) {
  auto ck = neural::Checkpoint::load(path);
  if (ck.config_digest != cfg.digest())
    throw neural::CheckpointError(neural::CheckpointError::Kind::DigestMismatch,
                                  "flow checkpoint built with a different model "
                                  "configuration");
  flow::FlowModel model;
  model.cfg = cfg;
  model.vocab_digest = ck.vocab_digest;
  model.params = make_flow_params(cfg, 0);
  ck.read_params(model.params, "ema.");
  const Tensor* hist = ck.find("meta.frag_count_hist");
  if (!hist)
    throw neural::CheckpointError(neural::CheckpointError::Kind::Io,
                                  "flow checkpoint lacks fragment histogram");
  model.frag_count_hist.clear();
  for (double v : hist->data)
    model.frag_count_hist.push_back(static_cast<int>(std::llround(v)));
  return model;
}

void save_predictor(const flow::PredictorModel& model, const std::string& path) {
  neural::Checkpoint ck;
  ck.config_digest = model.cfg.digest();
  ck.vocab_digest = model.vocab_digest;
  ck.put_params(model.params);
  ck.put("meta.norm", meta_row({model.norm_mean, model.norm_std}));
  std::vector<double> prop_bytes;
  for (char c : model.property) prop_bytes.push_back(static_cast<double>(c));
  ck.put("meta.property", meta_row(prop_bytes));
  ck.save(path);
}

flow::PredictorModel load_predictor(const std::string& path,
                                    const neural::ModelConfig& cfg) {
  auto ck = neural::Checkpoint::load(path);
  if (ck.config_digest != cfg.digest())
    throw neural::CheckpointError(neural::CheckpointError::Kind::DigestMismatch,
                                  "predictor checkpoint built with a different "
                                  "model configuration");
  flow::PredictorModel model;
  model.cfg = cfg;
  model.vocab_digest = ck.vocab_digest;
  model.params = make_predictor_params(cfg, 0);
  ck.read_params(model.params);
  const Tensor* norm = ck.find("meta.norm");
  if (norm && norm->numel() == 2) {
    model.norm_mean = norm->data[0];
    model.norm_std = norm->data[1];
  }
  const Tensor* prop = ck.find("meta.property");
  if (prop)
    for (double v : prop->data)
      model.property.push_back(static_cast<char>(static_cast<int>(v)));
  return model;
}

}  // namespace fragflow::pipeline
