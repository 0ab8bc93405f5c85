#include "fragflow/guidance.hpp"

#include <algorithm>
#include <cmath>

namespace fragflow::guidance {

using neural::Tape;
using neural::Tensor;

GuidanceFactors guidance_factors(const flow::PredictorModel& model,
                                 const flow::FlowState& state,
                                 const neural::Tensor& vocab_embeds,
                                 double target, double lambda_x, double sigma2) {
  const auto& cfg = model.cfg;
  const auto& g = state.graph;
  int n = g.n();
  GuidanceFactors out;
  out.lambda_x = lambda_x;
  out.node_embed_grad.assign(n, std::vector<double>(cfg.frag_embed, 0.0));
  out.edge_grad.assign(static_cast<size_t>(n) * (n - 1) / 2, {0.0, 0.0});
  out.latent_shift.assign(cfg.latent_dim, 0.0);
  if (lambda_x == 0.0) return out;

  Tape tape;
  auto pv = neural::load_params(tape, model.params);

  // relaxed inputs: gradients flow to the node embeddings, the edge one-hot
  // rows, and z
  Tensor se(n, cfg.frag_embed);
  const Tensor& mask_embed = model.params.get("np.mask_embed");
  for (int i = 0; i < n; ++i) {
    int id = g.node_ids[i];
    for (int j = 0; j < cfg.frag_embed; ++j)
      se.at(i, j) = id == flow::kMask ? mask_embed.at(0, j) : vocab_embeds.at(id, j);
  }
  Tensor eo(n * (n - 1), 2);
  {
    int p = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        eo.at(p, g.edge(i, j) ? 1 : 0) = 1.0;
        ++p;
      }
  }
  neural::CoarseInputs in;
  in.state_embs = tape.input(std::move(se), /*requires_grad=*/true);
  in.eps_onehot = tape.input(std::move(eo), /*requires_grad=*/true);
  in.z = tape.input(Tensor::row(state.z), /*requires_grad=*/true);
  in.t = state.t;
  in.graph = &g;
  auto bb = neural::coarse_net_forward(tape, pv, cfg, "np.", in, /*with_heads=*/false);
  auto mu = neural::property_head_forward(tape, pv, cfg, "np.", bb.node_h);
  // predictors emit standardized values; compare in raw property units
  auto mu_raw = tape.add_const(tape.scale(mu, model.norm_std), model.norm_mean);
  out.mu_value = tape.val(mu_raw).at(0, 0);
  auto err = tape.add_const(mu_raw, -target);
  auto loss = tape.scale(tape.sum_all(tape.square(err)), 1.0 / sigma2);
  tape.backward(loss);

  const Tensor& gse = tape.grad(in.state_embs);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < cfg.frag_embed; ++j) out.node_embed_grad[i][j] = gse.at(i, j);
  const Tensor& geo = tape.grad(in.eps_onehot);
  {
    auto prow = [&](int i, int j) { return i * (n - 1) + (j < i ? j : j - 1); };
    int pair = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        for (int s = 0; s < 2; ++s)
          out.edge_grad[pair][s] = geo.at(prow(i, j), s) + geo.at(prow(j, i), s);
        ++pair;
      }
  }
  const Tensor& gz = tape.grad(in.z);
  for (int j = 0; j < cfg.latent_dim; ++j)
    out.latent_shift[j] = -lambda_x * gz.at(0, j);
  return out;
}

std::vector<double> predictor_state_embed(const flow::PredictorModel& model,
                                          const neural::Tensor& vocab_embeds,
                                          int state) {
  int dim = vocab_embeds.cols;
  std::vector<double> e(dim);
  if (state == flow::kMask) {
    const Tensor& mask_embed = model.params.get("np.mask_embed");
    for (int j = 0; j < dim; ++j) e[j] = mask_embed.at(0, j);
  } else {
    for (int j = 0; j < dim; ++j) e[j] = vocab_embeds.at(state, j);
  }
  return e;
}

double node_multiplier(const GuidanceFactors& f, int node,
                       const std::vector<double>& state_embed) {
  double dot = 0.0;
  for (size_t j = 0; j < state_embed.size(); ++j)
    dot += f.node_embed_grad[node][j] * state_embed[j];
  double expo = std::clamp(-f.lambda_x * dot, -50.0, 50.0);
  return std::exp(expo);
}

double edge_multiplier(const GuidanceFactors& f, int pair_index, int eps_state) {
  double expo = std::clamp(-f.lambda_x * f.edge_grad[pair_index][eps_state], -50.0, 50.0);
  return std::exp(expo);
}

std::vector<double> conditioned_kernel(const std::vector<double>& base_row,
                                       const std::vector<double>& multipliers) {
  std::vector<double> out(base_row.size());
  double total = 0.0;
  for (size_t i = 0; i < base_row.size(); ++i) {
    out[i] = base_row[i] * std::max(multipliers[i], 1e-30);
    total += out[i];
  }
  if (total <= 0.0)
    throw GuidanceError(GuidanceError::Kind::DegenerateRow,
                        "conditioned kernel row annihilated");
  for (double& v : out) v /= total;
  return out;
}

}  // namespace fragflow::guidance
