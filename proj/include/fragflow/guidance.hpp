#pragma once

#include <array>
#include <vector>

#include "fragflow/flow.hpp"

namespace fragflow::guidance {

class GuidanceError : public std::runtime_error {
 public:
  enum class Kind { DegenerateRow };
  GuidanceError(Kind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// First-order Taylor guidance factors from the noisy predictor mu(X_t, t).
// Multipliers use the negative gradient of ||mu - c||^2 so probability mass
// moves toward states that lower the predicted distance to the target.
struct GuidanceFactors {
  // per node: gradient of the squared error w.r.t. that node's input
  // embedding; the multiplier for candidate state x is
  // exp(-lambda <grad, embed(x)>).
  std::vector<std::vector<double>> node_embed_grad;
  // per unordered pair (i<j), gradient w.r.t. the edge one-hot [d0, d1]
  std::vector<std::array<double, 2>> edge_grad;
  std::vector<double> latent_shift;  // -lambda * grad_z ||mu - c||^2
  double lambda_x = 0.0;
  double mu_value = 0.0;  // predictor output, handy for diagnostics
};

GuidanceFactors guidance_factors(const flow::PredictorModel& model,
                                 const flow::FlowState& state,
                                 const neural::Tensor& vocab_embeds,
                                 double target, double lambda_x, double sigma2);

// Multiplier for one candidate state given its predictor-space embedding.
double node_multiplier(const GuidanceFactors& f, int node,
                       const std::vector<double>& state_embed);
double edge_multiplier(const GuidanceFactors& f, int pair_index, int eps_state);

// Elementwise product then renormalize; rows floored at 1e-30 before
// normalizing. Throws DegenerateRow if every entry vanishes.
std::vector<double> conditioned_kernel(const std::vector<double>& base_row,
                                       const std::vector<double>& multipliers);

// Predictor-space embedding rows for kernel tilting.
std::vector<double> predictor_state_embed(const flow::PredictorModel& model,
                                          const neural::Tensor& vocab_embeds,
                                          int state);

}  // namespace fragflow::guidance
