#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fragflow/bag.hpp"
#include "fragflow/coarse.hpp"
#include "fragflow/nets.hpp"
#include "fragflow/rng.hpp"

namespace fragflow::flow {

inline constexpr int kMask = -1;

class FlowError : public std::runtime_error {
 public:
  enum class Kind { InvalidKernel, BadConfig };
  FlowError(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Joint state X_t = (coarse graph, latent z) at time t. Masked nodes carry
// kMask in node_ids.
struct FlowState {
  coarse::CoarseGraph graph;
  std::vector<double> z;
  double t = 0.0;
};

struct RateParams {
  double eta_node = 0.0;
  double eta_edge = 0.0;
};

enum class Distortion { Uniform, Polydec };
Distortion distortion_from_string(const std::string& s);

// Monotone grid 0 = t_0 < ... < t_steps = 1. Polydec warps the uniform grid
// through f(t) = 2t - t^2, concentrating steps near t = 1.
std::vector<double> time_grid(int steps, Distortion d);

struct LossWeights {
  double alpha_edge = 5.0;
  double alpha_latent = 1.0;
};

// ---------- forward noising ----------

struct TrainingTriple {
  double t = 0.0;
  coarse::CoarseGraph noisy;   // nodes kept with prob t (else MASK); edges kept
                               // with prob t (else resampled Bernoulli(1/2))
  std::vector<double> z_t;     // (1-t) z0 + t z1
  std::vector<double> z0;
};

TrainingTriple sample_training_triple(const coarse::CoarseGraph& g1,
                                      const std::vector<double>& z1,
                                      rng::Engine& rng);
TrainingTriple sample_training_triple_at(double t, const coarse::CoarseGraph& g1,
                                         const std::vector<double>& z1,
                                         rng::Engine& rng);

// ---------- closed-form CTMC rates (masked nodes, Bernoulli(1/2) edges) ----------

// rate(MASK -> x1); transitions out of a de-masked node are zero
double node_rate_unmask(double t);
// rate(!eps1 -> eps1); rate(eps1 -> !eps1) = 0
double edge_rate_toward_target(double t);

// Detailed-balance extras. Nodes use the balanced form
//   rate(x1 -> MASK) = eta,  rate(MASK -> x1) = eta * t/(1-t),
// which satisfies p_{t|1}(x1) R(x1,M) = p_{t|1}(M) R(M,x1) for all t.
double db_node_rate_unmask(double t, double eta);
double db_node_rate_remask(double eta);
// Edges follow R^DB(eps,eps'|eps1) = delta(eps,eps1) + (1+t)/(1-t) delta(eps',eps1),
// scaled by eta.
double db_edge_rate(int eps_from, int eps_to, int eps1, double t, double eta);

// ---------- Euler kernels ----------

// Kernel row over candidate target states. states[i] is a vocab id or kMask;
// probs align with states and sum to 1 after clamping.
struct KernelRow {
  std::vector<int> states;
  std::vector<double> probs;
  int current_index = -1;
};

// Clamp negatives to zero, let the current state absorb the residual, then
// renormalize. Throws InvalidKernel when the row cannot be normalized.
void clamp_normalize(KernelRow& row);

// posterior: in-bag posterior over bag.ids; p_current: posterior mass of the
// current state when de-masked (0 while masked).
KernelRow node_kernel(int current, const bag::Bag& bag,
                      const std::vector<double>& posterior, double p_current,
                      double t, double dt, double eta, bool final_step);

// g1 = predicted posterior P(eps1 = 1 | X_t).
KernelRow edge_kernel(int current, double g1, double t, double dt, double eta,
                      bool final_step);

// z_{t+dt} = z_t + v dt
void euler_latent_step(std::vector<double>& z, const std::vector<double>& v, double dt);

// ---------- trained model bundles ----------

struct FlowModel {
  neural::ModelConfig cfg;
  neural::ParamStore params;       // "fe." fragment embedder + "cn." coarse net
  std::vector<int> frag_count_hist;  // histogram of fragments per molecule
  uint64_t vocab_digest = 0;
};

struct AeModel {
  neural::ModelConfig cfg;
  neural::ParamStore params;  // "ae.enc." + "ae.dec."
  uint64_t vocab_digest = 0;
};

struct PredictorModel {
  neural::ModelConfig cfg;
  neural::ParamStore params;  // "np." noisy backbone (+ its "npfe." embedder)
                              // and "fp."/"fpfe." fragment property net
  std::string property;
  // predictors emit standardized values; raw = out * norm_std + norm_mean
  double norm_mean = 0.0;
  double norm_std = 1.0;
  uint64_t vocab_digest = 0;
};

struct ConditionConfig {
  std::string property;
  double value = 0.0;
  double lambda_x = 0.0;
  double lambda_bag = 0.0;
  double sigma2 = 1.0;
};

struct SampleConfig {
  int n_samples = 1000;
  int steps = 50;
  Distortion distortion = Distortion::Polydec;
  double eta_node = 0.0;
  double eta_edge = 0.0;
  int bag_size = 128;
  double t_pred = 1.0;
  double t_bag = 1.0;
  uint64_t seed = 0;
  int workers = 1;
  std::optional<ConditionConfig> condition;
};

enum class SampleStatus { Valid, ParseFail, UnrealizedEdge, MultiComponent };
const char* sample_status_name(SampleStatus s);

struct SampleResult {
  SampleStatus status = SampleStatus::ParseFail;
  std::string smiles;  // canonical; empty unless Valid
  coarse::CoarseGraph graph;
  std::vector<double> z;
};

// Full Euler sampling loop: per-molecule RNG streams derived from
// (seed, sample index); deterministic given the config, any worker count.
std::vector<SampleResult> sample_molecules(const FlowModel& model, const AeModel& ae,
                                           const frag::Vocabulary& vocab,
                                           const SampleConfig& cfg,
                                           const PredictorModel* guide = nullptr);

// Embeddings of every vocabulary fragment under the given embedder prefix.
neural::Tensor embed_vocabulary(const neural::ParamStore& params,
                                const neural::ModelConfig& cfg,
                                const std::string& prefix,
                                const frag::Vocabulary& vocab);

}  // namespace fragflow::flow
