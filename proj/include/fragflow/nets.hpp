#pragma once

#include <map>
#include <string>
#include <vector>

#include "fragflow/chem.hpp"
#include "fragflow/coarse.hpp"
#include "fragflow/frag.hpp"
#include "fragflow/rng.hpp"
#include "fragflow/tensor.hpp"

namespace fragflow::neural {

// Named parameter arrays; iteration order is insertion order and fixed by
// the init code, which keeps optimizer state and checkpoints aligned.
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor> values;
  std::map<std::string, int> index;

  Tensor& create(const std::string& name, int rows, int cols);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return index.count(name) > 0; }
  size_t size() const { return values.size(); }
};

struct ModelConfig {
  int frag_hidden = 64;
  int frag_embed = 64;
  int frag_rounds = 3;
  int coarse_hidden = 128;
  int coarse_edge_hidden = 32;
  int coarse_rounds = 3;
  int time_dim = 16;
  int latent_dim = 32;
  int rrwp_len = 6;
  int ae_hidden = 64;
  int ae_rounds = 3;
  int pred_hidden = 64;
  int pred_rounds = 2;

  uint64_t digest() const;
};

// ---------- featurization ----------

int atom_feature_dim();
std::vector<double> atom_features(const chem::MolGraph& mol, int atom);

int fragment_descriptor_dim();
std::vector<double> fragment_descriptor_features(const frag::VocabEntry& e);

std::vector<double> time_features(double t, int dim);

// Stacked k-step random-walk probabilities (k = 0..K-1) of D^-1 A with a
// self-loop on isolated nodes, so every row sums to 1.
void rrwp_features(const coarse::CoarseGraph& g, int K,
                   std::vector<std::vector<double>>* node_feats,
                   std::vector<std::vector<double>>* edge_feats);

// ---------- parameter plumbing ----------

struct ParamVars {
  std::map<std::string, Tape::Var> vars;
  Tape::Var operator()(const std::string& name) const;
};

ParamVars load_params(Tape& tape, const ParamStore& ps);
std::vector<Tensor> collect_grads(Tape& tape, const ParamVars& pv, const ParamStore& ps);

// Xavier-uniform init for a linear layer [fan_in, fan_out] plus zero bias.
void init_linear(ParamStore& ps, const std::string& name, int fan_in, int fan_out,
                 rng::Engine& rng);

// ---------- networks ----------

// Message-passing fragment embedder (sum pooling -> permutation invariant).
void frag_embedder_init(ParamStore& ps, const ModelConfig& cfg,
                        const std::string& prefix, rng::Engine& rng);
Tape::Var frag_embedder_forward(Tape& tape, const ParamVars& pv,
                                const ModelConfig& cfg, const std::string& prefix,
                                const frag::VocabEntry& entry);

// Coarse-graph message passing over all ordered node pairs; edge states ride
// along as pair features.
struct CoarseInputs {
  Tape::Var state_embs;  // [n, frag_embed]; MASK rows already substituted
  Tape::Var eps_onehot;  // [n*(n-1), 2] in ordered-pair row order
  Tape::Var z;           // [1, latent_dim]
  double t = 0.0;
  const coarse::CoarseGraph* graph = nullptr;  // edge matrix for RRWP
};

struct CoarseOutputs {
  Tape::Var node_h;       // [n, hidden]
  Tape::Var node_embed;   // [n, frag_embed] head for fragment scoring
  Tape::Var edge_logits;  // [n*(n-1)/2, 1] pairs (i<j) in row order
  Tape::Var velocity;     // [1, latent_dim]
  std::vector<std::pair<int, int>> pairs;  // unordered pair per edge_logits row
};

void coarse_net_init(ParamStore& ps, const ModelConfig& cfg,
                     const std::string& prefix, rng::Engine& rng);
CoarseOutputs coarse_net_forward(Tape& tape, const ParamVars& pv,
                                 const ModelConfig& cfg, const std::string& prefix,
                                 const CoarseInputs& in, bool with_heads = true);

// Scalar readout (property heads); in_dim is the pooled feature width.
void property_head_init(ParamStore& ps, int in_dim, int hidden,
                        const std::string& prefix, rng::Engine& rng);
Tape::Var property_head_forward(Tape& tape, const ParamVars& pv,
                                const ModelConfig& cfg, const std::string& prefix,
                                Tape::Var node_h);

// Autoencoder encoder: molecule-level MPNN -> (mean, logvar).
void ae_encoder_init(ParamStore& ps, const ModelConfig& cfg, rng::Engine& rng);
struct AeEncodeOut {
  Tape::Var mean;    // [1, latent]
  Tape::Var logvar;  // [1, latent]
};
AeEncodeOut ae_encoder_forward(Tape& tape, const ParamVars& pv, const ModelConfig& cfg,
                               const chem::MolGraph& mol,
                               const std::vector<int>& junction_count);

// Autoencoder decoder: message passing over intra-fragment bonds plus all
// candidate inter-fragment edges; one logit per candidate pair.
void ae_decoder_init(ParamStore& ps, const ModelConfig& cfg, rng::Engine& rng);
Tape::Var ae_decoder_forward(Tape& tape, const ParamVars& pv, const ModelConfig& cfg,
                             const coarse::Assembly& assembly,
                             const coarse::MatchProblem& problem, Tape::Var z);

// ---------- optimizer ----------

struct AdamW {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip = 4.0;
  long long steps = 0;
  std::vector<Tensor> m, v;

  void init(const ParamStore& ps);
  // decoupled weight decay, then global-norm clip, then the Adam update
  void step(ParamStore& ps, std::vector<Tensor>& grads);
};

struct Ema {
  double decay = 0.999;
  std::vector<Tensor> shadow;
  void init(const ParamStore& ps);
  void update(const ParamStore& ps);
  void copy_to(ParamStore& ps) const;
};

// ---------- checkpoint container ----------

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, VersionMismatch, DigestMismatch };
  CheckpointError(Kind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Versioned binary container: header (magic, version, config digest, vocab
// digest), then named arrays as little-endian float32. Reload is bit-exact
// at float32 resolution.
struct Checkpoint {
  uint32_t version = 1;
  uint64_t config_digest = 0;
  uint64_t vocab_digest = 0;
  std::vector<std::string> names;
  std::vector<Tensor> arrays;

  void put(const std::string& name, const Tensor& t);
  const Tensor* find(const std::string& name) const;
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  void put_params(const ParamStore& ps, const std::string& prefix = "");
  void read_params(ParamStore& ps, const std::string& prefix = "") const;
};

}  // namespace fragflow::neural
