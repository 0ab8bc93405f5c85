#pragma once

#include <iosfwd>
#include <optional>

#include "fragflow/flow.hpp"

namespace fragflow::pipeline {

// Exactly computable conditioning targets ("ring_count", "heavy_atoms").
double property_value(const chem::MolGraph& mol, const std::string& name);

// Per-molecule training cache: the coarse lift plus encoder posteriors.
struct EncodedMol {
  coarse::ToCoarseResult tc;
  coarse::Assembly assembly;
  std::vector<int> junction_count;       // per molecule atom
  std::vector<double> enc_mean, enc_logvar;  // filled by encode_dataset
  double property = 0.0;
};

std::vector<EncodedMol> prepare_dataset(const std::vector<chem::MolGraph>& mols,
                                        const frag::Vocabulary& vocab);

struct TrainAeOptions {
  int epochs = 40;
  int batch = 32;
  double lr = 1e-3;
  double beta = 1e-4;  // KL regularization weight
  double grad_clip = 1.0;
  double weight_decay = 0.0;
  int patience = 8;
  uint64_t seed = 0;
  std::ostream* log = nullptr;
};

flow::AeModel train_autoencoder(const std::vector<chem::MolGraph>& train_mols,
                                const std::vector<EncodedMol>& train,
                                const std::vector<chem::MolGraph>& val_mols,
                                const std::vector<EncodedMol>& val,
                                const frag::Vocabulary& vocab,
                                const neural::ModelConfig& cfg,
                                const TrainAeOptions& opts);

// Fills enc_mean / enc_logvar (deterministic posterior parameters).
void encode_dataset(const flow::AeModel& ae,
                    const std::vector<chem::MolGraph>& mols,
                    std::vector<EncodedMol>& data);

struct TrainFlowOptions {
  int epochs = 30;
  int batch = 32;
  double lr = 5e-4;
  double grad_clip = 4.0;
  double ema_decay = 0.999;
  double weight_decay = 0.0;
  int bag_size = 128;
  flow::LossWeights weights;
  uint64_t seed = 0;
  std::ostream* log = nullptr;
};

flow::FlowModel train_flow(const std::vector<EncodedMol>& train,
                           const std::vector<EncodedMol>& val,
                           const frag::Vocabulary& vocab,
                           const neural::ModelConfig& cfg,
                           const TrainFlowOptions& opts);

struct TrainPredictorOptions {
  int epochs = 15;
  int batch = 32;
  double lr = 1e-3;
  double grad_clip = 4.0;
  uint64_t seed = 0;
  std::string property = "ring_count";
  std::ostream* log = nullptr;
};

// Trains both the noisy molecule-level predictor mu(X_t, t) and the
// fragment-level predictor mu(x) in one bundle.
flow::PredictorModel train_predictor(const std::vector<chem::MolGraph>& mols,
                                     const std::vector<EncodedMol>& data,
                                     const frag::Vocabulary& vocab,
                                     const neural::ModelConfig& cfg,
                                     const TrainPredictorOptions& opts);

struct RoundtripReport {
  int n = 0;
  long long bonds_total = 0;
  long long bonds_correct = 0;
  int graphs_correct = 0;
  double bond_accuracy() const {
    return bonds_total ? static_cast<double>(bonds_correct) / bonds_total : 1.0;
  }
  double graph_accuracy() const {
    return n ? static_cast<double>(graphs_correct) / n : 1.0;
  }
};

// Reconstruction through learned scores + Blossom; random_z swaps the
// encoded latent for a standard-normal draw.
RoundtripReport roundtrip_eval(const std::vector<chem::MolGraph>& mols,
                               const std::vector<EncodedMol>& data,
                               const frag::Vocabulary& vocab, const flow::AeModel& ae,
                               bool random_z, uint64_t seed);

// Joint training loss for one molecule; exposed for the oracle tests.
struct FlowLossTerms {
  neural::Tape::Var node_ce;
  neural::Tape::Var edge_bce;
  neural::Tape::Var latent_mse;
  neural::Tape::Var total;
};

FlowLossTerms flow_loss_one(neural::Tape& tape, const neural::ParamVars& pv,
                            const neural::ModelConfig& cfg, const EncodedMol& mol,
                            const flow::TrainingTriple& triple,
                            const std::vector<double>& z1, const bag::Bag& bag,
                            neural::Tape::Var bag_embeds,
                            const flow::LossWeights& weights);

// ---------- checkpoint adapters ----------

void save_ae(const flow::AeModel& ae, const std::string& path);
flow::AeModel load_ae(const std::string& path, const neural::ModelConfig& cfg);
void save_flow(const flow::FlowModel& model, const neural::ParamStore& raw,
               const std::string& path);
flow::FlowModel load_flow(const std::string& path, const neural::ModelConfig& cfg);
void save_predictor(const flow::PredictorModel& model, const std::string& path);
flow::PredictorModel load_predictor(const std::string& path,
                                    const neural::ModelConfig& cfg);

// Fresh parameter stores with every array the bundles expect.
neural::ParamStore make_ae_params(const neural::ModelConfig& cfg, uint64_t seed);
neural::ParamStore make_flow_params(const neural::ModelConfig& cfg, uint64_t seed);
neural::ParamStore make_predictor_params(const neural::ModelConfig& cfg, uint64_t seed);

}  // namespace fragflow::pipeline
