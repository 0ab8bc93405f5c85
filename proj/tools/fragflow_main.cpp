#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fragflow/app.hpp"
#include "fragflow/guidance.hpp"
#include "fragflow/metrics.hpp"
#include "fragflow/pipeline.hpp"

namespace fs = std::filesystem;
using namespace fragflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
};

app::Config resolve_config(const CommonArgs& args) {
  app::Config cfg;
  if (!args.config_path.empty()) cfg = app::Config::from_file(args.config_path);
  for (const auto& kv : args.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw app::ConfigError("override must be key=value: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));  // flags win
  }
  return cfg;
}

neural::ModelConfig model_config(const app::Config& cfg) {
  neural::ModelConfig mc;
  mc.frag_hidden = cfg.get_int("model.frag_hidden", mc.frag_hidden);
  mc.frag_embed = cfg.get_int("model.frag_embed", mc.frag_embed);
  mc.frag_rounds = cfg.get_int("model.frag_rounds", mc.frag_rounds);
  mc.coarse_hidden = cfg.get_int("model.coarse_hidden", mc.coarse_hidden);
  mc.coarse_edge_hidden = cfg.get_int("model.coarse_edge_hidden", mc.coarse_edge_hidden);
  mc.coarse_rounds = cfg.get_int("model.coarse_rounds", mc.coarse_rounds);
  mc.time_dim = cfg.get_int("model.time_dim", mc.time_dim);
  mc.latent_dim = cfg.get_int("model.latent_dim", mc.latent_dim);
  mc.rrwp_len = cfg.get_int("model.rrwp_len", mc.rrwp_len);
  mc.ae_hidden = cfg.get_int("model.ae_hidden", mc.ae_hidden);
  mc.ae_rounds = cfg.get_int("model.ae_rounds", mc.ae_rounds);
  mc.pred_hidden = cfg.get_int("model.pred_hidden", mc.pred_hidden);
  mc.pred_rounds = cfg.get_int("model.pred_rounds", mc.pred_rounds);
  return mc;
}

flow::SampleConfig sample_config(const app::Config& cfg) {
  flow::SampleConfig sc;
  sc.n_samples = cfg.get_int("n_samples", sc.n_samples);
  sc.steps = cfg.get_int("steps", sc.steps);
  sc.distortion = flow::distortion_from_string(cfg.get_str("distortion", "polydec"));
  sc.eta_node = cfg.get_double("eta_node", sc.eta_node);
  sc.eta_edge = cfg.get_double("eta_edge", sc.eta_edge);
  sc.bag_size = cfg.get_int("bag_size", sc.bag_size);
  sc.t_pred = cfg.get_double("t_pred", sc.t_pred);
  sc.t_bag = cfg.get_double("t_bag", sc.t_bag);
  sc.seed = cfg.get_u64("seed", sc.seed);
  sc.workers = cfg.get_int("workers", sc.workers);
  if (cfg.has("condition.name")) {
    flow::ConditionConfig cond;
    cond.property = cfg.require_str("condition.name");
    cond.value = cfg.get_double("condition.value", 0.0);
    cond.lambda_x = cfg.get_double("condition.lambda_x", 0.0);
    cond.lambda_bag = cfg.get_double("condition.lambda_bag", 0.0);
    cond.sigma2 = cfg.get_double("condition.sigma2", 1.0);
    sc.condition = cond;
  }
  return sc;
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

void finish_manifest(const app::Config& cfg, const std::string& command,
                     const Stopwatch& watch,
                     const std::map<std::string, uint64_t>& seeds,
                     const std::vector<std::string>& artifacts) {
  std::string dir = cfg.get_str("run_dir", "");
  if (dir.empty() && !artifacts.empty())
    dir = fs::path(artifacts.front()).parent_path().string();
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  app::RunManifest manifest;
  manifest.command = command;
  manifest.config_digest = cfg.digest();
  manifest.code_version = app::code_version();
  manifest.wall_seconds = watch.seconds();
  manifest.phase_seeds = seeds;
  manifest.artifacts = artifacts;
  app::write_manifest((fs::path(dir) / (command + ".manifest.json")).string(),
                      manifest);
}

int cmd_gen_corpus(const app::Config& cfg) {
  Stopwatch watch;
  int n = cfg.get_int("n", 3000);
  uint64_t seed = cfg.get_u64("seed", 7);
  std::string prefix = cfg.get_str("out_prefix", "toy");
  auto smiles = app::toy_corpus(n, seed);
  int n_train = static_cast<int>(smiles.size() * 0.8);
  int n_valid = static_cast<int>(smiles.size() * 0.1);
  std::vector<std::string> train(smiles.begin(), smiles.begin() + n_train);
  std::vector<std::string> valid(smiles.begin() + n_train,
                                 smiles.begin() + n_train + n_valid);
  std::vector<std::string> test(smiles.begin() + n_train + n_valid, smiles.end());
  app::write_smiles_file(prefix + "_train.smi", train);
  app::write_smiles_file(prefix + "_valid.smi", valid);
  app::write_smiles_file(prefix + "_test.smi", test);
  std::cerr << "wrote " << train.size() << "/" << valid.size() << "/" << test.size()
            << " molecules to " << prefix << "_{train,valid,test}.smi\n";
  finish_manifest(cfg, "gen-corpus", watch, {{"corpus", seed}},
                  {prefix + "_train.smi", prefix + "_valid.smi", prefix + "_test.smi"});
  return kExitOk;
}

int cmd_build_vocab(const app::Config& cfg) {
  Stopwatch watch;
  auto corpus = app::load_corpus(cfg.require_str("corpus"));
  auto vocab = frag::Vocabulary::build(corpus.mols);
  std::string out = cfg.get_str("out", "vocab.tsv");
  vocab.save(out);
  std::cerr << "vocabulary: " << vocab.size() << " keys, total count "
            << vocab.total_count() << "\n";
  finish_manifest(cfg, "build-vocab", watch, {}, {out});
  return kExitOk;
}

int cmd_train_ae(const app::Config& cfg) {
  Stopwatch watch;
  auto mc = model_config(cfg);
  auto train = app::load_corpus(cfg.require_str("data.train"));
  auto valid = app::load_corpus(cfg.require_str("data.valid"));
  auto vocab = frag::Vocabulary::load(cfg.require_str("vocab"));
  auto train_data = pipeline::prepare_dataset(train.mols, vocab);
  auto valid_data = pipeline::prepare_dataset(valid.mols, vocab);
  pipeline::TrainAeOptions opts;
  opts.epochs = cfg.get_int("ae.epochs", opts.epochs);
  opts.batch = cfg.get_int("ae.batch", opts.batch);
  opts.lr = cfg.get_double("ae.lr", opts.lr);
  opts.beta = cfg.get_double("ae.beta", opts.beta);
  opts.grad_clip = cfg.get_double("ae.grad_clip", opts.grad_clip);
  opts.patience = cfg.get_int("ae.patience", opts.patience);
  opts.seed = cfg.get_u64("seed", 0);
  opts.log = &std::cerr;
  auto ae = pipeline::train_autoencoder(train.mols, train_data, valid.mols,
                                        valid_data, vocab, mc, opts);
  std::string out = cfg.get_str("out", "ae.ckpt");
  pipeline::save_ae(ae, out);
  finish_manifest(cfg, "train-ae", watch, {{"train", opts.seed}}, {out});
  return kExitOk;
}

int cmd_train_flow(const app::Config& cfg) {
  Stopwatch watch;
  auto mc = model_config(cfg);
  auto train = app::load_corpus(cfg.require_str("data.train"));
  auto valid = app::load_corpus(cfg.require_str("data.valid"));
  auto vocab = frag::Vocabulary::load(cfg.require_str("vocab"));
  auto ae = pipeline::load_ae(cfg.require_str("ae"), mc);
  if (ae.vocab_digest != vocab.digest())
    throw neural::CheckpointError(neural::CheckpointError::Kind::DigestMismatch,
                                  "autoencoder checkpoint was built against a "
                                  "different vocabulary");
  auto train_data = pipeline::prepare_dataset(train.mols, vocab);
  auto valid_data = pipeline::prepare_dataset(valid.mols, vocab);
  pipeline::encode_dataset(ae, train.mols, train_data);
  pipeline::encode_dataset(ae, valid.mols, valid_data);
  pipeline::TrainFlowOptions opts;
  opts.epochs = cfg.get_int("flow.epochs", opts.epochs);
  opts.batch = cfg.get_int("flow.batch", opts.batch);
  opts.lr = cfg.get_double("flow.lr", opts.lr);
  opts.grad_clip = cfg.get_double("flow.grad_clip", opts.grad_clip);
  opts.ema_decay = cfg.get_double("flow.ema", opts.ema_decay);
  opts.bag_size = cfg.get_int("bag_size", opts.bag_size);
  opts.weights.alpha_edge = cfg.get_double("alpha_edge", opts.weights.alpha_edge);
  opts.weights.alpha_latent = cfg.get_double("alpha_latent", opts.weights.alpha_latent);
  opts.seed = cfg.get_u64("seed", 0);
  opts.log = &std::cerr;
  auto model = pipeline::train_flow(train_data, valid_data, vocab, mc, opts);
  std::string out = cfg.get_str("out", "flow.ckpt");
  pipeline::save_flow(model, model.params, out);
  finish_manifest(cfg, "train-flow", watch, {{"train", opts.seed}}, {out});
  return kExitOk;
}

int cmd_train_predictor(const app::Config& cfg) {
  Stopwatch watch;
  auto mc = model_config(cfg);
  auto train = app::load_corpus(cfg.require_str("data.train"));
  auto vocab = frag::Vocabulary::load(cfg.require_str("vocab"));
  auto ae = pipeline::load_ae(cfg.require_str("ae"), mc);
  auto train_data = pipeline::prepare_dataset(train.mols, vocab);
  pipeline::encode_dataset(ae, train.mols, train_data);
  pipeline::TrainPredictorOptions opts;
  opts.epochs = cfg.get_int("predictor.epochs", opts.epochs);
  opts.batch = cfg.get_int("predictor.batch", opts.batch);
  opts.lr = cfg.get_double("predictor.lr", opts.lr);
  opts.seed = cfg.get_u64("seed", 0);
  opts.property = cfg.get_str("property", opts.property);
  opts.log = &std::cerr;
  auto model = pipeline::train_predictor(train.mols, train_data, vocab, mc, opts);
  std::string out = cfg.get_str("out", "predictor.ckpt");
  pipeline::save_predictor(model, out);
  finish_manifest(cfg, "train-predictor", watch, {{"train", opts.seed}}, {out});
  return kExitOk;
}

int cmd_sample(const app::Config& cfg) {
  Stopwatch watch;
  auto mc = model_config(cfg);
  auto vocab = frag::Vocabulary::load(cfg.require_str("vocab"));
  auto ae = pipeline::load_ae(cfg.require_str("ae"), mc);
  auto model = pipeline::load_flow(cfg.require_str("flow"), mc);
  if (ae.vocab_digest != vocab.digest() || model.vocab_digest != vocab.digest())
    throw neural::CheckpointError(neural::CheckpointError::Kind::DigestMismatch,
                                  "checkpoint/vocabulary digest mismatch");
  auto sc = sample_config(cfg);
  std::optional<flow::PredictorModel> guide;
  if (sc.condition) {
    guide = pipeline::load_predictor(cfg.require_str("predictor"), mc);
    if (guide->vocab_digest != vocab.digest())
      throw neural::CheckpointError(neural::CheckpointError::Kind::DigestMismatch,
                                    "predictor/vocabulary digest mismatch");
    if (guide->property != sc.condition->property)
      throw app::ConfigError("predictor trained for property '" + guide->property +
                             "' but condition.name is '" +
                             sc.condition->property + "'");
  }
  auto results = flow::sample_molecules(model, ae, vocab, sc,
                                        guide ? &*guide : nullptr);
  int n_valid = 0;
  for (const auto& r : results)
    if (r.status == flow::SampleStatus::Valid) ++n_valid;
  std::cerr << "sampled " << results.size() << " molecules, " << n_valid
            << " valid\n";
  std::map<std::string, std::string> header;
  header["vocab_digest"] = std::to_string(vocab.digest());
  header["seed"] = std::to_string(sc.seed);
  header["steps"] = std::to_string(sc.steps);
  header["n_samples"] = std::to_string(sc.n_samples);
  std::string out = cfg.get_str("out", "samples.smi");
  app::write_sample_file(out, results, header);
  finish_manifest(cfg, "sample", watch, {{"sample", sc.seed}}, {out});
  return kExitOk;
}

int cmd_eval(const app::Config& cfg) {
  Stopwatch watch;
  auto generated = app::read_sample_file(cfg.require_str("generated"));
  auto train = app::load_corpus(cfg.require_str("data.train"));
  auto test = app::load_corpus(cfg.require_str("data.test"));
  if (cfg.has("vocab")) {
    auto vocab = frag::Vocabulary::load(cfg.require_str("vocab"));
    auto it = generated.header.find("vocab_digest");
    if (it != generated.header.end() &&
        it->second != std::to_string(vocab.digest()))
      throw neural::CheckpointError(neural::CheckpointError::Kind::DigestMismatch,
                                    "generated file was sampled with a different "
                                    "vocabulary");
  }

  metrics::MetricsReport report;
  report.n_samples = generated.set.n_total;
  report.validity_pct = 100.0 * metrics::validity_fraction(generated.set);

  std::vector<chem::MolGraph> gen_mols;
  std::vector<std::string> gen_canonical;
  for (const auto& s : generated.set.valid_smiles) {
    auto mol = chem::parse_smiles(s);
    gen_canonical.push_back(chem::canonical_smiles(mol));
    gen_mols.push_back(std::move(mol));
  }
  report.uniqueness_pct = 100.0 * metrics::uniqueness_fraction(gen_canonical);
  std::vector<std::string> unique_canonical(gen_canonical.begin(), gen_canonical.end());
  std::sort(unique_canonical.begin(), unique_canonical.end());
  unique_canonical.erase(
      std::unique(unique_canonical.begin(), unique_canonical.end()),
      unique_canonical.end());
  report.novelty_pct =
      100.0 * metrics::novelty_fraction(unique_canonical, train.canonical);

  const char* props[] = {"heavy_atoms", "mol_weight", "ring_count", "hba", "hbd"};
  for (const char* prop : props) {
    std::vector<double> gen_vals, ref_vals;
    for (const auto& m : gen_mols) gen_vals.push_back(pipeline::property_value(m, prop));
    for (const auto& m : test.mols) ref_vals.push_back(pipeline::property_value(m, prop));
    report.property_kl[prop] = metrics::kde_kl(gen_vals, ref_vals);
  }
  {
    auto table = metrics::build_np_table(train.mols, test.mols);
    std::vector<double> gen_vals, ref_vals;
    for (const auto& m : gen_mols) gen_vals.push_back(metrics::np_likeness(m, table));
    for (const auto& m : test.mols) ref_vals.push_back(metrics::np_likeness(m, table));
    report.np_likeness_kl = metrics::kde_kl(gen_vals, ref_vals);
  }
  if (!gen_mols.empty()) {
    report.snn_value = metrics::snn(gen_mols, test.mols);
    report.scaffold_cosine_value = metrics::scaffold_cosine(gen_mols, test.mols);
  }
  for (const auto& [k, v] : generated.header) report.config_echo[k] = v;

  std::string json = report.to_json();
  std::cout << json;
  std::string out = cfg.get_str("out", "");
  std::vector<std::string> artifacts;
  if (!out.empty()) {
    std::ofstream of(out, std::ios::binary);
    if (!of) throw app::DataError("cannot write " + out);
    of << json;
    artifacts.push_back(out);
  }
  finish_manifest(cfg, "eval", watch, {}, artifacts);
  return kExitOk;
}

int cmd_roundtrip(const app::Config& cfg) {
  Stopwatch watch;
  auto mc = model_config(cfg);
  auto corpus = app::load_corpus(cfg.require_str("corpus"));
  auto vocab = frag::Vocabulary::load(cfg.require_str("vocab"));
  auto ae = pipeline::load_ae(cfg.require_str("ae"), mc);
  if (ae.vocab_digest != vocab.digest())
    throw neural::CheckpointError(neural::CheckpointError::Kind::DigestMismatch,
                                  "checkpoint/vocabulary digest mismatch");
  auto data = pipeline::prepare_dataset(corpus.mols, vocab);
  pipeline::encode_dataset(ae, corpus.mols, data);
  uint64_t seed = cfg.get_u64("seed", 0);
  auto encoded = pipeline::roundtrip_eval(corpus.mols, data, vocab, ae, false, seed);
  auto random = pipeline::roundtrip_eval(corpus.mols, data, vocab, ae, true, seed);
  std::cout << "{\n"
            << "  \"n\": " << encoded.n << ",\n"
            << "  \"encoded_z\": {\"bond\": " << encoded.bond_accuracy()
            << ", \"graph\": " << encoded.graph_accuracy() << "},\n"
            << "  \"random_z\": {\"bond\": " << random.bond_accuracy()
            << ", \"graph\": " << random.graph_accuracy() << "}\n"
            << "}\n";
  finish_manifest(cfg, "roundtrip", watch, {{"roundtrip", seed}}, {});
  return kExitOk;
}

int cmd_frag(const app::Config& cfg, const std::string& smiles) {
  auto mol = chem::parse_smiles(smiles);
  auto f = frag::fragment_molecule(mol);
  std::cout << "molecule: " << chem::canonical_smiles(mol) << "\n";
  std::cout << "cut bonds: " << f.cut_bonds.size() << "\n";
  for (int bi : f.cut_bonds) {
    const auto& b = mol.bond(bi);
    std::cout << "  bond " << b.a << "-" << b.b << "\n";
  }
  std::cout << "fragments: " << f.fragments.size() << "\n";
  for (const auto& frag : f.fragments)
    std::cout << "  " << frag.key << "  (" << frag.atoms.size() << " atoms, "
              << frag.slots.size() << " junctions)\n";
  (void)cfg;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"fragment-level discrete flow matching for molecular graphs"};
  cli.require_subcommand(1);

  CommonArgs args;
  std::string frag_smiles;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "key=value config file");
    sub->add_option("--set", args.overrides,
                    "config override key=value (repeatable; flags win)");
  };

  auto* gen = cli.add_subcommand("gen-corpus", "generate the deterministic toy corpus");
  add_common(gen);
  auto* vocab = cli.add_subcommand("build-vocab", "build the fragment vocabulary");
  add_common(vocab);
  auto* ae = cli.add_subcommand("train-ae", "train the coarse-to-fine autoencoder");
  add_common(ae);
  auto* flow_cmd = cli.add_subcommand("train-flow", "train the flow-matching model");
  add_common(flow_cmd);
  auto* pred = cli.add_subcommand("train-predictor", "train the property predictors");
  add_common(pred);
  auto* sample = cli.add_subcommand("sample", "sample molecules from a trained model");
  add_common(sample);
  auto* eval = cli.add_subcommand("eval", "evaluate a generated sample file");
  add_common(eval);
  auto* roundtrip = cli.add_subcommand("roundtrip", "autoencoder reconstruction report");
  add_common(roundtrip);
  auto* fragc = cli.add_subcommand("frag", "fragment one molecule and print the pieces");
  add_common(fragc);
  fragc->add_option("smiles", frag_smiles, "molecule SMILES")->required();

  CLI11_PARSE(cli, argc, argv);

  try {
    app::Config cfg = resolve_config(args);
    if (gen->parsed()) return cmd_gen_corpus(cfg);
    if (vocab->parsed()) return cmd_build_vocab(cfg);
    if (ae->parsed()) return cmd_train_ae(cfg);
    if (flow_cmd->parsed()) return cmd_train_flow(cfg);
    if (pred->parsed()) return cmd_train_predictor(cfg);
    if (sample->parsed()) return cmd_sample(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (roundtrip->parsed()) return cmd_roundtrip(cfg);
    if (fragc->parsed()) return cmd_frag(cfg, frag_smiles);
  } catch (const app::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const neural::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const app::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const chem::SmilesError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const frag::FragError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
