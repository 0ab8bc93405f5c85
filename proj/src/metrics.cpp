#include "fragflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "json.hpp"

namespace fragflow::metrics {

double validity_fraction(const SampleSet& s) {
  if (s.n_total == 0) return 0.0;
  return static_cast<double>(s.valid_smiles.size()) / s.n_total;
}

double uniqueness_fraction(const std::vector<std::string>& valid_canonical) {
  if (valid_canonical.empty()) return 0.0;
  std::set<std::string> uniq(valid_canonical.begin(), valid_canonical.end());
  return static_cast<double>(uniq.size()) / valid_canonical.size();
}

double novelty_fraction(const std::vector<std::string>& unique_canonical,
                        const std::vector<std::string>& training_canonical) {
  if (unique_canonical.empty()) return 0.0;
  std::set<std::string> train(training_canonical.begin(), training_canonical.end());
  std::set<std::string> uniq(unique_canonical.begin(), unique_canonical.end());
  int novel = 0;
  for (const auto& s : uniq)
    if (!train.count(s)) ++novel;
  return static_cast<double>(novel) / uniq.size();
}

namespace {

double stddev(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / xs.size());
}

// Scott's rule: h = sigma * n^(-1/5)
std::vector<double> kde_on_grid(const std::vector<double>& xs,
                                const std::vector<double>& grid) {
  double h = stddev(xs) * std::pow(static_cast<double>(xs.size()), -0.2);
  std::vector<double> pdf(grid.size(), 0.0);
  double norm = 1.0 / (xs.size() * h * std::sqrt(2.0 * M_PI));
  for (size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (double x : xs) {
      double u = (grid[g] - x) / h;
      acc += std::exp(-0.5 * u * u);
    }
    pdf[g] = acc * norm;
  }
  return pdf;
}

}  // namespace

std::optional<double> kde_kl(const std::vector<double>& generated,
                             const std::vector<double>& reference) {
  if (generated.size() < 2 || reference.size() < 2) return std::nullopt;
  if (stddev(generated) == 0.0 || stddev(reference) == 0.0) return std::nullopt;
  double lo = std::min(*std::min_element(generated.begin(), generated.end()),
                       *std::min_element(reference.begin(), reference.end()));
  double hi = std::max(*std::max_element(generated.begin(), generated.end()),
                       *std::max_element(reference.begin(), reference.end()));
  constexpr int kPoints = 1000;
  std::vector<double> grid(kPoints);
  for (int i = 0; i < kPoints; ++i)
    grid[i] = lo + (hi - lo) * i / (kPoints - 1);
  auto p = kde_on_grid(reference, grid);
  auto q = kde_on_grid(generated, grid);
  double ps = 0.0, qs = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    p[i] += 1e-10;
    q[i] += 1e-10;
    ps += p[i];
    qs += q[i];
  }
  double kl = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    double pi = p[i] / ps, qi = q[i] / qs;
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

NPContributionTable build_np_table(const std::vector<chem::MolGraph>& corpus_a,
                                   const std::vector<chem::MolGraph>& corpus_b) {
  std::unordered_map<uint64_t, long long> freq_a, freq_b;
  for (const auto& mol : corpus_a)
    for (uint64_t env : chem::morgan_environments(mol, 2)) ++freq_a[env];
  for (const auto& mol : corpus_b)
    for (uint64_t env : chem::morgan_environments(mol, 2)) ++freq_b[env];
  NPContributionTable table;
  std::set<uint64_t> envs;
  for (const auto& [env, c] : freq_a) envs.insert(env);
  for (const auto& [env, c] : freq_b) envs.insert(env);
  constexpr double kSmoothing = 1.0;
  for (uint64_t env : envs) {
    double fa = freq_a.count(env) ? static_cast<double>(freq_a.at(env)) : 0.0;
    double fb = freq_b.count(env) ? static_cast<double>(freq_b.at(env)) : 0.0;
    double c = std::log10((fa + kSmoothing) / (fb + kSmoothing));
    table.contribution[env] = std::clamp(c, table.clip_lo, table.clip_hi);
  }
  return table;
}

double np_likeness(const chem::MolGraph& mol, const NPContributionTable& table) {
  if (mol.num_atoms() == 0) return 0.0;
  double total = 0.0;
  for (uint64_t env : chem::morgan_environments(mol, 2)) {
    auto it = table.contribution.find(env);
    if (it != table.contribution.end()) total += it->second;
  }
  double score = total / mol.num_atoms();
  return std::clamp(score, table.clip_lo, table.clip_hi);
}

double snn(const std::vector<chem::MolGraph>& generated,
           const std::vector<chem::MolGraph>& reference) {
  std::vector<chem::Fingerprint> ref_fp;
  ref_fp.reserve(reference.size());
  for (const auto& m : reference) ref_fp.push_back(chem::morgan_fingerprint(m));
  double total = 0.0;
  for (const auto& m : generated) {
    auto fp = chem::morgan_fingerprint(m);
    double best = 0.0;
    for (const auto& r : ref_fp) best = std::max(best, chem::tanimoto(fp, r));
    total += best;
  }
  return generated.empty() ? 0.0 : total / generated.size();
}

double scaffold_cosine(const std::vector<chem::MolGraph>& generated,
                       const std::vector<chem::MolGraph>& reference) {
  std::map<std::string, std::pair<double, double>> counts;
  for (const auto& m : generated)
    counts[chem::canonical_smiles(chem::murcko_scaffold(m))].first += 1.0;
  for (const auto& m : reference)
    counts[chem::canonical_smiles(chem::murcko_scaffold(m))].second += 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [key, ab] : counts) {
    dot += ab.first * ab.second;
    na += ab.first * ab.first;
    nb += ab.second * ab.second;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

// 6 significant digits, parsed back so JSON carries short numbers
double sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::atof(buf);
}

nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return sig6(*v);
}

}  // namespace

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["n_samples"] = n_samples;
  j["validity_pct"] = sig6(validity_pct);
  j["uniqueness_pct"] = sig6(uniqueness_pct);
  j["novelty_pct"] = sig6(novelty_pct);
  nlohmann::json props = nlohmann::json::object();
  for (const auto& [name, v] : property_kl) props[name] = opt_json(v);
  j["property_kl"] = props;
  j["np_likeness_kl"] = opt_json(np_likeness_kl);
  j["snn"] = opt_json(snn_value);
  j["scaffold_cosine"] = opt_json(scaffold_cosine_value);
  j["fcd"] = "unsupported: requires pretrained model";
  j["np_classifier_kl"] = "unsupported: requires pretrained model";
  nlohmann::json echo = nlohmann::json::object();
  for (const auto& [k, v] : config_echo) echo[k] = v;
  j["config"] = echo;
  return j.dump(2) + "\n";
}

}  // namespace fragflow::metrics
