#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fragflow/chem.hpp"

namespace fragflow::metrics {

// Generated-set summary with invalid entries kept as counts: validity is
// computed against everything produced, not just parseable lines.
struct SampleSet {
  std::vector<std::string> valid_smiles;  // canonical
  int n_total = 0;
  std::map<std::string, int> invalid_by_status;
};

double validity_fraction(const SampleSet& s);
double uniqueness_fraction(const std::vector<std::string>& valid_canonical);
double novelty_fraction(const std::vector<std::string>& unique_canonical,
                        const std::vector<std::string>& training_canonical);

// Gaussian-KDE KL divergence KL(reference || generated): both sides smoothed
// with Scott's-rule bandwidth, evaluated on a shared 1000-point grid spanning
// the combined min/max, floored at 1e-10 and renormalized. nullopt when
// either side is degenerate (all values identical).
std::optional<double> kde_kl(const std::vector<double>& generated,
                             const std::vector<double>& reference);

// Fragment-frequency likeness: each circular atom environment (radius <= 2)
// contributes log10((freq_a + 1) / (freq_b + 1)); a molecule scores the sum
// of its environments' contributions divided by heavy atom count, clipped.
struct NPContributionTable {
  std::unordered_map<uint64_t, double> contribution;
  double clip_lo = -5.0;
  double clip_hi = 5.0;
};

NPContributionTable build_np_table(const std::vector<chem::MolGraph>& corpus_a,
                                   const std::vector<chem::MolGraph>& corpus_b);
double np_likeness(const chem::MolGraph& mol, const NPContributionTable& table);

// Mean nearest-neighbour Tanimoto of generated against reference.
double snn(const std::vector<chem::MolGraph>& generated,
           const std::vector<chem::MolGraph>& reference);

// Cosine between Bemis-Murcko scaffold occurrence vectors.
double scaffold_cosine(const std::vector<chem::MolGraph>& generated,
                       const std::vector<chem::MolGraph>& reference);

struct MetricsReport {
  int n_samples = 0;
  double validity_pct = 0.0;
  double uniqueness_pct = 0.0;
  double novelty_pct = 0.0;
  std::map<std::string, std::optional<double>> property_kl;
  std::optional<double> np_likeness_kl;
  std::optional<double> snn_value;
  std::optional<double> scaffold_cosine_value;
  std::map<std::string, std::string> config_echo;

  // Fixed key schema; numbers carry 6 significant digits. FCD-style metrics
  // that need a pretrained network are reported as explicit "unsupported"
  // markers instead of being omitted.
  std::string to_json() const;
};

}  // namespace fragflow::metrics
