#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fragflow/rng.hpp"

namespace fragflow::bag {

class BagError : public std::runtime_error {
 public:
  enum class Kind { TooManyPositives, PositiveNotInBag };
  BagError(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// A sampled subset of fragment ids; ids are distinct.
struct Bag {
  std::vector<int> ids;
  int find(int id) const {
    for (size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return static_cast<int>(i);
    return -1;
  }
  int size() const { return static_cast<int>(ids.size()); }
};

struct BagConfig {
  int n_train = 128;
  int n_inference = 128;
  double t_pred = 1.0;
  double t_bag = 1.0;
  double lambda_bag = 0.0;
};

// Training bag: every positive plus negatives drawn i.i.d. from the
// marginal, duplicates rejected, until size N (or the whole vocabulary).
Bag sample_bag_train(const std::vector<int>& positives,
                     const std::vector<double>& marginal, int n, rng::Engine& rng);

// Inference bag: N draws without replacement, weights p^(1/T_bag).
Bag sample_bag_inference(const std::vector<double>& marginal, int n, double t_bag,
                         rng::Engine& rng);

// In-bag posterior from positive scores f (f > 0): p(x) = f(x)/sum f.
std::vector<double> infonce_posterior(const std::vector<double>& scores);

// Posterior from raw logits with prediction temperature.
std::vector<double> infonce_posterior_logits(const std::vector<double>& logits,
                                             double t_pred = 1.0);

// -log softmax(logits)[positive]
double infonce_loss(const std::vector<double>& logits, int positive_pos);

// p(x|c) proportional to p(x) exp(-lambda ||mu(x) - c||^2), normalized.
std::vector<double> conditional_reweight(const std::vector<double>& marginal,
                                         const std::vector<double>& mu, double c,
                                         double lambda_bag);

}  // namespace fragflow::bag
