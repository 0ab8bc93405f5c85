#include "fragflow/bag.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fragflow::bag {

Bag sample_bag_train(const std::vector<int>& positives,
                     const std::vector<double>& marginal, int n, rng::Engine& rng) {
  int vocab_size = static_cast<int>(marginal.size());
  std::set<int> chosen(positives.begin(), positives.end());
  if (static_cast<int>(chosen.size()) > n)
    throw BagError(BagError::Kind::TooManyPositives,
                   "bag size " + std::to_string(n) + " cannot hold " +
                       std::to_string(chosen.size()) + " positives");
  Bag out;
  out.ids.assign(chosen.begin(), chosen.end());
  if (n >= vocab_size) {
    out.ids.clear();
    for (int i = 0; i < vocab_size; ++i) out.ids.push_back(i);
    return out;
  }
  while (static_cast<int>(out.ids.size()) < n) {
    int draw = rng.categorical(marginal);
    if (chosen.insert(draw).second) out.ids.push_back(draw);
  }
  return out;
}

Bag sample_bag_inference(const std::vector<double>& marginal, int n, double t_bag,
                         rng::Engine& rng) {
  int vocab_size = static_cast<int>(marginal.size());
  Bag out;
  if (n >= vocab_size) {
    for (int i = 0; i < vocab_size; ++i) out.ids.push_back(i);
    return out;
  }
  std::vector<double> w(vocab_size);
  for (int i = 0; i < vocab_size; ++i)
    w[i] = marginal[i] > 0 ? std::pow(marginal[i], 1.0 / t_bag) : 0.0;
  for (int k = 0; k < n; ++k) {
    int draw = rng.categorical(w);
    out.ids.push_back(draw);
    w[draw] = 0.0;  // without replacement
  }
  std::sort(out.ids.begin(), out.ids.end());
  return out;
}

std::vector<double> infonce_posterior(const std::vector<double>& scores) {
  double total = 0.0;
  for (double f : scores) total += f;
  std::vector<double> p(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) p[i] = scores[i] / total;
  return p;
}

std::vector<double> infonce_posterior_logits(const std::vector<double>& logits,
                                             double t_pred) {
  std::vector<double> p(logits.size());
  double mx = -1e300;
  for (double l : logits) mx = std::max(mx, l / t_pred);
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] / t_pred - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double infonce_loss(const std::vector<double>& logits, int positive_pos) {
  if (positive_pos < 0 || positive_pos >= static_cast<int>(logits.size()))
    throw BagError(BagError::Kind::PositiveNotInBag, "positive index out of bag");
  double mx = *std::max_element(logits.begin(), logits.end());
  double lse = 0.0;
  for (double l : logits) lse += std::exp(l - mx);
  return mx + std::log(lse) - logits[positive_pos];
}

std::vector<double> conditional_reweight(const std::vector<double>& marginal,
                                         const std::vector<double>& mu, double c,
                                         double lambda_bag) {
  std::vector<double> q(marginal.size());
  double total = 0.0;
  for (size_t i = 0; i < marginal.size(); ++i) {
    double d = mu[i] - c;
    double e = -lambda_bag * d * d;
    q[i] = marginal[i] * std::exp(std::max(e, -700.0));
    total += q[i];
  }
  if (total <= 0.0) {
    // all mass annihilated: fall back to the nearest-mu fragment
    size_t best = 0;
    for (size_t i = 1; i < mu.size(); ++i)
      if (std::abs(mu[i] - c) < std::abs(mu[best] - c)) best = i;
    std::fill(q.begin(), q.end(), 0.0);
    q[best] = 1.0;
    return q;
  }
  for (double& v : q) v /= total;
  return q;
}

}  // namespace fragflow::bag
