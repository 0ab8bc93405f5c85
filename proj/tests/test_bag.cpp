#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "fragflow/bag.hpp"

using namespace fragflow;
using namespace fragflow::bag;

TEST_CASE("training bag holds the positives and fills from the marginal") {
  std::vector<double> p1 = {0.5, 0.2, 0.1, 0.1, 0.05, 0.05};
  rng::Engine rng(1);
  auto full = sample_bag_train({0, 1, 2, 3}, p1, 4, rng);
  std::set<int> got(full.ids.begin(), full.ids.end());
  CHECK(got == std::set<int>{0, 1, 2, 3});

  auto whole = sample_bag_train({0}, p1, 6, rng);
  CHECK(whole.size() == 6);

  CHECK_THROWS_AS(sample_bag_train({0, 1, 2}, p1, 2, rng), BagError);

  auto bag = sample_bag_train({5}, p1, 4, rng);
  CHECK(bag.size() == 4);
  std::set<int> distinct(bag.ids.begin(), bag.ids.end());
  CHECK(distinct.size() == 4);
  CHECK(bag.find(5) >= 0);
}

TEST_CASE("negative draw frequencies follow the marginal") {
  std::vector<double> p1 = {0.3, 0.25, 0.15, 0.1, 0.05, 0.05, 0.04, 0.03, 0.02, 0.01};
  rng::Engine rng(7);
  std::vector<long long> counts(10, 0);
  long long negatives = 0;
  const int trials = 100000;
  for (int trial = 0; trial < trials; ++trial) {
    auto bag = sample_bag_train({9}, p1, 2, rng);  // one negative per bag
    for (int id : bag.ids)
      if (id != 9) {
        ++counts[id];
        ++negatives;
      }
  }
  // negatives are drawn from p1 with id 9 rejected; renormalize
  double rest = 1.0 - p1[9];
  for (int id = 0; id < 9; ++id) {
    double expected = p1[id] / rest;
    double observed = static_cast<double>(counts[id]) / negatives;
    CHECK(observed == doctest::Approx(expected).epsilon(0.0).scale(1.0));
    CHECK(std::abs(observed - expected) < 0.01);
  }
}

TEST_CASE("posterior normalization and uniform limits") {
  auto p = infonce_posterior({1.0, 1.0, 1.0, 1.0});
  for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  auto pl = infonce_posterior_logits({3.0, 1.0, -2.0}, 1.0);
  double sum = 0.0;
  for (double v : pl) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  // infinite prediction temperature flattens the posterior
  auto flat = infonce_posterior_logits({3.0, 1.0, -2.0}, 1e12);
  for (double v : flat) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-6));
}

TEST_CASE("full-vocab bag recovers the exact Bayes posterior") {
  // 4-category synthetic model: p(x1|X_t) arbitrary, scores = exact ratio
  std::vector<double> p1 = {0.4, 0.3, 0.2, 0.1};
  std::vector<double> posterior_true = {0.05, 0.15, 0.3, 0.5};
  std::vector<double> scores(4);
  for (int i = 0; i < 4; ++i) scores[i] = posterior_true[i] / p1[i];
  // bag = whole vocabulary, weighted by p1 at the bag-construction level;
  // the in-bag posterior multiplies back through the ratio scores
  std::vector<double> f(4);
  for (int i = 0; i < 4; ++i) f[i] = p1[i] * scores[i];
  auto post = infonce_posterior(f);
  for (int i = 0; i < 4; ++i)
    CHECK(post[i] == doctest::Approx(posterior_true[i]).epsilon(1e-12));
}

TEST_CASE("SNIS error shrinks monotonically with bag size") {
  // synthetic 32-category model with exact ratio scores
  const int V = 32;
  std::vector<double> p1(V), post(V);
  double zp = 0.0, zq = 0.0;
  for (int i = 0; i < V; ++i) {
    p1[i] = 1.0 / (1 + i);
    zp += p1[i];
    post[i] = std::exp(-0.3 * i);
    zq += post[i];
  }
  for (int i = 0; i < V; ++i) {
    p1[i] /= zp;
    post[i] /= zq;
  }
  std::vector<double> ratio(V);
  for (int i = 0; i < V; ++i) ratio[i] = post[i] / p1[i];

  rng::Engine rng(3);
  std::vector<int> sizes = {2, 4, 8, 16, V};
  std::vector<double> tv_at_size;
  for (int n : sizes) {
    double tv_sum = 0.0;
    const int reps = 4000;
    for (int rep = 0; rep < reps; ++rep) {
      auto bag = sample_bag_inference(p1, n, 1.0, rng);
      std::vector<double> f(bag.size());
      for (int b = 0; b < bag.size(); ++b) f[b] = ratio[bag.ids[b]];
      auto in_bag = infonce_posterior(f);
      // embed into the full space and measure total variation
      std::vector<double> approx(V, 0.0);
      for (int b = 0; b < bag.size(); ++b) approx[bag.ids[b]] = in_bag[b];
      double tv = 0.0;
      for (int i = 0; i < V; ++i) tv += std::abs(approx[i] - post[i]);
      tv_sum += 0.5 * tv;
    }
    tv_at_size.push_back(tv_sum / reps);
  }
  for (size_t k = 1; k < tv_at_size.size(); ++k)
    CHECK(tv_at_size[k] < tv_at_size[k - 1]);
  CHECK(tv_at_size.back() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("infonce loss closed forms") {
  std::vector<double> uniform(8, 0.7);
  CHECK(infonce_loss(uniform, 3) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  std::vector<double> peaked = {50.0, 0.0, 0.0};
  CHECK(infonce_loss(peaked, 0) < 1e-12);
  CHECK_THROWS_AS(infonce_loss(uniform, 9), BagError);
  // invariance to constant logit shifts
  std::vector<double> logits = {1.0, -0.5, 2.0, 0.3};
  std::vector<double> shifted = logits;
  for (double& v : shifted) v += 123.0;
  CHECK(infonce_loss(logits, 2) == doctest::Approx(infonce_loss(shifted, 2)).epsilon(1e-9));
}

TEST_CASE("conditional reweighting") {
  std::vector<double> p1 = {0.3, 0.3, 0.2, 0.1, 0.1};
  std::vector<double> mu = {1.0, 2.0, 3.0, 4.0, 5.0};
  // lambda 0 keeps the marginal exactly
  auto q0 = conditional_reweight(p1, mu, 3.0, 0.0);
  for (int i = 0; i < 5; ++i) CHECK(q0[i] == doctest::Approx(p1[i]).epsilon(1e-12));
  // huge lambda concentrates on the nearest mu
  auto qinf = conditional_reweight(p1, mu, 3.9, 1e6);
  CHECK(qinf[3] == doctest::Approx(1.0).epsilon(1e-9));
  // hand-computed check at lambda 0.7, c = 2.5
  double lambda = 0.7, c = 2.5;
  std::vector<double> expect(5);
  double z = 0.0;
  for (int i = 0; i < 5; ++i) {
    expect[i] = p1[i] * std::exp(-lambda * (mu[i] - c) * (mu[i] - c));
    z += expect[i];
  }
  auto q = conditional_reweight(p1, mu, c, lambda);
  for (int i = 0; i < 5; ++i)
    CHECK(q[i] == doctest::Approx(expect[i] / z).epsilon(1e-12));
}

TEST_CASE("inference bag limits") {
  std::vector<double> p1 = {0.7, 0.1, 0.1, 0.05, 0.05};
  rng::Engine rng(5);
  auto whole = sample_bag_inference(p1, 5, 1.0, rng);
  CHECK(whole.size() == 5);
  // high bag temperature flattens draw frequencies
  std::vector<long long> hot(5, 0), cold(5, 0);
  for (int rep = 0; rep < 20000; ++rep) {
    auto h = sample_bag_inference(p1, 1, 1e9, rng);
    ++hot[h.ids[0]];
    auto cd = sample_bag_inference(p1, 1, 1.0, rng);
    ++cold[cd.ids[0]];
  }
  CHECK(std::abs(hot[0] / 20000.0 - 0.2) < 0.02);
  CHECK(cold[0] / 20000.0 > 0.6);
}
