#pragma once

#include <Eigen/Core>
#include <functional>
#include <random>
#include <vector>

#include "polyfm/direct.hpp"
#include "polyfm/sparse_data.hpp"

// Shared helpers for the unit and acceptance tests.

namespace testsupport {

using polyfm::Index;
using polyfm::Sample;
using polyfm::SparseDataset;

inline Eigen::VectorXd random_dense(std::mt19937_64& rng, Index d,
                                    double scale = 1.0,
                                    double zero_prob = 0.0) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Index j = 0; j < d; ++j)
    v[j] = coin(rng) < zero_prob ? 0.0 : unif(rng);
  return v;
}

inline Sample to_sample(const Eigen::VectorXd& x) {
  Sample s;
  for (Index j = 0; j < x.size(); ++j) {
    if (x[j] == 0.0) continue;
    s.indices.push_back(j);
    s.values.push_back(x[j]);
  }
  return s;
}

// Sparse regression data: values N(0,1) at `density` fill, targets from a
// planted low-rank anova model plus Gaussian noise.
inline SparseDataset synth_regression(Index n, Index d, double density,
                                      std::uint64_t seed, double noise = 0.1,
                                      Index k_true = 3, int degree = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  polyfm::DirectModel truth;
  truth.kernel = polyfm::KernelKind::anova(degree);
  truth.P.resize(d, k_true);
  for (Index s = 0; s < k_true; ++s)
    for (Index j = 0; j < d; ++j) truth.P(j, s) = 0.5 * gauss(rng);
  truth.lambda.resize(k_true);
  for (Index s = 0; s < k_true; ++s)
    truth.lambda[s] = coin(rng) < 0.5 ? 1.0 : -1.0;

  std::vector<Sample> rows(n);
  std::vector<double> targets(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      if (coin(rng) < density) {
        rows[i].indices.push_back(j);
        rows[i].values.push_back(gauss(rng));
      }
    }
    targets[i] =
        predict_direct(truth, rows[i].view()) + noise * gauss(rng);
  }
  return SparseDataset::from_rows(rows, targets, d);
}

// Same design matrix, labels thresholded to -1/+1 for classification losses.
inline SparseDataset to_classification(const SparseDataset& ds) {
  std::vector<Sample> rows(ds.n_samples());
  std::vector<double> targets(ds.n_samples());
  for (Index i = 0; i < ds.n_samples(); ++i) {
    auto r = ds.row(i);
    rows[i] = Sample{{r.indices.begin(), r.indices.end()},
                     {r.values.begin(), r.values.end()}};
    targets[i] = ds.target(i) >= 0.0 ? 1.0 : -1.0;
  }
  return SparseDataset::from_rows(rows, targets, ds.n_features());
}

// All user/item pairs one-hot encoded, ratings offset + <a_u, b_i> + noise.
inline SparseDataset recommender_data(Index n_users, Index n_items,
                                      Index rank, double offset, double noise,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(n_users, rank), b(n_items, rank);
  for (Index u = 0; u < n_users; ++u)
    for (Index f = 0; f < rank; ++f) a(u, f) = 0.7 * gauss(rng);
  for (Index v = 0; v < n_items; ++v)
    for (Index f = 0; f < rank; ++f) b(v, f) = 0.7 * gauss(rng);

  std::vector<Sample> rows;
  std::vector<double> targets;
  rows.reserve(n_users * n_items);
  for (Index u = 0; u < n_users; ++u) {
    for (Index v = 0; v < n_items; ++v) {
      rows.push_back(polyfm::one_hot_pair(u, v, n_users, n_items));
      targets.push_back(offset + a.row(u).dot(b.row(v)) +
                        noise * gauss(rng));
    }
  }
  return SparseDataset::from_rows(rows, targets, n_users + n_items);
}

// Golden-section scan for the minimum of a 1-d function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo,
                         double hi, int iters = 120) {
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int t = 0; t < iters; ++t) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

}  // namespace testsupport
