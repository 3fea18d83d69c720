#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "polyfm/common.hpp"
#include "polyfm/sparse_data.hpp"

namespace polyfm {

// `count` log-spaced values from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, Index count) {
  if (lo <= 0.0 || hi <= 0.0)
    throw ConfigError("log_grid endpoints must be positive");
  if (count < 1) throw ConfigError("log_grid needs at least one point");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (Index t = 0; t < count; ++t)
    out[t] = std::exp(llo + (lhi - llo) * static_cast<double>(t) /
                                static_cast<double>(count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

struct TrainTestSplit {
  SparseDataset train;
  SparseDataset test;
  std::vector<Index> train_ids;
  std::vector<Index> test_ids;
};

// Seeded shuffle split; test_fraction of the samples (rounded, but both
// parts stay nonempty for fractions strictly inside (0,1)) go to the test
// set.
inline TrainTestSplit split_train_test(const SparseDataset& ds,
                                       double test_fraction,
                                       std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0)
    throw ConfigError("test_fraction must be in [0, 1]");
  const Index n = ds.n_samples();
  std::vector<Index> ids(n);
  std::iota(ids.begin(), ids.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  Index n_test = static_cast<Index>(std::llround(test_fraction * n));
  if (test_fraction > 0.0 && n_test == 0 && n > 1) n_test = 1;
  if (test_fraction < 1.0 && n_test == n && n > 1) n_test = n - 1;

  TrainTestSplit split;
  split.test_ids.assign(ids.begin(), ids.begin() + n_test);
  split.train_ids.assign(ids.begin() + n_test, ids.end());
  split.train = subset(ds, split.train_ids);
  split.test = subset(ds, split.test_ids);
  return split;
}

// Fold id per sample: seeded shuffle, then round robin, so fold sizes differ
// by at most one.
inline std::vector<int> kfold_assignments(Index n, int folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (folds > n)
    throw ConfigError("more folds (" + std::to_string(folds) +
                      ") than samples (" + std::to_string(n) + ")");
  std::vector<Index> ids(n);
  std::iota(ids.begin(), ids.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<int> fold(n);
  for (Index t = 0; t < n; ++t)
    fold[ids[t]] = static_cast<int>(t % folds);
  return fold;
}

struct CvResult {
  double beta = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

// Trains on everything outside a fold and returns a predictor for it.
using Trainer = std::function<std::function<double(SampleView)>(
    const SparseDataset& train, double beta)>;
using Metric = std::function<double(const Eigen::VectorXd& pred,
                                    const Eigen::VectorXd& y)>;

// K-fold cross-validation over a beta grid. Folds are fixed across betas so
// the comparison is paired. Returns mean and sample standard deviation of
// the metric per beta, in grid order.
inline std::vector<CvResult> cross_validate(const SparseDataset& ds,
                                            const std::vector<double>& betas,
                                            int folds, std::uint64_t seed,
                                            const Trainer& trainer,
                                            const Metric& metric) {
  if (betas.empty()) throw ConfigError("cross_validate: empty beta grid");
  const auto fold_of = kfold_assignments(ds.n_samples(), folds, seed);

  std::vector<std::vector<Index>> in_fold(folds), out_fold(folds);
  for (Index i = 0; i < ds.n_samples(); ++i) {
    in_fold[fold_of[i]].push_back(i);
    for (int f = 0; f < folds; ++f)
      if (f != fold_of[i]) out_fold[f].push_back(i);
  }

  std::vector<CvResult> results;
  results.reserve(betas.size());
  for (double beta : betas) {
    std::vector<double> scores;
    scores.reserve(folds);
    for (int f = 0; f < folds; ++f) {
      const SparseDataset train = subset(ds, out_fold[f]);
      const SparseDataset held = subset(ds, in_fold[f]);
      const auto predictor = trainer(train, beta);
      Eigen::VectorXd pred(held.n_samples());
      for (Index i = 0; i < held.n_samples(); ++i)
        pred[i] = predictor(held.row(i));
      scores.push_back(metric(pred, held.targets()));
    }
    CvResult r;
    r.beta = beta;
    for (double s : scores) r.mean += s;
    r.mean /= static_cast<double>(scores.size());
    if (scores.size() > 1) {
      double acc = 0.0;
      for (double s : scores) acc += (s - r.mean) * (s - r.mean);
      r.sd = std::sqrt(acc / static_cast<double>(scores.size() - 1));
    }
    results.push_back(r);
  }
  return results;
}

// Index of the best grid point; first one wins ties.
inline std::size_t select_best(const std::vector<CvResult>& results,
                               bool lower_is_better) {
  if (results.empty()) throw ConfigError("select_best: no results");
  std::size_t best = 0;
  for (std::size_t t = 1; t < results.size(); ++t) {
    if (lower_is_better ? results[t].mean < results[best].mean
                        : results[t].mean > results[best].mean)
      best = t;
  }
  return best;
}

}  // namespace polyfm
