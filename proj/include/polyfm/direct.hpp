#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "polyfm/common.hpp"
#include "polyfm/kernels.hpp"
#include "polyfm/losses.hpp"
#include "polyfm/sparse_data.hpp"

namespace polyfm {

enum class LambdaPolicy { fixed_ones, fit, random_signs };

inline LambdaPolicy lambda_policy_from_name(const std::string& name) {
  if (name == "ones") return LambdaPolicy::fixed_ones;
  if (name == "fit") return LambdaPolicy::fit;
  if (name == "signs") return LambdaPolicy::random_signs;
  throw ConfigError("unknown lambda policy '" + name + "'");
}

inline std::string lambda_policy_name(LambdaPolicy p) {
  switch (p) {
    case LambdaPolicy::fixed_ones: return "ones";
    case LambdaPolicy::fit: return "fit";
    case LambdaPolicy::random_signs: return "signs";
  }
  return {};
}

// Hyper-parameters shared by both solvers. `rank` is the number of basis
// vectors (k) for the direct solver and the factorization rank (r) for the
// lifted one; `degree` is the kernel degree m.
struct TrainConfig {
  double beta = 0.0;
  Index rank = 8;
  int degree = 2;
  Index epochs = 100;
  double tol = 1e-5;
  std::uint64_t seed = 42;
  LambdaPolicy lambda_policy = LambdaPolicy::fixed_ones;
  double init_std = 0.01;
  // Direct solver: rebuild all caches from scratch every this many epochs to
  // stop incremental-update drift from accumulating.
  Index cache_refresh_epochs = 10;
  // Lifted solver: keep every factor/sample inner product cached instead of
  // recomputing one block at a time.
  bool full_cache = false;
};

// Low-rank kernel expansion sum_s lambda_s K(p_s, x) where p_s is column s
// of P.
struct DirectModel {
  Eigen::VectorXd lambda;
  Eigen::MatrixXd P;
  KernelKind kernel;

  Index n_features() const { return P.rows(); }
  Index num_bases() const { return P.cols(); }
};

inline double predict_direct(const DirectModel& model, SampleView x) {
  double acc = 0.0;
  for (Index s = 0; s < model.num_bases(); ++s)
    acc += model.lambda[s] * kernel_value(model.kernel, model.P.col(s), x);
  return acc;
}

// Training objective: sum of losses plus beta * sum_s |lambda_s| ||p_s||^2.
inline double objective_direct(const DirectModel& model,
                               const SparseDataset& ds, const Loss& loss,
                               double beta) {
  double obj = 0.0;
  for (Index i = 0; i < ds.n_samples(); ++i)
    obj += loss.value(ds.target(i), predict_direct(model, ds.row(i)));
  for (Index s = 0; s < model.num_bases(); ++s)
    obj += beta * std::abs(model.lambda[s]) * model.P.col(s).squaredNorm();
  return obj;
}

// Per-sample state kept in sync while coordinates change: predictions for
// the whole model, plus <p_s, x_i> and (degree 3 only) A^2(p_s, x_i) for the
// basis currently being swept.
struct DirectCaches {
  Eigen::VectorXd yhat;
  Eigen::VectorXd dot;
  Eigen::VectorXd a2;
};

namespace detail {

inline DirectCaches init_direct_caches(const DirectModel& model,
                                       const SparseDataset& ds) {
  DirectCaches c;
  c.yhat.resize(ds.n_samples());
  for (Index i = 0; i < ds.n_samples(); ++i)
    c.yhat[i] = predict_direct(model, ds.row(i));
  c.dot.setZero(ds.n_samples());
  if (model.kernel.degree == 3) c.a2.setZero(ds.n_samples());
  return c;
}

inline void refresh_basis_caches(const DirectModel& model,
                                 const SparseDataset& ds, Index s,
                                 DirectCaches& caches) {
  const bool need_a2 = model.kernel.degree == 3;
  for (Index i = 0; i < ds.n_samples(); ++i) {
    const PowerSums ps = power_sums(model.P.col(s), ds.row(i));
    caches.dot[i] = ps.d1;
    if (need_a2) caches.a2[i] = 0.5 * (ps.d1 * ps.d1 - ps.d2);
  }
}

inline bool caches_close(double cached, double fresh, double tol) {
  return std::abs(cached - fresh) <= tol * std::max(1.0, std::abs(fresh));
}

// True when cached predictions (and per-basis values, if `s` >= 0) match a
// from-scratch recomputation within `tol` relative.
inline bool direct_caches_consistent(const DirectModel& model,
                                     const SparseDataset& ds,
                                     const DirectCaches& caches, Index s,
                                     double tol) {
  for (Index i = 0; i < ds.n_samples(); ++i) {
    if (!caches_close(caches.yhat[i], predict_direct(model, ds.row(i)), tol))
      return false;
    if (s >= 0) {
      const PowerSums ps = power_sums(model.P.col(s), ds.row(i));
      if (!caches_close(caches.dot[i], ps.d1, tol)) return false;
      if (model.kernel.degree == 3 &&
          !caches_close(caches.a2[i], 0.5 * (ps.d1 * ps.d1 - ps.d2), tol))
        return false;
    }
  }
  return true;
}

// One coordinate update of P(j, s). Expects caches.dot / caches.a2 to hold
// the values for basis s. Returns the applied step delta (0 when skipped).
inline double direct_coordinate_step(DirectModel& model,
                                     const SparseDataset& ds, const Loss& loss,
                                     double beta, Index s, Index j,
                                     DirectCaches& caches) {
  const int m = model.kernel.degree;
  const double lam = model.lambda[s];
  const double reg = 2.0 * beta * std::abs(lam);
  const double p_old = model.P(j, s);

  const auto rows = ds.col_rows(j);
  const auto vals = ds.col_values(j);

  double grad = 0.0;
  double curv = 0.0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const Index i = rows[t];
    const double xv = vals[t];
    const PerSampleCache c{caches.dot[i], m == 3 ? caches.a2[i] : 0.0};
    const double dy = lam * anova_grad_coord(p_old, xv, m, c);
    grad += loss.deriv(ds.target(i), caches.yhat[i]) * dy;
    curv += dy * dy;
  }
  const double eta = loss.mu() * curv + reg;
  if (eta == 0.0) return 0.0;
  grad += reg * p_old;
  const double delta = grad / eta;
  if (delta == 0.0) return 0.0;

  model.P(j, s) = p_old - delta;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const Index i = rows[t];
    const double xv = vals[t];
    const double a1_noj = caches.dot[i] - p_old * xv;
    if (m == 3) {
      const double a2_noj = caches.a2[i] - p_old * xv * a1_noj;
      caches.yhat[i] -= lam * delta * xv * a2_noj;
      caches.a2[i] -= delta * xv * a1_noj;
    } else {
      caches.yhat[i] -= lam * delta * xv * a1_noj;
    }
    caches.dot[i] -= delta * xv;
  }

#ifdef POLYFM_CHECK_CACHES
  if (!direct_caches_consistent(model, ds, caches, s, 1e-8))
    throw Error("direct solver caches drifted from recomputed values");
#endif
  return delta;
}

}  // namespace detail

// One full sweep over all coordinates of P, basis-major. Returns the sum of
// absolute parameter changes. Caches must be initialized for the current
// model; they are left in sync.
inline double epoch_update_P(DirectModel& model, const SparseDataset& ds,
                             const Loss& loss, double beta,
                             DirectCaches& caches) {
  if (model.kernel.family != KernelFamily::anova ||
      (model.kernel.degree != 2 && model.kernel.degree != 3))
    throw ConfigError(
        "direct coordinate descent supports anova kernels of degree 2 or 3");
  double total = 0.0;
  for (Index s = 0; s < model.num_bases(); ++s) {
    // With lambda_s = 0 every prediction derivative and the regularizer
    // weight vanish, so eta would be 0 for every coordinate.
    if (model.lambda[s] == 0.0) continue;
    detail::refresh_basis_caches(model, ds, s, caches);
    for (Index j = 0; j < model.n_features(); ++j)
      total += std::abs(
          detail::direct_coordinate_step(model, ds, loss, beta, s, j, caches));
  }
  return total;
}

namespace detail {

inline double soft_threshold(double a, double t) {
  if (a > t) return a - t;
  if (a < -t) return a + t;
  return 0.0;
}

}  // namespace detail

// Coordinate descent on lambda with P frozen. In lambda the problem is a
// weighted l1-regularized convex one (weight beta * ||p_s||^2 per
// coordinate): the squared loss gets its exact soft-threshold minimizer, the
// others a mu-majorized prox step. Runs passes until the lambda change is at
// most `tol` (hard cap of 1000 passes); returns the total absolute change.
// caches.yhat is kept in sync.
inline double fit_lambda(DirectModel& model, const SparseDataset& ds,
                         const Loss& loss, double beta, double tol,
                         DirectCaches& caches) {
  const Index n = ds.n_samples();
  const Index k = model.num_bases();

  // Basis kernel values are constant while P is frozen.
  Eigen::MatrixXd z(n, k);
  for (Index s = 0; s < k; ++s)
    for (Index i = 0; i < n; ++i)
      z(i, s) = kernel_value(model.kernel, model.P.col(s), ds.row(i));

  double total = 0.0;
  for (int pass = 0; pass < 1000; ++pass) {
    double pass_delta = 0.0;
    for (Index s = 0; s < k; ++s) {
      const double w = beta * model.P.col(s).squaredNorm();
      const double lam_old = model.lambda[s];
      const double den = z.col(s).squaredNorm();
      double lam_new;
      if (den == 0.0) {
        // This basis does not touch any prediction; only the penalty acts.
        lam_new = w > 0.0 ? 0.0 : lam_old;
      } else if (loss.kind() == LossKind::squared) {
        double rho = lam_old * den;
        for (Index i = 0; i < n; ++i)
          rho += z(i, s) * (ds.target(i) - caches.yhat[i]);
        lam_new = detail::soft_threshold(rho, w) / den;
      } else {
        const double h = loss.mu() * den;
        double g = 0.0;
        for (Index i = 0; i < n; ++i)
          g += loss.deriv(ds.target(i), caches.yhat[i]) * z(i, s);
        lam_new = detail::soft_threshold(lam_old - g / h, w / h);
      }
      const double delta = lam_new - lam_old;
      if (delta != 0.0) {
        model.lambda[s] = lam_new;
        caches.yhat += delta * z.col(s);
        pass_delta += std::abs(delta);
      }
    }
    total += pass_delta;
    if (pass_delta <= tol) break;
  }
  return total;
}

using EpochCallback =
    std::function<void(Index epoch, double objective, double delta)>;

// Trains an anova-kernel model of degree 2 or 3 by coordinate descent:
// P entries start N(0, init_std^2), lambda starts per policy, then each
// epoch runs a lambda pass (fit policy only) followed by a full sweep of P.
// Stops after `epochs` epochs or once the per-epoch parameter change is at
// most `tol`.
inline DirectModel train_direct(const SparseDataset& ds,
                                const TrainConfig& config, const Loss& loss,
                                const EpochCallback& on_epoch = nullptr) {
  if (config.degree != 2 && config.degree != 3)
    throw ConfigError("direct solver requires degree 2 or 3, got " +
                      std::to_string(config.degree));
  if (config.rank < 1) throw ConfigError("rank must be >= 1");
  if (config.beta < 0.0) throw ConfigError("beta must be >= 0");
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (config.tol < 0.0) throw ConfigError("tol must be >= 0");
  if (config.init_std < 0.0) throw ConfigError("init_std must be >= 0");
  loss.check_labels(ds.targets());

  DirectModel model;
  model.kernel = KernelKind::anova(config.degree);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, config.init_std);
  model.P.resize(ds.n_features(), config.rank);
  for (Index s = 0; s < config.rank; ++s)
    for (Index j = 0; j < ds.n_features(); ++j) model.P(j, s) = gauss(rng);
  model.lambda.setOnes(config.rank);
  if (config.lambda_policy == LambdaPolicy::random_signs) {
    std::bernoulli_distribution coin(0.5);
    for (Index s = 0; s < config.rank; ++s)
      model.lambda[s] = coin(rng) ? 1.0 : -1.0;
  }

  if (config.epochs == 0) return model;

  DirectCaches caches = detail::init_direct_caches(model, ds);
  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    double delta = 0.0;
    if (config.lambda_policy == LambdaPolicy::fit)
      delta += fit_lambda(model, ds, loss, config.beta, config.tol, caches);
    delta += epoch_update_P(model, ds, loss, config.beta, caches);

    if (config.cache_refresh_epochs > 0 &&
        epoch % config.cache_refresh_epochs == 0)
      caches = detail::init_direct_caches(model, ds);
#ifndef NDEBUG
    if (!detail::direct_caches_consistent(model, ds, caches, -1, 1e-8))
      throw Error("direct solver caches drifted from recomputed values");
#endif

    if (on_epoch)
      on_epoch(epoch, objective_direct(model, ds, loss, config.beta), delta);
    if (delta <= config.tol) break;
  }
  return model;
}

}  // namespace polyfm
