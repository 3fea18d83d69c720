#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "polyfm/common.hpp"
#include "polyfm/direct.hpp"
#include "polyfm/kernels.hpp"
#include "polyfm/losses.hpp"
#include "polyfm/sparse_data.hpp"

namespace polyfm {

// Rank-r factorization of an order-m coefficient tensor: one d x r factor
// matrix per tensor mode, prediction sum_s prod_t <u^t_s, x>. The anova
// variant (degree 2 only) scores with the strictly-upper contraction of
// sym(U V^T) instead, dropping squared-feature terms.
struct LiftedModel {
  std::vector<Eigen::MatrixXd> factors;
  KernelKind kernel;

  int degree() const { return static_cast<int>(factors.size()); }
  Index n_features() const { return factors.empty() ? 0 : factors[0].rows(); }
  Index rank() const { return factors.empty() ? 0 : factors[0].cols(); }
};

namespace detail {

inline void validate_lifted(const LiftedModel& model) {
  if (model.factors.empty())
    throw ConfigError("lifted model has no factor matrices");
  for (const auto& f : model.factors)
    if (f.rows() != model.factors[0].rows() ||
        f.cols() != model.factors[0].cols())
      throw DimensionError("lifted factor matrices have mismatched shapes");
  if (model.kernel.degree != model.degree())
    throw DimensionError("lifted model stores " +
                         std::to_string(model.degree()) +
                         " factors but kernel degree is " +
                         std::to_string(model.kernel.degree));
  if (model.kernel.family == KernelFamily::anova && model.degree() != 2)
    throw ConfigError("lifted anova training supports degree 2 only");
  if (model.kernel.family == KernelFamily::homogeneous && model.degree() < 2)
    throw ConfigError("lifted training requires degree >= 2");
}

}  // namespace detail

inline double predict_lifted_h(const LiftedModel& model, SampleView x) {
  double acc = 0.0;
  for (Index s = 0; s < model.rank(); ++s) {
    double prod = 1.0;
    for (const auto& f : model.factors) prod *= dot_sparse(f.col(s), x);
    acc += prod;
  }
  return acc;
}

// Strictly-upper contraction of sym(U V^T) against x x^T:
//   1/2 sum_s [ <u_s,x> <v_s,x> - sum_j u_js v_js x_j^2 ].
inline double predict_lifted_a2(const LiftedModel& model, SampleView x) {
  const Eigen::MatrixXd& u = model.factors[0];
  const Eigen::MatrixXd& v = model.factors[1];
  double acc = 0.0;
  for (Index s = 0; s < model.rank(); ++s) {
    double du = 0.0, dv = 0.0, diag = 0.0;
    for (Index t = 0; t < x.size(); ++t) {
      const Index j = x.indices[t];
      const double xv = x.values[t];
      du += u(j, s) * xv;
      dv += v(j, s) * xv;
      diag += u(j, s) * v(j, s) * xv * xv;
    }
    acc += du * dv - diag;
  }
  return 0.5 * acc;
}

inline double predict_lifted(const LiftedModel& model, SampleView x) {
  return model.kernel.family == KernelFamily::anova
             ? predict_lifted_a2(model, x)
             : predict_lifted_h(model, x);
}

// Training objective: sum of losses plus (beta/2) * sum_t ||U^t||_F^2.
inline double objective_lifted(const LiftedModel& model,
                               const SparseDataset& ds, const Loss& loss,
                               double beta) {
  double obj = 0.0;
  for (Index i = 0; i < ds.n_samples(); ++i)
    obj += loss.value(ds.target(i), predict_lifted(model, ds.row(i)));
  for (const auto& f : model.factors) obj += 0.5 * beta * f.squaredNorm();
  return obj;
}

// Per-sample state for the lifted sweeps: predictions, the partial products
// xi for the (mode, column) block currently being swept, and (full-cache
// mode only) every factor/sample inner product, inner[t](i, s) =
// <u^t_s, x_i>.
struct LiftedCaches {
  Eigen::VectorXd yhat;
  Eigen::VectorXd xi;
  std::vector<Eigen::MatrixXd> inner;
};

namespace detail {

inline void refresh_inner(const LiftedModel& model, const SparseDataset& ds,
                          LiftedCaches& caches) {
  caches.inner.assign(model.degree(),
                      Eigen::MatrixXd(ds.n_samples(), model.rank()));
  for (int t = 0; t < model.degree(); ++t)
    for (Index s = 0; s < model.rank(); ++s)
      for (Index i = 0; i < ds.n_samples(); ++i)
        caches.inner[t](i, s) = dot_sparse(model.factors[t].col(s), ds.row(i));
}

inline LiftedCaches init_lifted_caches(const LiftedModel& model,
                                       const SparseDataset& ds,
                                       bool full_cache) {
  LiftedCaches c;
  c.yhat.resize(ds.n_samples());
  for (Index i = 0; i < ds.n_samples(); ++i)
    c.yhat[i] = predict_lifted(model, ds.row(i));
  c.xi.setZero(ds.n_samples());
  if (full_cache) refresh_inner(model, ds, c);
  return c;
}

inline bool lifted_caches_consistent(const LiftedModel& model,
                                     const SparseDataset& ds,
                                     const LiftedCaches& caches, double tol) {
  for (Index i = 0; i < ds.n_samples(); ++i)
    if (!caches_close(caches.yhat[i], predict_lifted(model, ds.row(i)), tol))
      return false;
  return true;
}

// One coordinate update of factors[t](j, s) for the homogeneous kernel.
// caches.xi must hold prod_{t' != t} <u^{t'}_s, x_i>. Returns the applied
// step (0 when skipped).
inline double lifted_coordinate_step(LiftedModel& model,
                                     const SparseDataset& ds, const Loss& loss,
                                     double beta, int t, Index s, Index j,
                                     LiftedCaches& caches) {
  const double u_old = model.factors[t](j, s);
  const auto rows = ds.col_rows(j);
  const auto vals = ds.col_values(j);

  double grad = 0.0;
  double curv = 0.0;
  for (std::size_t q = 0; q < rows.size(); ++q) {
    const Index i = rows[q];
    const double dy = caches.xi[i] * vals[q];
    grad += loss.deriv(ds.target(i), caches.yhat[i]) * dy;
    curv += dy * dy;
  }
  const double eta = loss.mu() * curv + beta;
  if (eta == 0.0) return 0.0;
  grad += beta * u_old;
  const double delta = grad / eta;
  if (delta == 0.0) return 0.0;

  model.factors[t](j, s) = u_old - delta;
  for (std::size_t q = 0; q < rows.size(); ++q)
    caches.yhat[rows[q]] -= delta * caches.xi[rows[q]] * vals[q];
  if (!caches.inner.empty())
    for (std::size_t q = 0; q < rows.size(); ++q)
      caches.inner[t](rows[q], s) -= delta * vals[q];
  return delta;
}

// Same, for the degree-2 anova kernel: updates side t in {0,1}, column s,
// coordinate j, with `other` holding <v_s, x_i> for the opposite factor.
inline double lifted_a2_coordinate_step(LiftedModel& model,
                                        const SparseDataset& ds,
                                        const Loss& loss, double beta, int t,
                                        Index s, Index j,
                                        const Eigen::VectorXd& other,
                                        LiftedCaches& caches) {
  const int o = 1 - t;
  const double u_old = model.factors[t](j, s);
  const double v_j = model.factors[o](j, s);
  const auto rows = ds.col_rows(j);
  const auto vals = ds.col_values(j);

  double grad = 0.0;
  double curv = 0.0;
  for (std::size_t q = 0; q < rows.size(); ++q) {
    const Index i = rows[q];
    const double dy = 0.5 * vals[q] * (other[i] - v_j * vals[q]);
    grad += loss.deriv(ds.target(i), caches.yhat[i]) * dy;
    curv += dy * dy;
  }
  const double eta = loss.mu() * curv + beta;
  if (eta == 0.0) return 0.0;
  grad += beta * u_old;
  const double delta = grad / eta;
  if (delta == 0.0) return 0.0;

  model.factors[t](j, s) = u_old - delta;
  for (std::size_t q = 0; q < rows.size(); ++q) {
    const Index i = rows[q];
    caches.yhat[i] -= delta * 0.5 * vals[q] * (other[i] - v_j * vals[q]);
  }
  if (!caches.inner.empty())
    for (std::size_t q = 0; q < rows.size(); ++q)
      caches.inner[t](rows[q], s) -= delta * vals[q];
  return delta;
}

}  // namespace detail

// One sweep over all factor coordinates, mode-major then column-major, for
// the homogeneous kernel. Returns the sum of absolute changes.
inline double epoch_update_lifted(LiftedModel& model, const SparseDataset& ds,
                                  const Loss& loss, double beta,
                                  LiftedCaches& caches) {
  const int m = model.degree();
  const bool full = !caches.inner.empty();
  double total = 0.0;
  for (int t = 0; t < m; ++t) {
    for (Index s = 0; s < model.rank(); ++s) {
      if (full) {
        caches.xi.setOnes(ds.n_samples());
        for (int t2 = 0; t2 < m; ++t2)
          if (t2 != t)
            caches.xi.array() *= caches.inner[t2].col(s).array();
      } else {
        caches.xi.setOnes(ds.n_samples());
        for (int t2 = 0; t2 < m; ++t2) {
          if (t2 == t) continue;
          for (Index i = 0; i < ds.n_samples(); ++i)
            caches.xi[i] *= dot_sparse(model.factors[t2].col(s), ds.row(i));
        }
      }
      for (Index j = 0; j < model.n_features(); ++j)
        total += std::abs(detail::lifted_coordinate_step(model, ds, loss, beta,
                                                         t, s, j, caches));
    }
  }
  return total;
}

// Alternating sweep for the degree-2 anova kernel: all of U (mode 0), then
// all of V (mode 1), each block holding the other side fixed.
inline double epoch_update_lifted_a2(LiftedModel& model,
                                     const SparseDataset& ds, const Loss& loss,
                                     double beta, LiftedCaches& caches) {
  const bool full = !caches.inner.empty();
  double total = 0.0;
  Eigen::VectorXd other(ds.n_samples());
  for (int t = 0; t < 2; ++t) {
    const int o = 1 - t;
    for (Index s = 0; s < model.rank(); ++s) {
      if (full) {
        other = caches.inner[o].col(s);
      } else {
        for (Index i = 0; i < ds.n_samples(); ++i)
          other[i] = dot_sparse(model.factors[o].col(s), ds.row(i));
      }
      for (Index j = 0; j < model.n_features(); ++j)
        total += std::abs(detail::lifted_a2_coordinate_step(
            model, ds, loss, beta, t, s, j, other, caches));
    }
  }
  return total;
}

// Trains a lifted model by block coordinate descent. Kernel is either
// homogeneous of degree >= 2 or anova of degree exactly 2; factors start
// N(0, init_std^2).
inline LiftedModel train_lifted(const SparseDataset& ds,
                                const TrainConfig& config, const Loss& loss,
                                KernelFamily family,
                                const EpochCallback& on_epoch = nullptr) {
  if (config.rank < 1) throw ConfigError("rank must be >= 1");
  if (config.beta < 0.0) throw ConfigError("beta must be >= 0");
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (config.tol < 0.0) throw ConfigError("tol must be >= 0");
  if (config.init_std < 0.0) throw ConfigError("init_std must be >= 0");
  loss.check_labels(ds.targets());

  LiftedModel model;
  model.kernel = KernelKind{family, config.degree};
  model.factors.assign(config.degree,
                       Eigen::MatrixXd(ds.n_features(), config.rank));
  detail::validate_lifted(model);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, config.init_std);
  for (auto& f : model.factors)
    for (Index s = 0; s < config.rank; ++s)
      for (Index j = 0; j < ds.n_features(); ++j) f(j, s) = gauss(rng);

  if (config.epochs == 0) return model;

  const bool anova = family == KernelFamily::anova;
  LiftedCaches caches =
      detail::init_lifted_caches(model, ds, config.full_cache);
  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    const double delta =
        anova ? epoch_update_lifted_a2(model, ds, loss, config.beta, caches)
              : epoch_update_lifted(model, ds, loss, config.beta, caches);

    if (config.cache_refresh_epochs > 0 &&
        epoch % config.cache_refresh_epochs == 0)
      caches = detail::init_lifted_caches(model, ds, config.full_cache);
#ifndef NDEBUG
    if (!detail::lifted_caches_consistent(model, ds, caches, 1e-8))
      throw Error("lifted solver caches drifted from recomputed values");
#endif

    if (on_epoch)
      on_epoch(epoch, objective_lifted(model, ds, loss, config.beta), delta);
    if (delta <= config.tol) break;
  }
  return model;
}

// Converts a degree-2 lifted model to the direct form: eigendecompose
// S = (U V^T + V U^T) / 2, keep eigenpairs with |eigenvalue| above 1e-10
// relative to the largest magnitude, return them as (lambda, P). Predictions
// are preserved and the output has at most 2r bases. Works for both kernels
// (the anova variant scores S with the strictly-upper contraction, which the
// eigenexpansion reproduces term by term).
inline DirectModel lifted_to_direct(const LiftedModel& model) {
  detail::validate_lifted(model);
  if (model.degree() != 2)
    throw ConfigError("lifted_to_direct requires a degree-2 model");
  const Eigen::MatrixXd& u = model.factors[0];
  const Eigen::MatrixXd& v = model.factors[1];
  Eigen::MatrixXd s = 0.5 * (u * v.transpose() + v * u.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success)
    throw Error("lifted_to_direct: eigendecomposition failed");
  const Eigen::VectorXd& evals = es.eigenvalues();
  const double cutoff =
      evals.size() ? 1e-10 * evals.cwiseAbs().maxCoeff() : 0.0;

  std::vector<Index> keep;
  for (Index t = 0; t < evals.size(); ++t)
    if (std::abs(evals[t]) > cutoff) keep.push_back(t);

  DirectModel out;
  out.kernel = KernelKind{model.kernel.family, 2};
  out.lambda.resize(static_cast<Index>(keep.size()));
  out.P.resize(model.n_features(), static_cast<Index>(keep.size()));
  for (std::size_t q = 0; q < keep.size(); ++q) {
    out.lambda[static_cast<Index>(q)] = evals[keep[q]];
    out.P.col(static_cast<Index>(q)) = es.eigenvectors().col(keep[q]);
  }
  return out;
}

}  // namespace polyfm
