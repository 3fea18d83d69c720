#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "polyfm/common.hpp"

// Reference implementations that enumerate definitions directly. They are
// deliberately naive: the fast kernel paths and the solvers are tested
// against these, so nothing here may share code with them.

namespace polyfm::oracle {

// Dense order-m tensor over indices [0, dim)^m, row-major. Entry count is
// capped because everything touching it enumerates exhaustively.
class DenseTensor {
 public:
  static constexpr std::size_t kMaxEntries = 1'000'000;

  DenseTensor(int order, Index dim) : order_(order), dim_(dim) {
    if (order < 1) throw ConfigError("DenseTensor: order must be >= 1");
    if (dim < 1) throw ConfigError("DenseTensor: dim must be >= 1");
    std::size_t n = 1;
    for (int t = 0; t < order; ++t) {
      if (n > kMaxEntries / static_cast<std::size_t>(dim))
        throw BudgetError("DenseTensor: dim^order exceeds entry budget of " +
                          std::to_string(kMaxEntries));
      n *= static_cast<std::size_t>(dim);
    }
    data_.assign(n, 0.0);
  }

  int order() const { return order_; }
  Index dim() const { return dim_; }
  std::size_t size() const { return data_.size(); }

  std::size_t flat(std::span<const Index> idx) const {
    if (static_cast<int>(idx.size()) != order_)
      throw DimensionError("DenseTensor: " + std::to_string(idx.size()) +
                           " indices into an order-" + std::to_string(order_) +
                           " tensor");
    std::size_t f = 0;
    for (int t = 0; t < order_; ++t) {
      if (idx[t] < 0 || idx[t] >= dim_)
        throw DimensionError("DenseTensor: index " + std::to_string(idx[t]) +
                             " outside [0, " + std::to_string(dim_) + ")");
      f = f * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(idx[t]);
    }
    return f;
  }

  double& at(std::span<const Index> idx) { return data_[flat(idx)]; }
  double at(std::span<const Index> idx) const { return data_[flat(idx)]; }
  double& operator[](std::size_t f) { return data_[f]; }
  double operator[](std::size_t f) const { return data_[f]; }

 private:
  int order_;
  Index dim_;
  std::vector<double> data_;
};

namespace detail {

// Advances idx through [0, dim)^m in row-major order; false once exhausted.
inline bool next_tuple(std::vector<Index>& idx, Index dim) {
  for (int t = static_cast<int>(idx.size()) - 1; t >= 0; --t) {
    if (++idx[t] < dim) return true;
    idx[t] = 0;
  }
  return false;
}

// Advances a strictly increasing m-tuple over [0, dim); false once exhausted.
inline bool next_increasing_tuple(std::vector<Index>& idx, Index dim) {
  const int m = static_cast<int>(idx.size());
  for (int t = m - 1; t >= 0; --t) {
    if (++idx[t] <= dim - (m - t)) {
      for (int u = t + 1; u < m; ++u) idx[u] = idx[u - 1] + 1;
      return true;
    }
  }
  return false;
}

inline void check_combination_budget(Index d, int m) {
  double c = 1.0;
  for (int t = 0; t < m; ++t) c *= static_cast<double>(d - t) / (t + 1);
  if (c > 1e6)
    throw BudgetError("brute_anova: C(" + std::to_string(d) + "," +
                      std::to_string(m) + ") exceeds the 1e6 tuple budget");
}

inline void check_power_budget(Index d, int m) {
  double c = 1.0;
  for (int t = 0; t < m; ++t) c *= static_cast<double>(d);
  if (c > 1e6)
    throw BudgetError("dim^order " + std::to_string(d) + "^" +
                      std::to_string(m) + " exceeds the 1e6 tuple budget");
}

inline std::vector<std::vector<int>> all_permutations(int m) {
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace detail

// Sum over strictly increasing m-tuples of prod_t p_{j_t} x_{j_t}, straight
// from the definition. m = 0 gives 1 (the empty product).
inline double brute_anova(const Eigen::VectorXd& p, const Eigen::VectorXd& x,
                          int m) {
  if (m < 0) throw ConfigError("brute_anova: degree must be >= 0");
  if (p.size() != x.size())
    throw DimensionError("brute_anova: p and x sizes differ");
  if (m == 0) return 1.0;
  const Index d = p.size();
  if (m > d) return 0.0;
  detail::check_combination_budget(d, m);
  std::vector<Index> idx(m);
  std::iota(idx.begin(), idx.end(), Index{0});
  double acc = 0.0;
  do {
    double prod = 1.0;
    for (Index j : idx) prod *= p[j] * x[j];
    acc += prod;
  } while (detail::next_increasing_tuple(idx, d));
  return acc;
}

// Sum over all m-tuples (repetitions allowed) of prod_t p_{j_t} x_{j_t}.
inline double brute_homogeneous(const Eigen::VectorXd& p,
                                const Eigen::VectorXd& x, int m) {
  if (m < 0) throw ConfigError("brute_homogeneous: degree must be >= 0");
  if (p.size() != x.size())
    throw DimensionError("brute_homogeneous: p and x sizes differ");
  if (m == 0) return 1.0;
  const Index d = p.size();
  detail::check_power_budget(d, m);
  std::vector<Index> idx(m, 0);
  double acc = 0.0;
  do {
    double prod = 1.0;
    for (Index j : idx) prod *= p[j] * x[j];
    acc += prod;
  } while (detail::next_tuple(idx, d));
  return acc;
}

// Average of T over all index permutations: out[j_1..j_m] =
// (1/m!) sum_sigma T[j_sigma(1)..j_sigma(m)].
inline DenseTensor symmetrize(const DenseTensor& t) {
  DenseTensor out(t.order(), t.dim());
  const auto perms = detail::all_permutations(t.order());
  std::vector<Index> idx(t.order(), 0);
  std::vector<Index> pidx(t.order());
  do {
    double acc = 0.0;
    for (const auto& perm : perms) {
      for (int u = 0; u < t.order(); ++u) pidx[u] = idx[perm[u]];
      acc += t.at(pidx);
    }
    out.at(idx) = acc / static_cast<double>(perms.size());
  } while (detail::next_tuple(idx, t.dim()));
  return out;
}

enum class ContractMode { full, strict_upper };

// <T, x^{(x) m}> over all tuples (full) or only strictly increasing tuples
// (strict_upper).
inline double contract(const DenseTensor& t, const Eigen::VectorXd& x,
                       ContractMode mode) {
  if (x.size() != t.dim())
    throw DimensionError("contract: x size does not match tensor dim");
  const int m = t.order();
  double acc = 0.0;
  if (mode == ContractMode::full) {
    std::vector<Index> idx(m, 0);
    do {
      double prod = t.at(idx);
      for (Index j : idx) prod *= x[j];
      acc += prod;
    } while (detail::next_tuple(idx, t.dim()));
    return acc;
  }
  if (m > t.dim()) return 0.0;
  std::vector<Index> idx(m);
  std::iota(idx.begin(), idx.end(), Index{0});
  do {
    double prod = t.at(idx);
    for (Index j : idx) prod *= x[j];
    acc += prod;
  } while (detail::next_increasing_tuple(idx, t.dim()));
  return acc;
}

// T += c * p^{(x) m}, entry by entry.
inline void add_rank_one(DenseTensor& t, double c, const Eigen::VectorXd& p) {
  if (p.size() != t.dim())
    throw DimensionError("add_rank_one: p size does not match tensor dim");
  std::vector<Index> idx(t.order(), 0);
  do {
    double prod = c;
    for (Index j : idx) prod *= p[j];
    t.at(idx) += prod;
  } while (detail::next_tuple(idx, t.dim()));
}

inline DenseTensor rank_one(const Eigen::VectorXd& x, int m) {
  DenseTensor t(m, x.size());
  add_rank_one(t, 1.0, x);
  return t;
}

// Central difference (f(at+h) - f(at-h)) / (2h).
inline double finite_diff(const std::function<double(double)>& f, double at,
                          double h) {
  if (h <= 0.0) throw ConfigError("finite_diff: h must be positive");
  return (f(at + h) - f(at - h)) / (2.0 * h);
}

}  // namespace polyfm::oracle
