#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "polyfm/common.hpp"
#include "polyfm/sparse_data.hpp"

namespace polyfm {

enum class KernelFamily { homogeneous, anova };

// Kernel family plus degree m. "homogeneous" is <p,x>^m (all degree-m
// monomials, repetitions allowed); "anova" keeps only monomials over
// distinct features.
struct KernelKind {
  KernelFamily family = KernelFamily::anova;
  int degree = 2;

  static KernelKind poly(int m) { return {KernelFamily::homogeneous, m}; }
  static KernelKind anova(int m) { return {KernelFamily::anova, m}; }

  friend bool operator==(const KernelKind&, const KernelKind&) = default;
};

namespace detail {

inline double ipow(double base, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= base;
  return r;
}

}  // namespace detail

// Power sums of the products p_j * x_j over the nonzeros of x. These are the
// only statistics the degree-2/3 anova shortcuts need.
struct PowerSums {
  double d1 = 0.0, d2 = 0.0, d3 = 0.0;
};

template <typename V>
PowerSums power_sums(const V& p, SampleView x) {
  PowerSums s;
  for (Index t = 0; t < x.size(); ++t) {
    const double r = p[x.indices[t]] * x.values[t];
    s.d1 += r;
    s.d2 += r * r;
    s.d3 += r * r * r;
  }
  return s;
}

template <typename V>
double dot_sparse(const V& p, SampleView x) {
  double acc = 0.0;
  for (Index t = 0; t < x.size(); ++t) acc += p[x.indices[t]] * x.values[t];
  return acc;
}

// <p,x>^m for m >= 0.
template <typename V>
double homogeneous(const V& p, SampleView x, int m) {
  if (m < 0) throw ConfigError("homogeneous: degree must be >= 0");
  return detail::ipow(dot_sparse(p, x), m);
}

// Degree-2/3 anova kernels from power sums:
//   A^2 = (d1^2 - d2) / 2
//   A^3 = (d1^3 - 3 d2 d1 + 2 d3) / 6
template <typename V>
double anova_fast(const V& p, SampleView x, int m) {
  const PowerSums s = power_sums(p, x);
  if (m == 2) return 0.5 * (s.d1 * s.d1 - s.d2);
  if (m == 3) return (s.d1 * s.d1 * s.d1 - 3.0 * s.d2 * s.d1 + 2.0 * s.d3) / 6.0;
  throw ConfigError("anova_fast: degree must be 2 or 3, got " +
                    std::to_string(m));
}

// Anova kernel of any degree by dynamic programming over the nonzeros of x,
// one feature at a time:
//   A^t(p_{1..j}, x_{1..j}) = A^t(p_{1..j-1}, x_{1..j-1})
//                           + p_j x_j A^{t-1}(p_{1..j-1}, x_{1..j-1})
// O(m * nnz(x)); zero whenever m exceeds the number of nonzeros.
template <typename V>
double anova_recursive(const V& p, SampleView x, int m) {
  if (m < 0) throw ConfigError("anova_recursive: degree must be >= 0");
  if (m == 0) return 1.0;
  std::vector<double> a(static_cast<std::size_t>(m) + 1, 0.0);
  a[0] = 1.0;
  for (Index t = 0; t < x.size(); ++t) {
    const double r = p[x.indices[t]] * x.values[t];
    const int top = static_cast<int>(std::min<Index>(m, t + 1));
    for (int deg = top; deg >= 1; --deg) a[deg] += r * a[deg - 1];
  }
  return a[m];
}

// Per-sample values the coordinate derivative of the anova kernel needs:
// dot = <p, x> always, a2 = A^2(p, x) for degree 3.
struct PerSampleCache {
  double dot = 0.0;
  double a2 = 0.0;
};

// d A^m(p, x) / d p_j given p_j, x_j and the cached dot / a2. Derivations:
//   m=2: x_j (<p,x> - p_j x_j)
//   m=3: x_j (A^2 - p_j x_j (<p,x> - p_j x_j))
// i.e. x_j times the degree-(m-1) anova kernel with feature j removed.
inline double anova_grad_coord(double p_j, double x_j, int m,
                               const PerSampleCache& cache) {
  if (m == 2) return x_j * (cache.dot - p_j * x_j);
  if (m == 3) {
    const double a1_noj = cache.dot - p_j * x_j;
    return x_j * (cache.a2 - p_j * x_j * a1_noj);
  }
  throw ConfigError("anova_grad_coord: degree must be 2 or 3, got " +
                    std::to_string(m));
}

// Same derivative addressed by feature id; x_j = 0 (feature absent from the
// sample) gives 0.
template <typename V>
double anova_grad_coord(const V& p, SampleView x, Index j, int m,
                        const PerSampleCache& cache) {
  auto it = std::lower_bound(x.indices.begin(), x.indices.end(), j);
  if (it == x.indices.end() || *it != j) return 0.0;
  const double x_j = x.values[it - x.indices.begin()];
  return anova_grad_coord(p[j], x_j, m, cache);
}

template <typename V>
double kernel_value(KernelKind kind, const V& p, SampleView x) {
  if (kind.family == KernelFamily::homogeneous)
    return homogeneous(p, x, kind.degree);
  if (kind.degree == 2 || kind.degree == 3)
    return anova_fast(p, x, kind.degree);
  return anova_recursive(p, x, kind.degree);
}

// Both sides of the degree-m homogeneity identity K(c p, x) = c^m K(p, x).
// The left side really evaluates the kernel on the scaled vector.
template <typename V>
std::pair<double, double> homogeneity_check(KernelKind kind, const V& p,
                                            SampleView x, double c) {
  std::vector<double> scaled(p.size());
  for (Index j = 0; j < static_cast<Index>(scaled.size()); ++j)
    scaled[j] = c * p[j];
  const double lhs = kernel_value(kind, scaled, x);
  const double rhs = detail::ipow(c, kind.degree) * kernel_value(kind, p, x);
  return {lhs, rhs};
}

}  // namespace polyfm
