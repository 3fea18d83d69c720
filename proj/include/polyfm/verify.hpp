#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "polyfm/kernels.hpp"
#include "polyfm/lifted.hpp"
#include "polyfm/oracle.hpp"
#include "polyfm/sparse_data.hpp"

// Randomized identity checks pitting the fast kernel paths and the model
// transforms against the enumeration oracles. cmd_verify runs all of them;
// the acceptance tests run selected ones with their own budgets.

namespace polyfm::verify {

struct PropertyResult {
  std::string name;
  bool passed = true;
  Index trials = 0;
  std::string detail;  // first counterexample, empty when passed
};

struct Property {
  std::string name;
  // seed, trials, max_dim -> result
  std::function<PropertyResult(std::uint64_t, Index, Index)> run;
};

namespace detail {

// |a - b| within tol relative to the larger magnitude, with an absolute
// floor of tol so near-cancelled values do not produce spurious failures.
inline bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline std::string mismatch(double got, double want) {
  return "got " + format_double(got) + ", want " + format_double(want);
}

// Dense vector -> sample with exact zeros dropped.
inline Sample to_sample(const Eigen::VectorXd& x) {
  Sample s;
  for (Index j = 0; j < x.size(); ++j) {
    if (x[j] == 0.0) continue;
    s.indices.push_back(j);
    s.values.push_back(x[j]);
  }
  return s;
}

inline Eigen::VectorXd random_vec(std::mt19937_64& rng, Index d,
                                  double zero_prob = 0.0) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Index j = 0; j < d; ++j)
    v[j] = coin(rng) < zero_prob ? 0.0 : unif(rng);
  return v;
}

template <typename Body>
PropertyResult run_trials(const std::string& name, std::uint64_t seed,
                          Index trials, const Body& body) {
  PropertyResult res;
  res.name = name;
  std::mt19937_64 rng(seed);
  for (Index t = 0; t < trials; ++t) {
    std::string fail = body(rng);
    ++res.trials;
    if (!fail.empty()) {
      res.passed = false;
      res.detail = "trial " + std::to_string(t) + ": " + fail;
      break;
    }
  }
  return res;
}

}  // namespace detail

// A^2/A^3 shortcut vs tuple enumeration.
inline PropertyResult check_anova_fast_vs_brute(std::uint64_t seed,
                                                Index trials, Index max_dim) {
  return detail::run_trials(
      "anova-fast-vs-brute", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(1, std::min<Index>(max_dim, 10));
        std::uniform_int_distribution<int> deg(2, 3);
        const Index d = dim(rng);
        const int m = deg(rng);
        const Eigen::VectorXd p = detail::random_vec(rng, d);
        const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
        const Sample sx = detail::to_sample(x);
        const double fast = anova_fast(p, sx.view(), m);
        const double brute = oracle::brute_anova(p, x, m);
        if (!detail::close(fast, brute, 1e-12))
          return "A^" + std::to_string(m) + " d=" + std::to_string(d) + ": " +
                 detail::mismatch(fast, brute);
        return std::string();
      });
}

// General-degree dynamic program vs tuple enumeration, degrees 0..5
// (including degrees above the nonzero count, where both sides are 0).
inline PropertyResult check_anova_recursive_vs_brute(std::uint64_t seed,
                                                     Index trials,
                                                     Index max_dim) {
  return detail::run_trials(
      "anova-recursive-vs-brute", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(1, std::min<Index>(max_dim, 10));
        std::uniform_int_distribution<int> deg(0, 5);
        const Index d = dim(rng);
        const int m = deg(rng);
        const Eigen::VectorXd p = detail::random_vec(rng, d);
        const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
        const Sample sx = detail::to_sample(x);
        const double rec = anova_recursive(p, sx.view(), m);
        const double brute = oracle::brute_anova(p, x, m);
        if (!detail::close(rec, brute, 1e-12))
          return "A^" + std::to_string(m) + " d=" + std::to_string(d) + ": " +
                 detail::mismatch(rec, brute);
        return std::string();
      });
}

inline PropertyResult check_homogeneous_vs_brute(std::uint64_t seed,
                                                 Index trials, Index max_dim) {
  return detail::run_trials(
      "homogeneous-vs-brute", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(1, std::min<Index>(max_dim, 10));
        std::uniform_int_distribution<int> deg(0, 5);
        const Index d = dim(rng);
        const int m = deg(rng);
        const Eigen::VectorXd p = detail::random_vec(rng, d);
        const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
        const Sample sx = detail::to_sample(x);
        const double fast = homogeneous(p, sx.view(), m);
        const double brute = oracle::brute_homogeneous(p, x, m);
        if (!detail::close(fast, brute, 1e-12))
          return "H^" + std::to_string(m) + " d=" + std::to_string(d) + ": " +
                 detail::mismatch(fast, brute);
        return std::string();
      });
}

// A^m(p, x) = A^m(p', x') + p_j x_j A^{m-1}(p', x') where ' drops feature j.
inline PropertyResult check_anova_multilinearity(std::uint64_t seed,
                                                 Index trials, Index max_dim) {
  return detail::run_trials(
      "anova-multilinearity", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(2, std::min<Index>(max_dim, 10));
        std::uniform_int_distribution<int> deg(1, 5);
        const Index d = dim(rng);
        const int m = deg(rng);
        std::uniform_int_distribution<Index> pick(0, d - 1);
        const Index j = pick(rng);
        const Eigen::VectorXd p = detail::random_vec(rng, d);
        const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
        Eigen::VectorXd pr(d - 1), xr(d - 1);
        Index t = 0;
        for (Index q = 0; q < d; ++q) {
          if (q == j) continue;
          pr[t] = p[q];
          xr[t] = x[q];
          ++t;
        }
        const Sample sx = detail::to_sample(x);
        const Sample sxr = detail::to_sample(xr);
        const double whole = anova_recursive(p, sx.view(), m);
        const double split = anova_recursive(pr, sxr.view(), m) +
                             p[j] * x[j] *
                                 anova_recursive(pr, sxr.view(), m - 1);
        if (!detail::close(whole, split, 1e-12))
          return "A^" + std::to_string(m) + " d=" + std::to_string(d) +
                 " j=" + std::to_string(j) + ": " +
                 detail::mismatch(whole, split);
        return std::string();
      });
}

// K(c p, x) = c^m K(p, x) for both kernels and several scalings.
inline PropertyResult check_homogeneity(std::uint64_t seed, Index trials,
                                        Index max_dim) {
  return detail::run_trials(
      "kernel-homogeneity", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(1, std::min<Index>(max_dim, 10));
        std::uniform_int_distribution<int> deg(1, 4);
        const Index d = dim(rng);
        const int m = deg(rng);
        const Eigen::VectorXd p = detail::random_vec(rng, d);
        const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
        const Sample sx = detail::to_sample(x);
        for (double c : {-2.0, -1.0, 0.5, 3.0}) {
          for (KernelKind kind : {KernelKind::poly(m), KernelKind::anova(m)}) {
            const auto [lhs, rhs] = homogeneity_check(kind, p, sx.view(), c);
            if (!detail::close(lhs, rhs, 1e-12))
              return std::string(kind.family == KernelFamily::anova ? "A^"
                                                                    : "H^") +
                     std::to_string(m) + " c=" + format_double(c) + ": " +
                     detail::mismatch(lhs, rhs);
          }
        }
        return std::string();
      });
}

// <sym(M), x^{(x) m}> = <M, x^{(x) m}>.
inline PropertyResult check_symmetrization_contraction(std::uint64_t seed,
                                                       Index trials,
                                                       Index max_dim) {
  return detail::run_trials(
      "symmetrization-contraction", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(1, std::min<Index>(max_dim, 4));
        std::uniform_int_distribution<int> deg(2, 4);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        const Index d = dim(rng);
        const int m = deg(rng);
        oracle::DenseTensor tensor(m, d);
        for (std::size_t f = 0; f < tensor.size(); ++f) tensor[f] = unif(rng);
        const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
        const oracle::DenseTensor sym = oracle::symmetrize(tensor);
        const double lhs = oracle::contract(sym, x, oracle::ContractMode::full);
        const double rhs =
            oracle::contract(tensor, x, oracle::ContractMode::full);
        if (!detail::close(lhs, rhs, 1e-10))
          return "m=" + std::to_string(m) + " d=" + std::to_string(d) + ": " +
                 detail::mismatch(lhs, rhs);
        // symmetrize must also be a projection
        const oracle::DenseTensor twice = oracle::symmetrize(sym);
        for (std::size_t f = 0; f < sym.size(); ++f)
          if (!detail::close(twice[f], sym[f], 1e-12))
            return std::string("symmetrize is not idempotent at entry ") +
                   std::to_string(f);
        return std::string();
      });
}

// W = sum_s lambda_s p_s^{(x) m} contracted fully gives sum_s lambda_s H^m,
// contracted over strictly increasing tuples gives sum_s lambda_s A^m.
inline PropertyResult check_tensor_expansion(std::uint64_t seed, Index trials,
                                             Index max_dim) {
  return detail::run_trials(
      "tensor-kernel-expansion", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(1, std::min<Index>(max_dim, 5));
        std::uniform_int_distribution<int> deg(1, 4);
        std::uniform_int_distribution<Index> ks(1, 3);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        const Index d = dim(rng);
        const int m = deg(rng);
        const Index k = ks(rng);
        oracle::DenseTensor w(m, d);
        std::vector<Eigen::VectorXd> ps;
        std::vector<double> lams;
        for (Index s = 0; s < k; ++s) {
          ps.push_back(detail::random_vec(rng, d));
          lams.push_back(unif(rng));
          oracle::add_rank_one(w, lams.back(), ps.back());
        }
        const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
        const Sample sx = detail::to_sample(x);
        double want_h = 0.0, want_a = 0.0;
        for (Index s = 0; s < k; ++s) {
          want_h += lams[s] * homogeneous(ps[s], sx.view(), m);
          want_a += lams[s] * anova_recursive(ps[s], sx.view(), m);
        }
        const double got_h =
            oracle::contract(w, x, oracle::ContractMode::full);
        const double got_a =
            oracle::contract(w, x, oracle::ContractMode::strict_upper);
        if (!detail::close(got_h, want_h, 1e-10))
          return "full contraction m=" + std::to_string(m) + ": " +
                 detail::mismatch(got_h, want_h);
        if (!detail::close(got_a, want_a, 1e-10))
          return "strict contraction m=" + std::to_string(m) + ": " +
                 detail::mismatch(got_a, want_a);
        return std::string();
      });
}

// One all-ones dummy feature with weight gamma turns H^m into the
// inhomogeneous polynomial (gamma + <p,x>)^m.
inline PropertyResult check_poly_augmentation(std::uint64_t seed, Index trials,
                                              Index max_dim) {
  return detail::run_trials(
      "poly-augmentation", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(1, std::min<Index>(max_dim, 10));
        std::uniform_int_distribution<int> deg(1, 5);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        const Index d = dim(rng);
        const int m = deg(rng);
        const Eigen::VectorXd p = detail::random_vec(rng, d);
        const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
        const double gamma = unif(rng);
        Eigen::VectorXd pa(d + 1), xa(d + 1);
        pa << gamma, p;
        xa << 1.0, x;
        const Sample sxa = detail::to_sample(xa);
        const Sample sx = detail::to_sample(x);
        const double lhs = homogeneous(pa, sxa.view(), m);
        const double rhs =
            polyfm::detail::ipow(gamma + dot_sparse(p, sx.view()), m);
        if (!detail::close(lhs, rhs, 1e-12))
          return "m=" + std::to_string(m) + ": " + detail::mismatch(lhs, rhs);
        return std::string();
      });
}

// One dummy: A^m over the augmented pair equals A^m + gamma A^{m-1}.
// With m-1 dummies the kernel telescopes down to A^1, weighted by elementary
// symmetric polynomials of the dummy weights.
inline PropertyResult check_anova_augmentation(std::uint64_t seed, Index trials,
                                               Index max_dim) {
  return detail::run_trials(
      "anova-augmentation", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(1, std::min<Index>(max_dim, 10));
        std::uniform_int_distribution<int> deg(2, 5);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        const Index d = dim(rng);
        const int m = deg(rng);
        const Eigen::VectorXd p = detail::random_vec(rng, d);
        const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
        const Sample sx = detail::to_sample(x);
        const double gamma = unif(rng);

        Eigen::VectorXd pa(d + 1), xa(d + 1);
        pa << gamma, p;
        xa << 1.0, x;
        const Sample sxa = detail::to_sample(xa);
        const double lhs = anova_recursive(pa, sxa.view(), m);
        const double rhs = anova_recursive(p, sx.view(), m) +
                           gamma * anova_recursive(p, sx.view(), m - 1);
        if (!detail::close(lhs, rhs, 1e-12))
          return "one dummy, m=" + std::to_string(m) + ": " +
                 detail::mismatch(lhs, rhs);

        // m-1 dummies with independent weights
        Eigen::VectorXd gammas(m - 1);
        for (int t = 0; t < m - 1; ++t) gammas[t] = unif(rng);
        Eigen::VectorXd pm(d + m - 1), xm(d + m - 1);
        pm << gammas, p;
        xm << Eigen::VectorXd::Ones(m - 1), x;
        const Sample sxm = detail::to_sample(xm);
        const double chained = anova_recursive(pm, sxm.view(), m);
        // elementary symmetric polynomials e_0..e_{m-1} of the weights
        std::vector<double> e(m, 0.0);
        e[0] = 1.0;
        for (int t = 0; t < m - 1; ++t)
          for (int q = std::min(t + 1, m - 1); q >= 1; --q)
            e[q] += gammas[t] * e[q - 1];
        double expanded = 0.0;
        for (int deg_keep = 1; deg_keep <= m; ++deg_keep)
          expanded +=
              e[m - deg_keep] * anova_recursive(p, sx.view(), deg_keep);
        if (!detail::close(chained, expanded, 1e-12))
          return "m-1 dummies, m=" + std::to_string(m) + ": " +
                 detail::mismatch(chained, expanded);
        return std::string();
      });
}

// Eigendecomposition round trip: converting a random degree-2 lifted model
// preserves predictions for both kernels and needs at most 2r bases.
inline PropertyResult check_lifted_conversion(std::uint64_t seed, Index trials,
                                              Index max_dim) {
  return detail::run_trials(
      "lifted-conversion", seed, trials, [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<Index> dim(2, std::min<Index>(max_dim, 20));
        std::uniform_int_distribution<Index> ranks(1, 5);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        const Index d = dim(rng);
        const Index r = ranks(rng);
        for (KernelFamily family :
             {KernelFamily::homogeneous, KernelFamily::anova}) {
          LiftedModel lifted;
          lifted.kernel = KernelKind{family, 2};
          lifted.factors.assign(2, Eigen::MatrixXd(d, r));
          for (auto& f : lifted.factors)
            for (Index j = 0; j < d; ++j)
              for (Index s = 0; s < r; ++s) f(j, s) = unif(rng);
          const DirectModel direct = lifted_to_direct(lifted);
          if (direct.num_bases() > 2 * r)
            return std::string("conversion produced ") +
                   std::to_string(direct.num_bases()) + " bases from rank " +
                   std::to_string(r);
          for (int probe = 0; probe < 5; ++probe) {
            const Eigen::VectorXd x = detail::random_vec(rng, d, 0.3);
            const Sample sx = detail::to_sample(x);
            const double want = predict_lifted(lifted, sx.view());
            const double got = predict_direct(direct, sx.view());
            if (!detail::close(got, want, 1e-8))
              return std::string(family == KernelFamily::anova ? "anova"
                                                               : "poly") +
                     " d=" + std::to_string(d) + ": " +
                     detail::mismatch(got, want);
          }
        }
        return std::string();
      });
}

inline std::vector<Property> properties() {
  return {
      {"anova-fast-vs-brute", check_anova_fast_vs_brute},
      {"anova-recursive-vs-brute", check_anova_recursive_vs_brute},
      {"homogeneous-vs-brute", check_homogeneous_vs_brute},
      {"anova-multilinearity", check_anova_multilinearity},
      {"kernel-homogeneity", check_homogeneity},
      {"symmetrization-contraction", check_symmetrization_contraction},
      {"tensor-kernel-expansion", check_tensor_expansion},
      {"poly-augmentation", check_poly_augmentation},
      {"anova-augmentation", check_anova_augmentation},
      {"lifted-conversion", check_lifted_conversion},
  };
}

inline std::vector<PropertyResult> run_all(std::uint64_t seed, Index trials,
                                           Index max_dim) {
  std::vector<PropertyResult> results;
  for (const auto& prop : properties())
    results.push_back(prop.run(seed, trials, max_dim));
  return results;
}

}  // namespace polyfm::verify
