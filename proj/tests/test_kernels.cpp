#include <Eigen/Core>
#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "polyfm/kernels.hpp"
#include "polyfm/oracle.hpp"
#include "polyfm/verify.hpp"
#include "support.hpp"

using namespace polyfm;
using testsupport::to_sample;

namespace {

// Exactly representable fixture; kernel values worked out by hand from the
// products p_j x_j = (0.5, -0.625, -1.0, 1.5).
const Eigen::Vector4d kP(0.5, -1.25, 2.0, 0.75);
const Eigen::Vector4d kX(1.0, 0.5, -0.5, 2.0);

}  // namespace

TEST_CASE("anova kernels on the pinned fixture") {
  Sample x = to_sample(kX);
  CHECK(anova_recursive(kP, x.view(), 0) == 1.0);
  CHECK(anova_recursive(kP, x.view(), 1) == 0.375);
  CHECK(anova_fast(kP, x.view(), 2) == -1.875);
  CHECK(anova_fast(kP, x.view(), 3) == 0.03125);
  CHECK(anova_recursive(kP, x.view(), 2) == Catch::Approx(-1.875).margin(1e-15));
  CHECK(anova_recursive(kP, x.view(), 3) == Catch::Approx(0.03125).margin(1e-15));
  CHECK(anova_recursive(kP, x.view(), 4) == Catch::Approx(0.46875).margin(1e-15));
  CHECK(anova_recursive(kP, x.view(), 5) == 0.0);  // degree above nnz
}

TEST_CASE("homogeneous kernel on the pinned fixture") {
  Sample x = to_sample(kX);
  CHECK(homogeneous(kP, x.view(), 0) == 1.0);
  CHECK(homogeneous(kP, x.view(), 1) == 0.375);
  CHECK(homogeneous(kP, x.view(), 2) == 0.140625);
  CHECK(homogeneous(kP, x.view(), 3) == 0.052734375);
}

TEST_CASE("power sums on the pinned fixture") {
  Sample x = to_sample(kX);
  PowerSums s = power_sums(kP, x.view());
  CHECK(s.d1 == 0.375);
  CHECK(s.d2 == 3.890625);
  CHECK(s.d3 == 2.255859375);
}

TEST_CASE("kernels on all-ones input count monomials") {
  Eigen::VectorXd p(3), x(3);
  p << 1, 2, 3;
  x.setOnes();
  Sample s = to_sample(x);
  CHECK(anova_fast(p, s.view(), 2) == 11.0);   // 1*2 + 1*3 + 2*3
  CHECK(anova_fast(p, s.view(), 3) == 6.0);    // 1*2*3
  CHECK(homogeneous(p, s.view(), 2) == 36.0);  // (1+2+3)^2
}

TEST_CASE("empty sample") {
  Eigen::VectorXd p(4);
  p << 1, 2, 3, 4;
  Sample empty;
  CHECK(anova_recursive(p, empty.view(), 0) == 1.0);
  CHECK(anova_recursive(p, empty.view(), 2) == 0.0);
  CHECK(anova_fast(p, empty.view(), 2) == 0.0);
  CHECK(homogeneous(p, empty.view(), 3) == 0.0);
  CHECK(homogeneous(p, empty.view(), 0) == 1.0);
}

TEST_CASE("degree validation") {
  Sample x = to_sample(kX);
  CHECK_THROWS_AS(anova_fast(kP, x.view(), 4), ConfigError);
  CHECK_THROWS_AS(anova_fast(kP, x.view(), 1), ConfigError);
  CHECK_THROWS_AS(anova_recursive(kP, x.view(), -1), ConfigError);
  CHECK_THROWS_AS(homogeneous(kP, x.view(), -2), ConfigError);
}

TEST_CASE("fast and recursive anova agree with the enumeration oracle") {
  auto res = verify::check_anova_fast_vs_brute(123, 300, 8);
  INFO(res.detail);
  CHECK(res.passed);
  res = verify::check_anova_recursive_vs_brute(124, 300, 8);
  INFO(res.detail);
  CHECK(res.passed);
  res = verify::check_homogeneous_vs_brute(125, 300, 8);
  INFO(res.detail);
  CHECK(res.passed);
}

TEST_CASE("anova satisfies the one-feature expansion") {
  auto res = verify::check_anova_multilinearity(321, 300, 8);
  INFO(res.detail);
  CHECK(res.passed);
}

TEST_CASE("kernels are homogeneous of their degree") {
  auto res = verify::check_homogeneity(55, 200, 8);
  INFO(res.detail);
  CHECK(res.passed);
}

TEST_CASE("anova is affine in every single coordinate") {
  // second difference along one coordinate must vanish
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd p = testsupport::random_dense(rng, 6);
    Eigen::VectorXd x = testsupport::random_dense(rng, 6, 1.0, 0.3);
    Sample sx = to_sample(x);
    std::uniform_int_distribution<Index> pick(0, 5);
    const Index j = pick(rng);
    for (int m : {2, 3, 4}) {
      Eigen::VectorXd hi = p, lo = p;
      hi[j] += 0.7;
      lo[j] -= 0.7;
      const double second_diff = anova_recursive(hi, sx.view(), m) -
                                 2.0 * anova_recursive(p, sx.view(), m) +
                                 anova_recursive(lo, sx.view(), m);
      CHECK(std::abs(second_diff) < 1e-12);
    }
  }
}

TEST_CASE("coordinate gradients on the pinned fixture") {
  Sample x = to_sample(kX);
  PerSampleCache cache{0.375, -1.875};
  // j = 2: p_j = 2.0, x_j = -0.5
  CHECK(anova_grad_coord(2.0, -0.5, 2, cache) == -0.6875);
  CHECK(anova_grad_coord(2.0, -0.5, 3, cache) == 0.25);
  // feature-addressed overload finds x_j itself
  CHECK(anova_grad_coord(kP, x.view(), 2, 2, cache) == -0.6875);
  CHECK(anova_grad_coord(kP, x.view(), 2, 3, cache) == 0.25);
  CHECK_THROWS_AS(anova_grad_coord(2.0, -0.5, 4, cache), ConfigError);
}

TEST_CASE("coordinate gradient is zero for absent features") {
  Eigen::VectorXd p(3), x(3);
  p << 1, 2, 3;
  x << 4, 0, 5;
  Sample sx = to_sample(x);
  PerSampleCache cache{dot_sparse(p, sx.view()),
                       anova_fast(p, sx.view(), 2)};
  CHECK(anova_grad_coord(p, sx.view(), 1, 2, cache) == 0.0);
  CHECK(anova_grad_coord(p, sx.view(), 1, 3, cache) == 0.0);
}

TEST_CASE("coordinate gradients match finite differences") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 7;
    Eigen::VectorXd p = testsupport::random_dense(rng, d);
    Eigen::VectorXd x = testsupport::random_dense(rng, d, 1.0, 0.25);
    Sample sx = to_sample(x);
    std::uniform_int_distribution<Index> pick(0, d - 1);
    const Index j = pick(rng);
    for (int m : {2, 3}) {
      PerSampleCache cache{dot_sparse(p, sx.view()),
                           anova_fast(p, sx.view(), 2)};
      const double grad = anova_grad_coord(p, sx.view(), j, m, cache);
      const double fd = oracle::finite_diff(
          [&](double v) {
            Eigen::VectorXd q = p;
            q[j] = v;
            return anova_fast(q, sx.view(), m);
          },
          p[j], 1e-6);
      CHECK(grad == Catch::Approx(fd).margin(1e-8));
    }
  }
}

TEST_CASE("dummy feature identities") {
  auto res = verify::check_poly_augmentation(9, 200, 8);
  INFO(res.detail);
  CHECK(res.passed);
  res = verify::check_anova_augmentation(10, 200, 8);
  INFO(res.detail);
  CHECK(res.passed);
}

TEST_CASE("kernel_value dispatches by family and degree") {
  Sample x = to_sample(kX);
  CHECK(kernel_value(KernelKind::anova(2), kP, x.view()) == -1.875);
  CHECK(kernel_value(KernelKind::anova(4), kP, x.view()) ==
        Catch::Approx(0.46875).margin(1e-15));
  CHECK(kernel_value(KernelKind::poly(3), kP, x.view()) == 0.052734375);
}
