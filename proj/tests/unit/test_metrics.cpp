#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "eiqa/errors.hpp"
#include "eiqa/metrics.hpp"
#include "oracles.hpp"

using namespace eiqa;
using V = std::vector<double>;

TEST_CASE("plcc basic values") {
  CHECK(plcc(V{1, 2, 3}, V{1, 2, 3}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(plcc(V{1, 2, 3}, V{3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-15));
  // Covariance ratio by hand: centred p = (-4/3, -1/3, 5/3), centred gt = (-2.3333.., -1.4333.., 3.7666..).
  const V p{1, 2, 4}, g{2, 2.9, 8.1};
  const double mp = 7.0 / 3, mg = 13.0 / 3;
  double cov = 0, vp = 0, vg = 0;
  for (int i = 0; i < 3; ++i) {
    cov += (p[i] - mp) * (g[i] - mg);
    vp += (p[i] - mp) * (p[i] - mp);
    vg += (g[i] - mg) * (g[i] - mg);
  }
  CHECK(std::abs(plcc(p, g) - cov / std::sqrt(vp * vg)) < 1e-12);
}

TEST_CASE("plcc rejects degenerate input") {
  CHECK_THROWS_AS(plcc(V{1, 1, 1}, V{1, 2, 3}), DegenerateInput);
  CHECK_THROWS_AS(plcc(V{1, 2, 3}, V{5, 5, 5}), DegenerateInput);
  CHECK_THROWS_AS(plcc(V{1}, V{1}), InvalidArgument);
  CHECK_THROWS_AS(plcc(V{1, 2}, V{1, 2, 3}), InvalidArgument);
}

TEST_CASE("srcc basic values") {
  CHECK(srcc(V{0.1, 0.5, 2, 40}, V{1, 2, 3, 4}) == doctest::Approx(1.0));
  CHECK(srcc(V{10, 20, 30, 40}, V{40, 30, 20, 10}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(srcc(V{2, 2, 2}, V{1, 2, 3}), DegenerateInput);
}

TEST_CASE("srcc with one tie matches midrank pearson") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    V a = oracle::random_vector(rng, 8, false), b = oracle::random_vector(rng, 8, false);
    a[3] = a[6];
    CHECK(std::abs(srcc(a, b) - oracle::spearman(a, b)) < 1e-12);
  }
}

TEST_CASE("midranks") {
  CHECK(midranks(V{3, 1, 2}) == V{3, 1, 2});
  CHECK(midranks(V{5, 5, 1, 5}) == V{3, 3, 1, 3});
  CHECK(midranks(V{2, 1, 2, 1}) == V{3.5, 1.5, 3.5, 1.5});
}

TEST_CASE("krcc basic values") {
  CHECK(krcc(V{1, 2, 3, 4, 5}, V{2, 4, 6, 8, 10}) == doctest::Approx(1.0));
  // Six pairs: only (2,3) is discordant.
  CHECK(std::abs(krcc(V{1, 2, 3, 4}, V{1, 3, 2, 4}) - 4.0 / 6.0) < 1e-15);
  CHECK_THROWS_AS(krcc(V{1, 1, 1}, V{1, 2, 3}), DegenerateInput);
}

TEST_CASE("krcc agrees with scipy kendalltau") {
  CHECK(krcc(V{17, 86, 60, 77, 47, 3, 70, 87, 88, 92}, V{70, 29, 85, 61, 80, 34, 60, 31, 73, 66}) ==
        doctest::Approx(-0.06666666666666667).epsilon(1e-14));
  CHECK(krcc(V{17, 86, 60, 77, 47, 3, 70, 47, 88, 92}, V{70, 29, 85, 61, 80, 34, 60, 31, 73, 66}) ==
        doctest::Approx(0.04494665749754947).epsilon(1e-14));
}

TEST_CASE("random length-7 vectors with ties match pair enumeration") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const V a = oracle::random_vector(rng, 7, true), b = oracle::random_vector(rng, 7, true);
    const double expected = oracle::kendall_tau_b(a, b);
    if (!std::isfinite(expected)) {
      CHECK_THROWS_AS(krcc(a, b), DegenerateInput);
      continue;
    }
    CHECK(std::abs(krcc(a, b) - expected) < 1e-12);
  }
}

TEST_CASE("oracle equivalence over 200 random vectors") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(2, 12);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = static_cast<std::size_t>(len(rng));
    const bool ties = trial % 2 == 0;
    const V a = oracle::random_vector(rng, n, ties), b = oracle::random_vector(rng, n, ties);
    const double p = oracle::pearson(a, b), s = oracle::spearman(a, b), k = oracle::kendall_tau_b(a, b);
    if (!std::isfinite(p) || !std::isfinite(s) || !std::isfinite(k)) {
      CHECK_THROWS_AS(correlation_report(a, b), DegenerateInput);
      continue;
    }
    CHECK(std::abs(plcc(a, b) - p) < 1e-12);
    CHECK(std::abs(srcc(a, b) - s) < 1e-12);
    CHECK(std::abs(krcc(a, b) - k) < 1e-12);
    ++checked;
  }
  CHECK(checked > 150);
}

TEST_CASE("rank metrics are invariant under monotone transforms") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const V a = oracle::random_vector(rng, 10, trial % 2 == 0), b = oracle::random_vector(rng, 10, false);
    V e(a.size()), f(a.size()), c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      e[i] = std::exp(a[i]);
      f[i] = 3.0 * a[i] - 7.0;
      c[i] = a[i] * a[i] * a[i];
    }
    for (const V* t : {&e, &f, &c}) {
      CHECK(srcc(*t, b) == doctest::Approx(srcc(a, b)).epsilon(1e-12));
      CHECK(krcc(*t, b) == doctest::Approx(krcc(a, b)).epsilon(1e-12));
      CHECK(srcc(b, *t) == doctest::Approx(srcc(a, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("plcc affine behaviour and symmetry") {
  std::mt19937_64 rng(6);
  const V a = oracle::random_vector(rng, 12, false), b = oracle::random_vector(rng, 12, false);
  V pos(a.size()), neg(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    pos[i] = 2.5 * a[i] + 4.0;
    neg[i] = -0.5 * a[i] + 1.0;
  }
  CHECK(plcc(pos, b) == doctest::Approx(plcc(a, b)).epsilon(1e-12));
  CHECK(plcc(neg, b) == doctest::Approx(-plcc(a, b)).epsilon(1e-12));
  CHECK(plcc(a, b) == doctest::Approx(plcc(b, a)).epsilon(1e-14));
  CHECK(srcc(a, b) == doctest::Approx(srcc(b, a)).epsilon(1e-14));
  CHECK(krcc(a, b) == doctest::Approx(krcc(b, a)).epsilon(1e-14));
}

TEST_CASE("drop statistic") {
  CHECK(drop(0.8726, 0.8622) == doctest::Approx(0.0104).epsilon(1e-9));
  CHECK(drop(0.8305, 0.7616) == doctest::Approx(0.0689).epsilon(1e-9));
  CHECK(drop(0.8913, 0.8804) == doctest::Approx(0.0109).epsilon(1e-9));
  CHECK(drop(0.5, 0.5) == 0.0);
  static_assert(drop(1.0, 0.25) == 0.75);
}

TEST_CASE("correlation report carries n") {
  const auto r = correlation_report(V{1, 2, 3, 4}, V{1, 2, 4, 3});
  CHECK(r.n == 4);
  CHECK(r.srcc == doctest::Approx(0.8));
}
