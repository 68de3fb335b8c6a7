#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace eiqa::oracle {

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

// Rank of x = 1 + #smaller + (#equal - 1) / 2, counted directly.
inline std::vector<double> brute_midranks(std::span<const double> v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      if (x < v[i]) ++less;
      if (x == v[i]) ++equal;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = brute_midranks(a), rb = brute_midranks(b);
  return pearson(ra, rb);
}

// Enumerates all n(n-1)/2 pairs.
inline double kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double concordant = 0, discordant = 0, tie_a = 0, tie_b = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da == 0) ++tie_a;
      if (db == 0) ++tie_b;
      if (da == 0 || db == 0) continue;
      (da * db > 0 ? concordant : discordant) += 1;
    }
  const double n0 = n * (n - 1) / 2.0;
  return (concordant - discordant) / std::sqrt((n0 - tie_a) * (n0 - tie_b));
}

// Supervised contrastive loss written scalar by scalar from its definition.
inline double supcon(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels, double tau) {
  const std::size_t b = rows.size();
  auto cosine = [&](std::size_t i, std::size_t j) {
    double dot = 0, ni = 0, nj = 0;
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      dot += rows[i][k] * rows[j][k];
      ni += rows[i][k] * rows[i][k];
      nj += rows[j][k] * rows[j][k];
    }
    return dot / std::sqrt(ni * nj);
  };
  double total = 0;
  for (std::size_t i = 0; i < b; ++i) {
    double denom = 0;
    for (std::size_t k = 0; k < b; ++k)
      if (k != i) denom += std::exp(cosine(i, k) / tau);
    double sum = 0;
    int positives = 0;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i || labels[j] != labels[i]) continue;
      sum += std::log(std::exp(cosine(i, j) / tau) / denom);
      ++positives;
    }
    if (positives > 0) total += -sum / positives;
  }
  return total;
}

// Central difference of f at x[i].
inline double central_difference(const std::function<double()>& f, double& x, double step) {
  const double saved = x;
  x = saved + step;
  const double up = f();
  x = saved - step;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * step);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Values on a small grid so ties occur often.
inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, bool ties) {
  std::vector<double> v(n);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::normal_distribution<double> fine(0.0, 1.0);
  for (auto& x : v) x = ties ? static_cast<double>(coarse(rng)) : fine(rng);
  return v;
}

}  // namespace eiqa::oracle
