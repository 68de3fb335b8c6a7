#include "eiqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "eiqa/errors.hpp"

namespace eiqa {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InvalidArgument("score vectors differ in length: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.size() < 2) throw InvalidArgument("correlation needs at least 2 scores");
}

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Sum over tie groups of t(t-1)/2 in an already sorted sequence.
std::uint64_t tied_pairs_sorted(std::span<const double> sorted) {
  std::uint64_t total = 0, run = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

// Merge sort counting swaps (= discordant pairs among strictly ordered keys).
std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double plcc(std::span<const double> p, std::span<const double> g) {
  check_pair(p, g);
  const double mp = mean(p), mg = mean(g);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dx = p[i] - mp, dy = g[i] - mg;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("PLCC undefined: a score vector has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of positions i+1..j
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

double srcc(std::span<const double> p, std::span<const double> g) {
  check_pair(p, g);
  const auto rp = midranks(p), rg = midranks(g);
  try {
    return plcc(rp, rg);
  } catch (const DegenerateInput&) {
    throw DegenerateInput("SRCC undefined: all values in a score vector are tied");
  }
}

double krcc(std::span<const double> p, std::span<const double> g) {
  check_pair(p, g);
  const std::size_t n = p.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p[a] < p[b] || (p[a] == p[b] && g[a] < g[b]);
  });

  // Ties in p, and joint ties in (p, g).
  std::uint64_t ties_p = 0, ties_joint = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && p[order[j]] == p[order[i]]) ++j;
    ties_p += (j - i) * (j - i - 1) / 2;
    for (std::size_t a = i; a < j;) {
      std::size_t b = a + 1;
      while (b < j && g[order[b]] == g[order[a]]) ++b;
      ties_joint += (b - a) * (b - a - 1) / 2;
      a = b;
    }
    i = j;
  }

  std::vector<double> gs(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) gs[i] = g[order[i]];
  const std::uint64_t swaps = merge_count(gs, buf, 0, n);
  const std::uint64_t ties_g = tied_pairs_sorted(gs);

  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const double denom = std::sqrt(static_cast<double>(n0 - ties_p) * static_cast<double>(n0 - ties_g));
  if (denom == 0.0) throw DegenerateInput("KRCC undefined: a score vector is entirely tied");
  // concordant - discordant = n0 - t_p - t_g + t_pg - 2 * discordant
  const double numer = static_cast<double>(n0) - static_cast<double>(ties_p) - static_cast<double>(ties_g) +
                       static_cast<double>(ties_joint) - 2.0 * static_cast<double>(swaps);
  return std::clamp(numer / denom, -1.0, 1.0);
}

EvalReport correlation_report(std::span<const double> p, std::span<const double> g) {
  return EvalReport{srcc(p, g), plcc(p, g), krcc(p, g), p.size()};
}

}  // namespace eiqa
