#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace eiqa {

struct EvalReport {
  double srcc = 0.0;
  double plcc = 0.0;
  double krcc = 0.0;
  std::size_t n = 0;
};

// All correlations require equal lengths, n >= 2, and throw DegenerateInput
// when the statistic is undefined. No smoothing, no logistic remapping.
double plcc(std::span<const double> predicted, std::span<const double> ground_truth);
double srcc(std::span<const double> predicted, std::span<const double> ground_truth);
// Kendall tau-b, O(n log n).
double krcc(std::span<const double> predicted, std::span<const double> ground_truth);

EvalReport correlation_report(std::span<const double> predicted, std::span<const double> ground_truth);

// 1-based fractional ranks; ties share the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

// Performance decrease from the standard protocol to unseen algorithms.
constexpr double drop(double standard, double unseen) noexcept { return standard - unseen; }

}  // namespace eiqa
