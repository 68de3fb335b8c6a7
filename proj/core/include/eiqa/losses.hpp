#pragma once

#include <span>
#include <vector>

#include "eiqa/nn.hpp"

namespace eiqa {

// A scalar objective and its gradient with respect to the first input.
struct LossResult {
  double value = 0.0;
  nn::Matrix grad;
};

inline constexpr double kDefaultTemperature = 0.07;
inline constexpr double kDefaultHuberDelta = 1.0;
inline constexpr double kDefaultPlccWeight = 1.0;
inline constexpr double kPlccLossEpsilon = 1e-8;

// Supervised contrastive loss over the columns of `embeddings` (d x B):
//   L = sum_i -1/|P(i)| sum_{j in P(i)} log( exp(s_ij/t) / sum_{k != i} exp(s_ik/t) )
// with s the cosine similarity and P(i) the other batch members sharing
// i's label. Anchors with an empty P(i) contribute 0. The gradient is with
// respect to the (unnormalised) embedding columns.
LossResult supcon_loss(const nn::Matrix& embeddings, std::span<const int> labels, double temperature);

// Per-anchor terms of supcon_loss (each is a mean of -log softmax >= 0).
std::vector<double> supcon_anchor_terms(const nn::Matrix& embeddings, std::span<const int> labels, double temperature);

// Mean Huber penalty of (prediction - target). Gradient is (1 x B).
LossResult huber_loss(std::span<const double> predictions, std::span<const double> targets, double delta);

// 1 - PLCC with variances smoothed by kPlccLossEpsilon; never throws on
// constant inputs.
LossResult plcc_loss(std::span<const double> predictions, std::span<const double> targets);

struct MosLossResult {
  double value = 0.0;
  double huber = 0.0;
  double plcc = 0.0;
  nn::Matrix grad;  // (1 x B)
};

MosLossResult mos_loss(std::span<const double> predictions, std::span<const double> targets, double delta,
                       double plcc_weight);

// Mean softmax cross-entropy of logits (K x B) against class labels.
LossResult cross_entropy_loss(const nn::Matrix& logits, std::span<const int> labels);

}  // namespace eiqa
