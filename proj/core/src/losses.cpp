#include "eiqa/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "eiqa/errors.hpp"

namespace eiqa {

using nn::Matrix;

namespace {

void check_supcon(const Matrix& embeddings, std::span<const int> labels, double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (embeddings.cols() < 2) throw InvalidArgument("supervised contrastive loss needs a batch of at least 2");
  if (static_cast<std::size_t>(embeddings.cols()) != labels.size())
    throw InvalidArgument("label count differs from batch size");
}

void check_regression(std::span<const double> p, std::span<const double> t) {
  if (p.size() != t.size()) throw InvalidArgument("prediction and target lengths differ");
  if (p.empty()) throw InvalidArgument("empty regression batch");
}

struct SupConPass {
  double value = 0.0;
  std::vector<double> terms;
  Matrix grad_similarity;  // d L / d S, zero diagonal
};

SupConPass supcon_pass(const Matrix& unit, std::span<const int> labels, double temperature) {
  const Eigen::Index b = unit.cols();
  const Matrix sim = unit.transpose() * unit;
  SupConPass pass;
  pass.terms.assign(static_cast<std::size_t>(b), 0.0);
  pass.grad_similarity = Matrix::Zero(b, b);
  std::vector<double> softmax(static_cast<std::size_t>(b));
  for (Eigen::Index i = 0; i < b; ++i) {
    int positives = 0;
    for (Eigen::Index k = 0; k < b; ++k)
      if (k != i && labels[k] == labels[i]) ++positives;
    if (positives == 0) continue;

    double max_logit = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < b; ++k)
      if (k != i) max_logit = std::max(max_logit, sim(i, k) / temperature);
    double denom = 0.0;
    for (Eigen::Index k = 0; k < b; ++k) {
      softmax[k] = (k == i) ? 0.0 : std::exp(sim(i, k) / temperature - max_logit);
      denom += softmax[k];
    }
    const double log_denom = max_logit + std::log(denom);

    double term = 0.0;
    for (Eigen::Index k = 0; k < b; ++k) {
      if (k == i) continue;
      const bool positive = labels[k] == labels[i];
      if (positive) term += log_denom - sim(i, k) / temperature;
      pass.grad_similarity(i, k) = (softmax[k] / denom - (positive ? 1.0 / positives : 0.0)) / temperature;
    }
    term /= positives;
    pass.terms[static_cast<std::size_t>(i)] = term;
    pass.value += term;
  }
  return pass;
}

}  // namespace

LossResult supcon_loss(const Matrix& embeddings, std::span<const int> labels, double temperature) {
  check_supcon(embeddings, labels, temperature);
  const Matrix unit = nn::l2_normalize(embeddings);
  const SupConPass pass = supcon_pass(unit, labels, temperature);
  const Matrix d_unit = unit * (pass.grad_similarity + pass.grad_similarity.transpose());
  return {pass.value, nn::l2_normalize_backward(embeddings, unit, d_unit)};
}

std::vector<double> supcon_anchor_terms(const Matrix& embeddings, std::span<const int> labels, double temperature) {
  check_supcon(embeddings, labels, temperature);
  return supcon_pass(nn::l2_normalize(embeddings), labels, temperature).terms;
}

LossResult huber_loss(std::span<const double> p, std::span<const double> t, double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("huber delta must be positive");
  check_regression(p, t);
  const double n = static_cast<double>(p.size());
  LossResult out{0.0, Matrix(1, static_cast<Eigen::Index>(p.size()))};
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = p[i] - t[i];
    if (std::abs(r) <= delta) {
      out.value += 0.5 * r * r;
      out.grad(0, static_cast<Eigen::Index>(i)) = r / n;
    } else {
      out.value += delta * (std::abs(r) - 0.5 * delta);
      out.grad(0, static_cast<Eigen::Index>(i)) = delta * (r > 0 ? 1.0 : -1.0) / n;
    }
  }
  out.value /= n;
  return out;
}

LossResult plcc_loss(std::span<const double> p, std::span<const double> t) {
  check_regression(p, t);
  if (p.size() < 2) throw InvalidArgument("PLCC loss needs a batch of at least 2");
  const double n = static_cast<double>(p.size());
  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    mt += t[i];
  }
  mp /= n;
  mt /= n;
  double cov = 0.0, vp = 0.0, vt = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cov += (p[i] - mp) * (t[i] - mt);
    vp += (p[i] - mp) * (p[i] - mp);
    vt += (t[i] - mt) * (t[i] - mt);
  }
  cov /= n;
  vp /= n;
  vt /= n;
  const double sp = std::sqrt(vp + kPlccLossEpsilon), st = std::sqrt(vt + kPlccLossEpsilon);
  const double rho = cov / (sp * st);
  LossResult out{1.0 - rho, Matrix(1, static_cast<Eigen::Index>(p.size()))};
  // Centering terms cancel because the centred vectors sum to zero.
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d_rho = (t[i] - mt) / (n * sp * st) - cov * (p[i] - mp) / (n * sp * sp * sp * st);
    out.grad(0, static_cast<Eigen::Index>(i)) = -d_rho;
  }
  return out;
}

MosLossResult mos_loss(std::span<const double> p, std::span<const double> t, double delta, double plcc_weight) {
  if (plcc_weight < 0.0) throw InvalidArgument("PLCC weight must be non-negative");
  const LossResult h = huber_loss(p, t, delta);
  MosLossResult out;
  out.huber = h.value;
  out.grad = h.grad;
  if (plcc_weight > 0.0) {
    const LossResult c = plcc_loss(p, t);
    out.plcc = c.value;
    out.grad += plcc_weight * c.grad;
  } else if (p.size() >= 2) {
    out.plcc = plcc_loss(p, t).value;
  }
  out.value = out.huber + plcc_weight * out.plcc;
  return out;
}

LossResult cross_entropy_loss(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.cols()) != labels.size()) throw InvalidArgument("label count differs from batch");
  if (logits.cols() == 0) throw InvalidArgument("empty batch");
  const double n = static_cast<double>(logits.cols());
  LossResult out{0.0, Matrix(logits.rows(), logits.cols())};
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int label = labels[static_cast<std::size_t>(j)];
    if (label < 0 || label >= logits.rows()) throw InvalidArgument("class label out of range");
    const double m = logits.col(j).maxCoeff();
    const Eigen::VectorXd ex = (logits.col(j).array() - m).exp();
    const double z = ex.sum();
    out.value += std::log(z) + m - logits(label, j);
    out.grad.col(j) = ex / z / n;
    out.grad(label, j) -= 1.0 / n;
  }
  out.value /= n;
  return out;
}

}  // namespace eiqa
