#include "spectrapad/losses.hpp"

#include <array>
#include <cmath>
#include <string>

#include "spectrapad/error.hpp"

namespace spectrapad {

namespace {

void check_labels(std::span<const int> labels, Eigen::Index rows) {
  require(static_cast<Eigen::Index>(labels.size()) == rows, ErrorKind::kDimension,
          "label count does not match batch size");
  for (int y : labels)
    require(y == 0 || y == 1, ErrorKind::kParameter, "label " + std::to_string(y) + " is not in {0, 1}");
}

std::array<double, 2> label_counts(std::span<const int> labels) {
  std::array<double, 2> c{0.0, 0.0};
  for (int y : labels) c[static_cast<std::size_t>(y)] += 1.0;
  return c;
}

}  // namespace

ClassWeights class_weights(long long n0, long long n1) {
  require(n0 >= 1 && n1 >= 1, ErrorKind::kProtocol, "class weights need both classes in the training split");
  const double total = static_cast<double>(n0 + n1);
  return {total / (2.0 * static_cast<double>(n0)), total / (2.0 * static_cast<double>(n1))};
}

ClassWeights inverse_frequency_weights(long long n0, long long n1) {
  require(n0 >= 1 && n1 >= 1, ErrorKind::kProtocol, "class weights need both classes in the training split");
  const double total = static_cast<double>(n0 + n1);
  return {total / static_cast<double>(n0), total / static_cast<double>(n1)};
}

void LossConfig::validate() const {
  require(lambda >= 0.0, ErrorKind::kConfig, "loss.lambda must be non-negative");
  require(epsilon > 0.0, ErrorKind::kConfig, "loss.epsilon must be positive");
}

double balanced_ce(const Mat& probs, std::span<const int> labels, const ClassWeights& weights) {
  require(probs.cols() == 2 && probs.rows() >= 1, ErrorKind::kDimension, "probabilities must be M x 2");
  check_labels(labels, probs.rows());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    require(std::abs(probs(i, 0) + probs(i, 1) - 1.0) <= 1e-6, ErrorKind::kParameter,
            "probability row does not sum to 1");
    const int y = labels[static_cast<std::size_t>(i)];
    sum -= weights[y] * std::log(std::max(probs(i, y), kProbFloor));
  }
  return sum / static_cast<double>(probs.rows());
}

double contrastive(const Mat& features, std::span<const int> labels, double epsilon) {
  return contrastive_with_grad(features, labels, epsilon).value;
}

double band_loss(const Mat& probs, std::span<const int> labels, const Mat& features, const ClassWeights& weights,
                 const LossConfig& cfg) {
  require(features.rows() == probs.rows(), ErrorKind::kDimension, "features and probabilities disagree on M");
  return balanced_ce(probs, labels, weights) + cfg.lambda * contrastive(features, labels, cfg.epsilon);
}

LossGrad balanced_ce_from_logits(const Mat& logits, std::span<const int> labels, const ClassWeights& weights) {
  require(logits.cols() == 2 && logits.rows() >= 1, ErrorKind::kDimension, "logits must be M x 2");
  check_labels(labels, logits.rows());
  const Mat probs = softmax_rows(logits);
  const double m = static_cast<double>(logits.rows());
  LossGrad out;
  out.grad = Mat::Zero(logits.rows(), 2);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const double w = weights[y];
    const double p = probs(i, y);
    out.value -= w * std::log(std::max(p, kProbFloor));
    if (p > kProbFloor) {
      out.grad.row(i) = (w / m) * probs.row(i);
      out.grad(i, y) -= w / m;
    }
  }
  out.value /= m;
  return out;
}

LossGrad contrastive_with_grad(const Mat& features, std::span<const int> labels, double epsilon) {
  const Eigen::Index m = features.rows();
  require(m >= 1, ErrorKind::kDimension, "contrastive loss needs at least one sample");
  check_labels(labels, m);
  require(features.allFinite(), ErrorKind::kNumeric, "non-finite features in contrastive loss");
  const auto counts = label_counts(labels);
  const double inv_m = 1.0 / static_cast<double>(m);
  LossGrad out;
  out.grad = Mat::Zero(m, features.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const int yi = labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      const Eigen::RowVectorXd diff = features.row(i) - features.row(j);
      const double d2 = diff.squaredNorm();
      double coef;
      if (labels[static_cast<std::size_t>(j)] == yi) {
        out.value += d2 / counts[static_cast<std::size_t>(yi)];
        coef = inv_m / counts[static_cast<std::size_t>(yi)];
      } else {
        out.value -= std::log(d2 + epsilon);
        coef = -inv_m / (d2 + epsilon);
      }
      // d(d2)/dF_i = 2 diff, d(d2)/dF_j = -2 diff
      out.grad.row(i) += 2.0 * coef * diff;
      out.grad.row(j) -= 2.0 * coef * diff;
    }
  }
  out.value *= inv_m;
  return out;
}

}  // namespace spectrapad
