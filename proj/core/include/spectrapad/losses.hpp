#pragma once

#include <span>

#include "spectrapad/nn.hpp"

namespace spectrapad {

struct ClassWeights {
  double w0 = 1.0;
  double w1 = 1.0;

  double operator[](int label) const { return label == 0 ? w0 : w1; }
};

/// w_c = (N0 + N1) / (2 N_c).
ClassWeights class_weights(long long n0, long long n1);

/// Raw w_c = 1 / freq_c = (N0 + N1) / N_c; exactly twice class_weights.
ClassWeights inverse_frequency_weights(long long n0, long long n1);

struct LossConfig {
  double lambda = 0.1;
  double epsilon = 1e-6;

  void validate() const;
};

inline constexpr double kProbFloor = 1e-12;

/// -(1/M) sum_i w_{y_i} log P_i[y_i], probabilities clamped below at 1e-12.
double balanced_ce(const Mat& probs, std::span<const int> labels, const ClassWeights& weights);

/// Pull same-label pairs together (mean squared distance per label count),
/// push different-label pairs apart with -log(d^2 + eps). Averaged over rows.
double contrastive(const Mat& features, std::span<const int> labels, double epsilon);

double band_loss(const Mat& probs, std::span<const int> labels, const Mat& features, const ClassWeights& weights,
                 const LossConfig& cfg);

struct LossGrad {
  double value = 0.0;
  Mat grad;
};

/// balanced_ce evaluated from logits; grad is dL/dlogits (softmax folded in).
LossGrad balanced_ce_from_logits(const Mat& logits, std::span<const int> labels, const ClassWeights& weights);

/// contrastive and dL/dfeatures.
LossGrad contrastive_with_grad(const Mat& features, std::span<const int> labels, double epsilon);

}  // namespace spectrapad
