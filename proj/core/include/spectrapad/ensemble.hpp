#pragma once

#include <array>
#include <optional>
#include <span>

#include "spectrapad/band.hpp"

namespace spectrapad {

using Prob2 = std::array<double, 2>;  // (bona fide, attack)

struct EnsembleWeights {
  PerBand<std::optional<double>> acc{};  // empty for bands absent from dev evaluation
  PerBand<double> w{};

  BandSet present() const;
};

struct FusedDecision {
  Prob2 p_ens{0.5, 0.5};
  int y_hat = 1;
  BandSet bands_used;
  PerBand<double> alpha{};  // renormalised weight each band received
};

using BandProbs = PerBand<std::optional<Prob2>>;

/// Fraction of predictions equal to the labels.
double band_accuracy(std::span<const int> preds, std::span<const int> labels);

/// w_k = acc_k / sum acc; uniform over present bands if every acc is zero.
EnsembleWeights band_weights(const PerBand<std::optional<double>>& accs);

/// Probability-level fusion restricted to `mask` and bands that have a
/// probability. Weights are renormalised over that set (uniform if they sum
/// to zero). Order of the bands never affects the result.
FusedDecision fuse(const BandProbs& probs, const EnsembleWeights& weights, BandSet mask);

inline constexpr double kDecisionThreshold = 0.5;

/// Attack iff p_attack >= threshold.
int decide(const Prob2& p_ens, double threshold = kDecisionThreshold);

}  // namespace spectrapad
