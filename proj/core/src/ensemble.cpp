#include "spectrapad/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "spectrapad/error.hpp"

namespace spectrapad {

namespace {

// Sum in ascending order so that the result does not depend on which band
// carried which term.
double ordered_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

}  // namespace

BandSet EnsembleWeights::present() const {
  BandSet out;
  for (SpectralBand b : kAllBands)
    if (acc[band_index(b)].has_value()) out.insert(b);
  return out;
}

double band_accuracy(std::span<const int> preds, std::span<const int> labels) {
  require(!preds.empty(), ErrorKind::kProtocol, "band accuracy on an empty development set");
  require(preds.size() == labels.size(), ErrorKind::kDimension, "prediction and label counts differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

EnsembleWeights band_weights(const PerBand<std::optional<double>>& accs) {
  EnsembleWeights out;
  out.acc = accs;
  std::vector<double> present;
  for (const auto& a : accs)
    if (a) {
      require(*a >= 0.0 && *a <= 1.0, ErrorKind::kParameter, "band accuracy outside [0, 1]");
      present.push_back(*a);
    }
  if (present.empty()) return out;
  const double total = ordered_sum(present);
  for (std::size_t k = 0; k < kNumBands; ++k) {
    if (!accs[k]) continue;
    out.w[k] = total > 0.0 ? *accs[k] / total : 1.0 / static_cast<double>(present.size());
  }
  return out;
}

FusedDecision fuse(const BandProbs& probs, const EnsembleWeights& weights, BandSet mask) {
  BandSet effective;
  for (SpectralBand b : kAllBands)
    if (mask.contains(b) && probs[band_index(b)].has_value()) effective.insert(b);
  if (effective.empty()) fail(ErrorKind::kFusion, "no band of the mask has a probability for this sample");

  std::vector<double> ws;
  for (SpectralBand b : effective.bands()) ws.push_back(weights.w[band_index(b)]);
  const double total = ordered_sum(ws);

  FusedDecision out;
  for (SpectralBand b : effective.bands()) {
    const std::size_t k = band_index(b);
    out.alpha[k] = total > 0.0 ? weights.w[k] / total : 1.0 / static_cast<double>(effective.size());
    if (out.alpha[k] > 0.0) out.bands_used.insert(b);
  }

  for (int c = 0; c < 2; ++c) {
    std::vector<double> terms;
    double lo = 1.0, hi = 0.0;
    for (SpectralBand b : out.bands_used.bands()) {
      const std::size_t k = band_index(b);
      const double p = (*probs[k])[static_cast<std::size_t>(c)];
      terms.push_back(out.alpha[k] * p);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    // Rounding must not push the fused value outside the per-band range.
    out.p_ens[static_cast<std::size_t>(c)] = std::clamp(ordered_sum(std::move(terms)), lo, hi);
  }
  out.y_hat = decide(out.p_ens);
  return out;
}

int decide(const Prob2& p_ens, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, ErrorKind::kParameter, "decision threshold must lie in (0, 1)");
  return p_ens[1] >= threshold ? 1 : 0;
}

}  // namespace spectrapad
