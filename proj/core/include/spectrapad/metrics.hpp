#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace spectrapad {

/// Fused p_attack scores; bona fide and one list per attack artefact.
struct ScoreSet {
  std::vector<double> bona;
  std::map<int, std::vector<double>> attack;

  void validate() const;
};

struct ErrorRates {
  double apcer = 0.0;
  double bpcer = 0.0;
  double hter() const { return (apcer + bpcer) / 2.0; }
};

/// APCER: attack scores below the threshold. BPCER: bona fide scores at or
/// above it. Same rule as decide().
ErrorRates apcer_bpcer(std::span<const double> bona, std::span<const double> attack, double threshold);
ErrorRates apcer_bpcer(const ScoreSet& scores, int artefact, double threshold);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
};

/// Discrete sweep over every distinct score, the midpoints between
/// consecutive distinct scores and one threshold above the maximum. Picks
/// the smallest |APCER - BPCER|, then the smallest mean, then the smallest
/// threshold.
EerResult d_eer(std::span<const double> bona, std::span<const double> attack);
EerResult d_eer(const ScoreSet& scores, int artefact);

/// EER read off the convex hull of the ROC (interpolated operating points).
double d_eer_rocch(std::span<const double> bona, std::span<const double> attack);

/// (threshold, apcer, bpcer) at every sweep candidate, ascending threshold.
std::vector<EerResult> threshold_sweep(std::span<const double> bona, std::span<const double> attack);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

/// Arithmetic mean and sample (n-1) standard deviation; sd = 0 for n = 1.
MeanSd mean_sd(std::span<const double> values);

enum class ThresholdMode { kFixed, kDev };
std::string to_string(ThresholdMode mode);
ThresholdMode parse_threshold_mode(const std::string& text);

struct ArtefactMetrics {
  int artefact = 0;
  double threshold = 0.5;
  double apcer = 0.0;
  double bpcer = 0.0;
  double hter = 0.0;
  double d_eer = 0.0;
  std::size_t n_bona = 0;
  std::size_t n_attack = 0;
};

ArtefactMetrics artefact_metrics(const ScoreSet& scores, int artefact, double threshold);

struct Aggregate {
  MeanSd apcer, bpcer, hter, d_eer;
};

Aggregate aggregate(std::span<const ArtefactMetrics> rows);

struct EvalReport {
  int train_artefact = 0;
  ThresholdMode mode = ThresholdMode::kFixed;
  double threshold_used = 0.5;
  std::vector<ArtefactMetrics> per_artefact;
  Aggregate aggregate;
};

EvalReport make_report(const ScoreSet& scores, int train_artefact, std::span<const int> test_artefacts,
                       ThresholdMode mode, double threshold);

}  // namespace spectrapad
