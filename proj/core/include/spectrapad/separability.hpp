#pragma once

#include <span>
#include <string>
#include <vector>

#include "spectrapad/nn.hpp"

namespace spectrapad {

enum class FbAggregation { kSum, kMean };

inline constexpr double kVarianceFloor = 1e-12;

/// Univariate Fisher-Bhattacharyya distance per feature dimension,
/// aggregated by sum (default) or mean. Unbiased per-class variances.
double fb_distance(const Mat& class0, const Mat& class1, FbAggregation agg = FbAggregation::kSum);

/// Median pairwise Euclidean distance (i < j) with zero distances dropped.
double median_heuristic(const Mat& pooled);

/// exp(-|x - y|^2 / (2 bandwidth^2))
double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Eigen::Ref<const Eigen::RowVectorXd>& y,
                  double bandwidth);

/// Unbiased MMD^2 with the RBF kernel. With equal class sizes the cross term
/// skips paired indices (i == j) so identical samples give exactly zero;
/// otherwise it averages over all cross pairs.
double mmd2_unbiased(const Mat& class0, const Mat& class1, double bandwidth);

/// Average ranks (1-based), ties share their mean rank.
std::vector<double> average_ranks(std::span<const double> v);

struct SpearmanResult {
  double rho = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double p = 1.0;
  bool exact_p = false;
};

double spearman_rho(std::span<const double> xs, std::span<const double> ys);

/// rho, jackknife 95% CI and a two-sided p-value (exact permutation for K <= 8,
/// Student-t approximation above).
SpearmanResult spearman_jackknife(std::span<const double> xs, std::span<const double> ys);

struct ArtefactSeparability {
  int artefact = 0;
  double d_fb = 0.0;
  double mmd2 = 0.0;
  double eer = 0.0;
  double hter = 0.0;
};

struct CorrelationRow {
  std::string feature_metric;
  std::string error_metric;
  SpearmanResult result;
};

/// D_FB and MMD^2 each against EER and HTER, in that order.
std::vector<CorrelationRow> correlate_metrics(std::span<const ArtefactSeparability> rows);

}  // namespace spectrapad
