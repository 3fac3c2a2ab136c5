#include "spectrapad/separability.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "spectrapad/error.hpp"

namespace spectrapad {

double fb_distance(const Mat& class0, const Mat& class1, FbAggregation agg) {
  require(class0.rows() >= 2 && class1.rows() >= 2, ErrorKind::kParameter,
          "Fisher-Bhattacharyya distance needs at least two samples per class");
  require(class0.cols() == class1.cols() && class0.cols() >= 1, ErrorKind::kDimension,
          "feature widths differ between classes");
  const Eigen::Index d = class0.cols();
  auto moments = [](const Mat& m, Eigen::Index j, double& mean, double& var) {
    mean = m.col(j).mean();
    var = (m.col(j).array() - mean).square().sum() / static_cast<double>(m.rows() - 1);
    var = std::max(var, kVarianceFloor);
  };
  double total = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    double m0, v0, m1, v1;
    moments(class0, j, m0, v0);
    moments(class1, j, m1, v1);
    const double avg = (v0 + v1) / 2.0;
    total += 0.125 * (m0 - m1) * (m0 - m1) / avg + 0.5 * std::log(avg / std::sqrt(v0 * v1));
  }
  return agg == FbAggregation::kSum ? total : total / static_cast<double>(d);
}

double median_heuristic(const Mat& pooled) {
  require(pooled.rows() >= 2, ErrorKind::kParameter, "median heuristic needs at least two points");
  std::vector<double> dist;
  const Eigen::Index n = pooled.rows();
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dd = (pooled.row(i) - pooled.row(j)).norm();
      if (dd > 0.0) dist.push_back(dd);
    }
  require(!dist.empty(), ErrorKind::kDegenerateStats, "degenerate bandwidth: all points are identical");
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  const double upper = dist[mid];
  if (dist.size() % 2 == 1) return upper;
  const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Eigen::Ref<const Eigen::RowVectorXd>& y,
                  double bandwidth) {
  return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

namespace {

double within_sum(const Mat& m, double bw) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.rows(); ++j)
      if (i != j) s += rbf_kernel(m.row(i), m.row(j), bw);
  return s;
}

}  // namespace

double mmd2_unbiased(const Mat& class0, const Mat& class1, double bandwidth) {
  require(bandwidth > 0.0, ErrorKind::kParameter, "MMD bandwidth must be positive");
  require(class0.rows() >= 2 && class1.rows() >= 2, ErrorKind::kParameter,
          "MMD needs at least two samples per class");
  require(class0.cols() == class1.cols(), ErrorKind::kDimension, "feature widths differ between classes");
  const double n0 = static_cast<double>(class0.rows()), n1 = static_cast<double>(class1.rows());
  const bool paired = class0.rows() == class1.rows();
  double cross = 0.0;
  for (Eigen::Index i = 0; i < class0.rows(); ++i)
    for (Eigen::Index j = 0; j < class1.rows(); ++j)
      if (!paired || i != j) cross += rbf_kernel(class0.row(i), class1.row(j), bandwidth);
  const double cross_norm = paired ? n0 * (n0 - 1.0) : n0 * n1;
  return within_sum(class0, bandwidth) / (n0 * (n0 - 1.0)) + within_sum(class1, bandwidth) / (n1 * (n1 - 1.0)) -
         2.0 * cross / cross_norm;
}

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) fail(ErrorKind::kUndefined, "correlation undefined for a constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

double spearman_rho(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), ErrorKind::kDimension, "Spearman inputs differ in length");
  require(xs.size() >= 2, ErrorKind::kParameter, "Spearman needs at least two points");
  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  return pearson(rx, ry);
}

SpearmanResult spearman_jackknife(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), ErrorKind::kDimension, "Spearman inputs differ in length");
  const std::size_t k = xs.size();
  require(k >= 4, ErrorKind::kParameter, "Spearman with jackknife needs at least four points");
  SpearmanResult out;
  out.rho = spearman_rho(xs, ys);

  // Leave-one-out replicates. A replicate with a constant side is skipped.
  std::vector<double> reps;
  for (std::size_t drop = 0; drop < k; ++drop) {
    std::vector<double> sx, sy;
    for (std::size_t i = 0; i < k; ++i)
      if (i != drop) {
        sx.push_back(xs[i]);
        sy.push_back(ys[i]);
      }
    try {
      reps.push_back(spearman_rho(sx, sy));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kUndefined) throw;
    }
  }
  double se = 0.0;
  if (reps.size() >= 2) {
    const double m = static_cast<double>(reps.size());
    const double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / m;
    double ss = 0.0;
    for (double r : reps) ss += (r - mean) * (r - mean);
    se = std::sqrt((m - 1.0) / m * ss);
  }
  out.ci_lo = std::clamp(out.rho - 1.96 * se, -1.0, 1.0);
  out.ci_hi = std::clamp(out.rho + 1.96 * se, -1.0, 1.0);

  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  if (k <= 8) {
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<double> py(k);
    const double observed = std::abs(out.rho);
    std::size_t hits = 0, total = 0;
    do {
      for (std::size_t i = 0; i < k; ++i) py[i] = ry[perm[i]];
      if (std::abs(pearson(rx, py)) >= observed - 1e-12) ++hits;
      ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.p = static_cast<double>(hits) / static_cast<double>(total);
    out.exact_p = true;
  } else {
    const double df = static_cast<double>(k) - 2.0;
    const double r = std::clamp(out.rho, -1.0 + 1e-15, 1.0 - 1e-15);
    const double t = r * std::sqrt(df / (1.0 - r * r));
    boost::math::students_t dist(df);
    out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return out;
}

std::vector<CorrelationRow> correlate_metrics(std::span<const ArtefactSeparability> rows) {
  require(rows.size() >= 4, ErrorKind::kParameter, "correlation table needs at least four tested artefacts");
  std::vector<double> fb, mmd, eer, hter;
  for (const auto& r : rows) {
    fb.push_back(r.d_fb);
    mmd.push_back(r.mmd2);
    eer.push_back(r.eer);
    hter.push_back(r.hter);
  }
  return {{"d_fb", "eer", spearman_jackknife(fb, eer)},
          {"d_fb", "hter", spearman_jackknife(fb, hter)},
          {"mmd2", "eer", spearman_jackknife(mmd, eer)},
          {"mmd2", "hter", spearman_jackknife(mmd, hter)}};
}

}  // namespace spectrapad
