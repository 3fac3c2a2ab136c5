#include "spectrapad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spectrapad/error.hpp"

namespace spectrapad {

void ScoreSet::validate() const {
  auto check = [](const std::vector<double>& v) {
    for (double s : v)
      require(s >= 0.0 && s <= 1.0, ErrorKind::kParameter, "score outside [0, 1]");
  };
  check(bona);
  for (const auto& [id, v] : attack) check(v);
}

ErrorRates apcer_bpcer(std::span<const double> bona, std::span<const double> attack, double threshold) {
  require(!bona.empty() && !attack.empty(), ErrorKind::kProtocol, "error rates need bona fide and attack scores");
  std::size_t accepted = 0, rejected = 0;
  for (double s : attack) accepted += s < threshold ? 1 : 0;
  for (double s : bona) rejected += s >= threshold ? 1 : 0;
  return {static_cast<double>(accepted) / static_cast<double>(attack.size()),
          static_cast<double>(rejected) / static_cast<double>(bona.size())};
}

namespace {

const std::vector<double>& attack_list(const ScoreSet& scores, int artefact) {
  auto it = scores.attack.find(artefact);
  if (it == scores.attack.end() || it->second.empty())
    fail(ErrorKind::kProtocol, "no attack scores for artefact " + std::to_string(artefact));
  return it->second;
}

}  // namespace

ErrorRates apcer_bpcer(const ScoreSet& scores, int artefact, double threshold) {
  return apcer_bpcer(scores.bona, attack_list(scores, artefact), threshold);
}

std::vector<EerResult> threshold_sweep(std::span<const double> bona, std::span<const double> attack) {
  require(!bona.empty() && !attack.empty(), ErrorKind::kProtocol, "EER needs bona fide and attack scores");
  std::vector<double> b(bona.begin(), bona.end()), a(attack.begin(), attack.end());
  std::sort(b.begin(), b.end());
  std::sort(a.begin(), a.end());
  std::vector<double> all(b);
  all.insert(all.end(), a.begin(), a.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> candidates;
  candidates.reserve(2 * all.size() + 1);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i > 0) candidates.push_back(all[i - 1] + (all[i] - all[i - 1]) / 2.0);
    candidates.push_back(all[i]);
  }
  candidates.push_back(std::nextafter(all.back(), std::numeric_limits<double>::infinity()));

  const double nb = static_cast<double>(b.size()), na = static_cast<double>(a.size());
  std::vector<EerResult> out;
  out.reserve(candidates.size());
  for (double t : candidates) {
    const auto below_a = std::lower_bound(a.begin(), a.end(), t) - a.begin();
    const auto below_b = std::lower_bound(b.begin(), b.end(), t) - b.begin();
    EerResult r;
    r.threshold = t;
    r.apcer = static_cast<double>(below_a) / na;
    r.bpcer = (nb - static_cast<double>(below_b)) / nb;
    r.eer = (r.apcer + r.bpcer) / 2.0;
    out.push_back(r);
  }
  return out;
}

EerResult d_eer(std::span<const double> bona, std::span<const double> attack) {
  const auto sweep = threshold_sweep(bona, attack);
  EerResult best = sweep.front();
  double best_gap = std::abs(best.apcer - best.bpcer);
  for (const auto& r : sweep) {
    const double gap = std::abs(r.apcer - r.bpcer);
    // Candidates arrive in ascending threshold order, so strict comparisons
    // keep the smaller threshold on a full tie.
    if (gap < best_gap || (gap == best_gap && r.eer < best.eer)) {
      best = r;
      best_gap = gap;
    }
  }
  return best;
}

EerResult d_eer(const ScoreSet& scores, int artefact) { return d_eer(scores.bona, attack_list(scores, artefact)); }

double d_eer_rocch(std::span<const double> bona, std::span<const double> attack) {
  // Operating points (apcer, bpcer); apcer grows and bpcer shrinks with t.
  const auto sweep = threshold_sweep(bona, attack);
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 1.0);
  for (const auto& r : sweep) pts.emplace_back(r.apcer, r.bpcer);
  pts.emplace_back(1.0, 0.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  // Lower convex hull (monotone chain).
  std::vector<std::pair<double, double>> hull;
  auto cross = [](const auto& o, const auto& p, const auto& q) {
    return (p.first - o.first) * (q.second - o.second) - (p.second - o.second) * (q.first - o.first);
  };
  for (const auto& p : pts) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) <= 0.0) hull.pop_back();
    hull.push_back(p);
  }
  for (std::size_t i = 0; i + 1 < hull.size(); ++i) {
    const auto [x0, y0] = hull[i];
    const auto [x1, y1] = hull[i + 1];
    if ((x0 - y0) <= 0.0 && (x1 - y1) >= 0.0) {
      const double denom = (x1 - x0) - (y1 - y0);
      if (denom == 0.0) return x0;
      const double s = (y0 - x0) / denom;
      return x0 + s * (x1 - x0);
    }
  }
  return 0.5;
}

MeanSd mean_sd(std::span<const double> values) {
  require(!values.empty(), ErrorKind::kProtocol, "aggregate of an empty list");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  MeanSd out;
  out.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

std::string to_string(ThresholdMode mode) { return mode == ThresholdMode::kFixed ? "fixed" : "dev"; }

ThresholdMode parse_threshold_mode(const std::string& text) {
  if (text == "fixed" || text == "fixed_0.5") return ThresholdMode::kFixed;
  if (text == "dev" || text == "dev_calibrated") return ThresholdMode::kDev;
  fail(ErrorKind::kConfig, "unknown threshold mode '" + text + "' (expected fixed or dev)");
}

ArtefactMetrics artefact_metrics(const ScoreSet& scores, int artefact, double threshold) {
  const auto& attack = attack_list(scores, artefact);
  const ErrorRates r = apcer_bpcer(scores.bona, attack, threshold);
  ArtefactMetrics m;
  m.artefact = artefact;
  m.threshold = threshold;
  m.apcer = r.apcer;
  m.bpcer = r.bpcer;
  m.hter = r.hter();
  m.d_eer = d_eer(scores.bona, attack).eer;
  m.n_bona = scores.bona.size();
  m.n_attack = attack.size();
  return m;
}

Aggregate aggregate(std::span<const ArtefactMetrics> rows) {
  require(!rows.empty(), ErrorKind::kProtocol, "aggregate of an empty report");
  std::vector<double> a, b, h, e;
  for (const auto& r : rows) {
    a.push_back(r.apcer);
    b.push_back(r.bpcer);
    h.push_back(r.hter);
    e.push_back(r.d_eer);
  }
  return {mean_sd(a), mean_sd(b), mean_sd(h), mean_sd(e)};
}

EvalReport make_report(const ScoreSet& scores, int train_artefact, std::span<const int> test_artefacts,
                       ThresholdMode mode, double threshold) {
  EvalReport rep;
  rep.train_artefact = train_artefact;
  rep.mode = mode;
  rep.threshold_used = threshold;
  for (int a : test_artefacts) rep.per_artefact.push_back(artefact_metrics(scores, a, threshold));
  rep.aggregate = aggregate(rep.per_artefact);
  return rep;
}

}  // namespace spectrapad
