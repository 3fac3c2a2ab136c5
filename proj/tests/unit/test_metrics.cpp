#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "spectrapad/ensemble.hpp"
#include "spectrapad/error.hpp"
#include "spectrapad/metrics.hpp"
#include "spectrapad/rng.hpp"

using namespace spectrapad;

namespace {

template <class F>
std::optional<ErrorKind> kind_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

struct Brute {
  double eer, apcer, bpcer;
};

// Every distinct partition of the scores is reached by thresholding at a
// distinct score or just above the largest; count each one by hand.
Brute brute_force_eer(const std::vector<double>& bona, const std::vector<double>& attack) {
  std::set<double> ts(bona.begin(), bona.end());
  ts.insert(attack.begin(), attack.end());
  std::vector<double> cand(ts.begin(), ts.end());
  cand.push_back(std::nextafter(cand.back(), 2.0));
  Brute best{0, 0, 0};
  double best_gap = 2.0;
  for (double t : cand) {
    int acc = 0, rej = 0;
    for (double s : attack)
      if (s < t) ++acc;
    for (double s : bona)
      if (s >= t) ++rej;
    const double a = static_cast<double>(acc) / static_cast<double>(attack.size());
    const double b = static_cast<double>(rej) / static_cast<double>(bona.size());
    const double gap = std::abs(a - b), mean = (a + b) / 2.0;
    if (gap < best_gap || (gap == best_gap && mean < best.eer)) {
      best = {mean, a, b};
      best_gap = gap;
    }
  }
  return best;
}

std::vector<double> random_scores(Rng& rng, std::size_t n, bool coarse) {
  std::vector<double> v(n);
  for (auto& s : v) s = coarse ? std::round(rng.uniform() * 20.0) / 20.0 : rng.uniform();
  return v;
}

}  // namespace

TEST(ApcerBpcer, Examples) {
  const std::vector<double> sep_b{0.1, 0.3, 0.49}, sep_a{0.5, 0.7, 1.0};
  const ErrorRates sep = apcer_bpcer(sep_b, sep_a, 0.5);
  EXPECT_EQ(sep.apcer, 0.0);
  EXPECT_EQ(sep.bpcer, 0.0);

  const std::vector<double> inv_b{0.6}, inv_a{0.4};
  const ErrorRates inv = apcer_bpcer(inv_b, inv_a, 0.5);
  EXPECT_EQ(inv.apcer, 1.0);
  EXPECT_EQ(inv.bpcer, 1.0);

  const std::vector<double> b{0.1, 0.2, 0.7}, a{0.3, 0.8, 0.9};
  const ErrorRates r = apcer_bpcer(b, a, 0.5);
  EXPECT_EQ(r.apcer, 1.0 / 3.0);
  EXPECT_EQ(r.bpcer, 1.0 / 3.0);
  EXPECT_EQ(r.hter(), 1.0 / 3.0);

  const std::vector<double> none;
  EXPECT_EQ(kind_of([&] { apcer_bpcer(none, a, 0.5); }), ErrorKind::kProtocol);
  EXPECT_EQ(kind_of([&] { apcer_bpcer(b, none, 0.5); }), ErrorKind::kProtocol);
}

TEST(ApcerBpcer, MatchesDecideCounts) {
  Rng rng(77);
  const auto bona = random_scores(rng, 60, true);
  const auto attack = random_scores(rng, 45, true);
  int acc = 0, rej = 0;
  for (double s : attack) acc += decide({1.0 - s, s}) == 0 ? 1 : 0;
  for (double s : bona) rej += decide({1.0 - s, s}) == 1 ? 1 : 0;
  const ErrorRates r = apcer_bpcer(bona, attack, 0.5);
  EXPECT_EQ(r.apcer, acc / 45.0);
  EXPECT_EQ(r.bpcer, rej / 60.0);
}

TEST(ApcerBpcer, ThresholdMonotonicity) {
  Rng rng(4);
  const auto bona = random_scores(rng, 30, false);
  const auto attack = random_scores(rng, 30, false);
  ErrorRates prev = apcer_bpcer(bona, attack, 0.0);
  for (double t = 0.01; t <= 1.0; t += 0.01) {
    const ErrorRates r = apcer_bpcer(bona, attack, t);
    EXPECT_GE(r.apcer, prev.apcer);
    EXPECT_LE(r.bpcer, prev.bpcer);
    prev = r;
  }
}

TEST(DEer, Examples) {
  const std::vector<double> b{0.1, 0.2}, a{0.7, 0.9};
  EXPECT_EQ(d_eer(b, a).eer, 0.0);

  const std::vector<double> same{0.1, 0.4, 0.4, 0.8};
  EXPECT_EQ(d_eer(same, same).eer, 0.5);

  // The stated sweep rule lands on |APCER - BPCER| = 0 at mean 0.5; the
  // ROC convex hull interpolates to 0.25.
  const std::vector<double> hb{0.1, 0.4}, ha{0.3, 0.9};
  const EerResult r = d_eer(hb, ha);
  EXPECT_EQ(r.eer, 0.5);
  EXPECT_EQ(r.apcer, 0.5);
  EXPECT_EQ(r.bpcer, 0.5);
  EXPECT_NEAR(d_eer_rocch(hb, ha), 0.25, 1e-15);
}

TEST(DEer, ScoreSetOverloadAndErrors) {
  ScoreSet s;
  s.bona = {0.1, 0.2};
  s.attack[3] = {0.8, 0.95};
  EXPECT_EQ(d_eer(s, 3).eer, 0.0);
  EXPECT_EQ(kind_of([&] { d_eer(s, 4); }), ErrorKind::kProtocol);
  s.bona.push_back(1.5);
  EXPECT_EQ(kind_of([&] { s.validate(); }), ErrorKind::kParameter);
}

TEST(DEer, BruteForceOracle) {
  Rng rng(31337);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t nb = 1 + static_cast<std::size_t>(rng.uniform() * 100);
    const std::size_t na = 1 + static_cast<std::size_t>(rng.uniform() * 100);
    const bool coarse = trial % 2 == 0;
    const auto bona = random_scores(rng, nb, coarse);
    const auto attack = random_scores(rng, na, coarse);
    const EerResult r = d_eer(bona, attack);
    const Brute o = brute_force_eer(bona, attack);
    ASSERT_EQ(r.eer, o.eer) << "trial " << trial;
    ASSERT_EQ(r.apcer, o.apcer);
    ASSERT_EQ(r.bpcer, o.bpcer);
    const ErrorRates at = apcer_bpcer(bona, attack, r.threshold);
    EXPECT_EQ(at.apcer, r.apcer);
    EXPECT_EQ(at.bpcer, r.bpcer);
  }
}

TEST(DEer, IdenticalDistributionsNearHalf) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto v = random_scores(rng, 20 + static_cast<std::size_t>(trial), false);
    const double eer = d_eer(v, v).eer;
    EXPECT_LE(std::abs(eer - 0.5), 1.0 / static_cast<double>(v.size()));
  }
}

TEST(DEer, SweepIsAscending) {
  const std::vector<double> b{0.2, 0.4, 0.4}, a{0.1, 0.6};
  const auto sweep = threshold_sweep(b, a);
  ASSERT_EQ(sweep.size(), 4U + 3U + 1U);
  for (std::size_t i = 1; i < sweep.size(); ++i) EXPECT_LT(sweep[i - 1].threshold, sweep[i].threshold);
  EXPECT_EQ(sweep.back().bpcer, 0.0);
  EXPECT_EQ(sweep.back().apcer, 1.0);
}

TEST(MeanSd, Examples) {
  const std::vector<double> one{3.5};
  EXPECT_EQ(mean_sd(one).sd, 0.0);
  const std::vector<double> two{10.0, 20.0};
  EXPECT_EQ(mean_sd(two).mean, 15.0);
  EXPECT_NEAR(mean_sd(two).sd, std::sqrt(50.0), 1e-12);
  EXPECT_NEAR(mean_sd(two).sd, 7.0711, 1e-4);
  const std::vector<double> seven(7, 0.125);
  EXPECT_EQ(mean_sd(seven).sd, 0.0);
  const std::vector<double> none;
  EXPECT_EQ(kind_of([&] { mean_sd(none); }), ErrorKind::kProtocol);
}

TEST(Report, HterAndAggregate) {
  ScoreSet s;
  s.bona = {0.1, 0.2, 0.7};
  s.attack[2] = {0.3, 0.8, 0.9};
  s.attack[5] = {0.9, 0.95};
  const std::vector<int> tests{2, 5};
  const EvalReport rep = make_report(s, 1, tests, ThresholdMode::kFixed, 0.5);
  ASSERT_EQ(rep.per_artefact.size(), 2U);
  for (const auto& m : rep.per_artefact) EXPECT_EQ(m.hter, (m.apcer + m.bpcer) / 2.0);
  EXPECT_EQ(rep.per_artefact[1].apcer, 0.0);
  EXPECT_NEAR(rep.aggregate.apcer.mean, 1.0 / 6.0, 1e-15);
  EXPECT_EQ(rep.aggregate.bpcer.sd, 0.0);
}

TEST(ThresholdMode, Parse) {
  EXPECT_EQ(parse_threshold_mode("fixed"), ThresholdMode::kFixed);
  EXPECT_EQ(parse_threshold_mode("dev"), ThresholdMode::kDev);
  EXPECT_EQ(kind_of([] { parse_threshold_mode("eer"); }), ErrorKind::kConfig);
}
