#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <numeric>
#include <optional>
#include <vector>

#include "spectrapad/ensemble.hpp"
#include "spectrapad/error.hpp"
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

EnsembleWeights weights_from(std::initializer_list<std::pair<SpectralBand, double>> accs) {
  PerBand<std::optional<double>> a{};
  for (auto [b, v] : accs) a[band_index(b)] = v;
  return band_weights(a);
}

Prob2 prob(double attack) { return {1.0 - attack, attack}; }

}  // namespace

TEST(BandAccuracy, Counting) {
  const std::vector<int> y{0, 1, 1, 0};
  EXPECT_EQ(band_accuracy(y, y), 1.0);
  const std::vector<int> three{0, 1, 0, 0};
  EXPECT_EQ(band_accuracy(three, y), 0.75);
  const std::vector<int> wrong{1, 0, 0, 1};
  EXPECT_EQ(band_accuracy(wrong, y), 0.0);
  const std::vector<int> none;
  EXPECT_EQ(kind_of([&] { band_accuracy(none, none); }), ErrorKind::kProtocol);
}

TEST(BandWeights, Examples) {
  const EnsembleWeights w = weights_from({{SpectralBand::k800, 0.9}, {SpectralBand::k830, 0.6}});
  EXPECT_NEAR(w.w[0], 0.6, 1e-15);
  EXPECT_NEAR(w.w[1], 0.4, 1e-15);
  EXPECT_EQ(w.w[2], 0.0);
  EXPECT_EQ(w.w[3], 0.0);
  EXPECT_EQ(w.w[4], 0.0);
  EXPECT_EQ(w.present(), (BandSet{SpectralBand::k800, SpectralBand::k830}));

  const EnsembleWeights eq = weights_from({{SpectralBand::k800, 0.7},
                                           {SpectralBand::k850, 0.7},
                                           {SpectralBand::k870, 0.7},
                                           {SpectralBand::k980, 0.7}});
  for (std::size_t k : {0UL, 2UL, 3UL, 4UL}) EXPECT_DOUBLE_EQ(eq.w[k], 0.25);
  EXPECT_EQ(eq.w[1], 0.0);

  const EnsembleWeights zero = weights_from({{SpectralBand::k830, 0.0}, {SpectralBand::k980, 0.0}});
  EXPECT_EQ(zero.w[1], 0.5);
  EXPECT_EQ(zero.w[4], 0.5);
  EXPECT_EQ(zero.w[0], 0.0);
}

TEST(BandWeights, Errors) {
  PerBand<std::optional<double>> a{};
  a[0] = 1.2;
  EXPECT_EQ(kind_of([&] { band_weights(a); }), ErrorKind::kParameter);
  const EnsembleWeights empty = band_weights({});
  for (double w : empty.w) EXPECT_EQ(w, 0.0);
}

TEST(Fuse, HandExample) {
  const EnsembleWeights w = weights_from({{SpectralBand::k800, 0.9}, {SpectralBand::k830, 0.6}});
  BandProbs p{};
  p[0] = Prob2{0.8, 0.2};
  p[1] = Prob2{0.2, 0.8};
  const FusedDecision d = fuse(p, w, BandSet::all());
  EXPECT_NEAR(d.p_ens[0], 0.56, 1e-12);
  EXPECT_NEAR(d.p_ens[1], 0.44, 1e-12);
  EXPECT_EQ(d.y_hat, 0);
  EXPECT_EQ(d.bands_used, (BandSet{SpectralBand::k800, SpectralBand::k830}));
}

TEST(Fuse, SingleBandIsExact) {
  const EnsembleWeights w = weights_from({{SpectralBand::k800, 0.9}, {SpectralBand::k850, 0.3}});
  BandProbs p{};
  p[0] = Prob2{0.123456789, 0.876543211};
  p[2] = Prob2{0.9, 0.1};
  const FusedDecision d = fuse(p, w, BandSet{SpectralBand::k850});
  EXPECT_EQ(d.p_ens, *p[2]);
  EXPECT_EQ(d.y_hat, 0);
}

TEST(Fuse, ZeroWeightBandInsideMaskContributesNothing) {
  const EnsembleWeights w = weights_from({{SpectralBand::k800, 0.0}, {SpectralBand::k830, 0.8}});
  BandProbs p{};
  p[0] = prob(0.99);
  p[1] = prob(0.2);
  const FusedDecision d = fuse(p, w, BandSet::all());
  EXPECT_EQ(d.p_ens, *p[1]);
  EXPECT_EQ(d.bands_used, BandSet{SpectralBand::k830});
}

TEST(Fuse, ZeroWeightsInsideMaskFallBackToUniform) {
  const EnsembleWeights w = weights_from({{SpectralBand::k800, 0.0}, {SpectralBand::k830, 0.8}});
  BandProbs p{};
  p[0] = prob(0.6);
  p[1] = prob(0.2);
  p[2] = prob(0.2);
  // 850 has no accuracy and 800 has zero: the renormalised weights vanish.
  const FusedDecision d = fuse(p, w, BandSet{SpectralBand::k800, SpectralBand::k850});
  EXPECT_NEAR(d.p_ens[1], 0.4, 1e-15);
  EXPECT_EQ(d.alpha[0], 0.5);
  EXPECT_EQ(d.alpha[2], 0.5);
}

TEST(Fuse, EmptyEffectiveSetIsFusionError) {
  const EnsembleWeights w = weights_from({{SpectralBand::k800, 0.9}});
  BandProbs p{};
  p[0] = prob(0.3);
  EXPECT_EQ(kind_of([&] { fuse(p, w, BandSet{SpectralBand::k980}); }), ErrorKind::kFusion);
  EXPECT_EQ(kind_of([&] { fuse(BandProbs{}, w, BandSet::all()); }), ErrorKind::kFusion);
}

TEST(Fuse, IdenticalProbabilitiesAreAFixedPoint) {
  const EnsembleWeights w = weights_from({{SpectralBand::k800, 0.31},
                                          {SpectralBand::k830, 0.77},
                                          {SpectralBand::k850, 0.12},
                                          {SpectralBand::k870, 0.93},
                                          {SpectralBand::k980, 0.5}});
  BandProbs p{};
  for (auto& x : p) x = Prob2{0.3, 0.7};
  const FusedDecision d = fuse(p, w, BandSet::all());
  EXPECT_EQ(d.p_ens[0], 0.3);
  EXPECT_EQ(d.p_ens[1], 0.7);
}

TEST(Fuse, RandomisedInvariants) {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    PerBand<std::optional<double>> acc{};
    BandProbs p{};
    for (std::size_t k = 0; k < kNumBands; ++k) {
      if (rng.bernoulli(0.8)) acc[k] = rng.bernoulli(0.1) ? 0.0 : rng.uniform();
      if (rng.bernoulli(0.85)) p[k] = prob(rng.uniform());
    }
    BandSet mask;
    for (SpectralBand b : kAllBands)
      if (rng.bernoulli(0.6)) mask.insert(b);
    const EnsembleWeights w = band_weights(acc);
    bool usable = false;
    for (SpectralBand b : kAllBands) usable |= mask.contains(b) && p[band_index(b)].has_value();
    if (!usable) {
      EXPECT_EQ(kind_of([&] { fuse(p, w, mask); }), ErrorKind::kFusion);
      continue;
    }
    const FusedDecision d = fuse(p, w, mask);
    double lo = 1.0, hi = 0.0;
    for (SpectralBand b : d.bands_used.bands()) {
      lo = std::min(lo, (*p[band_index(b)])[1]);
      hi = std::max(hi, (*p[band_index(b)])[1]);
    }
    ASSERT_FALSE(d.bands_used.empty());
    EXPECT_GE(d.p_ens[1], lo);
    EXPECT_LE(d.p_ens[1], hi);
    EXPECT_NEAR(d.p_ens[0] + d.p_ens[1], 1.0, 1e-6);
    EXPECT_EQ(d.y_hat, d.p_ens[1] >= 0.5 ? 1 : 0);

    // Relabel bands with a random permutation; the fused value must not move.
    std::array<std::size_t, kNumBands> perm{};
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    PerBand<std::optional<double>> acc2{};
    BandProbs p2{};
    BandSet mask2;
    for (std::size_t k = 0; k < kNumBands; ++k) {
      acc2[perm[k]] = acc[k];
      p2[perm[k]] = p[k];
      if (mask.contains(kAllBands[k])) mask2.insert(kAllBands[perm[k]]);
    }
    const FusedDecision d2 = fuse(p2, band_weights(acc2), mask2);
    EXPECT_EQ(d2.p_ens, d.p_ens);
  }
}

TEST(Decide, Threshold) {
  EXPECT_EQ(decide(prob(0.5)), 1);
  EXPECT_EQ(decide(prob(0.4999)), 0);
  EXPECT_EQ(decide(prob(0.7), 0.8), 0);
  EXPECT_EQ(decide(prob(0.8), 0.8), 1);
  EXPECT_EQ(kind_of([] { decide(prob(0.5), 0.0); }), ErrorKind::kParameter);
  EXPECT_EQ(kind_of([] { decide(prob(0.5), 1.0); }), ErrorKind::kParameter);
}
