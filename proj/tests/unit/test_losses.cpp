#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "spectrapad/error.hpp"
#include "spectrapad/losses.hpp"
#include "spectrapad/rng.hpp"

using namespace spectrapad;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Literal transcription of the double sum, j = i included.
double contrastive_oracle(const Mat& f, const std::vector<int>& y, double eps) {
  const auto m = static_cast<std::size_t>(f.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double count = static_cast<double>(std::count(y.begin(), y.end(), y[i]));
    double pull = 0.0, push = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < f.cols(); ++c) {
        const double diff = f(static_cast<Eigen::Index>(i), c) - f(static_cast<Eigen::Index>(j), c);
        d2 += diff * diff;
      }
      if (y[j] == y[i])
        pull += d2;
      else
        push += std::log(d2 + eps);
    }
    total += pull / count - push;
  }
  return total / static_cast<double>(m);
}

template <class F>
std::optional<ErrorKind> kind_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace

TEST(ClassWeights, Examples) {
  const ClassWeights even = class_weights(17, 17);
  EXPECT_DOUBLE_EQ(even.w0, 1.0);
  EXPECT_DOUBLE_EQ(even.w1, 1.0);

  const ClassWeights skew = class_weights(100, 300);
  EXPECT_DOUBLE_EQ(skew.w0, 2.0);
  EXPECT_NEAR(skew.w1, 400.0 / 600.0, 1e-15);

  const ClassWeights table = class_weights(1543, 1031);
  EXPECT_NEAR(table.w0, 2574.0 / 3086.0, 1e-15);
  EXPECT_NEAR(table.w1, 2574.0 / 2062.0, 1e-15);
  EXPECT_NEAR(table.w0, 0.8341, 1e-4);
  EXPECT_NEAR(table.w1, 1.2483, 1e-4);
}

TEST(ClassWeights, IdentityForEqualCounts) {
  for (long long n : {1LL, 2LL, 9LL, 1000LL}) {
    const ClassWeights w = class_weights(n, n);
    EXPECT_EQ(w.w0, 1.0);
    EXPECT_EQ(w.w1, 1.0);
  }
}

TEST(ClassWeights, MissingClassIsProtocolError) {
  EXPECT_EQ(kind_of([] { class_weights(0, 5); }), ErrorKind::kProtocol);
  EXPECT_EQ(kind_of([] { class_weights(5, 0); }), ErrorKind::kProtocol);
}

TEST(ClassWeights, InverseFrequencyIsTwiceNormalised) {
  const ClassWeights a = class_weights(123, 45);
  const ClassWeights b = inverse_frequency_weights(123, 45);
  EXPECT_DOUBLE_EQ(b.w0, 2.0 * a.w0);
  EXPECT_DOUBLE_EQ(b.w1, 2.0 * a.w1);
}

TEST(BalancedCe, HandValues) {
  Mat perfect(2, 2);
  perfect << 1.0, 0.0, 0.0, 1.0;
  const std::vector<int> y01{0, 1};
  EXPECT_EQ(balanced_ce(perfect, y01, {3.0, 0.2}), 0.0);

  Mat half(1, 2);
  half << 0.5, 0.5;
  const std::vector<int> y0{0};
  EXPECT_NEAR(balanced_ce(half, y0, {1.0, 1.0}), std::log(2.0), 1e-15);

  Mat p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  const double expected = (2.0 * -std::log(0.9) + (2.0 / 3.0) * -std::log(0.8)) / 2.0;
  EXPECT_NEAR(balanced_ce(p, y01, {2.0, 2.0 / 3.0}), expected, 1e-14);
  EXPECT_NEAR(expected, 0.1797, 1e-4);
}

TEST(BalancedCe, ClampsZeroProbability) {
  Mat p(1, 2);
  p << 1.0, 0.0;
  const std::vector<int> y{1};
  EXPECT_NEAR(balanced_ce(p, y, {1.0, 1.0}), -std::log(kProbFloor), 1e-9);
}

TEST(BalancedCe, InputErrors) {
  Mat p(1, 2);
  p << 0.5, 0.5;
  const std::vector<int> bad{2};
  EXPECT_EQ(kind_of([&] { balanced_ce(p, bad, {}); }), ErrorKind::kParameter);
  Mat off(1, 2);
  off << 0.5, 0.6;
  const std::vector<int> y{0};
  EXPECT_EQ(kind_of([&] { balanced_ce(off, y, {}); }), ErrorKind::kParameter);
}

TEST(BalancedCe, ScaleEquivariance) {
  Rng rng(5);
  Mat p(6, 2);
  for (Eigen::Index i = 0; i < 6; ++i) {
    p(i, 0) = rng.uniform(0.01, 0.99);
    p(i, 1) = 1.0 - p(i, 0);
  }
  const std::vector<int> y{0, 1, 1, 0, 1, 0};
  const ClassWeights w{0.7, 1.9};
  const double base = balanced_ce(p, y, w);
  for (double s : {0.5, 2.0, 13.0})
    EXPECT_NEAR(balanced_ce(p, y, {s * w.w0, s * w.w1}), s * base, 1e-12 * s);
}

TEST(Contrastive, HandValues) {
  Mat same = Mat::Constant(3, 4, 0.25);
  const std::vector<int> y000{0, 0, 0};
  EXPECT_EQ(contrastive(same, y000, 1e-6), 0.0);

  Mat unit(2, 1);
  unit << 0.0, 1.0;
  const std::vector<int> y01{0, 1};
  EXPECT_NEAR(contrastive(unit, y01, 1e-6), -std::log(1.0 + 1e-6), 1e-18);
  EXPECT_NEAR(contrastive(unit, y01, 1e-6), -1e-6, 1e-11);

  Mat two(2, 1);
  two << 0.0, 2.0;
  const std::vector<int> y00{0, 0};
  EXPECT_NEAR(contrastive(two, y00, 1e-6), 2.0, 1e-15);
}

TEST(Contrastive, MatchesLiteralDoubleSum) {
  Rng rng(9);
  const Mat f = random_mat(7, 3, rng);
  const std::vector<int> y{0, 1, 1, 0, 0, 1, 0};
  EXPECT_NEAR(contrastive(f, y, 1e-6), contrastive_oracle(f, y, 1e-6), 1e-12);
}

TEST(Contrastive, NonFiniteFeaturesAreNumericError) {
  Mat f(2, 1);
  f << 0.0, std::nan("");
  const std::vector<int> y{0, 1};
  EXPECT_EQ(kind_of([&] { contrastive(f, y, 1e-6); }), ErrorKind::kNumeric);
}

TEST(Contrastive, PermutationInvariance) {
  Rng rng(11);
  const Mat f = random_mat(8, 5, rng);
  const std::vector<int> y{0, 0, 1, 1, 0, 1, 1, 0};
  const double base = contrastive(f, y, 1e-6);
  std::vector<int> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    rng.shuffle(perm.begin(), perm.end());
    Mat pf(8, 5);
    std::vector<int> py(8);
    for (int i = 0; i < 8; ++i) {
      pf.row(i) = f.row(perm[static_cast<std::size_t>(i)]);
      py[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    EXPECT_NEAR(contrastive(pf, py, 1e-6), base, 1e-12);
  }
}

TEST(Contrastive, PullMonotonicity) {
  // Two bona fide points on the axis, the attack point on the perpendicular
  // bisector at fixed distance from both as they separate.
  const std::vector<int> y{0, 0, 1};
  double prev = -1e300;
  for (double a = 0.0; a <= 3.0; a += 0.25) {
    const double r2 = 4.0;
    const double h = std::sqrt(std::max(r2 - a * a, 0.0));
    if (a * a > r2) break;
    Mat f(3, 2);
    f << -a, 0.0, a, 0.0, 0.0, h;
    const double v = contrastive(f, y, 1e-6);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Contrastive, FeatureGradientMatchesFiniteDifference) {
  Rng rng(21);
  Mat f = random_mat(6, 4, rng);
  const std::vector<int> y{0, 1, 0, 1, 1, 0};
  const LossGrad g = contrastive_with_grad(f, y, 1e-6);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double keep = f.data()[i];
    f.data()[i] = keep + h;
    const double up = contrastive(f, y, 1e-6);
    f.data()[i] = keep - h;
    const double down = contrastive(f, y, 1e-6);
    f.data()[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double an = g.grad.data()[i];
    EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(fd))) << "entry " << i;
  }
}

TEST(BandLoss, Composition) {
  Mat p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  Mat f(2, 1);
  f << 0.0, 2.0;
  const std::vector<int> y01{0, 1};
  const std::vector<int> y00{0, 0};
  const ClassWeights w{2.0, 2.0 / 3.0};
  const double ce = balanced_ce(p, y01, w);
  const double con = contrastive(f, y00, 1e-6);
  EXPECT_NEAR(ce + 0.1 * con, 0.3797, 1e-4);

  const std::vector<int> mixed{0, 1};
  EXPECT_NEAR(band_loss(p, mixed, f, w, {0.1, 1e-6}), ce + 0.1 * contrastive(f, mixed, 1e-6), 1e-15);
  EXPECT_EQ(band_loss(p, mixed, f, w, {0.0, 1e-6}), ce);
}

TEST(BandLoss, SeparableBatchMayBeNegative) {
  Mat p(2, 2);
  p << 1.0, 0.0, 0.0, 1.0;
  Mat f(2, 1);
  f << -50.0, 50.0;
  const std::vector<int> y{0, 1};
  EXPECT_LT(band_loss(p, y, f, {1.0, 1.0}, {0.1, 1e-6}), 0.0);
}

TEST(BalancedCeLogits, ValueAndGradient) {
  Rng rng(3);
  Mat z = random_mat(5, 2, rng);
  const std::vector<int> y{1, 0, 0, 1, 1};
  const ClassWeights w{1.4, 0.6};
  const LossGrad g = balanced_ce_from_logits(z, y, w);
  EXPECT_NEAR(g.value, balanced_ce(softmax_rows(z), y, w), 1e-14);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double keep = z.data()[i];
    z.data()[i] = keep + h;
    const double up = balanced_ce_from_logits(z, y, w).value;
    z.data()[i] = keep - h;
    const double down = balanced_ce_from_logits(z, y, w).value;
    z.data()[i] = keep;
    EXPECT_NEAR((up - down) / (2.0 * h), g.grad.data()[i], 1e-8);
  }
}
