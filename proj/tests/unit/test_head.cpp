#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "spectrapad/error.hpp"
#include "spectrapad/losses.hpp"
#include "spectrapad/rng.hpp"
#include "spectrapad/spectral_head.hpp"

using namespace spectrapad;

namespace {

Mat row(std::initializer_list<double> v) {
  Mat m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

BandHeadParams plain_head(int d, HeadOptions opt = {}) {
  BandHeadParams h = BandHeadParams::create(SpectralBand::k850, d, opt, 1);
  h.e_k.value.setZero();
  return h;
}

}  // namespace

TEST(SpeInject, HandLayerNorm) {
  BandHeadParams h = plain_head(2);
  const Mat out = spe_inject(row({1.0, -1.0}), h);
  const double s = 1.0 / std::sqrt(1.0 + kLayerNormEps);
  EXPECT_NEAR(out(0, 0), s, 1e-15);
  EXPECT_NEAR(out(0, 1), -s, 1e-15);

  h.e_k.value = row({0.0, 2.0});
  const Mat flat = spe_inject(row({2.0, 0.0}), h);
  EXPECT_NEAR(flat(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(flat(0, 1), 0.0, 1e-12);

  h.ln_spe.beta.value = row({0.3, -0.7});
  h.e_k.value = row({1.5, 1.5});
  const Mat beta = spe_inject(row({4.0, 4.0}), h);
  EXPECT_NEAR(beta(0, 0), 0.3, 1e-12);
  EXPECT_NEAR(beta(0, 1), -0.7, 1e-12);
}

TEST(TokenFuse, HandCases) {
  BandHeadParams h = plain_head(2);
  h.fuse.weight.value.resize(2, 4);
  h.fuse.weight.value << 1, 0, 1, 0, 0, 1, 0, 1;
  h.fuse.bias.value.setZero();
  const Mat cls = row({0.4, -1.3});
  Mat patches(3, 2);
  patches << 0.4, -1.3, 0.4, -1.3, 0.4, -1.3;
  const Mat out = token_fuse(cls, patches, h);
  EXPECT_NEAR(out(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(out(0, 1), -2.6, 1e-15);

  // Only the patch half of the projection: output is the mean patch.
  h.fuse.weight.value << 0, 0, 1, 0, 0, 0, 0, 1;
  Mat two(2, 2);
  two << 1, 0, 0, 1;
  const Mat mean = token_fuse(cls, two, h);
  EXPECT_DOUBLE_EQ(mean(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(mean(0, 1), 0.5);

  h.fuse.weight.value.setZero();
  h.fuse.bias.value = row({3.0, -2.0});
  EXPECT_EQ(token_fuse(cls, two, h), row({3.0, -2.0}));
  EXPECT_THROW(token_fuse(cls, Mat(0, 2), h), Error);
}

TEST(BandDropout, RateFormula) {
  EXPECT_EQ(band_dropout_rate(0), 0.2);
  EXPECT_EQ(band_dropout_rate(1250), 0.2);
  EXPECT_EQ(band_dropout_rate(2500), 0.1);
  EXPECT_EQ(band_dropout_rate(5000), 0.05);
}

TEST(BandDropout, ApplyIdentityCases) {
  Rng rng(2);
  const Mat f = random_mat(1, 50, rng);
  EXPECT_EQ(apply_dropout(f, 0.3, Mode::kEval, 7), f);
  EXPECT_EQ(apply_dropout(f, 0.0, Mode::kTrain, 7), f);
  EXPECT_THROW(apply_dropout(f, 1.0, Mode::kTrain, 7), Error);
  EXPECT_EQ(apply_dropout(f, 0.3, Mode::kTrain, 9), apply_dropout(f, 0.3, Mode::kTrain, 9));
}

TEST(BandDropout, Statistics) {
  Rng rng(3);
  const int d = 100000;
  Mat f(1, d);
  for (int i = 0; i < d; ++i) f(0, i) = 0.5 + rng.uniform();
  const Mat out = apply_dropout(f, 0.2, Mode::kTrain, 11);
  int zeros = 0;
  double ratio = 0.0;
  for (int i = 0; i < d; ++i) {
    if (out(0, i) == 0.0) {
      ++zeros;
    } else {
      ratio += out(0, i) / f(0, i);
    }
  }
  const double zero_frac = static_cast<double>(zeros) / d;
  EXPECT_NEAR(zero_frac, 0.2, 0.01);
  // Survivors carry 1/(1-p); over all entries the expected multiplier is 1.
  EXPECT_NEAR(ratio / d, 1.0, 0.01);
  EXPECT_NEAR(ratio / (d - zeros), 1.25, 1e-12);
}

TEST(FeatureNormalize, HandCases) {
  EXPECT_EQ(feature_normalize(row({3, 5}), row({1, 1}), row({2, 2})), row({1, 2}));
  EXPECT_EQ(feature_normalize(row({3, 5}), row({3, 5}), row({2, 2})), row({0, 0}));
  EXPECT_THROW(feature_normalize(row({3, 5}), row({0, 0}), row({1, 0})), Error);
}

TEST(Classify, HandCases) {
  BandHeadParams h = plain_head(2);
  h.cls.weight.value.setZero();
  h.cls.bias.value.setZero();
  const Classification tie = classify(row({1, 2}), h);
  EXPECT_DOUBLE_EQ(tie.probs(0, 0), 0.5);
  EXPECT_EQ(tie.pred, 1);

  h.cls.bias.value = row({0.0, std::log(3.0)});
  const Classification c = classify(row({1, 2}), h);
  EXPECT_NEAR(c.probs(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(c.probs(0, 1), 0.75, 1e-15);

  h.cls.bias.value = row({10.0, -10.0});
  EXPECT_EQ(classify(row({1, 2}), h).pred, 0);
}

TEST(HeadForward, StageOrder) {
  const auto& order = head_stage_order();
  const std::vector<std::string> expected = {"spe_inject",   "token_fuse",        "apply_dropout",
                                             "ln_fuse",      "feature_normalize", "classify"};
  ASSERT_EQ(order.size(), expected.size());
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(order[i], expected[i]);
}

TEST(HeadForward, DropoutPrecedesLayerNorm) {
  // If dropout ran after ln_fuse the train-mode features would lose their
  // zero-mean / unit-variance row structure. LayerNorm eps leaves the variance
  // at s2 / (s2 + 1e-5), a little below 1; dropout afterwards would give ~1 / (1 - p).
  Rng rng(4);
  BandHeadParams h = BandHeadParams::create(SpectralBand::k800, 16, {}, 3);
  h.p_k = 0.2;
  const Mat tokens = random_mat(5, 16, rng);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const HeadOutput o = head_forward(tokens, h, Mode::kTrain, seed);
    const double mean = o.features.mean();
    const double var = (o.features.array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-2);
  }
}

TEST(HeadForward, EvalMatchesComposedOracles) {
  Rng rng(5);
  BandHeadParams h = BandHeadParams::create(SpectralBand::k870, 4, {}, 6);
  h.e_k.value = random_mat(1, 4, rng);
  h.feat_mu.value = random_mat(1, 4, rng);
  h.feat_sigma.value = (random_mat(1, 4, rng).array().abs() + 0.5).matrix();
  h.p_k = 0.15;
  const Mat tokens = random_mat(4, 4, rng);

  // Compose by hand: LN(cls + e), concat with mean patch, project, LN, standardise, classify.
  auto ln = [](const Eigen::RowVectorXd& x, const LayerNorm& p) {
    const double m = x.mean();
    const double v = (x.array() - m).square().mean();
    return Eigen::RowVectorXd(((x.array() - m) / std::sqrt(v + 1e-5)) * p.gamma.value.row(0).array() +
                              p.beta.value.row(0).array());
  };
  const Eigen::RowVectorXd spe = ln(tokens.row(0) + h.e_k.value.row(0), h.ln_spe);
  Eigen::RowVectorXd mean_patch = tokens.bottomRows(3).colwise().mean();
  Eigen::VectorXd concat(8);
  concat << spe.transpose(), mean_patch.transpose();
  const Eigen::RowVectorXd fused = (h.fuse.weight.value * concat).transpose() + h.fuse.bias.value.row(0);
  const Eigen::RowVectorXd normed = ln(fused, h.ln_fuse);
  const Eigen::RowVectorXd fn =
      ((normed - h.feat_mu.value.row(0)).array() / h.feat_sigma.value.row(0).array()).matrix();
  const Eigen::RowVectorXd z = (h.cls.weight.value * fn.transpose()).transpose() + h.cls.bias.value.row(0);
  const double p1 = 1.0 / (1.0 + std::exp(z(0) - z(1)));

  const HeadOutput o = head_forward(tokens, h, Mode::kEval, 0);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(o.features(0, i), fn(i), 1e-10);
  EXPECT_NEAR(o.cls.probs(0, 1), p1, 1e-12);
  EXPECT_NEAR(o.cls.probs.sum(), 1.0, 1e-12);
  EXPECT_EQ(head_forward(tokens, h, Mode::kEval, 0).features, o.features);
  EXPECT_EQ(head_forward(tokens, h, Mode::kEval, 99).features, o.features);
}

TEST(HeadForward, PreNormFeaturesAreLayerNormOutput) {
  Rng rng(7);
  BandHeadParams h = BandHeadParams::create(SpectralBand::k870, 6, {}, 8);
  h.feat_mu.value = random_mat(1, 6, rng);
  h.feat_sigma.value = Mat::Constant(1, 6, 2.0);
  const Mat tokens = random_mat(3, 6, rng);
  const Mat pre = pre_norm_features(tokens, h);
  const HeadOutput o = head_forward(tokens, h, Mode::kEval, 0);
  EXPECT_LT((feature_normalize(pre, h.feat_mu.value, h.feat_sigma.value) - o.features).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(HeadForward, FoldKeepsLogits) {
  Rng rng(9);
  BandHeadParams h = BandHeadParams::create(SpectralBand::k980, 6, {}, 10);
  h.cls.weight.value = random_mat(2, 6, rng);
  h.feat_mu.value = random_mat(1, 6, rng);
  h.feat_sigma.value = (random_mat(1, 6, rng).array().abs() + 0.3).matrix();
  const Mat tokens = random_mat(3, 6, rng);
  const Mat before = head_forward(tokens, h, Mode::kEval, 0).cls.logits;
  fold_feature_stats(h, random_mat(1, 6, rng), (random_mat(1, 6, rng).array().abs() + 0.2).matrix());
  const Mat after = head_forward(tokens, h, Mode::kEval, 0).cls.logits;
  EXPECT_LT((before - after).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HeadBackward, MissingCache) {
  BandHeadParams h = plain_head(4);
  EXPECT_THROW(head_backward(HeadCache{}, Mat::Zero(1, 2), Mat(), h), Error);
}

namespace {

// Batch loss through the head in train mode (fixed dropout seeds), plus the
// token gradients so that the encoder-side path can be checked too.
struct HeadBatch {
  std::vector<Mat> tokens;
  std::vector<int> labels;
  ClassWeights w{2.0, 2.0 / 3.0};
  LossConfig cfg;

  double loss(const BandHeadParams& h) const {
    Mat logits(static_cast<Eigen::Index>(tokens.size()), 2), feats(static_cast<Eigen::Index>(tokens.size()), h.dim);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const HeadOutput o = head_forward(tokens[i], h, Mode::kTrain, 100 + i);
      logits.row(static_cast<Eigen::Index>(i)) = o.cls.logits;
      feats.row(static_cast<Eigen::Index>(i)) = o.features;
    }
    return balanced_ce_from_logits(logits, labels, w).value + cfg.lambda * contrastive(feats, labels, cfg.epsilon);
  }

  void backward(BandHeadParams& h, std::vector<Mat>* dtokens = nullptr) const {
    const auto n = static_cast<Eigen::Index>(tokens.size());
    Mat logits(n, 2), feats(n, h.dim);
    std::vector<HeadCache> caches(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const HeadOutput o = head_forward(tokens[i], h, Mode::kTrain, 100 + i, &caches[i]);
      logits.row(static_cast<Eigen::Index>(i)) = o.cls.logits;
      feats.row(static_cast<Eigen::Index>(i)) = o.features;
    }
    const LossGrad ce = balanced_ce_from_logits(logits, labels, w);
    const LossGrad ct = contrastive_with_grad(feats, labels, cfg.epsilon);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const Mat dt = head_backward(caches[i], ce.grad.row(r), cfg.lambda * ct.grad.row(r), h);
      if (dtokens) dtokens->push_back(dt);
    }
  }
};

HeadBatch make_batch(int d, Rng& rng) {
  HeadBatch b;
  for (int i = 0; i < 6; ++i) {
    b.tokens.push_back(random_mat(5, d, rng));
    b.labels.push_back(i % 3 == 0 ? 1 : 0);
  }
  return b;
}

}  // namespace

TEST(HeadGradCheck, AllTrainableTensors) {
  for (HeadOptions opt : {HeadOptions{}, HeadOptions{false, false, false}}) {
    Rng rng(12);
    BandHeadParams h = BandHeadParams::create(SpectralBand::k830, 6, opt, 13);
    for (auto* p : h.trainable_params()) p->value = random_mat(p->value.rows(), p->value.cols(), rng, 0.5);
    h.feat_mu.value = random_mat(1, 6, rng, 0.1);
    h.feat_sigma.value = Mat::Constant(1, 6, 1.3);
    h.p_k = 0.2;
    const HeadBatch batch = make_batch(6, rng);
    const double err =
        grad_check(h.all_params(), [&] { return batch.loss(h); }, [&] { batch.backward(h); });
    EXPECT_LE(err, 1e-3);
  }
}

TEST(HeadGradCheck, BandEmbeddingOnly) {
  Rng rng(14);
  BandHeadParams h = BandHeadParams::create(SpectralBand::k800, 8, {}, 15);
  h.e_k.value = random_mat(1, 8, rng);
  h.p_k = 0.1;
  const HeadBatch batch = make_batch(8, rng);
  const double err = grad_check({&h.e_k}, [&] { return batch.loss(h); }, [&] { batch.backward(h); });
  EXPECT_LE(err, 1e-3);
}

TEST(HeadGradCheck, TokenGradient) {
  Rng rng(16);
  BandHeadParams h = BandHeadParams::create(SpectralBand::k800, 6, {}, 17);
  for (auto* p : h.trainable_params()) p->value = random_mat(p->value.rows(), p->value.cols(), rng, 0.5);
  h.p_k = 0.2;
  HeadBatch batch = make_batch(6, rng);
  Param t("tokens0", 5, 6);
  t.value = batch.tokens[0];
  const double err = grad_check(
      {&t},
      [&] {
        batch.tokens[0] = t.value;
        return batch.loss(h);
      },
      [&] {
        batch.tokens[0] = t.value;
        std::vector<Mat> dt;
        batch.backward(h, &dt);
        t.accumulate(dt[0]);
      });
  EXPECT_LE(err, 1e-3);
}

TEST(HeadParams, SpeOffFreezesEmbedding) {
  const BandHeadParams h = BandHeadParams::create(SpectralBand::k800, 4, {false, true, true}, 1);
  EXPECT_TRUE(h.e_k.frozen);
  EXPECT_TRUE(h.ln_spe.gamma.frozen);
  const BandHeadParams nf = BandHeadParams::create(SpectralBand::k800, 4, {true, false, true}, 1);
  EXPECT_EQ(nf.fuse.weight.value.cols(), 4);
  EXPECT_EQ(nf.prefix(), "head.band800");
}
