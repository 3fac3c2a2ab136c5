#include "spectrapad/spectral_head.hpp"

#include <algorithm>
#include <cmath>

#include "spectrapad/error.hpp"
#include "spectrapad/rng.hpp"

namespace spectrapad {

void DropoutConstants::validate() const {
  require(kappa > 0 && C > 0 && p_max > 0 && p_max <= 1.0, ErrorKind::kConfig,
          "dropout constants must be positive with p_max <= 1");
}

const std::array<const char*, 6>& head_stage_order() {
  static const std::array<const char*, 6> order{"spe_inject",   "token_fuse",        "apply_dropout",
                                                "ln_fuse",      "feature_normalize", "classify"};
  return order;
}

BandHeadParams BandHeadParams::create(SpectralBand band, int dim, const HeadOptions& options, std::uint64_t seed) {
  require(dim >= 1, ErrorKind::kDimension, "head dimension must be positive");
  BandHeadParams h;
  h.band = band;
  h.dim = dim;
  h.options = options;
  const std::string pre = h.prefix();
  h.e_k = Param(pre + ".e_k", 1, dim);
  h.ln_spe = LayerNorm(pre + ".ln_spe", dim);
  h.fuse = Linear(pre + ".fuse", options.token_fusion ? 2 * dim : dim, dim);
  h.ln_fuse = LayerNorm(pre + ".ln_fuse", dim);
  h.feat_mu = Param(pre + ".feat_mu", 1, dim);
  h.feat_sigma = Param(pre + ".feat_sigma", 1, dim);
  h.feat_sigma.value.setOnes();
  h.feat_mu.frozen = true;
  h.feat_sigma.frozen = true;
  h.cls = Linear(pre + ".cls", dim, 2);

  Rng rng(stream_seed(seed, "init", 2, static_cast<std::uint64_t>(wavelength_nm(band))));
  if (options.spe) {
    init_truncated_normal(h.e_k.value, rng);
  } else {
    h.e_k.frozen = true;
    for (auto* p : h.ln_spe.params()) p->frozen = true;
  }
  h.fuse.init(rng);
  h.cls.init(rng);
  return h;
}

std::string BandHeadParams::prefix() const { return "head.band" + std::to_string(wavelength_nm(band)); }

ParamRefs BandHeadParams::all_params() {
  return {&e_k, &ln_spe.gamma, &ln_spe.beta, &fuse.weight, &fuse.bias, &ln_fuse.gamma, &ln_fuse.beta,
          &feat_mu, &feat_sigma, &cls.weight, &cls.bias};
}

ConstParamRefs BandHeadParams::all_params() const {
  return {&e_k, &ln_spe.gamma, &ln_spe.beta, &fuse.weight, &fuse.bias, &ln_fuse.gamma, &ln_fuse.beta,
          &feat_mu, &feat_sigma, &cls.weight, &cls.bias};
}

ParamRefs BandHeadParams::trainable_params() {
  ParamRefs out;
  for (auto* p : all_params())
    if (!p->frozen) out.push_back(p);
  return out;
}

double band_dropout_rate(long long n_eff, const DropoutConstants& consts) {
  require(n_eff >= 0, ErrorKind::kParameter, "N_eff must be non-negative");
  consts.validate();
  return std::min(consts.p_max, consts.kappa * consts.C / static_cast<double>(std::max<long long>(n_eff, 1)));
}

Mat apply_dropout(const Mat& f, double p, Mode mode, std::uint64_t seed, Mat* mask) {
  require(p >= 0.0 && p < 1.0, ErrorKind::kParameter, "dropout rate must lie in [0, 1)");
  if (mode == Mode::kEval || p == 0.0) {
    if (mask) *mask = Mat::Ones(f.rows(), f.cols());
    return f;
  }
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  Mat m(f.rows(), f.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < p ? 0.0 : keep_scale;
  Mat out = f.array() * m.array();
  if (mask) *mask = std::move(m);
  return out;
}

Mat spe_inject(const Mat& cls, const BandHeadParams& params, LayerNormCache* cache) {
  require(cls.rows() == 1 && cls.cols() == params.dim, ErrorKind::kDimension, "CLS width does not match head");
  return params.ln_spe.forward(cls + params.e_k.value, cache);
}

namespace {

Mat fusion_input(const Mat& cls_spe, const Mat& patches, const BandHeadParams& params) {
  if (!params.options.token_fusion) return cls_spe;
  require(patches.rows() >= 1, ErrorKind::kDimension, "token fusion needs at least one patch token");
  require(patches.cols() == params.dim, ErrorKind::kDimension, "patch width does not match head");
  Mat concat(1, 2 * params.dim);
  concat.leftCols(params.dim) = cls_spe;
  concat.rightCols(params.dim) = patches.colwise().mean();
  return concat;
}

}  // namespace

Mat token_fuse(const Mat& cls_spe, const Mat& patches, const BandHeadParams& params) {
  return params.fuse.forward(fusion_input(cls_spe, patches, params));
}

Mat feature_normalize(const Mat& f, const Mat& mu, const Mat& sigma) {
  require(f.cols() == mu.cols() && f.cols() == sigma.cols(), ErrorKind::kDimension,
          "feature statistics width mismatch");
  require((sigma.array() > 0.0).all(), ErrorKind::kDegenerateStats, "feature sigma has a non-positive entry");
  return ((f.array().rowwise() - mu.row(0).array()).rowwise() / sigma.row(0).array()).matrix();
}

int argmax_attack_on_tie(double p_bona, double p_attack) { return p_attack >= p_bona ? 1 : 0; }

Classification classify(const Mat& f_norm, const BandHeadParams& params) {
  Classification c;
  c.logits = params.cls.forward(f_norm);
  c.probs = softmax_rows(c.logits);
  c.pred = argmax_attack_on_tie(c.probs(0, 0), c.probs(0, 1));
  return c;
}

HeadOutput head_forward(const TokenSequence& tokens, const BandHeadParams& params, Mode mode, std::uint64_t seed,
                        HeadCache* cache) {
  require(tokens.rows() >= 1 && tokens.cols() == params.dim, ErrorKind::kDimension,
          "token sequence does not match head width");
  const Mat cls_tok = tokens.topRows(1);
  const Mat patches = tokens.bottomRows(tokens.rows() - 1);

  Mat cls_spe = params.options.spe ? spe_inject(cls_tok, params, cache ? &cache->ln_spe : nullptr) : cls_tok;
  Mat concat = fusion_input(cls_spe, patches, params);
  Mat fused = params.fuse.forward(concat);
  Mat mask;
  Mat dropped = apply_dropout(fused, params.p_k, mode, seed, &mask);
  Mat normed = params.ln_fuse.forward(dropped, cache ? &cache->ln_fuse : nullptr);
  HeadOutput out;
  out.features = feature_normalize(normed, params.feat_mu.value, params.feat_sigma.value);
  out.cls = classify(out.features, params);
  if (cache) {
    cache->concat = std::move(concat);
    cache->mask = std::move(mask);
    cache->f_norm = out.features;
    cache->n_patches = static_cast<int>(patches.rows());
    cache->valid = true;
  }
  return out;
}

Mat pre_norm_features(const TokenSequence& tokens, const BandHeadParams& params) {
  require(tokens.rows() >= 1 && tokens.cols() == params.dim, ErrorKind::kDimension,
          "token sequence does not match head width");
  const Mat cls_tok = tokens.topRows(1);
  const Mat patches = tokens.bottomRows(tokens.rows() - 1);
  const Mat cls_spe = params.options.spe ? spe_inject(cls_tok, params) : cls_tok;
  return params.ln_fuse.forward(params.fuse.forward(fusion_input(cls_spe, patches, params)));
}

TokenSequence head_backward(const HeadCache& cache, const Mat& d_logits, const Mat& d_features,
                            BandHeadParams& params) {
  require(cache.valid, ErrorKind::kState, "head backward called without a forward cache");
  const int d = params.dim;
  Mat dz = params.cls.backward(cache.f_norm, d_logits);
  if (d_features.size() > 0) dz += d_features;
  const Mat dnormed = dz.array().rowwise() / params.feat_sigma.value.row(0).array();
  const Mat ddropped = params.ln_fuse.backward(cache.ln_fuse, dnormed);
  const Mat dfused = ddropped.array() * cache.mask.array();
  const Mat dconcat = params.fuse.backward(cache.concat, dfused);

  TokenSequence dtokens = TokenSequence::Zero(cache.n_patches + 1, d);
  const Mat dcls_spe = dconcat.leftCols(d);
  if (params.options.spe) {
    const Mat ds = params.ln_spe.backward(cache.ln_spe, dcls_spe);
    params.e_k.accumulate(ds);
    dtokens.row(0) = ds;
  } else {
    dtokens.row(0) = dcls_spe;
  }
  if (params.options.token_fusion && cache.n_patches > 0) {
    const Eigen::RowVectorXd dpatch = dconcat.rightCols(d) / static_cast<double>(cache.n_patches);
    dtokens.bottomRows(cache.n_patches).rowwise() = dpatch;
  }
  return dtokens;
}

void fold_feature_stats(BandHeadParams& params, const Mat& new_mu, const Mat& new_sigma) {
  require(new_mu.cols() == params.dim && new_sigma.cols() == params.dim, ErrorKind::kDimension,
          "feature statistics width mismatch");
  require((new_sigma.array() > 0.0).all(), ErrorKind::kDegenerateStats, "feature sigma has a non-positive entry");
  const Eigen::RowVectorXd old_mu = params.feat_mu.value.row(0);
  const Eigen::RowVectorXd old_sigma = params.feat_sigma.value.row(0);
  const Eigen::RowVectorXd shift = ((new_mu.row(0) - old_mu).array() / old_sigma.array()).matrix();
  params.cls.bias.value.row(0) += (params.cls.weight.value * shift.transpose()).transpose();
  const Eigen::RowVectorXd ratio = (new_sigma.row(0).array() / old_sigma.array()).matrix();
  params.cls.weight.value = params.cls.weight.value.array().rowwise() * ratio.array();
  params.feat_mu.value = new_mu;
  params.feat_sigma.value = new_sigma;
}

}  // namespace spectrapad
