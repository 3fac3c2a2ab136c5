#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "spectrapad/band.hpp"
#include "spectrapad/nn.hpp"
#include "spectrapad/vit_encoder.hpp"

namespace spectrapad {

struct DropoutConstants {
  double kappa = 0.5;
  double C = 500.0;
  double p_max = 0.2;

  void validate() const;
};

enum class Mode { kTrain, kEval };

inline constexpr double kFeatSigmaFloor = 1e-8;

/// Structural switches used by the ablation runs. Everything on is the full head.
struct HeadOptions {
  bool spe = true;           // band embedding + LayerNorm on CLS
  bool token_fusion = true;  // concatenate mean patch token before the fusion projection
  bool feat_norm = true;     // standardise fused features with train statistics
};

/// One independent instance per band.
struct BandHeadParams {
  SpectralBand band = SpectralBand::k800;
  int dim = 0;
  HeadOptions options;
  Param e_k;          // 1 x d
  LayerNorm ln_spe;
  Linear fuse;        // d x 2d, or d x d without token fusion
  LayerNorm ln_fuse;
  double p_k = 0.0;
  Param feat_mu;      // 1 x d, not trained
  Param feat_sigma;   // 1 x d, not trained
  Linear cls;         // 2 x d

  static BandHeadParams create(SpectralBand band, int dim, const HeadOptions& options, std::uint64_t seed);

  std::string prefix() const;
  ParamRefs trainable_params();
  ParamRefs all_params();
  ConstParamRefs all_params() const;
};

/// Stage names of head_forward, in execution order.
const std::array<const char*, 6>& head_stage_order();

double band_dropout_rate(long long n_eff, const DropoutConstants& consts = {});

/// Inverted dropout. `mask` receives the per-entry multiplier when given.
Mat apply_dropout(const Mat& f, double p, Mode mode, std::uint64_t seed, Mat* mask = nullptr);

Mat spe_inject(const Mat& cls, const BandHeadParams& params, LayerNormCache* cache = nullptr);
Mat token_fuse(const Mat& cls_spe, const Mat& patches, const BandHeadParams& params);
Mat feature_normalize(const Mat& f, const Mat& mu, const Mat& sigma);

struct Classification {
  Mat logits;  // 1 x 2
  Mat probs;   // 1 x 2
  int pred = 1;
};

/// argmax over (bona fide, attack); an exact tie goes to attack.
int argmax_attack_on_tie(double p_bona, double p_attack);
Classification classify(const Mat& f_norm, const BandHeadParams& params);

struct HeadCache {
  LayerNormCache ln_spe;
  Mat concat;
  Mat mask;
  LayerNormCache ln_fuse;
  Mat f_norm;
  int n_patches = 0;
  bool valid = false;
};

struct HeadOutput {
  Mat features;  // normalised fused feature, 1 x d
  Classification cls;
};

HeadOutput head_forward(const TokenSequence& tokens, const BandHeadParams& params, Mode mode, std::uint64_t seed,
                        HeadCache* cache = nullptr);

/// Eval-mode fused feature after ln_fuse, before feature normalisation.
/// This is what the feature statistics are computed over.
Mat pre_norm_features(const TokenSequence& tokens, const BandHeadParams& params);

/// Gradient of the loss with respect to the logits and (optionally) the
/// normalised features; returns dL/d(tokens).
TokenSequence head_backward(const HeadCache& cache, const Mat& d_logits, const Mat& d_features,
                            BandHeadParams& params);

/// Re-expresses the classifier for new feature statistics so that logits are
/// unchanged: W' = W diag(new_sigma / old_sigma), b' = b + W (new_mu - old_mu) / old_sigma.
void fold_feature_stats(BandHeadParams& params, const Mat& new_mu, const Mat& new_sigma);

}  // namespace spectrapad
