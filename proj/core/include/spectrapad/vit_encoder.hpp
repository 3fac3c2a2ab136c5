#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "spectrapad/band.hpp"
#include "spectrapad/nn.hpp"
#include "spectrapad/spectral_data.hpp"

namespace spectrapad {

struct ViTConfig {
  int image_side = 32;
  int patch_size = 4;
  int embed_dim = 64;
  int depth = 4;
  int heads = 4;
  double mlp_ratio = 4.0;
  int trainable_last_blocks = 1;

  void validate() const;
  int grid() const { return image_side / patch_size; }
  int num_patches() const { return grid() * grid(); }
  int patch_dim() const { return 3 * patch_size * patch_size; }
  int hidden_dim() const;
  int trunk_depth() const { return depth - trainable_last_blocks; }
};

/// Row 0 is CLS, rows 1..N are patch tokens.
using TokenSequence = Mat;

/// Embedding, frozen trunk blocks and one independent stack of trainable
/// final blocks per band.
struct ViTParams {
  ViTConfig config;
  Linear patch_proj;
  Param cls_token;
  Param pos_embed;
  std::vector<Block> trunk;
  std::map<SpectralBand, std::vector<Block>> band_blocks;

  static ViTParams create(const ViTConfig& config, BandSet bands, std::uint64_t seed);

  const std::vector<Block>& blocks_for(SpectralBand band) const;
  std::vector<Block>& blocks_for(SpectralBand band);

  ParamRefs all_params();
  ConstParamRefs all_params() const;
  ParamRefs band_params(SpectralBand band);
};

/// Non-overlapping P x P patches, channel-major within each patch: N x 3P².
Mat extract_patches(const ModelInput& input, int patch_size);

TokenSequence patch_embed(const ModelInput& input, const ViTParams& params);
TokenSequence patch_embed(const Mat& patches, const ViTParams& params);

struct EncoderCache {
  int first_block = 0;
  std::vector<BlockCache> blocks;
};

/// Trunk blocks only (frozen part); no cache.
TokenSequence encode_trunk(const TokenSequence& seq, const ViTParams& params);

/// Band-specific final blocks on a trunk output. Caches activations if asked.
TokenSequence encode_band(const TokenSequence& trunk_out, const ViTParams& params, SpectralBand band,
                          EncoderCache* cache = nullptr);

/// Full stack. With a cache, every block's activations are kept so that
/// backward can reach the input sequence.
TokenSequence encode(const TokenSequence& seq, const ViTParams& params, SpectralBand band,
                     EncoderCache* cache = nullptr);

/// Accumulates gradients into the band's trainable blocks (and into trunk
/// tensors only if they are not frozen) and returns dL/d(input sequence) of
/// the first cached block.
TokenSequence backward(const TokenSequence& seq_grad, const EncoderCache& cache, ViTParams& params,
                       SpectralBand band);

/// Overwrites parameters from externally supplied named tensors. Unknown
/// names or shape mismatches raise a compatibility error. Returns the number
/// of tensors imported.
int import_named_tensors(ViTParams& params, const std::map<std::string, Mat>& tensors);

/// Central finite-difference check of analytic gradients. `loss` must be a
/// pure function of the parameters; `loss_and_backward` must accumulate
/// gradients into zeroed Param::grad. Frozen tensors are skipped. Up to
/// `max_entries` entries per tensor are probed, chosen with `seed` (0 = all).
/// Returns the maximum of
/// |analytic - numeric| / max(|numeric|, 1e-8).
double grad_check(const ParamRefs& params, const std::function<double()>& loss,
                  const std::function<void()>& loss_and_backward, std::uint64_t seed = 0, int max_entries = 0,
                  double step = 1e-4);

}  // namespace spectrapad
