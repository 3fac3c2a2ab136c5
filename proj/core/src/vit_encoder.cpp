#include "spectrapad/vit_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectrapad/error.hpp"
#include "spectrapad/rng.hpp"

namespace spectrapad {

void ViTConfig::validate() const {
  require(patch_size >= 1 && image_side >= patch_size && image_side % patch_size == 0, ErrorKind::kConfig,
          "model: image_side must be a positive multiple of patch_size");
  require(embed_dim >= 1 && heads >= 1 && embed_dim % heads == 0, ErrorKind::kConfig,
          "model: embed_dim must be divisible by heads");
  require(depth >= 1, ErrorKind::kConfig, "model: depth must be at least 1");
  require(trainable_last_blocks >= 0 && trainable_last_blocks <= depth, ErrorKind::kConfig,
          "model: trainable_last_blocks must lie in [0, depth]");
  require(mlp_ratio > 0.0, ErrorKind::kConfig, "model: mlp_ratio must be positive");
}

int ViTConfig::hidden_dim() const {
  return std::max(1, static_cast<int>(std::lround(mlp_ratio * embed_dim)));
}

ViTParams ViTParams::create(const ViTConfig& config, BandSet bands, std::uint64_t seed) {
  config.validate();
  const int d = config.embed_dim;
  ViTParams p;
  p.config = config;
  p.patch_proj = Linear("embed.patch_proj", config.patch_dim(), d);
  p.cls_token = Param("embed.cls_token", 1, d);
  p.pos_embed = Param("embed.pos_embed", config.num_patches() + 1, d);

  Rng rng(stream_seed(seed, "init", 0));
  p.patch_proj.init(rng);
  init_truncated_normal(p.pos_embed.value, rng);
  for (auto* t : p.patch_proj.params()) t->frozen = true;
  p.cls_token.frozen = true;
  p.pos_embed.frozen = true;

  for (int i = 0; i < config.trunk_depth(); ++i) {
    Block b("trunk.block" + std::to_string(i), d, config.heads, config.hidden_dim());
    b.init(rng);
    b.set_frozen(true);
    p.trunk.push_back(std::move(b));
  }
  // Every band starts from its own draw so that no two bands alias.
  for (SpectralBand band : bands.bands()) {
    Rng band_rng(stream_seed(seed, "init", 1, static_cast<std::uint64_t>(wavelength_nm(band))));
    std::vector<Block> blocks;
    for (int i = config.trunk_depth(); i < config.depth; ++i) {
      Block b("band" + std::to_string(wavelength_nm(band)) + ".block" + std::to_string(i), d, config.heads,
              config.hidden_dim());
      b.init(band_rng);
      blocks.push_back(std::move(b));
    }
    p.band_blocks.emplace(band, std::move(blocks));
  }
  return p;
}

const std::vector<Block>& ViTParams::blocks_for(SpectralBand band) const {
  auto it = band_blocks.find(band);
  if (it == band_blocks.end()) fail(ErrorKind::kConfig, "encoder has no blocks for band " + band_name(band));
  return it->second;
}

std::vector<Block>& ViTParams::blocks_for(SpectralBand band) {
  auto it = band_blocks.find(band);
  if (it == band_blocks.end()) fail(ErrorKind::kConfig, "encoder has no blocks for band " + band_name(band));
  return it->second;
}

ParamRefs ViTParams::all_params() {
  ParamRefs out{&patch_proj.weight, &patch_proj.bias, &cls_token, &pos_embed};
  for (auto& b : trunk)
    for (auto* t : b.params()) out.push_back(t);
  for (auto& [band, blocks] : band_blocks)
    for (auto& b : blocks)
      for (auto* t : b.params()) out.push_back(t);
  return out;
}

ConstParamRefs ViTParams::all_params() const {
  ConstParamRefs out{&patch_proj.weight, &patch_proj.bias, &cls_token, &pos_embed};
  for (const auto& b : trunk)
    for (const auto* t : b.params()) out.push_back(t);
  for (const auto& [band, blocks] : band_blocks)
    for (const auto& b : blocks)
      for (const auto* t : b.params()) out.push_back(t);
  return out;
}

ParamRefs ViTParams::band_params(SpectralBand band) {
  ParamRefs out;
  for (auto& b : blocks_for(band))
    for (auto* t : b.params()) out.push_back(t);
  return out;
}

Mat extract_patches(const ModelInput& input, int patch_size) {
  require(patch_size >= 1 && input.side % patch_size == 0, ErrorKind::kDimension,
          "input side is not a multiple of the patch size");
  const int g = input.side / patch_size;
  const int pp = patch_size * patch_size;
  Mat patches(g * g, 3 * pp);
  for (int gr = 0; gr < g; ++gr)
    for (int gc = 0; gc < g; ++gc) {
      const int n = gr * g + gc;
      for (int c = 0; c < 3; ++c)
        for (int r = 0; r < patch_size; ++r)
          for (int q = 0; q < patch_size; ++q)
            patches(n, c * pp + r * patch_size + q) = input.at(c, gr * patch_size + r, gc * patch_size + q);
    }
  return patches;
}

TokenSequence patch_embed(const Mat& patches, const ViTParams& params) {
  const ViTConfig& cfg = params.config;
  require(patches.rows() == cfg.num_patches() && patches.cols() == cfg.patch_dim(), ErrorKind::kDimension,
          "patch matrix shape does not match the model");
  TokenSequence seq(cfg.num_patches() + 1, cfg.embed_dim);
  seq.row(0) = params.cls_token.value.row(0);
  seq.bottomRows(cfg.num_patches()) = params.patch_proj.forward(patches);
  seq += params.pos_embed.value;
  return seq;
}

TokenSequence patch_embed(const ModelInput& input, const ViTParams& params) {
  require(input.side == params.config.image_side &&
              input.data.size() == 3u * static_cast<std::size_t>(input.side) * input.side,
          ErrorKind::kDimension,
          "model input side " + std::to_string(input.side) + " does not match image_side " +
              std::to_string(params.config.image_side));
  return patch_embed(extract_patches(input, params.config.patch_size), params);
}

TokenSequence encode_trunk(const TokenSequence& seq, const ViTParams& params) {
  require(seq.cols() == params.config.embed_dim, ErrorKind::kDimension, "token width does not match embed_dim");
  TokenSequence x = seq;
  for (const auto& b : params.trunk) x = b.forward(x);
  return x;
}

TokenSequence encode_band(const TokenSequence& trunk_out, const ViTParams& params, SpectralBand band,
                          EncoderCache* cache) {
  const auto& blocks = params.blocks_for(band);
  require(trunk_out.cols() == params.config.embed_dim, ErrorKind::kDimension,
          "token width does not match embed_dim");
  if (cache) {
    cache->first_block = params.config.trunk_depth();
    cache->blocks.assign(blocks.size(), BlockCache{});
  }
  TokenSequence x = trunk_out;
  for (std::size_t i = 0; i < blocks.size(); ++i) x = blocks[i].forward(x, cache ? &cache->blocks[i] : nullptr);
  return x;
}

TokenSequence encode(const TokenSequence& seq, const ViTParams& params, SpectralBand band, EncoderCache* cache) {
  const auto& blocks = params.blocks_for(band);
  require(seq.cols() == params.config.embed_dim, ErrorKind::kDimension, "token width does not match embed_dim");
  if (!cache) return encode_band(encode_trunk(seq, params), params, band);
  cache->first_block = 0;
  cache->blocks.assign(params.trunk.size() + blocks.size(), BlockCache{});
  TokenSequence x = seq;
  std::size_t k = 0;
  for (const auto& b : params.trunk) x = b.forward(x, &cache->blocks[k++]);
  for (const auto& b : blocks) x = b.forward(x, &cache->blocks[k++]);
  return x;
}

TokenSequence backward(const TokenSequence& seq_grad, const EncoderCache& cache, ViTParams& params,
                       SpectralBand band) {
  auto& blocks = params.blocks_for(band);
  const int trunk_depth = params.config.trunk_depth();
  const int n_cached = static_cast<int>(cache.blocks.size());
  require(n_cached > 0 && cache.first_block + n_cached == params.config.depth, ErrorKind::kState,
          "backward called without a matching forward cache");
  TokenSequence g = seq_grad;
  for (int i = params.config.depth - 1; i >= cache.first_block; --i) {
    const BlockCache& c = cache.blocks[static_cast<std::size_t>(i - cache.first_block)];
    Block& b = i >= trunk_depth ? blocks[static_cast<std::size_t>(i - trunk_depth)]
                                : params.trunk[static_cast<std::size_t>(i)];
    g = b.backward(c, g);
  }
  return g;
}

int import_named_tensors(ViTParams& params, const std::map<std::string, Mat>& tensors) {
  std::map<std::string, Param*> by_name;
  for (auto* p : params.all_params()) by_name.emplace(p->name, p);
  int count = 0;
  for (const auto& [name, value] : tensors) {
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorKind::kCompatibility, "import: unknown tensor '" + name + "'");
    Param& p = *it->second;
    if (value.rows() != p.value.rows() || value.cols() != p.value.cols())
      fail(ErrorKind::kCompatibility, "import: shape mismatch for '" + name + "'");
    p.value = value;
    ++count;
  }
  return count;
}

double grad_check(const ParamRefs& params, const std::function<double()>& loss,
                  const std::function<void()>& loss_and_backward, std::uint64_t seed, int max_entries,
                  double step) {
  for (auto* p : params) p->zero_grad();
  loss_and_backward();
  double worst = 0.0;
  Rng rng(stream_seed(seed, "gradcheck"));
  for (auto* p : params) {
    if (p->frozen) continue;
    const Eigen::Index n = p->value.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    if (max_entries > 0 && n > max_entries) {
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(static_cast<std::size_t>(max_entries));
    }
    for (Eigen::Index i : idx) {
      double& v = p->value.data()[i];
      const double saved = v;
      v = saved + step;
      const double up = loss();
      v = saved - step;
      const double down = loss();
      v = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad.data()[i];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-8));
    }
  }
  return worst;
}

}  // namespace spectrapad
