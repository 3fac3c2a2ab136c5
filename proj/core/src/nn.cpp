#include "spectrapad/nn.hpp"

#include <cmath>
#include <numbers>

#include "spectrapad/error.hpp"

namespace spectrapad {

void init_truncated_normal(Mat& m, Rng& rng, double sigma) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.truncated_normal(sigma);
}

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& prefix, int in, int out)
    : weight(prefix + ".weight", out, in), bias(prefix + ".bias", 1, out) {}

void Linear::init(Rng& rng, double sigma) {
  init_truncated_normal(weight.value, rng, sigma);
  bias.value.setZero();
}

Mat Linear::forward(const Mat& x) const {
  require(x.cols() == weight.value.cols(), ErrorKind::kDimension,
          weight.name + ": input has " + std::to_string(x.cols()) + " columns, expected " +
              std::to_string(weight.value.cols()));
  Mat y = x * weight.value.transpose();
  y.rowwise() += bias.value.row(0);
  return y;
}

Mat Linear::backward(const Mat& x, const Mat& dy) {
  if (!weight.frozen) weight.grad.noalias() += dy.transpose() * x;
  bias.accumulate(dy.colwise().sum());
  return dy * weight.value;
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(const std::string& prefix, int dim) : gamma(prefix + ".weight", 1, dim), beta(prefix + ".bias", 1, dim) {
  gamma.value.setOnes();
}

Mat LayerNorm::forward(const Mat& x, LayerNormCache* cache) const {
  const Eigen::Index n = x.rows(), d = x.cols();
  require(d == gamma.value.cols(), ErrorKind::kDimension, gamma.name + ": dimension mismatch");
  Mat xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Mat y = xhat.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Mat LayerNorm::backward(const LayerNormCache& cache, const Mat& dy) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  if (!gamma.frozen) gamma.grad += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  beta.accumulate(dy.colwise().sum());
  Mat dx(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::RowVectorXd dxhat = (dy.row(r).array() * gamma.value.row(0).array()).matrix();
    const double s1 = dxhat.sum();
    const double s2 = dxhat.dot(cache.xhat.row(r));
    dx.row(r) = (cache.inv_std(r) / static_cast<double>(d)) *
                (static_cast<double>(d) * dxhat.array() - s1 - cache.xhat.row(r).array() * s2).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------- GELU

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Mat softmax_rows(const Mat& z) {
  Mat p(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    p.row(r) = (z.row(r).array() - m).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

// ---------------------------------------------------------------- Attention

Attention::Attention(const std::string& prefix, int dim, int h)
    : heads(h), qkv(prefix + ".qkv", dim, 3 * dim), proj(prefix + ".proj", dim, dim) {
  require(h >= 1 && dim % h == 0, ErrorKind::kConfig, "attention: dim must be divisible by heads");
}

ParamRefs Attention::params() { return {&qkv.weight, &qkv.bias, &proj.weight, &proj.bias}; }
ConstParamRefs Attention::params() const { return {&qkv.weight, &qkv.bias, &proj.weight, &proj.bias}; }

Mat Attention::forward(const Mat& x, AttentionCache* cache) const {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = proj.weight.value.rows();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat qkv_out = qkv.forward(x);
  Mat ctx(n, d);
  if (cache) cache->probs.resize(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const auto q = qkv_out.middleCols(h * dh, dh);
    const auto k = qkv_out.middleCols(d + h * dh, dh);
    const auto v = qkv_out.middleCols(2 * d + h * dh, dh);
    Mat probs = softmax_rows((q * k.transpose()) * scale);
    ctx.middleCols(h * dh, dh).noalias() = probs * v;
    if (cache) cache->probs[static_cast<std::size_t>(h)] = std::move(probs);
  }
  Mat out = proj.forward(ctx);
  if (cache) {
    cache->x = x;
    cache->qkv = std::move(qkv_out);
    cache->ctx = std::move(ctx);
  }
  return out;
}

Mat Attention::backward(const AttentionCache& cache, const Mat& dy) {
  const Eigen::Index n = cache.x.rows();
  const Eigen::Index d = proj.weight.value.rows();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat dctx = proj.backward(cache.ctx, dy);
  Mat dqkv(n, 3 * d);
  for (int h = 0; h < heads; ++h) {
    const auto q = cache.qkv.middleCols(h * dh, dh);
    const auto k = cache.qkv.middleCols(d + h * dh, dh);
    const auto v = cache.qkv.middleCols(2 * d + h * dh, dh);
    const Mat& p = cache.probs[static_cast<std::size_t>(h)];
    const auto dout = dctx.middleCols(h * dh, dh);
    const Mat dp = dout * v.transpose();
    dqkv.middleCols(2 * d + h * dh, dh).noalias() = p.transpose() * dout;
    Mat ds = p.array() * (dp.array().colwise() - (dp.array() * p.array()).rowwise().sum());
    ds *= scale;
    dqkv.middleCols(h * dh, dh).noalias() = ds * k;
    dqkv.middleCols(d + h * dh, dh).noalias() = ds.transpose() * q;
  }
  return qkv.backward(cache.x, dqkv);
}

// ---------------------------------------------------------------- MLP

Mlp::Mlp(const std::string& prefix, int dim, int hidden) : fc1(prefix + ".fc1", dim, hidden), fc2(prefix + ".fc2", hidden, dim) {}

ParamRefs Mlp::params() { return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias}; }
ConstParamRefs Mlp::params() const { return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias}; }

Mat Mlp::forward(const Mat& x, MlpCache* cache) const {
  Mat pre = fc1.forward(x);
  Mat act = pre.unaryExpr([](double v) { return gelu(v); });
  Mat out = fc2.forward(act);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return out;
}

Mat Mlp::backward(const MlpCache& cache, const Mat& dy) {
  const Mat dact = fc2.backward(cache.act, dy);
  const Mat dpre = dact.array() * cache.pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  return fc1.backward(cache.x, dpre);
}

// ---------------------------------------------------------------- Block

Block::Block(const std::string& prefix, int dim, int heads, int hidden)
    : norm1(prefix + ".norm1", dim),
      attn(prefix + ".attn", dim, heads),
      norm2(prefix + ".norm2", dim),
      mlp(prefix + ".mlp", dim, hidden) {}

void Block::init(Rng& rng) {
  attn.qkv.init(rng);
  attn.proj.init(rng);
  mlp.fc1.init(rng);
  mlp.fc2.init(rng);
}

ParamRefs Block::params() {
  ParamRefs out = norm1.params();
  for (auto* p : attn.params()) out.push_back(p);
  for (auto* p : norm2.params()) out.push_back(p);
  for (auto* p : mlp.params()) out.push_back(p);
  return out;
}

ConstParamRefs Block::params() const {
  ConstParamRefs out = norm1.params();
  for (auto* p : attn.params()) out.push_back(p);
  for (auto* p : norm2.params()) out.push_back(p);
  for (auto* p : mlp.params()) out.push_back(p);
  return out;
}

void Block::set_frozen(bool frozen) {
  for (auto* p : params()) p->frozen = frozen;
}

Mat Block::forward(const Mat& x, BlockCache* cache) const {
  Mat x1 = x + attn.forward(norm1.forward(x, cache ? &cache->ln1 : nullptr), cache ? &cache->attn : nullptr);
  Mat out = x1 + mlp.forward(norm2.forward(x1, cache ? &cache->ln2 : nullptr), cache ? &cache->mlp : nullptr);
  return out;
}

Mat Block::backward(const BlockCache& cache, const Mat& dy) {
  const Mat dx1 = dy + norm2.backward(cache.ln2, mlp.backward(cache.mlp, dy));
  return dx1 + norm1.backward(cache.ln1, attn.backward(cache.attn, dx1));
}

}  // namespace spectrapad
