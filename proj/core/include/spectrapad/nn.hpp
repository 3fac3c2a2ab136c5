#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "spectrapad/rng.hpp"

namespace spectrapad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable tensor and its gradient accumulator. Frozen parameters
/// never accumulate gradient.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool frozen = false;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  template <class Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (!frozen) grad += g;
  }
};

using ParamRefs = std::vector<Param*>;
using ConstParamRefs = std::vector<const Param*>;

void init_truncated_normal(Mat& m, Rng& rng, double sigma = 0.02);

/// y = x W^T + b, applied row-wise. W is out x in, b is 1 x out.
struct Linear {
  Param weight;
  Param bias;

  Linear() = default;
  Linear(const std::string& prefix, int in, int out);
  void init(Rng& rng, double sigma = 0.02);

  Mat forward(const Mat& x) const;
  /// Accumulates dW, db; returns dL/dx.
  Mat backward(const Mat& x, const Mat& dy);

  ParamRefs params() { return {&weight, &bias}; }
  ConstParamRefs params() const { return {&weight, &bias}; }
};

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

/// Row-wise LayerNorm, population variance, eps inside the square root.
struct LayerNorm {
  Param gamma;
  Param beta;

  LayerNorm() = default;
  LayerNorm(const std::string& prefix, int dim);

  Mat forward(const Mat& x, LayerNormCache* cache = nullptr) const;
  Mat backward(const LayerNormCache& cache, const Mat& dy);

  ParamRefs params() { return {&gamma, &beta}; }
  ConstParamRefs params() const { return {&gamma, &beta}; }
};

double gelu(double x);
double gelu_grad(double x);

struct AttentionCache {
  Mat x;
  Mat qkv;
  std::vector<Mat> probs;  // per head, n x n
  Mat ctx;
};

/// Multi-head scaled dot-product self-attention.
struct Attention {
  int heads = 1;
  Linear qkv;
  Linear proj;

  Attention() = default;
  Attention(const std::string& prefix, int dim, int heads);

  Mat forward(const Mat& x, AttentionCache* cache = nullptr) const;
  Mat backward(const AttentionCache& cache, const Mat& dy);

  ParamRefs params();
  ConstParamRefs params() const;
};

struct MlpCache {
  Mat x;
  Mat pre;
  Mat act;
};

struct Mlp {
  Linear fc1;
  Linear fc2;

  Mlp() = default;
  Mlp(const std::string& prefix, int dim, int hidden);

  Mat forward(const Mat& x, MlpCache* cache = nullptr) const;
  Mat backward(const MlpCache& cache, const Mat& dy);

  ParamRefs params();
  ConstParamRefs params() const;
};

struct BlockCache {
  LayerNormCache ln1;
  AttentionCache attn;
  LayerNormCache ln2;
  MlpCache mlp;
};

/// Pre-norm transformer block: x + Attn(LN(x)), then + MLP(LN(.)).
struct Block {
  LayerNorm norm1;
  Attention attn;
  LayerNorm norm2;
  Mlp mlp;

  Block() = default;
  Block(const std::string& prefix, int dim, int heads, int hidden);
  void init(Rng& rng);

  Mat forward(const Mat& x, BlockCache* cache = nullptr) const;
  Mat backward(const BlockCache& cache, const Mat& dy);

  ParamRefs params();
  ConstParamRefs params() const;
  void set_frozen(bool frozen);
};

/// Row-wise softmax.
Mat softmax_rows(const Mat& z);

}  // namespace spectrapad
