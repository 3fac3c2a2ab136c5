#pragma once

#include <vector>

#include "spectrapad/nn.hpp"

namespace spectrapad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 3e-4;  // L2 term added to the gradient
};

/// Adam with coupled L2 weight decay. Only non-frozen parameters move.
class Adam {
 public:
  Adam(ParamRefs params, AdamConfig config);

  void step();
  void zero_grad();
  long long steps() const { return t_; }

 private:
  ParamRefs params_;
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  long long t_ = 0;
};

}  // namespace spectrapad
