#pragma once
#include <map>
#include <string>

#include "stlctl/tensor.hpp"

namespace stlctl {

using ParamMap = std::map<std::string, Tensor>;

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter first/second moment accumulators plus the step counter.
struct OptimizerState {
  ParamMap m;
  ParamMap v;
  long long step = 0;
};

// One optimizer step over a named parameter set. params and grads must
// share keys and shapes. Throws TrainError naming the parameter if a
// gradient contains NaN.
void adam_step(ParamMap& params, const ParamMap& grads, OptimizerState& state, double lr,
               const OptimizerConfig& cfg = {});

}  // namespace stlctl
