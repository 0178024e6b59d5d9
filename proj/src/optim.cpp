#include "stlctl/optim.hpp"

#include <cmath>

#include "stlctl/error.hpp"

namespace stlctl {

void adam_step(ParamMap& params, const ParamMap& grads, OptimizerState& state, double lr,
               const OptimizerConfig& cfg) {
  for (auto& [key, g] : grads) {
    for (double v : g.data)
      if (std::isnan(v)) throw TrainError("NaN gradient for parameter '" + key + "'");
  }
  if (cfg.kind == OptimizerKind::Sgd) {
    for (auto& [key, p] : params) {
      auto it = grads.find(key);
      if (it == grads.end()) throw TrainError("missing gradient for parameter '" + key + "'");
      if (it->second.data.size() != p.data.size())
        throw ShapeError("gradient shape mismatch for parameter '" + key + "'");
      for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] -= lr * it->second.data[i];
    }
    return;
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [key, p] : params) {
    auto it = grads.find(key);
    if (it == grads.end()) throw TrainError("missing gradient for parameter '" + key + "'");
    const Tensor& g = it->second;
    if (g.data.size() != p.data.size())
      throw ShapeError("gradient shape mismatch for parameter '" + key + "'");
    Tensor& m = state.m[key];
    Tensor& v = state.v[key];
    if (m.data.size() != p.data.size()) m = Tensor::zeros(p.shape);
    if (v.data.size() != p.data.size()) v = Tensor::zeros(p.shape);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

}  // namespace stlctl
