#pragma once
#include <vector>

#include "stlctl/tensor.hpp"

namespace stlctl {

// Time-indexed state sequence x_0..x_T with a fixed state dimension.
struct Trajectory {
  std::vector<Vec> states;

  Trajectory() = default;
  explicit Trajectory(std::vector<Vec> s) : states(std::move(s)) {}

  int horizon() const { return static_cast<int>(states.size()) - 1; }

  int state_dim() const { return states.empty() ? 0 : static_cast<int>(states[0].size()); }

  void check_consistent() const {
    if (states.empty()) throw Error("trajectory must contain at least the initial state");
    for (const Vec& s : states)
      if (s.size() != states[0].size())
        throw Error("trajectory states must share one dimension");
  }
};

}  // namespace stlctl
