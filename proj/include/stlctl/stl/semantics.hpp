#pragma once
#include <span>

#include "stlctl/stl/formula.hpp"
#include "stlctl/stl/predicates.hpp"
#include "stlctl/tape.hpp"
#include "stlctl/trajectory.hpp"

namespace stlctl::stl {

// Boolean satisfaction of f over x_{t:T}. Requires T >= t + horizon(f).
bool eval_bool(const Formula& f, const PredicateRegistry& reg, const Trajectory& traj, int t);

// Exact quantitative robustness (min/max semantics). Positive implies
// satisfaction, negative violation. rho of 'true' is +infinity.
double robustness(const Formula& f, const PredicateRegistry& reg, const Trajectory& traj, int t);

struct SmoothRobustness {
  int node;       // tape node holding the smooth robustness scalar
  int max_arity;  // largest softmin/softmax reduction arity emitted
};

// Smooth robustness: the exact recursion with every min/max replaced by
// a temperature-beta softmin/softmax (log-sum-exp). `states` holds one
// tape node of shape {n_x} per time step 0..T. The result satisfies
// |smooth - exact| <= log(max_arity)/beta layer by layer.
SmoothRobustness smooth_robustness(ad::Tape& tape, const Formula& f, const PredicateRegistry& reg,
                                   std::span<const int> states, int t, double beta);

}  // namespace stlctl::stl
