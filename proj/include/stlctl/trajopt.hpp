#pragma once
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "stlctl/dynamics.hpp"
#include "stlctl/stl/semantics.hpp"

namespace stlctl {

// One obstacle parameter vector [cx, cy, r].
using ObstacleSet = std::vector<Vec>;

// Appends one inside-margin predicate per obstacle to the registry and
// conjoins psi with G_{[0,T]} not(obstacle_i) avoidance clauses. An
// empty obstacle set returns psi unchanged.
stl::FormulaPtr build_phi_xi(const stl::FormulaPtr& psi, const ObstacleSet& xi, int T,
                             stl::PredicateRegistry& registry);

struct TrajOptOptions {
  Vec beta_schedule = {2.0, 10.0, 50.0};  // strictly increasing temperatures
  int iters_per_stage = 400;
  int restarts = 5;
  double lr = 0.1;
  double init_range = 0.5;  // raw controls start uniform(-r, r)
};

// Per-instance open-loop problem: maximize smooth STL robustness minus
// gamma * control cost over raw (pre-saturation) controls.
struct InstanceProblem {
  const SystemModel* model = nullptr;
  const stl::PredicateRegistry* registry = nullptr;
  stl::FormulaPtr formula;  // phi_Xi, horizon <= T
  Vec x0;
  ObstacleSet obstacles;
  int T = 0;
  double gamma = 0.01;
  Tensor R;
  CostNorm cost_norm = CostNorm::Quadratic;
  TrajOptOptions opts;
};

struct OptimalTrajectoryRecord {
  int n = 0;
  std::uint64_t seed = 0;
  Vec x0;
  ObstacleSet obstacles;
  std::vector<Vec> controls;
  Trajectory trajectory;
  double robustness = 0.0;  // exact semantics, recomputed from the rollout
  double objective = 0.0;   // -robustness + gamma * sum stage costs
  bool feasible = false;    // robustness > 0
  bool solver_failed = false;
  // Best exact objective after each annealing stage of the best
  // restart; non-increasing by best-so-far bookkeeping. Not serialized.
  std::vector<double> stage_best;
};

// Best-of-restarts smooth-robustness ascent, deterministic given seed.
// Restart r uses derive_seed(seed, r). A restart whose loss or gradient
// turns NaN is abandoned; if every restart fails the record comes back
// with solver_failed set.
OptimalTrajectoryRecord solve_instance(const InstanceProblem& problem, std::uint64_t seed);

// JSON-lines persistence (one record per line).
void write_records(std::ostream& os, const std::vector<OptimalTrajectoryRecord>& records);
std::vector<OptimalTrajectoryRecord> read_records(std::istream& is);

}  // namespace stlctl
