#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stlctl/classifier.hpp"
#include "stlctl/dynamics.hpp"
#include "stlctl/norm.hpp"
#include "stlctl/trajopt.hpp"

namespace stlctl {

enum class CellType { Rnn, Lstm };

// Recurrent control policy: h_k = cell(h_{k-1}, x_k_normalized),
// u_k = saturate(C h_k + d). The saturating output keeps every control
// strictly inside (u_min, u_max) for arbitrary weights.
struct RnnPolicyWeights {
  CellType cell = CellType::Rnn;
  int hidden = 32;
  AffineNorm state_norm;
  // Rnn: h = tanh(A h + B x + bh). Lstm: gates = G [h; x] + bg with
  // i,f,o,g stacked in that order (A=G, bh=bg, B unused).
  Tensor A, B, bh;
  Tensor C, d;  // readout
  bool absent = false;  // placeholder for an empty training cluster
};

RnnPolicyWeights init_policy(CellType cell, int hidden, int state_dim, int input_dim,
                             const AffineNorm& state_norm, std::uint64_t seed);

struct PolicyRollout {
  Trajectory trajectory;
  std::vector<Vec> controls;
};

// Closed-loop rollout for T steps from x0 with h_{-1} = 0. Throws on a
// non-finite state, naming the step.
PolicyRollout policy_rollout(const RnnPolicyWeights& w, const SystemModel& model, const Vec& x0,
                             int T);

// Per-instance task: obstacle-specific formula plus its registry.
struct TaskInstance {
  stl::PredicateRegistry registry;
  stl::FormulaPtr formula;
};
using TaskBuilder = std::function<TaskInstance(const ObstacleSet&)>;

using InstancePair = std::pair<Vec, ObstacleSet>;

struct PolicyTrainConfig {
  int epochs = 30;
  int batch = 8;
  double lr = 0.01;
  // Learning-rate multiplier reached at the final epoch (geometric
  // interpolation from lr; 1.0 keeps the rate constant).
  double lr_decay = 1.0;
  double gamma = 0.01;  // control-cost weight
  double beta = 10.0;   // smooth robustness temperature
  // Optional annealing: temperatures spread evenly over the epochs,
  // ending at the last entry (overrides `beta` while active). An empty
  // schedule trains at constant `beta`.
  Vec beta_schedule;
  int T = 25;
  Tensor R;
  CostNorm cost_norm = CostNorm::Quadratic;
  CellType cell = CellType::Rnn;
  int hidden = 32;
};

struct PolicyEpochRow {
  int epoch;
  double smooth_robustness;  // epoch mean of smooth rho
  double smooth_control;     // epoch mean of summed stage costs
  double smooth_total;       // -robustness + gamma * control
  double exact_robustness;   // mean exact rho after the epoch
  double sat_rate;           // fraction with exact rho > 0
};

struct PolicyBatchResult {
  double loss;       // -rho_mean + gamma * cost_mean
  double rho_mean;   // batch mean smooth robustness
  double cost_mean;  // batch mean summed stage cost
};

// Builds the BPTT loss of one batch on a fresh tape and optionally
// returns d(loss)/d(weights) under the keys A, B, bh, C, d. This is the
// exact quantity train_policy descends on.
PolicyBatchResult policy_batch_loss(const RnnPolicyWeights& w, const SystemModel& model,
                                    const std::vector<InstancePair>& batch,
                                    const std::vector<const TaskInstance*>& tasks,
                                    const PolicyTrainConfig& cfg, ParamMap* grads = nullptr);

// BPTT over the full rollout: gradients flow through both the dynamics
// chain and the smooth robustness graph. Deterministic given seed.
RnnPolicyWeights train_policy(const std::vector<InstancePair>& data, const SystemModel& model,
                              const TaskBuilder& build_task, const PolicyTrainConfig& cfg,
                              const AffineNorm& state_norm, std::uint64_t seed,
                              std::vector<PolicyEpochRow>* trace = nullptr);

// Same loop warm-started from given weights (seed drives batching only).
RnnPolicyWeights train_policy_from(RnnPolicyWeights initial, const std::vector<InstancePair>& data,
                                   const SystemModel& model, const TaskBuilder& build_task,
                                   const PolicyTrainConfig& cfg, std::uint64_t seed,
                                   std::vector<PolicyEpochRow>* trace = nullptr);

// Splits pairs by predicted label, preserving input order per label.
struct ClusterDataset {
  std::vector<std::vector<InstancePair>> per_label;  // index 0 = label 1
  std::vector<int> sizes;
};
ClusterDataset partition_dataset(const std::vector<InstancePair>& pairs,
                                 const ClassifierWeights& classifier);

struct PolicyEnsemble {
  ClassifierWeights classifier;
  std::vector<RnnPolicyWeights> policies;  // one per label
  std::vector<int> cluster_sizes;          // training-set sizes per label
};

struct DispatchResult {
  int label;  // predicted label (1-based)
  const RnnPolicyWeights* policy;
  bool fallback;  // label's policy was absent; largest cluster used
};

DispatchResult dispatch(const PolicyEnsemble& ensemble, const Vec& x0, const ObstacleSet& xi);

std::string policy_to_json(const RnnPolicyWeights& w);
RnnPolicyWeights policy_from_json(const std::string& text);

}  // namespace stlctl
