#include "stlctl/policy.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "stlctl/optim.hpp"
#include "stlctl/rng.hpp"
#include "stlctl/stl/semantics.hpp"

namespace stlctl {

namespace {

Tensor uniform_tensor(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

RnnPolicyWeights init_policy(CellType cell, int hidden, int state_dim, int input_dim,
                             const AffineNorm& state_norm, std::uint64_t seed) {
  if (hidden < 1) throw Error("init_policy: hidden width must be positive");
  Rng rng(seed);
  RnnPolicyWeights w;
  w.cell = cell;
  w.hidden = hidden;
  w.state_norm = state_norm;
  const std::size_t h = static_cast<std::size_t>(hidden);
  const std::size_t nx = static_cast<std::size_t>(state_dim);
  const std::size_t nu = static_cast<std::size_t>(input_dim);
  if (cell == CellType::Rnn) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h + nx));
    w.A = uniform_tensor({h, h}, bound, rng);
    w.B = uniform_tensor({h, nx}, bound, rng);
    w.bh = uniform_tensor({h}, bound, rng);
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h + nx));
    w.A = uniform_tensor({4 * h, h + nx}, bound, rng);
    w.bh = uniform_tensor({4 * h}, bound, rng);
    w.B = Tensor::zeros({0});
  }
  const double rbound = 1.0 / std::sqrt(static_cast<double>(h));
  w.C = uniform_tensor({nu, h}, rbound, rng);
  w.d = uniform_tensor({nu}, rbound, rng);
  return w;
}

namespace {

Vec mat_vec(const Tensor& W, const Vec& x) {
  const std::size_t rows = W.shape[0], cols = W.shape[1];
  Vec y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* wr = W.data.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
    y[r] = s;
  }
  return y;
}

double sigmoid(double x) { return 0.5 * (std::tanh(0.5 * x) + 1.0); }

// One plain cell update; h (and c for LSTM) updated in place.
void cell_step(const RnnPolicyWeights& w, Vec& h, Vec& c, const Vec& x_norm) {
  const std::size_t H = static_cast<std::size_t>(w.hidden);
  if (w.cell == CellType::Rnn) {
    Vec ah = mat_vec(w.A, h);
    Vec bx = mat_vec(w.B, x_norm);
    for (std::size_t i = 0; i < H; ++i) h[i] = std::tanh(ah[i] + bx[i] + w.bh.data[i]);
    return;
  }
  Vec z = h;
  z.insert(z.end(), x_norm.begin(), x_norm.end());
  Vec gates = mat_vec(w.A, z);
  for (std::size_t i = 0; i < gates.size(); ++i) gates[i] += w.bh.data[i];
  for (std::size_t i = 0; i < H; ++i) {
    const double ig = sigmoid(gates[i]);
    const double fg = sigmoid(gates[H + i]);
    const double og = sigmoid(gates[2 * H + i]);
    const double gg = std::tanh(gates[3 * H + i]);
    c[i] = fg * c[i] + ig * gg;
    h[i] = og * std::tanh(c[i]);
  }
}

}  // namespace

PolicyRollout policy_rollout(const RnnPolicyWeights& w, const SystemModel& model, const Vec& x0,
                             int T) {
  if (T < 1) throw Error("policy_rollout: T must be >= 1");
  if (w.absent) throw Error("policy_rollout: policy is absent (empty training cluster)");
  PolicyRollout out;
  out.trajectory.states.push_back(x0);
  Vec h(static_cast<std::size_t>(w.hidden), 0.0), c(static_cast<std::size_t>(w.hidden), 0.0);
  Vec x = x0;
  for (int k = 0; k < T; ++k) {
    cell_step(w, h, c, w.state_norm.apply(x));
    Vec raw = mat_vec(w.C, h);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += w.d.data[i];
    Vec u = saturate_output(raw, model.u_min(), model.u_max());
    x = model.step(x, u);
    for (double v : x)
      if (!std::isfinite(v))
        throw Error("policy_rollout: non-finite state at step " + std::to_string(k + 1));
    out.controls.push_back(std::move(u));
    out.trajectory.states.push_back(x);
  }
  return out;
}

namespace {

struct PolicyLeaves {
  int A = -1, B = -1, bh = -1, C = -1, d = -1;
};

PolicyLeaves policy_leaves(ad::Tape& t, const RnnPolicyWeights& w) {
  PolicyLeaves l;
  l.A = t.leaf(w.A);
  if (w.cell == CellType::Rnn) l.B = t.leaf(w.B);
  l.bh = t.leaf(w.bh);
  l.C = t.leaf(w.C);
  l.d = t.leaf(w.d);
  return l;
}

int sigmoid_tape(ad::Tape& t, int x) {
  return t.affine(t.tanh(t.affine(x, 0.5, 0.0)), 0.5, 0.5);
}

// Tape rollout mirroring policy_rollout; returns state node per step.
std::vector<int> rollout_tape(ad::Tape& t, const RnnPolicyWeights& w, const PolicyLeaves& l,
                              const SystemModel& model, const Vec& x0, int T,
                              std::vector<int>* control_nodes) {
  const int H = w.hidden;
  int h = t.constant(Tensor::zeros({static_cast<std::size_t>(H)}));
  int c = h;
  int x = t.constant(Tensor::vector(x0));
  std::vector<int> states{x};
  for (int k = 0; k < T; ++k) {
    int xn = w.state_norm.apply_tape(t, x);
    if (w.cell == CellType::Rnn) {
      h = t.tanh(t.add(t.add(t.matvec(l.A, h), t.matvec(l.B, xn)), l.bh));
    } else {
      int z = t.concat(h, xn);
      int gates = t.add(t.matvec(l.A, z), l.bh);
      int ig = sigmoid_tape(t, t.slice(gates, 0, H));
      int fg = sigmoid_tape(t, t.slice(gates, H, H));
      int og = sigmoid_tape(t, t.slice(gates, 2 * H, H));
      int gg = t.tanh(t.slice(gates, 3 * H, H));
      c = t.add(t.mul(fg, c), t.mul(ig, gg));
      h = t.mul(og, t.tanh(c));
    }
    int raw = t.add(t.matvec(l.C, h), l.d);
    int u = saturate_output_tape(t, raw, model.u_min(), model.u_max());
    if (control_nodes) control_nodes->push_back(u);
    x = model.step_tape(t, x, u);
    states.push_back(x);
  }
  return states;
}

}  // namespace

PolicyBatchResult policy_batch_loss(const RnnPolicyWeights& w, const SystemModel& model,
                                    const std::vector<InstancePair>& batch,
                                    const std::vector<const TaskInstance*>& tasks,
                                    const PolicyTrainConfig& cfg, ParamMap* grads) {
  if (batch.empty() || batch.size() != tasks.size())
    throw Error("policy_batch_loss: batch and tasks must be nonempty and aligned");
  const double bsize = static_cast<double>(batch.size());
  ad::Tape t;
  PolicyLeaves leaves = policy_leaves(t, w);
  int rho_acc = -1, cost_acc = -1;
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const auto& [x0, xi] = batch[bi];
    std::vector<int> control_nodes;
    std::vector<int> states = rollout_tape(t, w, leaves, model, x0, cfg.T, &control_nodes);
    auto sm = stl::smooth_robustness(t, *tasks[bi]->formula, tasks[bi]->registry, states, 0, cfg.beta);
    int cost = -1;
    for (int u : control_nodes) {
      int g = stage_cost_tape(t, u, cfg.R, cfg.cost_norm);
      cost = cost < 0 ? g : t.add(cost, g);
    }
    rho_acc = rho_acc < 0 ? sm.node : t.add(rho_acc, sm.node);
    cost_acc = cost_acc < 0 ? cost : t.add(cost_acc, cost);
  }
  int rho_mean = t.affine(rho_acc, 1.0 / bsize, 0.0);
  int cost_mean = t.affine(cost_acc, 1.0 / bsize, 0.0);
  // L_total = -L_robustness + gamma * L_control
  int loss = t.add(t.affine(rho_mean, -1.0, 0.0), t.affine(cost_mean, cfg.gamma, 0.0));
  PolicyBatchResult out{t.val(loss).value(), t.val(rho_mean).value(), t.val(cost_mean).value()};
  if (grads) {
    t.backward(loss);
    (*grads)["A"] = t.grad(leaves.A);
    if (w.cell == CellType::Rnn) (*grads)["B"] = t.grad(leaves.B);
    (*grads)["bh"] = t.grad(leaves.bh);
    (*grads)["C"] = t.grad(leaves.C);
    (*grads)["d"] = t.grad(leaves.d);
  }
  return out;
}

RnnPolicyWeights train_policy(const std::vector<InstancePair>& data, const SystemModel& model,
                              const TaskBuilder& build_task, const PolicyTrainConfig& cfg,
                              const AffineNorm& state_norm, std::uint64_t seed,
                              std::vector<PolicyEpochRow>* trace) {
  RnnPolicyWeights w = init_policy(cfg.cell, cfg.hidden, model.state_dim(), model.input_dim(),
                                   state_norm, derive_seed(seed, 0));
  return train_policy_from(std::move(w), data, model, build_task, cfg, seed, trace);
}

RnnPolicyWeights train_policy_from(RnnPolicyWeights w, const std::vector<InstancePair>& data,
                                   const SystemModel& model, const TaskBuilder& build_task,
                                   const PolicyTrainConfig& cfg, std::uint64_t seed,
                                   std::vector<PolicyEpochRow>* trace) {
  if (data.empty()) throw Error("train_policy: empty cluster dataset");
  Rng shuffle_rng(derive_seed(seed, 1));
  OptimizerState opt_state;

  // Formula and registry per instance, built once.
  std::vector<TaskInstance> tasks;
  tasks.reserve(data.size());
  for (const auto& [x0, xi] : data) tasks.push_back(build_task(xi));

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    PolicyTrainConfig epoch_cfg = cfg;
    double lr = cfg.lr;
    if (cfg.lr_decay != 1.0 && cfg.epochs > 1)
      lr = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch) / (cfg.epochs - 1));
    if (!cfg.beta_schedule.empty()) {
      // piecewise-constant annealing, last stage ends at the back entry
      const std::size_t stage = std::min(
          cfg.beta_schedule.size() - 1,
          static_cast<std::size_t>(epoch) * cfg.beta_schedule.size() / static_cast<std::size_t>(cfg.epochs));
      epoch_cfg.beta = cfg.beta_schedule[stage];
    }
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    double rho_sum = 0.0, cost_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      const double bsize = static_cast<double>(end - start);
      std::vector<InstancePair> batch;
      std::vector<const TaskInstance*> batch_tasks;
      for (std::size_t bi = start; bi < end; ++bi) {
        batch.push_back(data[order[bi]]);
        batch_tasks.push_back(&tasks[order[bi]]);
      }
      ParamMap params;
      params["A"] = w.A;
      if (w.cell == CellType::Rnn) params["B"] = w.B;
      params["bh"] = w.bh;
      params["C"] = w.C;
      params["d"] = w.d;
      ParamMap grads;
      PolicyBatchResult res = policy_batch_loss(w, model, batch, batch_tasks, epoch_cfg, &grads);
      if (!std::isfinite(res.loss))
        throw TrainError("train_policy: non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch starting " + std::to_string(start));
      rho_sum += res.rho_mean * bsize;
      cost_sum += res.cost_mean * bsize;
      adam_step(params, grads, opt_state, lr);
      w.A = params["A"];
      if (w.cell == CellType::Rnn) w.B = params["B"];
      w.bh = params["bh"];
      w.C = params["C"];
      w.d = params["d"];
    }
    if (trace) {
      const double n = static_cast<double>(data.size());
      double exact_sum = 0.0;
      int sat = 0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        auto ro = policy_rollout(w, model, data[i].first, cfg.T);
        const double rho = stl::robustness(*tasks[i].formula, tasks[i].registry, ro.trajectory, 0);
        exact_sum += rho;
        if (rho > 0.0) ++sat;
      }
      PolicyEpochRow row;
      row.epoch = epoch + 1;
      row.smooth_robustness = rho_sum / n;
      row.smooth_control = cost_sum / n;
      row.smooth_total = -row.smooth_robustness + cfg.gamma * row.smooth_control;
      row.exact_robustness = exact_sum / n;
      row.sat_rate = static_cast<double>(sat) / n;
      trace->push_back(row);
    }
  }
  return w;
}

ClusterDataset partition_dataset(const std::vector<InstancePair>& pairs,
                                 const ClassifierWeights& classifier) {
  ClusterDataset ds;
  ds.per_label.resize(static_cast<std::size_t>(classifier.n_c));
  for (const auto& p : pairs) {
    const int label = classify(classifier, p.first, p.second);
    ds.per_label[static_cast<std::size_t>(label - 1)].push_back(p);
  }
  ds.sizes.resize(ds.per_label.size());
  for (std::size_t i = 0; i < ds.per_label.size(); ++i)
    ds.sizes[i] = static_cast<int>(ds.per_label[i].size());
  return ds;
}

DispatchResult dispatch(const PolicyEnsemble& ensemble, const Vec& x0, const ObstacleSet& xi) {
  if (ensemble.policies.size() != static_cast<std::size_t>(ensemble.classifier.n_c))
    throw Error("dispatch: ensemble has " + std::to_string(ensemble.policies.size()) +
                " policies for " + std::to_string(ensemble.classifier.n_c) + " classes");
  const int label = classify(ensemble.classifier, x0, xi);
  const RnnPolicyWeights* chosen = &ensemble.policies[static_cast<std::size_t>(label - 1)];
  bool fallback = false;
  if (chosen->absent) {
    // Fall back to the policy of the largest trained cluster.
    int best = -1, best_size = -1;
    for (std::size_t i = 0; i < ensemble.policies.size(); ++i) {
      if (ensemble.policies[i].absent) continue;
      const int sz = i < ensemble.cluster_sizes.size() ? ensemble.cluster_sizes[i] : 0;
      if (sz > best_size) {
        best_size = sz;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) throw Error("dispatch: every policy in the ensemble is absent");
    chosen = &ensemble.policies[static_cast<std::size_t>(best)];
    fallback = true;
  }
  return {label, chosen, fallback};
}

std::string policy_to_json(const RnnPolicyWeights& w) {
  nlohmann::json j;
  j["version"] = 1;
  j["type"] = "rnn_policy";
  j["cell"] = w.cell == CellType::Rnn ? "rnn" : "lstm";
  j["hidden"] = w.hidden;
  j["absent"] = w.absent;
  j["state_norm"] = {{"lo", w.state_norm.lo}, {"hi", w.state_norm.hi}};
  if (!w.absent) {
    auto dump = [](const Tensor& t) {
      return nlohmann::json{{"shape", t.shape}, {"data", t.data}};
    };
    j["A"] = dump(w.A);
    j["B"] = dump(w.B);
    j["bh"] = dump(w.bh);
    j["C"] = dump(w.C);
    j["d"] = dump(w.d);
  }
  return j.dump(2);
}

RnnPolicyWeights policy_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("type") != "rnn_policy") throw ConfigError("not a policy weight file");
  RnnPolicyWeights w;
  w.cell = j.at("cell") == "rnn" ? CellType::Rnn : CellType::Lstm;
  w.hidden = j.at("hidden").get<int>();
  w.absent = j.at("absent").get<bool>();
  w.state_norm =
      AffineNorm(j.at("state_norm").at("lo").get<Vec>(), j.at("state_norm").at("hi").get<Vec>());
  if (w.absent) return w;
  auto load = [&](const char* key) {
    Tensor t;
    t.shape = j.at(key).at("shape").get<std::vector<std::size_t>>();
    t.data = j.at(key).at("data").get<Vec>();
    if (t.data.size() != t.count()) throw ConfigError("policy JSON: tensor data mismatch");
    return t;
  };
  w.A = load("A");
  w.B = load("B");
  w.bh = load("bh");
  w.C = load("C");
  w.d = load("d");
  return w;
}

}  // namespace stlctl
