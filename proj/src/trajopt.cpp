#include "stlctl/trajopt.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include <json.hpp>

#include "stlctl/optim.hpp"
#include "stlctl/rng.hpp"

namespace stlctl {

stl::FormulaPtr build_phi_xi(const stl::FormulaPtr& psi, const ObstacleSet& xi, int T,
                             stl::PredicateRegistry& registry) {
  if (xi.empty()) return psi;
  std::vector<stl::FormulaPtr> parts{psi};
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const Vec& p = xi[i];
    if (p.size() != 3) throw Error("obstacle parameter vector must be [cx, cy, r]");
    const std::string name = "obs" + std::to_string(i + 1);
    int id = registry.find(name);
    if (id < 0) id = registry.add(stl::circle_inside(name, 0, 1, p[0], p[1], p[2]));
    parts.push_back(stl::make_always(stl::make_not(stl::make_pred(id)), 0, T));
  }
  return stl::make_and(std::move(parts));
}

namespace {

struct Candidate {
  double objective = std::numeric_limits<double>::infinity();
  double robustness = 0.0;
  std::vector<Vec> controls;
};

// Exact objective of the saturated controls read off the tape states.
double exact_objective(const InstanceProblem& p, const Trajectory& traj,
                       const std::vector<Vec>& controls, double* rho_out) {
  double rho = stl::robustness(*p.formula, *p.registry, traj, 0);
  double cost = 0.0;
  for (const Vec& u : controls) cost += stage_cost(u, p.R, p.cost_norm);
  if (rho_out) *rho_out = rho;
  return -rho + p.gamma * cost;
}

}  // namespace

OptimalTrajectoryRecord solve_instance(const InstanceProblem& p, std::uint64_t seed) {
  if (!p.model || !p.registry || !p.formula) throw Error("solve_instance: incomplete problem");
  if (p.T < 1) throw Error("solve_instance: horizon must be at least 1");
  if (stl::horizon(*p.formula) > p.T)
    throw Error("solve_instance: formula horizon exceeds trajectory horizon");
  if (!(p.gamma >= 0.0)) throw Error("solve_instance: gamma must be nonnegative");
  for (std::size_t i = 1; i < p.opts.beta_schedule.size(); ++i)
    if (!(p.opts.beta_schedule[i] > p.opts.beta_schedule[i - 1]))
      throw Error("solve_instance: beta schedule must be strictly increasing");

  const int nu = p.model->input_dim();
  const int T = p.T;
  const std::size_t dof = static_cast<std::size_t>(T * nu);

  Candidate best;
  std::vector<double> best_stage_trace;
  bool any_ok = false;

  for (int restart = 0; restart < p.opts.restarts; ++restart) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(restart)));
    Tensor raw = Tensor::zeros({dof});
    for (double& v : raw.data) v = rng.uniform(-p.opts.init_range, p.opts.init_range);

    bool diverged = false;
    std::vector<double> stage_trace;
    Candidate restart_best;

    for (double beta : p.opts.beta_schedule) {
      // Static graph per annealing stage: leaf raw controls, saturated
      // per-step slices, rollout, smooth robustness, control cost.
      ad::Tape tape;
      int raw_leaf = tape.leaf(raw);
      std::vector<int> control_nodes;
      std::vector<int> state_nodes;
      int x = tape.leaf(Tensor::vector(p.x0));
      state_nodes.push_back(x);
      int cost_acc = -1;
      for (int k = 0; k < T; ++k) {
        int u = saturate_output_tape(tape, tape.slice(raw_leaf, k * nu, nu), p.model->u_min(),
                                     p.model->u_max());
        control_nodes.push_back(u);
        int g = stage_cost_tape(tape, u, p.R, p.cost_norm);
        cost_acc = (cost_acc < 0) ? g : tape.add(cost_acc, g);
        x = p.model->step_tape(tape, x, u);
        state_nodes.push_back(x);
      }
      auto smooth = stl::smooth_robustness(tape, *p.formula, *p.registry, state_nodes, 0, beta);
      int loss = tape.add(tape.affine(smooth.node, -1.0, 0.0), tape.affine(cost_acc, p.gamma, 0.0));

      ParamMap params{{"raw", raw}};
      ParamMap grads;
      OptimizerState opt_state;

      for (int iter = 0; iter < p.opts.iters_per_stage; ++iter) {
        tape.set_leaf(raw_leaf, params["raw"]);
        tape.recompute();
        const double loss_val = tape.val(loss).value();
        if (!std::isfinite(loss_val)) {
          diverged = true;
          break;
        }
        // Track the best candidate by exact objective.
        std::vector<Vec> controls(static_cast<std::size_t>(T));
        Trajectory traj;
        traj.states.reserve(static_cast<std::size_t>(T) + 1);
        for (int k = 0; k <= T; ++k) traj.states.push_back(tape.val(state_nodes[static_cast<std::size_t>(k)]).data);
        for (int k = 0; k < T; ++k) controls[static_cast<std::size_t>(k)] = tape.val(control_nodes[static_cast<std::size_t>(k)]).data;
        double rho = 0.0;
        const double obj = exact_objective(p, traj, controls, &rho);
        if (obj < restart_best.objective) {
          restart_best.objective = obj;
          restart_best.robustness = rho;
          restart_best.controls = std::move(controls);
        }

        tape.backward(loss);
        grads["raw"] = tape.grad(raw_leaf);
        bool nan_grad = false;
        for (double gv : grads["raw"].data)
          if (!std::isfinite(gv)) nan_grad = true;
        if (nan_grad) {
          diverged = true;
          break;
        }
        adam_step(params, grads, opt_state, p.opts.lr);
      }
      if (diverged) break;
      raw = params["raw"];
      stage_trace.push_back(restart_best.objective);
    }

    if (diverged || !std::isfinite(restart_best.objective)) continue;
    any_ok = true;
    if (restart_best.objective < best.objective) {
      best = std::move(restart_best);
      best_stage_trace = std::move(stage_trace);
    }
  }

  OptimalTrajectoryRecord rec;
  rec.seed = seed;
  rec.x0 = p.x0;
  rec.obstacles = p.obstacles;
  if (!any_ok) {
    rec.solver_failed = true;
    rec.robustness = std::numeric_limits<double>::quiet_NaN();
    rec.objective = std::numeric_limits<double>::quiet_NaN();
    return rec;
  }
  rec.controls = best.controls;
  rec.trajectory = rollout(*p.model, p.x0, rec.controls, false);
  rec.objective = exact_objective(p, rec.trajectory, rec.controls, &rec.robustness);
  rec.feasible = rec.robustness > 0.0;
  rec.stage_best = std::move(best_stage_trace);
  return rec;
}

void write_records(std::ostream& os, const std::vector<OptimalTrajectoryRecord>& records) {
  for (const auto& r : records) {
    nlohmann::json j;
    j["n"] = r.n;
    j["seed"] = r.seed;
    j["x0"] = r.x0;
    j["xi"] = r.obstacles;
    j["controls"] = r.controls;
    j["states"] = r.trajectory.states;
    if (std::isfinite(r.robustness)) {
      j["robustness"] = r.robustness;
      j["objective"] = r.objective;
    } else {
      j["robustness"] = nullptr;
      j["objective"] = nullptr;
    }
    j["feasible"] = r.feasible;
    j["solver_failed"] = r.solver_failed;
    os << j.dump() << "\n";
  }
}

std::vector<OptimalTrajectoryRecord> read_records(std::istream& is) {
  std::vector<OptimalTrajectoryRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    OptimalTrajectoryRecord r;
    r.n = j.at("n").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.x0 = j.at("x0").get<Vec>();
    r.obstacles = j.at("xi").get<ObstacleSet>();
    r.controls = j.at("controls").get<std::vector<Vec>>();
    r.trajectory.states = j.at("states").get<std::vector<Vec>>();
    r.robustness = j.at("robustness").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                : j.at("robustness").get<double>();
    r.objective = j.at("objective").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                              : j.at("objective").get<double>();
    r.feasible = j.at("feasible").get<bool>();
    r.solver_failed = j.at("solver_failed").get<bool>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace stlctl
