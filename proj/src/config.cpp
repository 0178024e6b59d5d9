#include "stlctl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace stlctl {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
}

Range get_range(const json& j) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError("range must have two entries");
  return {v[0], v[1]};
}

Box2 get_box(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("box must be [[x_lo,x_hi],[y_lo,y_hi]]");
  return {get_range(j[0]), get_range(j[1])};
}

Tensor get_matrix(const json& j) {
  auto rows = j.get<std::vector<Vec>>();
  if (rows.empty()) throw ConfigError("matrix must be nonempty");
  Tensor t = Tensor::zeros({rows.size(), rows[0].size()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw ConfigError("matrix rows must share one length");
    for (std::size_t c = 0; c < rows[0].size(); ++c) t.data[r * rows[0].size() + c] = rows[r][c];
  }
  return t;
}

json put_range(const Range& r) { return json::array({r[0], r[1]}); }
json put_box(const Box2& b) { return json::array({put_range(b[0]), put_range(b[1])}); }

json put_matrix(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.shape[0]; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < t.shape[1]; ++c) row.push_back(t.data[r * t.shape[1] + c]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  check_keys(j, {"T", "n_obs", "vehicle", "cost", "smooth_beta", "sampling", "regions", "datasets",
                 "trajopt", "clustering", "classifier", "policy", "policy_norm", "master_seed",
                 "threads"},
             "config");
  if (j.contains("T")) cfg.T = j["T"].get<int>();
  if (j.contains("n_obs")) cfg.n_obs = j["n_obs"].get<int>();
  if (j.contains("vehicle")) {
    const auto& v = j["vehicle"];
    check_keys(v, {"mass", "inertia", "u_min", "u_max"}, "vehicle");
    if (v.contains("mass")) cfg.vehicle.mass = v["mass"].get<double>();
    if (v.contains("inertia")) cfg.vehicle.inertia = v["inertia"].get<double>();
    if (v.contains("u_min")) cfg.vehicle.u_min = v["u_min"].get<Vec>();
    if (v.contains("u_max")) cfg.vehicle.u_max = v["u_max"].get<Vec>();
  }
  if (j.contains("cost")) {
    const auto& c = j["cost"];
    check_keys(c, {"R", "gamma", "norm"}, "cost");
    if (c.contains("R")) cfg.cost.R = get_matrix(c["R"]);
    if (c.contains("gamma")) cfg.cost.gamma = c["gamma"].get<double>();
    if (c.contains("norm")) {
      const std::string n = c["norm"].get<std::string>();
      if (n == "quadratic") cfg.cost.norm = CostNorm::Quadratic;
      else if (n == "sqrt") cfg.cost.norm = CostNorm::Sqrt;
      else throw ConfigError("cost.norm must be 'quadratic' or 'sqrt'");
    }
  }
  if (j.contains("smooth_beta")) cfg.smooth_beta = j["smooth_beta"].get<double>();
  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    check_keys(s, {"init_pos", "init_theta", "init_v", "obstacle_pos", "obstacle_radius",
                   "reject_budget"},
               "sampling");
    if (s.contains("init_pos")) cfg.sampling.init_pos = get_box(s["init_pos"]);
    if (s.contains("init_theta")) cfg.sampling.init_theta = get_range(s["init_theta"]);
    if (s.contains("init_v")) cfg.sampling.init_v = get_range(s["init_v"]);
    if (s.contains("obstacle_pos")) cfg.sampling.obstacle_pos = get_box(s["obstacle_pos"]);
    if (s.contains("obstacle_radius")) cfg.sampling.obstacle_radius = get_range(s["obstacle_radius"]);
    if (s.contains("reject_budget")) cfg.sampling.reject_budget = s["reject_budget"].get<int>();
  }
  if (j.contains("regions")) {
    const auto& r = j["regions"];
    check_keys(r, {"goal", "transit1", "transit2"}, "regions");
    if (r.contains("goal")) cfg.regions.goal = get_box(r["goal"]);
    if (r.contains("transit1")) cfg.regions.transit1 = get_box(r["transit1"]);
    if (r.contains("transit2")) cfg.regions.transit2 = get_box(r["transit2"]);
  }
  if (j.contains("datasets")) {
    const auto& d = j["datasets"];
    check_keys(d, {"n_cluster", "n_train", "n_test"}, "datasets");
    if (d.contains("n_cluster")) cfg.datasets.n_cluster = d["n_cluster"].get<int>();
    if (d.contains("n_train")) cfg.datasets.n_train = d["n_train"].get<int>();
    if (d.contains("n_test")) cfg.datasets.n_test = d["n_test"].get<int>();
  }
  if (j.contains("trajopt")) {
    const auto& t = j["trajopt"];
    check_keys(t, {"beta_schedule", "iters_per_stage", "restarts", "lr", "init_range"}, "trajopt");
    if (t.contains("beta_schedule")) cfg.trajopt.beta_schedule = t["beta_schedule"].get<Vec>();
    if (t.contains("iters_per_stage")) cfg.trajopt.iters_per_stage = t["iters_per_stage"].get<int>();
    if (t.contains("restarts")) cfg.trajopt.restarts = t["restarts"].get<int>();
    if (t.contains("lr")) cfg.trajopt.lr = t["lr"].get<double>();
    if (t.contains("init_range")) cfg.trajopt.init_range = t["init_range"].get<double>();
  }
  if (j.contains("clustering")) {
    const auto& c = j["clustering"];
    check_keys(c, {"k_min", "k_max", "anchor_cap"}, "clustering");
    if (c.contains("k_min")) cfg.clustering.k_min = c["k_min"].get<int>();
    if (c.contains("k_max")) cfg.clustering.k_max = c["k_max"].get<int>();
    if (c.contains("anchor_cap")) cfg.clustering.anchor_cap = c["anchor_cap"].get<int>();
  }
  if (j.contains("classifier")) {
    const auto& c = j["classifier"];
    check_keys(c, {"enc_hidden", "enc_layers", "head_hidden", "head_layers", "lr", "epochs",
                   "batch", "activation"},
               "classifier");
    if (c.contains("enc_hidden")) cfg.classifier.enc_hidden = c["enc_hidden"].get<int>();
    if (c.contains("enc_layers")) cfg.classifier.enc_layers = c["enc_layers"].get<int>();
    if (c.contains("head_hidden")) cfg.classifier.head_hidden = c["head_hidden"].get<int>();
    if (c.contains("head_layers")) cfg.classifier.head_layers = c["head_layers"].get<int>();
    if (c.contains("lr")) cfg.classifier.lr = c["lr"].get<double>();
    if (c.contains("epochs")) cfg.classifier.epochs = c["epochs"].get<int>();
    if (c.contains("batch")) cfg.classifier.batch = c["batch"].get<int>();
    if (c.contains("activation")) {
      const std::string a = c["activation"].get<std::string>();
      if (a == "tanh") cfg.classifier.act = Activation::Tanh;
      else if (a == "relu") cfg.classifier.act = Activation::Relu;
      else throw ConfigError("classifier.activation must be 'tanh' or 'relu'");
    }
  }
  if (j.contains("policy")) {
    const auto& p = j["policy"];
    check_keys(p, {"hidden", "lr", "lr_decay", "epochs", "batch", "cell", "beta_schedule"}, "policy");
    if (p.contains("hidden")) cfg.policy.hidden = p["hidden"].get<int>();
    if (p.contains("lr")) cfg.policy.lr = p["lr"].get<double>();
    if (p.contains("lr_decay")) cfg.policy.lr_decay = p["lr_decay"].get<double>();
    if (p.contains("epochs")) cfg.policy.epochs = p["epochs"].get<int>();
    if (p.contains("batch")) cfg.policy.batch = p["batch"].get<int>();
    if (p.contains("beta_schedule")) cfg.policy.beta_schedule = p["beta_schedule"].get<Vec>();
    if (p.contains("cell")) {
      const std::string c = p["cell"].get<std::string>();
      if (c == "rnn") cfg.policy.cell = CellType::Rnn;
      else if (c == "lstm") cfg.policy.cell = CellType::Lstm;
      else throw ConfigError("policy.cell must be 'rnn' or 'lstm'");
    }
  }
  if (j.contains("policy_norm")) {
    const auto& p = j["policy_norm"];
    check_keys(p, {"pos", "theta", "v", "omega"}, "policy_norm");
    if (p.contains("pos")) cfg.policy_norm.pos = get_box(p["pos"]);
    if (p.contains("theta")) cfg.policy_norm.theta = get_range(p["theta"]);
    if (p.contains("v")) cfg.policy_norm.v = get_range(p["v"]);
    if (p.contains("omega")) cfg.policy_norm.omega = get_range(p["omega"]);
  }
  if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["T"] = c.T;
  j["n_obs"] = c.n_obs;
  j["vehicle"] = {{"mass", c.vehicle.mass},
                  {"inertia", c.vehicle.inertia},
                  {"u_min", c.vehicle.u_min},
                  {"u_max", c.vehicle.u_max}};
  j["cost"] = {{"R", put_matrix(c.cost.R)},
               {"gamma", c.cost.gamma},
               {"norm", c.cost.norm == CostNorm::Quadratic ? "quadratic" : "sqrt"}};
  j["smooth_beta"] = c.smooth_beta;
  j["sampling"] = {{"init_pos", put_box(c.sampling.init_pos)},
                   {"init_theta", put_range(c.sampling.init_theta)},
                   {"init_v", put_range(c.sampling.init_v)},
                   {"obstacle_pos", put_box(c.sampling.obstacle_pos)},
                   {"obstacle_radius", put_range(c.sampling.obstacle_radius)},
                   {"reject_budget", c.sampling.reject_budget}};
  j["regions"] = {{"goal", put_box(c.regions.goal)},
                  {"transit1", put_box(c.regions.transit1)},
                  {"transit2", put_box(c.regions.transit2)}};
  j["datasets"] = {{"n_cluster", c.datasets.n_cluster},
                   {"n_train", c.datasets.n_train},
                   {"n_test", c.datasets.n_test}};
  j["trajopt"] = {{"beta_schedule", c.trajopt.beta_schedule},
                  {"iters_per_stage", c.trajopt.iters_per_stage},
                  {"restarts", c.trajopt.restarts},
                  {"lr", c.trajopt.lr},
                  {"init_range", c.trajopt.init_range}};
  j["clustering"] = {{"k_min", c.clustering.k_min},
                     {"k_max", c.clustering.k_max},
                     {"anchor_cap", c.clustering.anchor_cap}};
  j["classifier"] = {{"enc_hidden", c.classifier.enc_hidden},
                     {"enc_layers", c.classifier.enc_layers},
                     {"head_hidden", c.classifier.head_hidden},
                     {"head_layers", c.classifier.head_layers},
                     {"lr", c.classifier.lr},
                     {"epochs", c.classifier.epochs},
                     {"batch", c.classifier.batch},
                     {"activation", c.classifier.act == Activation::Tanh ? "tanh" : "relu"}};
  j["policy"] = {{"hidden", c.policy.hidden},
                 {"lr", c.policy.lr},
                 {"lr_decay", c.policy.lr_decay},
                 {"epochs", c.policy.epochs},
                 {"batch", c.policy.batch},
                 {"cell", c.policy.cell == CellType::Rnn ? "rnn" : "lstm"},
                 {"beta_schedule", c.policy.beta_schedule}};
  j["policy_norm"] = {{"pos", put_box(c.policy_norm.pos)},
                      {"theta", put_range(c.policy_norm.theta)},
                      {"v", put_range(c.policy_norm.v)},
                      {"omega", put_range(c.policy_norm.omega)}};
  j["master_seed"] = c.master_seed;
  j["threads"] = c.threads;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::smoke() {
  // Same topology, compacted so the T=10 horizon keeps a usable share
  // of instances feasible.
  ExperimentConfig cfg;
  cfg.T = 10;
  cfg.regions.goal = {{{6.0, 10.0}, {10.0, 12.0}}};
  cfg.regions.transit1 = {{{1.0, 4.0}, {5.0, 7.0}}};
  cfg.regions.transit2 = {{{12.0, 15.0}, {5.0, 7.0}}};
  cfg.sampling.obstacle_pos = {{{2.0, 14.0}, {3.0, 8.0}}};
  cfg.sampling.obstacle_radius = {1.0, 1.4};
  cfg.policy_norm.pos = {{{0.0, 16.0}, {0.0, 13.0}}};
  cfg.datasets.n_cluster = 24;
  cfg.datasets.n_train = 24;
  cfg.datasets.n_test = 12;
  cfg.trajopt.beta_schedule = {2.0, 10.0};
  cfg.trajopt.iters_per_stage = 80;
  cfg.trajopt.restarts = 3;
  cfg.classifier.epochs = 2;
  cfg.classifier.enc_hidden = 16;
  cfg.classifier.head_hidden = 16;
  cfg.policy.epochs = 2;
  cfg.policy.hidden = 8;
  cfg.clustering.k_max = 6;
  return cfg;
}

}  // namespace stlctl
