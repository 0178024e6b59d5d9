#include "stlctl/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "stlctl/clustering.hpp"
#include "stlctl/parallel.hpp"
#include "stlctl/stl/parser.hpp"

namespace stlctl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << content;
}

// Shortest round-trip decimal form, shared by the CSV writers.
std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

double circle_box_clearance(double cx, double cy, const Box2& box) {
  const double dx = std::max({box[0][0] - cx, 0.0, cx - box[0][1]});
  const double dy = std::max({box[1][0] - cy, 0.0, cy - box[1][1]});
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Benchmark Benchmark::from_config(const ExperimentConfig& cfg) {
  Benchmark b;
  b.cfg = cfg;
  b.model = std::make_shared<VehicleModel>(cfg.vehicle.mass, cfg.vehicle.inertia, cfg.vehicle.u_min,
                                           cfg.vehicle.u_max);
  const auto& r = cfg.regions;
  b.base_registry.add(stl::box("goal", 0, 1, r.goal[0][0], r.goal[0][1], r.goal[1][0], r.goal[1][1]));
  b.base_registry.add(
      stl::box("tr1", 0, 1, r.transit1[0][0], r.transit1[0][1], r.transit1[1][0], r.transit1[1][1]));
  b.base_registry.add(
      stl::box("tr2", 0, 1, r.transit2[0][0], r.transit2[0][1], r.transit2[1][0], r.transit2[1][1]));
  const std::string T = std::to_string(cfg.T);
  b.psi = stl::parse("(F[0," + T + "] tr1 or F[0," + T + "] tr2) and F[0," + T + "] goal",
                     b.base_registry);

  const auto& s = cfg.sampling;
  b.x0_norm = AffineNorm({s.init_pos[0][0], s.init_pos[1][0], s.init_theta[0], s.init_v[0], 0.0},
                         {s.init_pos[0][1], s.init_pos[1][1], s.init_theta[1], s.init_v[1], 0.0});
  b.xi_norm = AffineNorm({s.obstacle_pos[0][0], s.obstacle_pos[1][0], s.obstacle_radius[0]},
                         {s.obstacle_pos[0][1], s.obstacle_pos[1][1], s.obstacle_radius[1]});
  const auto& pn = cfg.policy_norm;
  b.state_norm = AffineNorm({pn.pos[0][0], pn.pos[1][0], pn.theta[0], pn.v[0], pn.omega[0]},
                            {pn.pos[0][1], pn.pos[1][1], pn.theta[1], pn.v[1], pn.omega[1]});
  b.x_goal = {0.5 * (r.goal[0][0] + r.goal[0][1]), 0.5 * (r.goal[1][0] + r.goal[1][1]), 0, 0, 0};
  b.Q = Tensor::zeros({5, 5});
  b.Q.data[0] = 1.0;
  b.Q.data[6] = 1.0;
  return b;
}

TaskInstance Benchmark::build_task(const ObstacleSet& xi) const {
  TaskInstance task;
  task.registry = base_registry;
  task.formula = build_phi_xi(psi, xi, cfg.T, task.registry);
  return task;
}

InstancePair Benchmark::sample_instance(Rng& rng) const {
  const auto& s = cfg.sampling;
  Vec x0 = {rng.uniform(s.init_pos[0][0], s.init_pos[0][1]),
            rng.uniform(s.init_pos[1][0], s.init_pos[1][1]),
            rng.uniform(s.init_theta[0], s.init_theta[1]),
            rng.uniform(s.init_v[0], s.init_v[1]),
            0.0};
  ObstacleSet xi;
  int draws = 0;
  while (static_cast<int>(xi.size()) < cfg.n_obs) {
    if (++draws > s.reject_budget)
      throw Error("sample_instance: rejection budget of " + std::to_string(s.reject_budget) +
                  " candidate draws exhausted");
    Vec cand = {rng.uniform(s.obstacle_pos[0][0], s.obstacle_pos[0][1]),
                rng.uniform(s.obstacle_pos[1][0], s.obstacle_pos[1][1]),
                rng.uniform(s.obstacle_radius[0], s.obstacle_radius[1])};
    bool ok = circle_box_clearance(cand[0], cand[1], cfg.regions.transit1) > cand[2] &&
              circle_box_clearance(cand[0], cand[1], cfg.regions.transit2) > cand[2];
    for (const Vec& other : xi) {
      if (!ok) break;
      const double dx = cand[0] - other[0], dy = cand[1] - other[1];
      ok = std::sqrt(dx * dx + dy * dy) > cand[2] + other[2];
    }
    if (ok) xi.push_back(std::move(cand));
  }
  return {std::move(x0), std::move(xi)};
}

double accuracy(const Vec& rhos) {
  if (rhos.empty()) return 0.0;
  double s = 0.0;
  for (double r : rhos)
    if (r > 0.0) s += 1.0;
  return s / static_cast<double>(rhos.size());
}

std::vector<std::size_t> joint_success_set(const Vec& rho_a, const Vec& rho_b) {
  if (rho_a.size() != rho_b.size()) throw Error("joint_success_set: length mismatch");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rho_a.size(); ++i)
    if (rho_a[i] > 0.0 && rho_b[i] > 0.0) out.push_back(i);
  return out;
}

double distance_cost(const Trajectory& traj, const Vec& x_goal, const Tensor& Q, CostNorm norm) {
  double acc = 0.0;
  for (std::size_t k = 1; k < traj.states.size(); ++k)
    acc += weighted_distance(traj.states[k], x_goal, Q, norm);
  return acc;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

// Stage seed streams off the master seed.
enum : std::uint64_t {
  kSeedGen = 1,
  kSeedCluster = 2,
  kSeedClassifier = 3,
  kSeedPartition = 4,
  kSeedPolicies = 5,
  kSeedSingle = 6,
  kSeedTest = 7,
};

}  // namespace

Pipeline::Pipeline(ExperimentConfig cfg, fs::path out_dir)
    : cfg_(std::move(cfg)), bench_(Benchmark::from_config(cfg_)), out_(std::move(out_dir)) {
  fs::create_directories(out_);
  write_file(out_ / "config_used.json", config_to_json(cfg_));
}

void Pipeline::log(const std::string& line) const {
  if (!quiet_) std::cout << line << "\n";
}

std::string Pipeline::stage_hash(const std::string& name,
                                 const std::vector<std::string>& input_files) const {
  // Each stage hashes only the config sections it actually consumes,
  // plus its input artifacts, so unrelated tuning does not invalidate
  // finished stages. Thread count never participates (outputs are
  // identical across thread counts).
  static const std::map<std::string, std::vector<std::string>> relevant = {
      {"gen-data",
       {"T", "n_obs", "vehicle", "cost", "sampling", "regions", "trajopt", "datasets.n_cluster"}},
      {"cluster", {"clustering"}},
      {"train-classifier", {"n_obs", "classifier", "sampling"}},
      {"partition", {"n_obs", "sampling", "regions", "datasets.n_train"}},
      {"train-policies",
       {"T", "n_obs", "vehicle", "cost", "smooth_beta", "policy", "policy_norm", "regions"}},
      {"train-single",
       {"T", "n_obs", "vehicle", "cost", "smooth_beta", "policy", "policy_norm", "regions"}},
      {"evaluate",
       {"T", "n_obs", "vehicle", "cost", "sampling", "regions", "datasets.n_test"}},
      {"report", {}},
      {"config", {}},
  };
  json full = json::parse(config_to_json(cfg_));
  json picked;
  picked["master_seed"] = cfg_.master_seed;
  auto it = relevant.find(name);
  if (it == relevant.end()) {
    picked = full;
    picked.erase("threads");
  } else {
    for (const auto& key : it->second) {
      const auto dot = key.find('.');
      if (dot == std::string::npos)
        picked[key] = full.at(key);
      else
        picked[key][key.substr(dot + 1)] = full.at(key.substr(0, dot)).at(key.substr(dot + 1));
    }
  }
  std::uint64_t h = fnv1a64(name);
  h = fnv1a64(picked.dump(), h);
  for (const auto& f : input_files) h = fnv1a64(read_file(out_ / f), h);
  return hex64(h);
}

bool Pipeline::stage_cached(const std::string& name, const std::string& hash,
                            const std::vector<std::string>& outputs) const {
  if (force_) return false;
  const fs::path stages = out_ / "stages.json";
  if (!fs::exists(stages)) return false;
  json j = json::parse(read_file(stages));
  if (!j.contains(name) || j[name]["hash"] != hash) return false;
  for (const auto& o : outputs)
    if (!fs::exists(out_ / o)) return false;
  return true;
}

void Pipeline::stage_done(const std::string& name, const std::string& hash,
                          const std::vector<std::string>& outputs, double seconds) {
  const fs::path stages = out_ / "stages.json";
  json j = fs::exists(stages) ? json::parse(read_file(stages)) : json::object();
  j[name] = {{"hash", hash}, {"outputs", outputs}};
  write_file(stages, j.dump(2));
  const fs::path timing = out_ / "timing.json";
  json tj = fs::exists(timing) ? json::parse(read_file(timing)) : json::object();
  tj[name] = seconds;
  write_file(timing, tj.dump(2));
}

StageStatus Pipeline::gen_data() {
  const std::string name = "gen-data";
  const std::vector<std::string> outputs = {"records.jsonl", "yield.json"};
  const std::string hash = stage_hash(name, {});
  if (stage_cached(name, hash, outputs)) {
    log("[" + name + "] cached");
    return {name, true, 0.0};
  }
  Timer timer;
  const int N = cfg_.datasets.n_cluster;
  const std::uint64_t seed = derive_seed(cfg_.master_seed, kSeedGen);
  std::vector<OptimalTrajectoryRecord> records(static_cast<std::size_t>(N));
  parallel_for(static_cast<std::size_t>(N), cfg_.threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    auto [x0, xi] = bench_.sample_instance(rng);
    TaskInstance task = bench_.build_task(xi);
    InstanceProblem prob;
    prob.model = bench_.model.get();
    prob.registry = &task.registry;
    prob.formula = task.formula;
    prob.x0 = x0;
    prob.obstacles = xi;
    prob.T = cfg_.T;
    prob.gamma = cfg_.cost.gamma;
    prob.R = cfg_.cost.R;
    prob.cost_norm = cfg_.cost.norm;
    prob.opts = cfg_.trajopt;
    records[i] = solve_instance(prob, derive_seed(seed, i));
    records[i].n = static_cast<int>(i);
  });
  std::ostringstream os;
  write_records(os, records);
  write_file(out_ / "records.jsonl", os.str());

  int feasible = 0, failed = 0;
  for (const auto& r : records) {
    if (r.feasible) ++feasible;
    if (r.solver_failed) ++failed;
  }
  json yield = {{"sampled", N}, {"feasible", feasible}, {"solver_failed", failed}};
  write_file(out_ / "yield.json", yield.dump(2));
  stage_done(name, hash, outputs, timer.seconds());
  log("[" + name + "] solved " + std::to_string(N) + " instances, " + std::to_string(feasible) +
      " feasible (" + fmt_double(timer.seconds()) + "s)");
  return {name, false, timer.seconds()};
}

StageStatus Pipeline::cluster_stage() {
  const std::string name = "cluster";
  const std::vector<std::string> outputs = {"labels.csv", "cluster_report.json"};
  const std::string hash = stage_hash(name, {"records.jsonl"});
  if (stage_cached(name, hash, outputs)) {
    log("[" + name + "] cached");
    return {name, true, 0.0};
  }
  Timer timer;
  std::istringstream is(read_file(out_ / "records.jsonl"));
  auto records = read_records(is);
  std::vector<Trajectory> trajectories;
  std::vector<int> index_of;  // original record index per feature row
  for (const auto& r : records)
    if (r.feasible) {
      trajectories.push_back(r.trajectory);
      index_of.push_back(r.n);
    }
  if (trajectories.size() < 2) throw Error("cluster: need at least 2 feasible records");

  // Position-selector similarity weight (mirrors the distance-cost Q).
  Tensor M = Tensor::zeros({5, 5});
  M.data[0] = 1.0;
  M.data[6] = 1.0;
  Tensor D = similarity_matrix(trajectories, M, CostNorm::Sqrt, cfg_.threads);
  auto features = feature_vectors(D, cfg_.clustering.anchor_cap,
                                  derive_seed(cfg_.master_seed, kSeedCluster) ^ 0x5eedull);
  const int k_max = std::min<int>(cfg_.clustering.k_max, static_cast<int>(features.size()));
  const int k_min = std::min<int>(cfg_.clustering.k_min, k_max);
  ClusterModel model =
      xmeans(features, k_min, k_max, derive_seed(cfg_.master_seed, kSeedCluster));

  std::ostringstream labels;
  labels << "n,label\n";
  for (std::size_t i = 0; i < index_of.size(); ++i)
    labels << index_of[i] << "," << model.labels[i] << "\n";
  write_file(out_ / "labels.csv", labels.str());

  json report;
  report["n_c"] = model.n_c;
  report["sizes"] = model.sizes;
  report["mic"] = model.mic_value;
  json trace = json::array();
  for (const auto& tr : model.trace)
    trace.push_back({{"cluster", tr.cluster},
                     {"parent_mic", tr.parent_mic},
                     {"split_mic", tr.split_mic},
                     {"accepted", tr.accepted}});
  report["split_trace"] = trace;
  write_file(out_ / "cluster_report.json", report.dump(2));
  stage_done(name, hash, outputs, timer.seconds());
  log("[" + name + "] n_c=" + std::to_string(model.n_c) + " over " +
      std::to_string(trajectories.size()) + " trajectories (" + fmt_double(timer.seconds()) + "s)");
  return {name, false, timer.seconds()};
}

StageStatus Pipeline::classifier_stage() {
  const std::string name = "train-classifier";
  const std::vector<std::string> outputs = {"classifier.json", "traces/classifier.csv"};
  const std::string hash = stage_hash(name, {"records.jsonl", "labels.csv"});
  if (stage_cached(name, hash, outputs)) {
    log("[" + name + "] cached");
    return {name, true, 0.0};
  }
  Timer timer;
  std::istringstream is(read_file(out_ / "records.jsonl"));
  auto records = read_records(is);
  std::map<int, const OptimalTrajectoryRecord*> by_n;
  for (const auto& r : records) by_n[r.n] = &r;

  std::vector<LabeledInstance> data;
  int n_c = 1;
  std::istringstream labels(read_file(out_ / "labels.csv"));
  std::string line;
  std::getline(labels, line);  // header
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const int n = std::stoi(line.substr(0, comma));
    const int label = std::stoi(line.substr(comma + 1));
    const auto* rec = by_n.at(n);
    data.push_back({rec->x0, rec->obstacles, label});
    n_c = std::max(n_c, label);
  }

  ClassifierShape shape;
  shape.x0_dim = 5;
  shape.xi_dim = 3;
  shape.n_obs = cfg_.n_obs;
  shape.n_c = n_c;
  shape.enc_hidden = cfg_.classifier.enc_hidden;
  shape.enc_layers = cfg_.classifier.enc_layers;
  shape.head_hidden = cfg_.classifier.head_hidden;
  shape.head_layers = cfg_.classifier.head_layers;
  shape.act = cfg_.classifier.act;
  ClassifierTrainConfig tcfg;
  tcfg.epochs = cfg_.classifier.epochs;
  tcfg.batch = cfg_.classifier.batch;
  tcfg.lr = cfg_.classifier.lr;

  std::vector<ClassifierTraceRow> trace;
  ClassifierWeights w = train_classifier(data, shape, bench_.x0_norm, bench_.xi_norm, tcfg,
                                         derive_seed(cfg_.master_seed, kSeedClassifier), &trace);
  write_file(out_ / "classifier.json", classifier_to_json(w));
  std::ostringstream tr;
  tr << "epoch,loss,train_accuracy\n";
  for (const auto& row : trace)
    tr << row.epoch << "," << fmt_double(row.loss) << "," << fmt_double(row.accuracy) << "\n";
  write_file(out_ / "traces/classifier.csv", tr.str());
  stage_done(name, hash, outputs, timer.seconds());
  log("[" + name + "] " + std::to_string(data.size()) + " samples, n_c=" + std::to_string(n_c) +
      ", final train accuracy " + (trace.empty() ? "-" : fmt_double(trace.back().accuracy)) + " (" +
      fmt_double(timer.seconds()) + "s)");
  return {name, false, timer.seconds()};
}

namespace {

json pair_to_json(int n, const InstancePair& p) {
  return {{"n", n}, {"x0", p.first}, {"xi", p.second}};
}

std::vector<InstancePair> pairs_from_jsonl(const std::string& text) {
  std::vector<InstancePair> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    out.push_back({j.at("x0").get<Vec>(), j.at("xi").get<ObstacleSet>()});
  }
  return out;
}

}  // namespace

StageStatus Pipeline::partition_stage() {
  const std::string name = "partition";
  const std::string hash = stage_hash(name, {"classifier.json"});
  ClassifierWeights w = classifier_from_json(read_file(out_ / "classifier.json"));
  std::vector<std::string> outputs = {"pairs.jsonl", "partition_report.json"};
  for (int l = 1; l <= w.n_c; ++l) outputs.push_back("clusters/cluster_" + std::to_string(l) + ".jsonl");
  if (stage_cached(name, hash, outputs)) {
    log("[" + name + "] cached");
    return {name, true, 0.0};
  }
  Timer timer;
  const std::uint64_t seed = derive_seed(cfg_.master_seed, kSeedPartition);
  std::vector<InstancePair> pairs(static_cast<std::size_t>(cfg_.datasets.n_train));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    pairs[i] = bench_.sample_instance(rng);
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < pairs.size(); ++i) os << pair_to_json(static_cast<int>(i), pairs[i]).dump() << "\n";
  write_file(out_ / "pairs.jsonl", os.str());

  ClusterDataset ds = partition_dataset(pairs, w);
  for (int l = 1; l <= w.n_c; ++l) {
    std::ostringstream cs;
    const auto& lst = ds.per_label[static_cast<std::size_t>(l - 1)];
    for (std::size_t i = 0; i < lst.size(); ++i) cs << pair_to_json(static_cast<int>(i), lst[i]).dump() << "\n";
    write_file(out_ / ("clusters/cluster_" + std::to_string(l) + ".jsonl"), cs.str());
  }
  json report = {{"n_train", cfg_.datasets.n_train}, {"sizes", ds.sizes}};
  write_file(out_ / "partition_report.json", report.dump(2));
  stage_done(name, hash, outputs, timer.seconds());
  std::string sizes;
  for (int s : ds.sizes) sizes += (sizes.empty() ? "" : "/") + std::to_string(s);
  log("[" + name + "] " + std::to_string(pairs.size()) + " pairs -> " + sizes + " (" +
      fmt_double(timer.seconds()) + "s)");
  return {name, false, timer.seconds()};
}

namespace {

PolicyTrainConfig policy_train_config(const ExperimentConfig& cfg) {
  PolicyTrainConfig p;
  p.epochs = cfg.policy.epochs;
  p.batch = cfg.policy.batch;
  p.lr = cfg.policy.lr;
  p.lr_decay = cfg.policy.lr_decay;
  p.gamma = cfg.cost.gamma;
  p.beta = cfg.smooth_beta;
  p.beta_schedule = cfg.policy.beta_schedule;
  p.T = cfg.T;
  p.R = cfg.cost.R;
  p.cost_norm = cfg.cost.norm;
  p.cell = cfg.policy.cell;
  p.hidden = cfg.policy.hidden;
  return p;
}

std::string policy_trace_csv(const std::vector<PolicyEpochRow>& trace) {
  std::ostringstream tr;
  tr << "epoch,smooth_robustness,smooth_control,smooth_total,exact_robustness,sat_rate\n";
  for (const auto& r : trace)
    tr << r.epoch << "," << fmt_double(r.smooth_robustness) << "," << fmt_double(r.smooth_control)
       << "," << fmt_double(r.smooth_total) << "," << fmt_double(r.exact_robustness) << ","
       << fmt_double(r.sat_rate) << "\n";
  return tr.str();
}

}  // namespace

StageStatus Pipeline::policies_stage() {
  const std::string name = "train-policies";
  ClassifierWeights w = classifier_from_json(read_file(out_ / "classifier.json"));
  std::vector<std::string> inputs = {"classifier.json"};
  for (int l = 1; l <= w.n_c; ++l) inputs.push_back("clusters/cluster_" + std::to_string(l) + ".jsonl");
  const std::string hash = stage_hash(name, inputs);
  std::vector<std::string> outputs = {"manifest.json"};
  for (int l = 1; l <= w.n_c; ++l) {
    outputs.push_back("policies/policy_" + std::to_string(l) + ".json");
    outputs.push_back("traces/policy_" + std::to_string(l) + ".csv");
  }
  if (stage_cached(name, hash, outputs)) {
    log("[" + name + "] cached");
    return {name, true, 0.0};
  }
  Timer timer;
  const std::uint64_t seed = derive_seed(cfg_.master_seed, kSeedPolicies);
  const PolicyTrainConfig pcfg = policy_train_config(cfg_);

  std::vector<std::vector<InstancePair>> cluster_pairs(static_cast<std::size_t>(w.n_c));
  for (int l = 1; l <= w.n_c; ++l)
    cluster_pairs[static_cast<std::size_t>(l - 1)] =
        pairs_from_jsonl(read_file(out_ / ("clusters/cluster_" + std::to_string(l) + ".jsonl")));

  std::vector<RnnPolicyWeights> policies(static_cast<std::size_t>(w.n_c));
  std::vector<std::string> traces(static_cast<std::size_t>(w.n_c));
  std::vector<int> sizes(static_cast<std::size_t>(w.n_c), 0);
  auto builder = [this](const ObstacleSet& xi) { return bench_.build_task(xi); };
  parallel_for(static_cast<std::size_t>(w.n_c), cfg_.threads, [&](std::size_t li) {
    sizes[li] = static_cast<int>(cluster_pairs[li].size());
    if (cluster_pairs[li].empty()) {
      // Empty cluster: no data to train on; dispatch falls back.
      RnnPolicyWeights absent;
      absent.absent = true;
      absent.state_norm = bench_.state_norm;
      policies[li] = std::move(absent);
      traces[li] = policy_trace_csv({});
      return;
    }
    // Every policy (specialists and baseline alike) trains for the
    // configured epoch count, so the ensemble's total instance-epoch
    // budget Sum_l N_l * epochs matches the single baseline's.
    std::vector<PolicyEpochRow> trace;
    policies[li] = train_policy(cluster_pairs[li], *bench_.model, builder, pcfg,
                                bench_.state_norm, derive_seed(seed, li + 1), &trace);
    traces[li] = policy_trace_csv(trace);
  });

  std::vector<std::string> policy_files;
  json absent = json::array();
  for (int l = 1; l <= w.n_c; ++l) {
    const auto& p = policies[static_cast<std::size_t>(l - 1)];
    const std::string file = "policies/policy_" + std::to_string(l) + ".json";
    write_file(out_ / file, policy_to_json(p));
    write_file(out_ / ("traces/policy_" + std::to_string(l) + ".csv"),
               traces[static_cast<std::size_t>(l - 1)]);
    policy_files.push_back(file);
    if (p.absent) absent.push_back(l);
  }
  json manifest;
  manifest["n_c"] = w.n_c;
  manifest["cluster_sizes"] = sizes;
  manifest["policies"] = policy_files;
  manifest["absent"] = absent;
  manifest["classifier"] = "classifier.json";
  manifest["config_hash"] = stage_hash("config", {});
  manifest["seeds"] = {{"master", cfg_.master_seed}, {"policies", seed}};
  write_file(out_ / "manifest.json", manifest.dump(2));
  stage_done(name, hash, outputs, timer.seconds());
  log("[" + name + "] trained " + std::to_string(w.n_c) + " cluster policies (" +
      fmt_double(timer.seconds()) + "s)");
  return {name, false, timer.seconds()};
}

StageStatus Pipeline::single_stage() {
  const std::string name = "train-single";
  const std::vector<std::string> outputs = {"policies/policy_single.json",
                                            "traces/policy_single.csv"};
  const std::string hash = stage_hash(name, {"pairs.jsonl"});
  if (stage_cached(name, hash, outputs)) {
    log("[" + name + "] cached");
    return {name, true, 0.0};
  }
  Timer timer;
  auto pairs = pairs_from_jsonl(read_file(out_ / "pairs.jsonl"));
  auto builder = [this](const ObstacleSet& xi) { return bench_.build_task(xi); };
  std::vector<PolicyEpochRow> trace;
  RnnPolicyWeights w =
      train_policy(pairs, *bench_.model, builder, policy_train_config(cfg_), bench_.state_norm,
                   derive_seed(cfg_.master_seed, kSeedSingle), &trace);
  write_file(out_ / "policies/policy_single.json", policy_to_json(w));
  write_file(out_ / "traces/policy_single.csv", policy_trace_csv(trace));
  stage_done(name, hash, outputs, timer.seconds());
  log("[" + name + "] trained on " + std::to_string(pairs.size()) + " pairs (" +
      fmt_double(timer.seconds()) + "s)");
  return {name, false, timer.seconds()};
}

StageStatus Pipeline::evaluate_stage() {
  const std::string name = "evaluate";
  ClassifierWeights cw = classifier_from_json(read_file(out_ / "classifier.json"));
  json manifest = json::parse(read_file(out_ / "manifest.json"));
  std::vector<std::string> inputs = {"classifier.json", "manifest.json",
                                     "policies/policy_single.json"};
  for (const auto& f : manifest.at("policies")) inputs.push_back(f.get<std::string>());
  const std::string hash = stage_hash(name, inputs);
  const std::vector<std::string> outputs = {"metrics.json", "per_case.csv",
                                            "trajectories/test_cases.jsonl"};
  if (stage_cached(name, hash, outputs)) {
    log("[" + name + "] cached");
    return {name, true, 0.0};
  }
  Timer timer;
  PolicyEnsemble ensemble;
  ensemble.classifier = cw;
  for (const auto& f : manifest.at("policies"))
    ensemble.policies.push_back(policy_from_json(read_file(out_ / f.get<std::string>())));
  ensemble.cluster_sizes = manifest.at("cluster_sizes").get<std::vector<int>>();
  RnnPolicyWeights single = policy_from_json(read_file(out_ / "policies/policy_single.json"));

  const std::uint64_t seed = derive_seed(cfg_.master_seed, kSeedTest);
  const int n_test = cfg_.datasets.n_test;
  std::vector<InstancePair> cases(static_cast<std::size_t>(n_test));
  for (std::size_t i = 0; i < cases.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    cases[i] = bench_.sample_instance(rng);
  }

  std::vector<CaseResult> results(cases.size());
  std::vector<PolicyRollout> roll_single(cases.size()), roll_clustered(cases.size());
  parallel_for(cases.size(), cfg_.threads, [&](std::size_t i) {
    const auto& [x0, xi] = cases[i];
    TaskInstance task = bench_.build_task(xi);
    auto ds = dispatch(ensemble, x0, xi);
    roll_clustered[i] = policy_rollout(*ds.policy, *bench_.model, x0, cfg_.T);
    roll_single[i] = policy_rollout(single, *bench_.model, x0, cfg_.T);
    CaseResult r;
    r.label = ds.label;
    r.fallback = ds.fallback;
    r.rho_clustered = stl::robustness(*task.formula, task.registry, roll_clustered[i].trajectory, 0);
    r.rho_single = stl::robustness(*task.formula, task.registry, roll_single[i].trajectory, 0);
    auto control_sum = [&](const PolicyRollout& ro) {
      double s = 0.0;
      for (const Vec& u : ro.controls) s += stage_cost(u, cfg_.cost.R, cfg_.cost.norm);
      return s;
    };
    r.control_clustered = control_sum(roll_clustered[i]);
    r.control_single = control_sum(roll_single[i]);
    r.dist_clustered = distance_cost(roll_clustered[i].trajectory, bench_.x_goal, bench_.Q,
                                     cfg_.cost.norm);
    r.dist_single = distance_cost(roll_single[i].trajectory, bench_.x_goal, bench_.Q, cfg_.cost.norm);
    results[i] = r;
  });

  Vec rho_s(results.size()), rho_c(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    rho_s[i] = results[i].rho_single;
    rho_c[i] = results[i].rho_clustered;
  }
  const auto joint = joint_success_set(rho_c, rho_s);

  MetricsReport rep;
  rep.n_test = n_test;
  rep.gamma = cfg_.cost.gamma;
  rep.n_c = cw.n_c;
  rep.acc_single = accuracy(rho_s);
  rep.acc_clustered = accuracy(rho_c);
  double mr_s = 0.0, mr_c = 0.0, md_s = 0.0, md_c = 0.0;
  for (const auto& r : results) {
    mr_s += r.rho_single;
    mr_c += r.rho_clustered;
    md_s += r.dist_single;
    md_c += r.dist_clustered;
  }
  rep.mean_rob_single = mr_s / n_test;
  rep.mean_rob_clustered = mr_c / n_test;
  rep.mean_dist_single = md_s / n_test;
  rep.mean_dist_clustered = md_c / n_test;
  rep.joint_count = joint.size();
  if (!joint.empty()) {
    double mc_s = 0.0, mc_c = 0.0;
    for (std::size_t i : joint) {
      mc_s += results[i].control_single;
      mc_c += results[i].control_clustered;
    }
    rep.mean_con_single = mc_s / static_cast<double>(joint.size());
    rep.mean_con_clustered = mc_c / static_cast<double>(joint.size());
    rep.mean_total_single = -rep.mean_rob_single + cfg_.cost.gamma * *rep.mean_con_single;
    rep.mean_total_clustered = -rep.mean_rob_clustered + cfg_.cost.gamma * *rep.mean_con_clustered;
  }

  json mj;
  mj["n_test"] = rep.n_test;
  mj["gamma"] = rep.gamma;
  mj["n_c"] = rep.n_c;
  mj["accuracy"] = {{"single", rep.acc_single}, {"clustered", rep.acc_clustered}};
  mj["mean_robustness"] = {{"single", rep.mean_rob_single}, {"clustered", rep.mean_rob_clustered}};
  mj["mean_control"] = {{"single", rep.mean_con_single ? json(*rep.mean_con_single) : json()},
                        {"clustered", rep.mean_con_clustered ? json(*rep.mean_con_clustered) : json()},
                        {"joint_count", rep.joint_count}};
  mj["mean_total"] = {{"single", rep.mean_total_single ? json(*rep.mean_total_single) : json()},
                      {"clustered", rep.mean_total_clustered ? json(*rep.mean_total_clustered) : json()}};
  mj["mean_distance"] = {{"single", rep.mean_dist_single}, {"clustered", rep.mean_dist_clustered}};
  write_file(out_ / "metrics.json", mj.dump(2));

  std::ostringstream pc;
  pc << "case,approach,robustness,control,total,distance\n";
  std::vector<bool> in_joint(results.size(), false);
  for (std::size_t i : joint) in_joint[i] = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    auto row = [&](const char* approach, double rho, double con, double dist) {
      pc << (i + 1) << "," << approach << "," << fmt_double(rho) << ",";
      if (in_joint[i])
        pc << fmt_double(con) << "," << fmt_double(-rho + cfg_.cost.gamma * con);
      else
        pc << ",";  // failed cases leave control/total blank
      pc << "," << fmt_double(dist) << "\n";
    };
    row("single", r.rho_single, r.control_single, r.dist_single);
    row("clustered", r.rho_clustered, r.control_clustered, r.dist_clustered);
  }
  write_file(out_ / "per_case.csv", pc.str());

  std::ostringstream tj;
  for (std::size_t i = 0; i < results.size(); ++i) {
    json j;
    j["case"] = i + 1;
    j["x0"] = cases[i].first;
    j["xi"] = cases[i].second;
    j["label"] = results[i].label;
    j["single"] = {{"states", roll_single[i].trajectory.states}, {"rho", results[i].rho_single}};
    j["clustered"] = {{"states", roll_clustered[i].trajectory.states},
                      {"rho", results[i].rho_clustered}};
    tj << j.dump() << "\n";
  }
  write_file(out_ / "trajectories/test_cases.jsonl", tj.str());

  stage_done(name, hash, outputs, timer.seconds());
  log("[" + name + "] accuracy single " + fmt_double(rep.acc_single) + " vs clustered " +
      fmt_double(rep.acc_clustered) + " (" + fmt_double(timer.seconds()) + "s)");
  return {name, false, timer.seconds()};
}

StageStatus Pipeline::report_stage() {
  const std::string name = "report";
  Timer timer;
  MetricsReport rep = load_metrics();
  std::ostringstream os;
  os << "benchmark comparison over " << rep.n_test << " test cases (n_c=" << rep.n_c << ")\n";
  os << "metric, single, clustered\n";
  os << "accuracy, " << fmt_double(rep.acc_single) << ", " << fmt_double(rep.acc_clustered) << "\n";
  os << "mean robustness, " << fmt_double(rep.mean_rob_single) << ", "
     << fmt_double(rep.mean_rob_clustered) << "\n";
  os << "mean control (joint n=" << rep.joint_count << "), "
     << (rep.mean_con_single ? fmt_double(*rep.mean_con_single) : "-") << ", "
     << (rep.mean_con_clustered ? fmt_double(*rep.mean_con_clustered) : "-") << "\n";
  os << "mean total, " << (rep.mean_total_single ? fmt_double(*rep.mean_total_single) : "-") << ", "
     << (rep.mean_total_clustered ? fmt_double(*rep.mean_total_clustered) : "-") << "\n";
  os << "mean distance cost, " << fmt_double(rep.mean_dist_single) << ", "
     << fmt_double(rep.mean_dist_clustered) << "\n";
  write_file(out_ / "report.txt", os.str());
  if (!quiet_) std::cout << os.str();
  stage_done(name, stage_hash(name, {"metrics.json"}), {"report.txt"}, timer.seconds());
  return {name, false, timer.seconds()};
}

std::vector<StageStatus> Pipeline::run_all() {
  std::vector<StageStatus> out;
  out.push_back(gen_data());
  out.push_back(cluster_stage());
  out.push_back(classifier_stage());
  out.push_back(partition_stage());
  out.push_back(policies_stage());
  out.push_back(single_stage());
  out.push_back(evaluate_stage());
  out.push_back(report_stage());
  return out;
}

MetricsReport Pipeline::load_metrics() const {
  json mj = json::parse(read_file(out_ / "metrics.json"));
  MetricsReport rep;
  rep.n_test = mj.at("n_test").get<int>();
  rep.gamma = mj.at("gamma").get<double>();
  rep.n_c = mj.at("n_c").get<int>();
  rep.acc_single = mj.at("accuracy").at("single").get<double>();
  rep.acc_clustered = mj.at("accuracy").at("clustered").get<double>();
  rep.mean_rob_single = mj.at("mean_robustness").at("single").get<double>();
  rep.mean_rob_clustered = mj.at("mean_robustness").at("clustered").get<double>();
  if (!mj.at("mean_control").at("single").is_null()) {
    rep.mean_con_single = mj.at("mean_control").at("single").get<double>();
    rep.mean_con_clustered = mj.at("mean_control").at("clustered").get<double>();
    rep.mean_total_single = mj.at("mean_total").at("single").get<double>();
    rep.mean_total_clustered = mj.at("mean_total").at("clustered").get<double>();
  }
  rep.joint_count = mj.at("mean_control").at("joint_count").get<std::size_t>();
  rep.mean_dist_single = mj.at("mean_distance").at("single").get<double>();
  rep.mean_dist_clustered = mj.at("mean_distance").at("clustered").get<double>();
  return rep;
}

}  // namespace stlctl
