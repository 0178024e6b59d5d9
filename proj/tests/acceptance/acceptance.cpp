// Acceptance suite: one criterion per --criterion value, one PASS/FAIL
// line per criterion on stdout, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stlctl/clustering.hpp"
#include "stlctl/pipeline.hpp"
#include "stlctl/stl/parser.hpp"
#include "stlctl/stl/semantics.hpp"

#include "../fd_check.hpp"
#include "../random_stl.hpp"
#include "../stl_oracle.hpp"

using namespace stlctl;
namespace fs = std::filesystem;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

struct Check {
  int failures = 0;
  std::vector<std::string> notes;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      ++failures;
      notes.push_back(what);
    }
  }
};

int report(int criterion, const std::string& title, const Check& c, double seconds) {
  if (c.failures == 0) {
    std::cout << "PASS criterion " << criterion << ": " << title << " (" << seconds << "s)\n";
    return 0;
  }
  std::cout << "FAIL criterion " << criterion << ": " << title << " — " << c.failures
            << " failed checks (" << seconds << "s)\n";
  for (std::size_t i = 0; i < c.notes.size() && i < 10; ++i) std::cout << "  - " << c.notes[i] << "\n";
  return 1;
}

// ---------------------------------------------------------------- 1 --
int criterion1() {
  Timer timer;
  Check c;
  auto reg = testutil::threshold_registry(3);
  Rng rng(20250801);
  int done = 0, sign_checked = 0;
  while (done < 1000) {
    const int nx = 1 + static_cast<int>(rng.below(3));
    auto local = testutil::threshold_registry(nx);
    const int T = 3 + static_cast<int>(rng.below(8));  // up to 10
    auto f = stl::normalize(testutil::random_formula(rng, local, 3, T));
    if (stl::horizon(*f) > T) continue;
    auto traj = testutil::random_trajectory(rng, T, nx);
    const double r = stl::robustness(*f, local, traj, 0);
    const double o = testutil::oracle_robustness(*f, local, traj, 0);
    c.require(std::abs(r - o) <= 1e-12 || (std::isinf(r) && std::isinf(o) && r == o),
              "robustness mismatch vs brute-force oracle: " + std::to_string(r) + " vs " +
                  std::to_string(o));
    const bool b = stl::eval_bool(*f, local, traj, 0);
    c.require(b == testutil::oracle_bool(*f, local, traj, 0), "boolean oracle mismatch");
    if (std::abs(r) > 1e-9) {
      c.require((r > 0.0) == b, "sign of robustness disagrees with boolean semantics");
      ++sign_checked;
    }
    ++done;
  }
  c.require(sign_checked > 500, "too few sign comparisons exercised");
  c.require(timer.seconds() < 10.0, "runtime exceeded 10 s");
  return report(1, "exact robustness matches double-enumeration oracle on 1000 random cases", c,
                timer.seconds());
}

// ---------------------------------------------------------------- 2 --
int criterion2() {
  Timer timer;
  Check c;

  // smooth robustness gradients vs central differences
  {
    Rng rng(111);
    auto reg = testutil::threshold_registry(2);
    int cases = 0;
    while (cases < 50) {
      const int T = 4 + static_cast<int>(rng.below(4));
      auto f = stl::normalize(testutil::random_formula(rng, reg, 2, T));
      if (stl::horizon(*f) > T) continue;
      auto traj = testutil::random_trajectory(rng, T, 2);
      ad::Tape t;
      std::vector<int> states;
      for (const auto& s : traj.states) states.push_back(t.leaf(Tensor::vector(s)));
      auto sm = stl::smooth_robustness(t, *f, reg, states, 0, 7.0);
      t.backward(sm.node);
      const int k = static_cast<int>(rng.below(traj.states.size()));
      const int d = static_cast<int>(rng.below(2));
      const double fd = testutil::central_diff(
          [&](double v) {
            Trajectory tr = traj;
            tr.states[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] = v;
            ad::Tape t2;
            std::vector<int> st;
            for (const auto& s : tr.states) st.push_back(t2.leaf(Tensor::vector(s)));
            return t2.val(stl::smooth_robustness(t2, *f, reg, st, 0, 7.0).node).value();
          },
          traj.states[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)]);
      const double ad_g = t.grad(states[static_cast<std::size_t>(k)]).data[static_cast<std::size_t>(d)];
      c.require(testutil::rel_err(ad_g, fd) < 1e-4,
                "smooth robustness gradient off at case " + std::to_string(cases));
      ++cases;
    }
  }

  // classifier cross-entropy gradients
  {
    Rng rng(222);
    ClassifierShape s;
    s.x0_dim = 3;
    s.xi_dim = 2;
    s.n_obs = 2;
    s.n_c = 3;
    s.enc_hidden = 6;
    s.enc_layers = 2;
    s.head_hidden = 6;
    s.head_layers = 2;
    AffineNorm nx(Vec(3, -1.0), Vec(3, 1.0));
    AffineNorm nxi(Vec(2, -1.0), Vec(2, 1.0));
    auto loss_of = [](const ClassifierWeights& w, const std::vector<LabeledInstance>& data) {
      double total = 0.0;
      for (const auto& inst : data) {
        Vec p = class_probabilities(w, inst.x0, inst.xi);
        total -= std::log(p[static_cast<std::size_t>(inst.label - 1)]);
      }
      return total / static_cast<double>(data.size());
    };
    for (int trial = 0; trial < 50; ++trial) {
      auto w = init_classifier(s, nx, nxi, 1000 + static_cast<std::uint64_t>(trial));
      std::vector<LabeledInstance> data;
      for (int i = 0; i < 4; ++i)
        data.push_back({{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)},
                        {{rng.uniform(-1, 1), rng.uniform(-1, 1)},
                         {rng.uniform(-1, 1), rng.uniform(-1, 1)}},
                        1 + static_cast<int>(rng.below(3))});
      ParamMap grads;
      classifier_batch_loss(w, data, &grads);
      // one random parameter entry per trial
      auto pick = [&](Tensor& param, const std::string& key) {
        const std::size_t idx = rng.below(param.data.size());
        const double orig = param.data[idx];
        const double h = 1e-5;
        param.data[idx] = orig + h;
        const double up = loss_of(w, data);
        param.data[idx] = orig - h;
        const double dn = loss_of(w, data);
        param.data[idx] = orig;
        const double fd = (up - dn) / (2 * h);
        c.require(testutil::rel_err(grads[key].data[idx], fd) < 1e-4,
                  "classifier gradient off for " + key);
      };
      pick(w.encoder.W[0], "enc.W0");
      pick(w.head.W[0], "head.W0");
      pick(w.head.b[1], "head.b1");
    }
  }

  // full BPTT gradients at T=5
  {
    Rng rng(333);
    SingleIntegrator model(2, 1.0);
    stl::PredicateRegistry reg;
    reg.add(stl::box("goal", 0, 1, 1.0, 3.0, 1.0, 3.0));
    TaskInstance task;
    task.registry = reg;
    task.formula = stl::parse("F[0,5] goal", reg);
    PolicyTrainConfig cfg;
    cfg.T = 5;
    cfg.gamma = 0.02;
    cfg.beta = 6.0;
    cfg.hidden = 4;
    cfg.R = Tensor::matrix(2, 2, {1, 0, 0, 1});
    AffineNorm norm(Vec(2, -4.0), Vec(2, 4.0));
    for (int trial = 0; trial < 50; ++trial) {
      auto w = init_policy(CellType::Rnn, 4, 2, 2, norm, 500 + static_cast<std::uint64_t>(trial));
      std::vector<InstancePair> batch = {{{rng.uniform(-1, 1), rng.uniform(-1, 1)}, {}}};
      std::vector<const TaskInstance*> tasks = {&task};
      ParamMap grads;
      policy_batch_loss(w, model, batch, tasks, cfg, &grads);
      auto pick = [&](Tensor& param, const std::string& key) {
        const std::size_t idx = rng.below(param.data.size());
        const double orig = param.data[idx];
        const double h = 1e-5;
        param.data[idx] = orig + h;
        const double up = policy_batch_loss(w, model, batch, tasks, cfg).loss;
        param.data[idx] = orig - h;
        const double dn = policy_batch_loss(w, model, batch, tasks, cfg).loss;
        param.data[idx] = orig;
        const double fd = (up - dn) / (2 * h);
        c.require(testutil::rel_err(grads[key].data[idx], fd) < 1e-3,
                  "BPTT gradient off for " + key + " at trial " + std::to_string(trial));
      };
      pick(w.A, "A");
      pick(w.B, "B");
      pick(w.bh, "bh");
      pick(w.C, "C");
      pick(w.d, "d");
    }
  }

  c.require(timer.seconds() < 60.0, "runtime exceeded 60 s");
  return report(2, "smooth-robustness, cross-entropy and BPTT gradients match finite differences",
                c, timer.seconds());
}

// ---------------------------------------------------------------- 3 --
int criterion3() {
  Timer timer;
  Check c;
  Rng rng(424242);
  const std::vector<double> betas = {1.0, 10.0, 100.0, 1000.0};
  std::vector<double> max_err(betas.size(), 0.0);
  int cases = 0;
  while (cases < 200) {
    const int nx = 1 + static_cast<int>(rng.below(3));
    auto reg = testutil::threshold_registry(nx);
    const int T = 3 + static_cast<int>(rng.below(8));
    auto f = stl::normalize(testutil::random_formula(rng, reg, 3, T));
    if (stl::horizon(*f) > T) continue;
    auto traj = testutil::random_trajectory(rng, T, nx);
    const double exact = stl::robustness(*f, reg, traj, 0);
    if (std::isinf(exact)) continue;  // trivially-true formulas have no smooth value
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t bi = 0; bi < betas.size(); ++bi) {
      ad::Tape t;
      std::vector<int> states;
      for (const auto& s : traj.states) states.push_back(t.leaf(Tensor::vector(s)));
      auto sm = stl::smooth_robustness(t, *f, reg, states, 0, betas[bi]);
      const double err = std::abs(t.val(sm.node).value() - exact);
      const double bound = std::log(static_cast<double>(sm.max_arity)) / betas[bi];
      c.require(err <= bound + 1e-12, "bound violated: err " + std::to_string(err) + " > log(" +
                                          std::to_string(sm.max_arity) + ")/" +
                                          std::to_string(betas[bi]));
      c.require(err <= prev + 1e-12, "per-case error not monotone in beta at case " +
                                         std::to_string(cases));
      prev = err;
      max_err[bi] = std::max(max_err[bi], err);
    }
    ++cases;
  }
  for (std::size_t bi = 1; bi < betas.size(); ++bi)
    c.require(max_err[bi] <= max_err[bi - 1] + 1e-12, "aggregate max error not monotone in beta");
  return report(3, "smooth robustness within log(m_max)/beta of exact, non-increasing in beta", c,
                timer.seconds());
}

// ---------------------------------------------------------------- 4 --
int criterion4() {
  Timer timer;
  Check c;
  Rng rng(777);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + static_cast<int>(rng.below(4));
    const int k = 1 + static_cast<int>(rng.below(4));
    const int n = k * (3 + static_cast<int>(rng.below(8)));
    std::vector<Vec> pts;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      Vec p(static_cast<std::size_t>(dim));
      for (auto& v : p) v = rng.uniform(-5, 5);
      pts.push_back(std::move(p));
      labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
    }
    for (int cl = 0; cl < k; ++cl) labels[static_cast<std::size_t>(cl)] = cl;  // every cluster nonempty
    const double L = log_likelihood(pts, labels, k);
    const double d = static_cast<double>(mic_free_params(k, dim));
    const double R = static_cast<double>(n);
    const double bic = -L + (d / 2.0) * std::log(R);
    const double aic = -L + d;
    c.require(std::abs(mic(pts, labels, k, 1.0) - bic) <= 1e-12 * std::max(1.0, std::abs(bic)),
              "MIC with gamma=1 is not BIC at trial " + std::to_string(trial));
    c.require(std::abs(mic(pts, labels, k, 0.0) - aic) <= 1e-12 * std::max(1.0, std::abs(aic)),
              "MIC with gamma=0 is not AIC at trial " + std::to_string(trial));
  }
  return report(4, "MIC degenerates to BIC (gamma=1) and AIC (gamma=0) exactly", c, timer.seconds());
}

// ---------------------------------------------------------------- 5 --
int criterion5() {
  Timer timer;
  Check c;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(9000 + seed);
    // four blobs, adjacent centers separated by 10, sigma 0.05
    const std::vector<Vec> centers = {{0.0, 0.0}, {10.0, 0.0}, {20.0, 0.0}, {30.0, 0.0}};
    std::vector<Vec> pts;
    std::vector<int> truth;
    for (std::size_t b = 0; b < centers.size(); ++b)
      for (int i = 0; i < 50; ++i) {
        pts.push_back({centers[b][0] + 0.05 * rng.normal(), centers[b][1] + 0.05 * rng.normal()});
        truth.push_back(static_cast<int>(b));
      }
    auto model = xmeans(pts, 1, 10, seed);
    c.require(model.n_c == 4, "seed " + std::to_string(seed) + ": found " +
                                  std::to_string(model.n_c) + " clusters instead of 4");
    std::vector<int> labels0(model.labels.size());
    for (std::size_t i = 0; i < model.labels.size(); ++i) labels0[i] = model.labels[i] - 1;
    c.require(pair_agreement(labels0, truth) == 1.0,
              "seed " + std::to_string(seed) + ": partition disagrees with ground truth");
  }
  c.require(timer.seconds() < 30.0, "runtime exceeded 30 s");
  return report(5, "X-means recovers 4 well-separated blobs with pair agreement 1.0 on 10 seeds", c,
                timer.seconds());
}

// ---------------------------------------------------------------- 6 --
int criterion6() {
  Timer timer;
  Check c;
  Rng rng(606060);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_obs = 2 + static_cast<int>(rng.below(2));  // 2 or 3 obstacles
    ClassifierShape s;
    s.x0_dim = 5;
    s.xi_dim = 3;
    s.n_obs = n_obs;
    s.n_c = 2 + static_cast<int>(rng.below(3));
    s.enc_hidden = 8;
    s.head_hidden = 8;
    AffineNorm nx(Vec(5, -1.0), Vec(5, 1.0));
    AffineNorm nxi(Vec(3, -1.0), Vec(3, 1.0));
    auto w = init_classifier(s, nx, nxi, 7000 + static_cast<std::uint64_t>(trial));

    PolicyEnsemble ens;
    ens.classifier = w;
    for (int l = 0; l < s.n_c; ++l)
      ens.policies.push_back(init_policy(CellType::Rnn, 4, 5, 2, nx, static_cast<std::uint64_t>(l) + 1));
    ens.cluster_sizes.assign(static_cast<std::size_t>(s.n_c), 1);

    Vec x0(5);
    for (auto& v : x0) v = rng.uniform(-1, 1);
    ObstacleSet xi;
    for (int i = 0; i < n_obs; ++i)
      xi.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 1)});

    const int base_label = classify(w, x0, xi);
    const Vec base_probs = class_probabilities(w, x0, xi);
    const auto base_dispatch = dispatch(ens, x0, xi);

    ObstacleSet perm = xi;
    std::sort(perm.begin(), perm.end());
    do {
      c.require(classify(w, x0, perm) == base_label, "classify changed under permutation");
      c.require(class_probabilities(w, x0, perm) == base_probs,
                "probabilities not bit-equal under permutation");
      const auto d = dispatch(ens, x0, perm);
      c.require(d.label == base_dispatch.label && d.policy == base_dispatch.policy,
                "dispatch changed under permutation");
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return report(6, "classify and dispatch invariant under every obstacle permutation", c,
                timer.seconds());
}

// ---------------------------------------------------------------- 7 --
int criterion7() {
  Timer timer;
  Check c;
  const fs::path root = fs::current_path() / "acceptance_out" / "desk";
  std::cout << "criterion 7: desk-scale benchmark over 3 master seeds; artifacts under " << root
            << "\n";
  int dist_wins = 0;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    ExperimentConfig cfg;  // desk-scale defaults: N=600, N_train=2000, N_test=200
    cfg.master_seed = seed;
    cfg.threads = 1;
    Pipeline p(cfg, root / ("seed" + std::to_string(seed)));
    p.run_all();
    auto rep = p.load_metrics();
    std::cout << "  seed " << seed << ": accuracy single " << rep.acc_single << " vs clustered "
              << rep.acc_clustered << "; distance " << rep.mean_dist_single << " vs "
              << rep.mean_dist_clustered << " (n_c=" << rep.n_c << ")\n";
    c.require(rep.acc_clustered >= rep.acc_single,
              "seed " + std::to_string(seed) + ": clustered accuracy below the single baseline");
    if (rep.mean_dist_clustered <= rep.mean_dist_single) ++dist_wins;
  }
  c.require(dist_wins >= 2, "clustered mean distance cost lower on only " +
                                std::to_string(dist_wins) + " of 3 seeds");
  c.require(timer.seconds() < 7200.0, "runtime exceeded 2 hours");
  return report(7, "desk-scale ensemble matches/beats the single baseline (3 seeds)", c,
                timer.seconds());
}

// ---------------------------------------------------------------- 8 --
namespace smoke {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// All regular files, relative paths, excluding wall-clock timing.
std::vector<fs::path> tree(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "timing.json")
      out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace smoke

int criterion8() {
  Timer timer;
  Check c;
  ExperimentConfig cfg = ExperimentConfig::smoke();
  cfg.master_seed = 11;
  const fs::path root = fs::current_path() / "acceptance_out" / "smoke";
  fs::remove_all(root);

  Pipeline pa(cfg, root / "a");
  pa.set_quiet(true);
  pa.run_all();
  Pipeline pb(cfg, root / "b");
  pb.set_quiet(true);
  pb.run_all();

  // byte-identical reruns under fixed seeds
  auto ta = smoke::tree(root / "a");
  auto tb = smoke::tree(root / "b");
  c.require(ta == tb, "artifact file sets differ between reruns");
  for (const auto& rel : ta)
    c.require(smoke::read_file(root / "a" / rel) == smoke::read_file(root / "b" / rel),
              "file differs between reruns: " + rel.string());

  const fs::path out = root / "a";
  Benchmark bench = Benchmark::from_config(cfg);

  // records: controls in bounds, dynamics re-rollout to 1e-9
  {
    std::istringstream is(smoke::read_file(out / "records.jsonl"));
    auto records = read_records(is);
    c.require(records.size() == static_cast<std::size_t>(cfg.datasets.n_cluster),
              "unexpected record count");
    for (const auto& r : records) {
      if (r.solver_failed) continue;
      for (const Vec& u : r.controls)
        for (std::size_t i = 0; i < u.size(); ++i)
          c.require(u[i] >= cfg.vehicle.u_min[i] && u[i] <= cfg.vehicle.u_max[i],
                    "record control out of bounds");
      auto again = rollout(*bench.model, r.x0, r.controls, false);
      for (std::size_t k = 0; k < again.states.size(); ++k)
        for (std::size_t d = 0; d < 5; ++d)
          c.require(std::abs(again.states[k][d] - r.trajectory.states[k][d]) < 1e-9,
                    "record re-rollout mismatch");
    }
  }

  // partition exhaustiveness and disjointness
  {
    auto count_lines = [&](const fs::path& p) {
      std::istringstream is(smoke::read_file(p));
      std::string line;
      std::size_t n = 0;
      while (std::getline(is, line))
        if (!line.empty()) ++n;
      return n;
    };
    nlohmann::json manifest = nlohmann::json::parse(smoke::read_file(out / "manifest.json"));
    const int n_c = manifest.at("n_c").get<int>();
    std::size_t total = 0;
    std::multiset<std::string> cluster_rows;
    for (int l = 1; l <= n_c; ++l) {
      const fs::path f = out / ("clusters/cluster_" + std::to_string(l) + ".jsonl");
      total += count_lines(f);
      std::istringstream is(smoke::read_file(f));
      std::string line;
      while (std::getline(is, line))
        if (!line.empty()) {
          nlohmann::json j = nlohmann::json::parse(line);
          j.erase("n");
          cluster_rows.insert(j.dump());
        }
    }
    c.require(total == static_cast<std::size_t>(cfg.datasets.n_train),
              "cluster sizes do not sum to n_train");
    std::multiset<std::string> pair_rows;
    std::istringstream is(smoke::read_file(out / "pairs.jsonl"));
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) {
        nlohmann::json j = nlohmann::json::parse(line);
        j.erase("n");
        pair_rows.insert(j.dump());
      }
    c.require(cluster_rows == pair_rows, "cluster rows are not a permutation of the sampled pairs");
  }

  // control saturation of the evaluated policies + loss decomposition
  {
    PolicyEnsemble ens;
    ens.classifier = classifier_from_json(smoke::read_file(out / "classifier.json"));
    nlohmann::json manifest = nlohmann::json::parse(smoke::read_file(out / "manifest.json"));
    for (const auto& f : manifest.at("policies"))
      ens.policies.push_back(policy_from_json(smoke::read_file(out / f.get<std::string>())));
    ens.cluster_sizes = manifest.at("cluster_sizes").get<std::vector<int>>();
    RnnPolicyWeights single = policy_from_json(smoke::read_file(out / "policies/policy_single.json"));
    Rng rng(123);
    for (int i = 0; i < 20; ++i) {
      auto [x0, xi] = bench.sample_instance(rng);
      auto ds = dispatch(ens, x0, xi);
      for (const RnnPolicyWeights* pol : {ds.policy, const_cast<const RnnPolicyWeights*>(&single)}) {
        auto ro = policy_rollout(*pol, *bench.model, x0, cfg.T);
        for (const Vec& u : ro.controls)
          for (std::size_t d = 0; d < u.size(); ++d)
            c.require(u[d] >= cfg.vehicle.u_min[d] && u[d] <= cfg.vehicle.u_max[d],
                      "policy control out of bounds");
      }
    }

    // loss decomposition identity on every logged epoch of every trace
    std::vector<fs::path> traces;
    for (const auto& e : fs::directory_iterator(out / "traces"))
      if (e.path().filename().string().rfind("policy_", 0) == 0) traces.push_back(e.path());
    c.require(!traces.empty(), "no policy traces written");
    for (const auto& tr : traces) {
      std::istringstream is(smoke::read_file(tr));
      std::string line;
      std::getline(is, line);  // header
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> cols;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cols.push_back(std::stod(cell));
        // epoch, rho, control, total, exact, sat
        c.require(std::abs(cols[3] - (-cols[1] + cfg.cost.gamma * cols[2])) < 1e-12,
                  "loss decomposition identity violated in " + tr.filename().string());
      }
    }

    // metrics identity where both sides are defined over the joint set
    nlohmann::json mj = nlohmann::json::parse(smoke::read_file(out / "metrics.json"));
    if (!mj.at("mean_control").at("single").is_null()) {
      const double tot = mj.at("mean_total").at("single").get<double>();
      const double rob = mj.at("mean_robustness").at("single").get<double>();
      const double con = mj.at("mean_control").at("single").get<double>();
      c.require(std::abs(tot - (-rob + cfg.cost.gamma * con)) < 1e-12,
                "metrics total != -robustness + gamma*control");
    }
  }

  c.require(timer.seconds() < 300.0, "runtime exceeded 5 minutes");
  return report(8, "smoke pipeline invariants (saturation, consistency, partition, identity, "
                   "byte-identical reruns)",
                c, timer.seconds());
}

}  // namespace

int main(int argc, char** argv) {
  int criterion = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) criterion = std::atoi(argv[i + 1]);

  int (*const runners[])() = {criterion1, criterion2, criterion3, criterion4,
                              criterion5, criterion6, criterion7, criterion8};
  try {
    if (criterion >= 1 && criterion <= 8) return runners[criterion - 1]();
    if (criterion == 0) {
      int rc = 0;
      for (const auto& run : runners) rc |= run();
      return rc;
    }
    std::cerr << "usage: acceptance [--criterion 1..8]\n";
    return 2;
  } catch (const std::exception& e) {
    std::cout << "FAIL criterion " << criterion << ": unhandled error: " << e.what() << "\n";
    return 1;
  }
}
