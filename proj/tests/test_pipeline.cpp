#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "stlctl/pipeline.hpp"

using namespace stlctl;
namespace fs = std::filesystem;

TEST_CASE("sample_instance respects ranges and disjointness") {
  ExperimentConfig cfg;
  auto bench = Benchmark::from_config(cfg);
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    auto [x0, xi] = bench.sample_instance(rng);
    CHECK(x0[0] >= 2.0);
    CHECK(x0[0] <= 12.0);
    CHECK(x0[1] >= 1.0);
    CHECK(x0[1] <= 2.0);
    CHECK(std::abs(x0[2]) <= 3.2);
    CHECK(x0[3] >= 0.5);
    CHECK(x0[3] <= 1.0);
    CHECK(x0[4] == 0.0);
    REQUIRE(xi.size() == 2);
    for (const Vec& ob : xi) {
      CHECK(ob[2] >= 1.5);
      CHECK(ob[2] <= 2.0);
      CHECK(ob[0] >= 2.0);
      CHECK(ob[0] <= 14.0);
      CHECK(ob[1] >= 3.0);
      CHECK(ob[1] <= 14.0);
    }
    const double dx = xi[0][0] - xi[1][0], dy = xi[0][1] - xi[1][1];
    CHECK(std::sqrt(dx * dx + dy * dy) > xi[0][2] + xi[1][2]);
    // clear of both transit boxes
    for (const auto& box : {cfg.regions.transit1, cfg.regions.transit2})
      for (const Vec& ob : xi) {
        const double cx = std::max({box[0][0] - ob[0], 0.0, ob[0] - box[0][1]});
        const double cy = std::max({box[1][0] - ob[1], 0.0, ob[1] - box[1][1]});
        CHECK(std::sqrt(cx * cx + cy * cy) > ob[2]);
      }
  }
}

TEST_CASE("sampling is deterministic per seed") {
  ExperimentConfig cfg;
  auto bench = Benchmark::from_config(cfg);
  Rng a(5), b(5);
  auto pa = bench.sample_instance(a);
  auto pb = bench.sample_instance(b);
  CHECK(pa.first == pb.first);
  CHECK(pa.second == pb.second);
}

TEST_CASE("accuracy of a mixed robustness vector") {
  CHECK(accuracy({1.0, -1.0, 0.5, 0.0}) == doctest::Approx(0.5));
  CHECK(accuracy({1.0, 2.0, 3.0}) == doctest::Approx(1.0));
}

TEST_CASE("joint success set") {
  auto j = joint_success_set({1.0, 1.0}, {1.0, -1.0});
  REQUIRE(j.size() == 1);
  CHECK(j[0] == 0);
  CHECK(joint_success_set({-1.0, -2.0}, {-3.0, -1.0}).empty());
  CHECK(joint_success_set({1.0, 2.0}, {3.0, 4.0}).size() == 2);
}

TEST_CASE("distance cost basics") {
  Tensor Q = Tensor::zeros({5, 5});
  Q.data[0] = 1.0;
  Q.data[6] = 1.0;
  Vec goal = {8, 17, 0, 0, 0};
  Trajectory pinned;
  pinned.states = {goal, goal, goal};
  CHECK(distance_cost(pinned, goal, Q, CostNorm::Sqrt) == 0.0);

  Trajectory one_step;
  one_step.states = {{0, 17, 0, 0, 0}, {5, 17, 0, 0, 0}};  // ends 3 from goal in p1
  CHECK(distance_cost(one_step, goal, Q, CostNorm::Sqrt) == doctest::Approx(3.0));
  CHECK(distance_cost(one_step, goal, Q, CostNorm::Quadratic) == doctest::Approx(9.0));
}

TEST_CASE("config round-trips and rejects unknown keys") {
  ExperimentConfig cfg;
  cfg.datasets.n_cluster = 42;
  cfg.cost.gamma = 0.125;
  auto text = config_to_json(cfg);
  auto back = parse_config(text);
  CHECK(back.datasets.n_cluster == 42);
  CHECK(back.cost.gamma == 0.125);
  CHECK(config_to_json(back) == text);
  CHECK_THROWS_AS(parse_config("{\"no_such_key\": 1}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"cost\": {\"norm\": \"cubic\"}}"), ConfigError);
}

TEST_CASE("config defaults match the benchmark constants") {
  ExperimentConfig cfg;
  CHECK(cfg.T == 25);
  CHECK(cfg.n_obs == 2);
  CHECK(cfg.vehicle.mass == 10.0);
  CHECK(cfg.vehicle.inertia == 100.0);
  CHECK(cfg.cost.R.data == Vec{10, 0, 0, 1});
  CHECK(cfg.datasets.n_test == 200);
  CHECK(cfg.classifier.enc_hidden == 128);
  CHECK(cfg.classifier.head_hidden == 64);
  CHECK(cfg.classifier.epochs == 500);
  CHECK(cfg.classifier.batch == 32);
  CHECK(cfg.classifier.lr == 0.001);
  CHECK(cfg.policy.hidden == 32);
  CHECK(cfg.policy.epochs == 30);
  CHECK(cfg.policy.batch == 8);
  CHECK(cfg.policy.lr == 0.01);
}

TEST_CASE("benchmark task composes the reach-transit-avoid formula") {
  ExperimentConfig cfg;
  auto bench = Benchmark::from_config(cfg);
  CHECK(stl::horizon(*bench.psi) == 25);
  TaskInstance task = bench.build_task({{8, 8, 1.8}, {4, 6, 1.6}});
  CHECK(stl::horizon(*task.formula) == 25);
  REQUIRE(task.formula->kind == stl::Formula::Kind::And);
  // psi has 2 top-level conjuncts (or, F goal) and 2 avoid clauses
  CHECK(task.formula->children.size() == 4);
  CHECK(task.registry.find("obs1") >= 0);
  CHECK(task.registry.find("obs2") >= 0);
}

TEST_CASE("mini pipeline run produces every artifact and caches cleanly") {
  ExperimentConfig cfg = ExperimentConfig::smoke();
  cfg.datasets.n_cluster = 12;
  cfg.datasets.n_train = 10;
  cfg.datasets.n_test = 5;
  cfg.master_seed = 3;

  const fs::path dir = fs::temp_directory_path() / "stlctl_test_mini";
  fs::remove_all(dir);
  Pipeline p(cfg, dir);
  p.set_quiet(true);
  auto stages = p.run_all();
  for (const auto& s : stages) CHECK_FALSE(s.cached);

  for (const char* f :
       {"records.jsonl", "yield.json", "labels.csv", "cluster_report.json", "classifier.json",
        "pairs.jsonl", "partition_report.json", "manifest.json", "policies/policy_single.json",
        "metrics.json", "per_case.csv", "trajectories/test_cases.jsonl", "report.txt",
        "stages.json", "timing.json"})
    CHECK(fs::exists(dir / f));

  auto rep = p.load_metrics();
  CHECK(rep.n_test == 5);
  CHECK(rep.acc_single >= 0.0);
  CHECK(rep.acc_clustered <= 1.0);

  // second run over the same directory: every stage cached
  Pipeline p2(cfg, dir);
  p2.set_quiet(true);
  auto stages2 = p2.run_all();
  for (std::size_t i = 0; i + 1 < stages2.size(); ++i) CHECK(stages2[i].cached);

  // changing the seed invalidates the caches
  cfg.master_seed = 4;
  Pipeline p3(cfg, dir);
  p3.set_quiet(true);
  CHECK_FALSE(p3.gen_data().cached);
  fs::remove_all(dir);
}
