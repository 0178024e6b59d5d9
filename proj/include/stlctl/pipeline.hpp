#pragma once
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "stlctl/config.hpp"
#include "stlctl/policy.hpp"
#include "stlctl/rng.hpp"

namespace stlctl {

// Benchmark environment assembled from a config: vehicle model, region
// predicates, the reach-transit-avoid task formula, normalizations and
// the distance-cost selector.
struct Benchmark {
  ExperimentConfig cfg;
  std::shared_ptr<VehicleModel> model;
  stl::PredicateRegistry base_registry;  // goal, tr1, tr2
  stl::FormulaPtr psi;                   // task without avoidance clauses
  AffineNorm x0_norm;   // classifier input scaling (sampling ranges)
  AffineNorm xi_norm;   // obstacle parameter scaling
  AffineNorm state_norm;  // policy input scaling (workspace ranges)
  Vec x_goal;           // goal box center, non-position entries zero
  Tensor Q;             // position selector for the distance cost

  static Benchmark from_config(const ExperimentConfig& cfg);

  // phi_Xi = psi and per-obstacle always-avoid clauses, with a
  // registry extended by the instance's obstacle predicates.
  TaskInstance build_task(const ObstacleSet& xi) const;

  // Uniform (x0, Xi) draw; obstacles are rejection-sampled to stay
  // disjoint from each other and from the transit regions. Throws when
  // the rejection budget is exhausted.
  InstancePair sample_instance(Rng& rng) const;
};

// Eqs-of-merit helpers shared by evaluation and tests.
double accuracy(const Vec& robustness_values);
std::vector<std::size_t> joint_success_set(const Vec& rho_a, const Vec& rho_b);
double distance_cost(const Trajectory& traj, const Vec& x_goal, const Tensor& Q, CostNorm norm);

struct CaseResult {
  double rho_single = 0.0, rho_clustered = 0.0;
  double control_single = 0.0, control_clustered = 0.0;
  double dist_single = 0.0, dist_clustered = 0.0;
  int label = 0;
  bool fallback = false;
};

struct MetricsReport {
  int n_test = 0;
  double gamma = 0.0;
  int n_c = 0;
  double acc_single = 0.0, acc_clustered = 0.0;
  double mean_rob_single = 0.0, mean_rob_clustered = 0.0;
  // Control (and hence total) means are taken over the joint success
  // set and reported blank when it is empty.
  std::optional<double> mean_con_single, mean_con_clustered;
  std::optional<double> mean_total_single, mean_total_clustered;
  double mean_dist_single = 0.0, mean_dist_clustered = 0.0;
  std::size_t joint_count = 0;
};

struct StageStatus {
  std::string name;
  bool cached = false;
  double seconds = 0.0;
};

// End-to-end orchestration over an output directory. Every stage is
// deterministic given the master seed; finished stages are skipped when
// their input hash is unchanged (stages.json).
class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, std::filesystem::path out_dir);

  StageStatus gen_data();
  StageStatus cluster_stage();
  StageStatus classifier_stage();
  StageStatus partition_stage();
  StageStatus policies_stage();
  StageStatus single_stage();
  StageStatus evaluate_stage();
  StageStatus report_stage();
  std::vector<StageStatus> run_all();

  const ExperimentConfig& config() const { return cfg_; }
  const std::filesystem::path& out_dir() const { return out_; }
  void set_force(bool force) { force_ = force; }
  void set_quiet(bool quiet) { quiet_ = quiet; }

  // Parsed metrics of a finished run (evaluate stage must exist).
  MetricsReport load_metrics() const;

 private:
  std::string stage_hash(const std::string& name, const std::vector<std::string>& input_files) const;
  bool stage_cached(const std::string& name, const std::string& hash,
                    const std::vector<std::string>& outputs) const;
  void stage_done(const std::string& name, const std::string& hash,
                  const std::vector<std::string>& outputs, double seconds);
  void log(const std::string& line) const;

  ExperimentConfig cfg_;
  Benchmark bench_;
  std::filesystem::path out_;
  bool force_ = false;
  bool quiet_ = false;
};

}  // namespace stlctl
