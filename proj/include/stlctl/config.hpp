#pragma once
#include <array>
#include <cstdint>
#include <string>

#include "stlctl/classifier.hpp"
#include "stlctl/policy.hpp"
#include "stlctl/trajopt.hpp"

namespace stlctl {

using Range = std::array<double, 2>;
using Box2 = std::array<Range, 2>;  // {x-range, y-range}

// Mirrors the experiment configuration file field-for-field; every
// member has a working default and the JSON file may override any
// subset. Unknown keys are rejected.
struct ExperimentConfig {
  // horizon and environment
  int T = 25;
  int n_obs = 2;

  struct {
    double mass = 10.0;
    double inertia = 100.0;
    Vec u_min = {-10.0, -100.0};
    Vec u_max = {10.0, 100.0};
  } vehicle;

  struct {
    Tensor R = Tensor::matrix(2, 2, {10, 0, 0, 1});
    // Weight of the control-cost term against robustness. At the
    // benchmark's input scales the quadratic form reaches ~10^3-10^4,
    // so the weight must sit well below 1/|cost| for robustness to
    // drive the optimization.
    double gamma = 0.001;
    CostNorm norm = CostNorm::Quadratic;
  } cost;

  double smooth_beta = 10.0;

  struct {
    Box2 init_pos = {{{2.0, 12.0}, {1.0, 2.0}}};
    Range init_theta = {-3.141592653589793, 3.141592653589793};
    Range init_v = {0.5, 1.0};
    Box2 obstacle_pos = {{{2.0, 14.0}, {3.0, 14.0}}};
    Range obstacle_radius = {1.5, 2.0};
    int reject_budget = 10000;
  } sampling;

  struct {
    Box2 goal = {{{6.0, 10.0}, {16.0, 18.0}}};
    Box2 transit1 = {{{1.0, 4.0}, {8.0, 11.0}}};
    Box2 transit2 = {{{12.0, 15.0}, {8.0, 11.0}}};
  } regions;

  struct {
    int n_cluster = 600;  // instances sampled for trajectory optimization
    int n_train = 2000;   // fresh pairs for policy training
    int n_test = 200;
  } datasets;

  TrajOptOptions trajopt;

  struct {
    int k_min = 1;
    int k_max = 16;
    int anchor_cap = 0;  // 0 disables feature truncation
  } clustering;

  struct {
    int enc_hidden = 128;
    int enc_layers = 2;
    int head_hidden = 64;
    int head_layers = 2;
    double lr = 0.001;
    int epochs = 500;
    int batch = 32;
    Activation act = Activation::Tanh;
  } classifier;

  struct {
    int hidden = 32;
    double lr = 0.01;
    double lr_decay = 0.1;
    int epochs = 30;
    int batch = 8;
    CellType cell = CellType::Rnn;
    // Smooth-robustness temperature annealing over the training epochs;
    // empty trains at constant smooth_beta. Ends at smooth_beta by
    // default so the final objective matches the evaluation setting.
    Vec beta_schedule = {2.0, 5.0, 10.0};
  } policy;

  // Policy input normalization ranges (workspace extent; trajectories
  // leave the initial sampling box, so these are wider).
  struct {
    Box2 pos = {{{0.0, 16.0}, {0.0, 19.0}}};
    Range theta = {-6.283185307179586, 6.283185307179586};
    Range v = {-5.0, 5.0};
    Range omega = {-3.0, 3.0};
  } policy_norm;

  std::uint64_t master_seed = 1;
  int threads = 1;

  static ExperimentConfig smoke();  // N=24, T=10, epochs=2 preset
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace stlctl
