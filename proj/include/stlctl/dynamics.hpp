#pragma once
#include <memory>

#include "stlctl/tape.hpp"
#include "stlctl/tensor.hpp"
#include "stlctl/trajectory.hpp"

namespace stlctl {

// Discrete-time system x_{k+1} = f(x_k, u_k) with hyper-rectangle input
// bounds. step() and step_tape() implement the same map; the tape
// variant is used for gradient-based optimization and BPTT.
class SystemModel {
 public:
  SystemModel(Vec u_min, Vec u_max);
  virtual ~SystemModel() = default;

  virtual int state_dim() const = 0;
  int input_dim() const { return static_cast<int>(u_min_.size()); }
  const Vec& u_min() const { return u_min_; }
  const Vec& u_max() const { return u_max_; }

  virtual Vec step(const Vec& x, const Vec& u) const = 0;
  virtual int step_tape(ad::Tape& t, int x, int u) const = 0;

 protected:
  Vec u_min_, u_max_;
};

// Nonholonomic vehicle, state [p1, p2, theta, v, omega], input [F, tau]:
// x_{k+1} = x_k + [v cos(theta); v sin(theta); omega; F/m; tau/I].
class VehicleModel : public SystemModel {
 public:
  VehicleModel(double mass, double inertia, Vec u_min, Vec u_max);
  int state_dim() const override { return 5; }
  Vec step(const Vec& x, const Vec& u) const override;
  int step_tape(ad::Tape& t, int x, int u) const override;
  double mass() const { return mass_; }
  double inertia() const { return inertia_; }

 private:
  double mass_, inertia_;
};

// x_{k+1} = x_k + u_k with |u_i| <= bound; test-scale toy system.
class SingleIntegrator : public SystemModel {
 public:
  SingleIntegrator(int dims, double bound);
  int state_dim() const override { return dims_; }
  Vec step(const Vec& x, const Vec& u) const override;
  int step_tape(ad::Tape& t, int x, int u) const override;

 private:
  int dims_;
};

// Squashes a pre-activation vector strictly into (u_min, u_max):
// (u_max - u_min)/2 * tanh(raw) + (u_max + u_min)/2, per component.
Vec saturate_output(const Vec& raw, const Vec& u_min, const Vec& u_max);
int saturate_output_tape(ad::Tape& t, int raw, const Vec& u_min, const Vec& u_max);

// Open-loop rollout of a control sequence. With check_bounds, controls
// outside [u_min, u_max] raise an error (policy outputs are saturated
// by construction and skip the check).
Trajectory rollout(const SystemModel& model, const Vec& x0, const std::vector<Vec>& controls,
                   bool check_bounds = true);

enum class CostNorm { Quadratic, Sqrt };

// ||u||_R: the quadratic form u'Ru, or its square root under
// CostNorm::Sqrt. R is a square matrix of input dimension.
double stage_cost(const Vec& u, const Tensor& R, CostNorm norm = CostNorm::Quadratic);
int stage_cost_tape(ad::Tape& t, int u, const Tensor& R, CostNorm norm = CostNorm::Quadratic);

// ||x - x_ref||_Q over selected state components, same norm convention.
double weighted_distance(const Vec& x, const Vec& x_ref, const Tensor& Q, CostNorm norm);

}  // namespace stlctl
