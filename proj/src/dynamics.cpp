#include "stlctl/dynamics.hpp"

#include <array>
#include <cmath>

namespace stlctl {

SystemModel::SystemModel(Vec u_min, Vec u_max) : u_min_(std::move(u_min)), u_max_(std::move(u_max)) {
  if (u_min_.size() != u_max_.size() || u_min_.empty())
    throw Error("input bounds must be nonempty and share one dimension");
  for (std::size_t i = 0; i < u_min_.size(); ++i)
    if (!(u_min_[i] < u_max_[i]))
      throw Error("u_min must be componentwise below u_max (component " + std::to_string(i) + ")");
}

VehicleModel::VehicleModel(double mass, double inertia, Vec u_min, Vec u_max)
    : SystemModel(std::move(u_min), std::move(u_max)), mass_(mass), inertia_(inertia) {
  if (input_dim() != 2) throw Error("vehicle model expects 2 inputs [F, tau]");
  if (!(mass_ > 0.0) || !(inertia_ > 0.0)) throw Error("mass and inertia must be positive");
}

Vec VehicleModel::step(const Vec& x, const Vec& u) const {
  return {x[0] + x[3] * std::cos(x[2]),
          x[1] + x[3] * std::sin(x[2]),
          x[2] + x[4],
          x[3] + u[0] / mass_,
          x[4] + u[1] / inertia_};
}

int VehicleModel::step_tape(ad::Tape& t, int x, int u) const {
  int theta = t.index(x, 2);
  int v = t.index(x, 3);
  std::array<int, 5> delta = {
      t.mul(v, t.cos(theta)),
      t.mul(v, t.sin(theta)),
      t.index(x, 4),
      t.affine(t.index(u, 0), 1.0 / mass_, 0.0),
      t.affine(t.index(u, 1), 1.0 / inertia_, 0.0),
  };
  return t.add(x, t.stack(delta));
}

SingleIntegrator::SingleIntegrator(int dims, double bound)
    : SystemModel(Vec(static_cast<std::size_t>(dims), -bound), Vec(static_cast<std::size_t>(dims), bound)),
      dims_(dims) {}

Vec SingleIntegrator::step(const Vec& x, const Vec& u) const {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + u[i];
  return out;
}

int SingleIntegrator::step_tape(ad::Tape& t, int x, int u) const { return t.add(x, u); }

Vec saturate_output(const Vec& raw, const Vec& u_min, const Vec& u_max) {
  Vec out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = 0.5 * (u_max[i] - u_min[i]) * std::tanh(raw[i]) + 0.5 * (u_max[i] + u_min[i]);
  return out;
}

int saturate_output_tape(ad::Tape& t, int raw, const Vec& u_min, const Vec& u_max) {
  Vec half_range(u_min.size()), mid(u_min.size());
  for (std::size_t i = 0; i < u_min.size(); ++i) {
    half_range[i] = 0.5 * (u_max[i] - u_min[i]);
    mid[i] = 0.5 * (u_max[i] + u_min[i]);
  }
  int scaled = t.mul(t.tanh(raw), ad::const_vector(t, half_range));
  return t.add(scaled, ad::const_vector(t, mid));
}

Trajectory rollout(const SystemModel& model, const Vec& x0, const std::vector<Vec>& controls,
                   bool check_bounds) {
  if (static_cast<int>(x0.size()) != model.state_dim())
    throw Error("rollout: x0 dimension " + std::to_string(x0.size()) + " does not match model");
  Trajectory traj;
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(x0);
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const Vec& u = controls[k];
    if (static_cast<int>(u.size()) != model.input_dim())
      throw Error("rollout: control " + std::to_string(k) + " has wrong dimension");
    if (check_bounds) {
      for (std::size_t i = 0; i < u.size(); ++i)
        if (u[i] < model.u_min()[i] || u[i] > model.u_max()[i])
          throw Error("rollout: control " + std::to_string(k) + " component " + std::to_string(i) +
                      " = " + std::to_string(u[i]) + " outside input bounds");
    }
    traj.states.push_back(model.step(traj.states.back(), u));
  }
  return traj;
}

namespace {

void check_psd_square(const Tensor& R, std::size_t dim) {
  if (R.shape.size() != 2 || R.shape[0] != dim || R.shape[1] != dim)
    throw ShapeError("weight matrix must be " + std::to_string(dim) + "x" + std::to_string(dim) +
                     ", got " + R.shape_str());
}

}  // namespace

double stage_cost(const Vec& u, const Tensor& R, CostNorm norm) {
  check_psd_square(R, u.size());
  double q = 0.0;
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) q += u[i] * R.data[i * n + j] * u[j];
  return norm == CostNorm::Quadratic ? q : std::sqrt(q);
}

int stage_cost_tape(ad::Tape& t, int u, const Tensor& R, CostNorm norm) {
  check_psd_square(R, t.val(u).data.size());
  int ru = t.matvec(t.constant(R), u);
  int q = t.reduce_sum(t.mul(u, ru));
  return norm == CostNorm::Quadratic ? q : t.sqrt(q);
}

double weighted_distance(const Vec& x, const Vec& x_ref, const Tensor& Q, CostNorm norm) {
  check_psd_square(Q, x.size());
  Vec e(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) e[i] = x[i] - x_ref[i];
  return stage_cost(e, Q, norm);
}

}  // namespace stlctl
