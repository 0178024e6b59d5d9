#include "stlctl/stl/predicates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace stlctl::stl {

int PredicateRegistry::add(Predicate p) {
  preds_.push_back(std::move(p));
  return static_cast<int>(preds_.size()) - 1;
}

int PredicateRegistry::find(const std::string& name) const {
  for (std::size_t i = 0; i < preds_.size(); ++i)
    if (preds_[i].name == name) return static_cast<int>(i);
  return -1;
}

const Predicate& PredicateRegistry::at(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= preds_.size())
    throw Error("predicate id " + std::to_string(id) + " out of range");
  return preds_[static_cast<std::size_t>(id)];
}

Predicate halfplane(std::string name, Vec w, double offset) {
  Predicate p;
  p.name = std::move(name);
  p.arity = 1;
  p.eval = [w, offset](const Vec& x) { return dot(w, x) - offset; };
  p.compile = [w, offset](ad::Tape& t, int state, double) {
    int wc = ad::const_vector(t, w);
    int s = t.reduce_sum(t.mul(wc, state));
    return t.affine(s, 1.0, -offset);
  };
  return p;
}

Predicate box(std::string name, int dim_x, int dim_y, double x_lo, double x_hi, double y_lo,
              double y_hi) {
  Predicate p;
  p.name = std::move(name);
  p.arity = 4;
  p.eval = [=](const Vec& x) {
    const double px = x[static_cast<std::size_t>(dim_x)];
    const double py = x[static_cast<std::size_t>(dim_y)];
    return std::min(std::min(px - x_lo, x_hi - px), std::min(py - y_lo, y_hi - py));
  };
  p.compile = [=](ad::Tape& t, int state, double beta) {
    int px = t.index(state, dim_x);
    int py = t.index(state, dim_y);
    std::array<int, 4> margins = {
        t.affine(px, 1.0, -x_lo),
        t.affine(px, -1.0, x_hi),
        t.affine(py, 1.0, -y_lo),
        t.affine(py, -1.0, y_hi),
    };
    return t.softmin(t.stack(margins), beta);
  };
  return p;
}

Predicate circle_inside(std::string name, int dim_x, int dim_y, double cx, double cy, double r) {
  Predicate p;
  p.name = std::move(name);
  p.arity = 1;
  p.eval = [=](const Vec& x) {
    const double dx = x[static_cast<std::size_t>(dim_x)] - cx;
    const double dy = x[static_cast<std::size_t>(dim_y)] - cy;
    return r - std::sqrt(dx * dx + dy * dy);
  };
  p.compile = [=](ad::Tape& t, int state, double) {
    int dx = t.affine(t.index(state, dim_x), 1.0, -cx);
    int dy = t.affine(t.index(state, dim_y), 1.0, -cy);
    int d2 = t.add(t.mul(dx, dx), t.mul(dy, dy));
    return t.affine(t.sqrt(d2), -1.0, r);
  };
  return p;
}

}  // namespace stlctl::stl
