#pragma once
#include <functional>
#include <string>
#include <vector>

#include "stlctl/tape.hpp"
#include "stlctl/tensor.hpp"

namespace stlctl::stl {

// A predicate mu is true iff h(x) > 0. Each entry can evaluate its
// margin h exactly and can emit the same margin onto a tape (with inner
// min reductions softened at temperature beta). arity reports the size
// of that inner reduction (1 when there is none).
struct Predicate {
  std::string name;
  std::function<double(const Vec&)> eval;
  std::function<int(ad::Tape&, int state_node, double beta)> compile;
  int arity = 1;
};

class PredicateRegistry {
 public:
  int add(Predicate p);
  int find(const std::string& name) const;  // -1 when absent
  const Predicate& at(int id) const;
  std::size_t size() const { return preds_.size(); }

 private:
  std::vector<Predicate> preds_;
};

// h(x) = w . x - offset
Predicate halfplane(std::string name, Vec w, double offset);

// Axis-aligned box margin over two coordinates: the minimum of the four
// signed distances to the box faces (positive inside).
Predicate box(std::string name, int dim_x, int dim_y, double x_lo, double x_hi, double y_lo,
              double y_hi);

// Disk-interior margin h(x) = r - ||p - c||; "not <this>" therefore has
// robustness ||p - c|| - r, the distance to the obstacle boundary.
Predicate circle_inside(std::string name, int dim_x, int dim_y, double cx, double cy, double r);

}  // namespace stlctl::stl
