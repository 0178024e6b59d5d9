#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "random_stl.hpp"
#include "stl_oracle.hpp"
#include "stlctl/stl/parser.hpp"
#include "stlctl/stl/semantics.hpp"

using namespace stlctl;
using namespace stlctl::stl;

namespace {

PredicateRegistry pos_registry() {
  PredicateRegistry reg;
  reg.add(halfplane("pos", {1.0}, 0.0));   // x > 0
  reg.add(halfplane("big", {1.0}, 2.0));   // x > 2
  reg.add(halfplane("ge1", {1.0}, 1.0));   // x > 1
  return reg;
}

Trajectory traj1(std::initializer_list<double> xs) {
  Trajectory t;
  for (double x : xs) t.states.push_back({x});
  return t;
}

}  // namespace

TEST_CASE("boolean semantics basics") {
  auto reg = pos_registry();
  CHECK(eval_bool(*parse("ge1", reg), reg, traj1({3}), 0));
  CHECK_FALSE(eval_bool(*parse("G[0,2] pos", reg), reg, traj1({1, 2, -0.5}), 0));
  // until with t1 = 1: pos holds at 0..1, big holds at 1
  CHECK(eval_bool(*parse("pos until[0,2] big", reg), reg, traj1({1, 3, 0.5}), 0));
}

TEST_CASE("horizon too short raises an error naming the requirement") {
  auto reg = pos_registry();
  CHECK_THROWS_WITH_AS(eval_bool(*parse("G[0,5] pos", reg), reg, traj1({1, 1}), 0),
                       doctest::Contains("requires at least 5"), Error);
  CHECK_THROWS_AS(robustness(*parse("G[0,5] pos", reg), reg, traj1({1, 1}), 0), Error);
}

TEST_CASE("robustness basics") {
  auto reg = pos_registry();
  CHECK(robustness(*parse("G[0,2] pos", reg), reg, traj1({1, 2, 0.5}), 0) == doctest::Approx(0.5));
  CHECK(robustness(*parse("F[0,2] pos", reg), reg, traj1({-1, -2, 3}), 0) == doctest::Approx(3.0));
  CHECK(robustness(*parse("pos until[0,2] big", reg), reg, traj1({1, 3, 0.5}), 0) ==
        doctest::Approx(1.0));
}

TEST_CASE("F equals true-until exactly") {
  auto thr = testutil::threshold_registry(2);
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    auto traj = testutil::random_trajectory(rng, 8, 2);
    const int hi = static_cast<int>(rng.below(5));
    const int lo = static_cast<int>(rng.below(static_cast<std::uint64_t>(hi) + 1));
    auto child = testutil::random_formula(rng, thr, 1, 3);
    auto f = make_eventually(child, lo, hi);
    auto u = make_until(make_true(), child, lo, hi);
    if (horizon(*f) > traj.horizon()) continue;
    CHECK(robustness(*f, thr, traj, 0) == robustness(*u, thr, traj, 0));
  }
}

TEST_CASE("oracle equivalence and sign soundness on random formulas") {
  auto thr = testutil::threshold_registry(3);
  Rng rng(2024);
  int sign_checked = 0;
  for (int i = 0; i < 500; ++i) {
    const int T = 4 + static_cast<int>(rng.below(7));
    auto traj = testutil::random_trajectory(rng, T, 3);
    auto f = normalize(testutil::random_formula(rng, thr, 3, T));
    if (horizon(*f) > T) continue;
    const double r = robustness(*f, thr, traj, 0);
    const double o = testutil::oracle_robustness(*f, thr, traj, 0);
    CHECK(r == doctest::Approx(o).epsilon(1e-12));
    const bool b = eval_bool(*f, thr, traj, 0);
    CHECK(b == testutil::oracle_bool(*f, thr, traj, 0));
    if (std::abs(r) > 1e-9) {
      CHECK((r > 0) == b);
      ++sign_checked;
    }
  }
  CHECK(sign_checked > 300);
}

TEST_CASE("smooth robustness closed-form cases") {
  auto reg = pos_registry();
  ad::Tape t;
  std::vector<int> states = {t.leaf(Tensor::vector({1.0})), t.leaf(Tensor::vector({1.0}))};
  auto f = parse("G[0,1] pos", reg);
  auto sm = smooth_robustness(t, *f, reg, states, 0, 100.0);
  CHECK(t.val(sm.node).value() == doctest::Approx(1.0 - std::log(2.0) / 100.0).epsilon(1e-12));
  CHECK(sm.max_arity == 2);
}

TEST_CASE("smooth robustness converges to exact as beta grows") {
  auto thr = testutil::threshold_registry(2);
  Rng rng(555);
  for (int i = 0; i < 50; ++i) {
    const int T = 4 + static_cast<int>(rng.below(5));
    auto traj = testutil::random_trajectory(rng, T, 2);
    auto f = normalize(testutil::random_formula(rng, thr, 3, T));
    if (horizon(*f) > T) continue;
    const double exact = robustness(*f, thr, traj, 0);
    double prev_max = std::numeric_limits<double>::infinity();
    for (double beta : {1.0, 10.0, 100.0, 1000.0}) {
      ad::Tape t;
      std::vector<int> states;
      for (const auto& s : traj.states) states.push_back(t.leaf(Tensor::vector(s)));
      auto sm = smooth_robustness(t, *f, thr, states, 0, beta);
      const double err = std::abs(t.val(sm.node).value() - exact);
      const double bound = std::log(static_cast<double>(sm.max_arity)) / beta;
      CHECK(err <= bound + 1e-12);
      CHECK(err <= prev_max + 1e-12);
      prev_max = err;
    }
  }
}

TEST_CASE("smooth robustness gradient matches finite differences per state entry") {
  auto thr = testutil::threshold_registry(2);
  Rng rng(777);
  int checked = 0;
  for (int i = 0; i < 20; ++i) {
    const int T = 5;
    auto traj = testutil::random_trajectory(rng, T, 2);
    auto f = normalize(testutil::random_formula(rng, thr, 2, T));
    if (horizon(*f) > T) continue;
    ad::Tape t;
    std::vector<int> states;
    for (const auto& s : traj.states) states.push_back(t.leaf(Tensor::vector(s)));
    auto sm = smooth_robustness(t, *f, thr, states, 0, 8.0);
    t.backward(sm.node);
    for (int k = 0; k <= T; ++k) {
      for (int d = 0; d < 2; ++d) {
        double fd = testutil::central_diff(
            [&](double v) {
              Trajectory tr2 = traj;
              tr2.states[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] = v;
              ad::Tape t2;
              std::vector<int> st2;
              for (const auto& s : tr2.states) st2.push_back(t2.leaf(Tensor::vector(s)));
              return t2.val(smooth_robustness(t2, *f, thr, st2, 0, 8.0).node).value();
            },
            traj.states[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)]);
        CHECK(testutil::rel_err(t.grad(states[static_cast<std::size_t>(k)]).data[static_cast<std::size_t>(d)], fd) < 1e-4);
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("smooth robustness rejects nonpositive beta and trivially-true formulas") {
  auto reg = pos_registry();
  ad::Tape t;
  std::vector<int> states = {t.leaf(Tensor::vector({1.0}))};
  CHECK_THROWS_AS(smooth_robustness(t, *parse("pos", reg), reg, states, 0, 0.0), Error);
  CHECK_THROWS_AS(smooth_robustness(t, *parse("true", reg), reg, states, 0, 1.0), Error);
}

TEST_CASE("box predicate margins and smooth softening") {
  PredicateRegistry reg;
  reg.add(box("b", 0, 1, 0, 4, 0, 2));
  Vec inside = {1.0, 1.0};
  CHECK(reg.at(0).eval(inside) == doctest::Approx(1.0));
  Vec outside = {5.0, 1.0};
  CHECK(reg.at(0).eval(outside) == doctest::Approx(-1.0));
  ad::Tape t;
  int s = t.leaf(Tensor::vector(inside));
  int m = reg.at(0).compile(t, s, 1000.0);
  CHECK(t.val(m).value() == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(t.val(m).value() < 1.0);  // softmin under-estimates the min
}

TEST_CASE("circle predicate is the signed boundary distance") {
  PredicateRegistry reg;
  reg.add(circle_inside("c", 0, 1, 3.0, 4.0, 2.0));
  CHECK(reg.at(0).eval({3.0, 4.0}) == doctest::Approx(2.0));
  CHECK(reg.at(0).eval({0.0, 0.0}) == doctest::Approx(-3.0));  // dist 5, r 2
  // "not c" robustness = distance to the boundary
  auto f = make_not(make_pred(0));
  Trajectory traj;
  traj.states = {{0.0, 0.0}};
  CHECK(robustness(*f, reg, traj, 0) == doctest::Approx(3.0));
}
