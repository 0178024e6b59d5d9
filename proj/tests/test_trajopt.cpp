#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stlctl/stl/parser.hpp"
#include "stlctl/trajopt.hpp"

using namespace stlctl;

namespace {

// 1-D single integrator with |u| <= 1 and an interval goal predicate.
struct Toy {
  SingleIntegrator model{1, 1.0};
  stl::PredicateRegistry registry;
  Toy(double lo, double hi) {
    Vec up = {1.0}, dn = {-1.0};
    registry.add(stl::halfplane("above", up, lo));
    registry.add(stl::halfplane("below", dn, -hi));
  }
  stl::FormulaPtr goal_formula(int T) {
    return stl::parse("F[0," + std::to_string(T) + "] (above and below)", registry);
  }
};

InstanceProblem toy_problem(Toy& toy, double x0, int T, double gamma = 0.0) {
  InstanceProblem p;
  p.model = &toy.model;
  p.registry = &toy.registry;
  p.formula = toy.goal_formula(T);
  p.x0 = {x0};
  p.T = T;
  p.gamma = gamma;
  p.R = Tensor::matrix(1, 1, {1.0});
  p.opts.beta_schedule = {2.0, 10.0};
  p.opts.iters_per_stage = 120;
  p.opts.restarts = 2;
  return p;
}

}  // namespace

TEST_CASE("build_phi_xi composes avoidance clauses") {
  stl::PredicateRegistry reg;
  reg.add(stl::box("goal", 0, 1, 0, 1, 0, 1));
  auto psi = stl::parse("F[0,5] goal", reg);

  SUBCASE("empty obstacle set returns psi unchanged") {
    auto reg2 = reg;
    CHECK(equal(*build_phi_xi(psi, {}, 5, reg2), *psi));
  }

  SUBCASE("two obstacles yield a flattened conjunction") {
    auto reg2 = reg;
    ObstacleSet xi = {{3.0, 3.0, 1.0}, {5.0, 5.0, 0.5}};
    auto phi = build_phi_xi(psi, xi, 5, reg2);
    REQUIRE(phi->kind == stl::Formula::Kind::And);
    REQUIRE(phi->children.size() == 3);
    CHECK(equal(*phi->children[0], *psi));
    for (int i = 1; i <= 2; ++i) {
      CHECK(phi->children[static_cast<std::size_t>(i)]->kind == stl::Formula::Kind::Always);
      CHECK(phi->children[static_cast<std::size_t>(i)]->hi == 5);
      CHECK(phi->children[static_cast<std::size_t>(i)]->children[0]->kind == stl::Formula::Kind::Not);
    }
    CHECK(reg2.find("obs1") >= 0);
    CHECK(reg2.find("obs2") >= 0);
  }

  SUBCASE("avoidance robustness equals clearance to the nearest obstacle boundary") {
    auto reg2 = reg;
    ObstacleSet xi = {{3.0, 0.0, 1.0}, {-4.0, 0.0, 2.0}};
    auto avoid = build_phi_xi(stl::make_true(), xi, 2, reg2);
    // trajectory pinned at origin: clearances 2 and 2
    Trajectory traj;
    traj.states = {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
    CHECK(stl::robustness(*avoid, reg2, traj, 0) == doctest::Approx(2.0));
  }
}

TEST_CASE("already-satisfied instance returns positive robustness immediately") {
  Toy toy(-1.0, 1.0);  // goal interval [-1, 1] around the start
  auto p = toy_problem(toy, 0.0, 4);
  p.opts.iters_per_stage = 5;
  auto rec = solve_instance(p, 7);
  CHECK(rec.feasible);
  CHECK(rec.robustness > 0.0);
}

TEST_CASE("feasible toy instance is solved (constant-control oracle confirms feasibility)") {
  // goal [5,6] from x0=2 with T=5: u = 0.7 lands at 5.5
  Toy toy(5.0, 6.0);
  Vec x = {2.0};
  for (int k = 0; k < 5; ++k) x = toy.model.step(x, {0.7});
  CHECK(x[0] == doctest::Approx(5.5));

  auto p = toy_problem(toy, 2.0, 5);
  auto rec = solve_instance(p, 11);
  CHECK(rec.feasible);
  CHECK(rec.robustness > 0.0);
}

TEST_CASE("infeasible toy instance is flagged") {
  // goal [12,13] from x0=2 with T=5: max reach is 2 + 5 = 7 < 12
  Toy toy(12.0, 13.0);
  auto p = toy_problem(toy, 2.0, 5);
  auto rec = solve_instance(p, 13);
  CHECK_FALSE(rec.feasible);
  CHECK(rec.robustness < 0.0);
  CHECK_FALSE(rec.solver_failed);
}

TEST_CASE("returned record is dynamics-consistent with bounded controls") {
  Toy toy(4.0, 7.0);
  auto p = toy_problem(toy, 1.0, 6, 0.05);
  auto rec = solve_instance(p, 5);
  REQUIRE(rec.controls.size() == 6);
  for (const Vec& u : rec.controls) {
    CHECK(u[0] >= -1.0);
    CHECK(u[0] <= 1.0);
  }
  auto again = rollout(toy.model, rec.x0, rec.controls);
  REQUIRE(again.states.size() == rec.trajectory.states.size());
  for (std::size_t k = 0; k < again.states.size(); ++k)
    CHECK(std::abs(again.states[k][0] - rec.trajectory.states[k][0]) < 1e-9);
}

TEST_CASE("best objective never increases across annealing stages") {
  Toy toy(4.0, 6.0);
  auto p = toy_problem(toy, 0.0, 6, 0.1);
  p.opts.beta_schedule = {1.0, 5.0, 25.0};
  auto rec = solve_instance(p, 21);
  REQUIRE(rec.stage_best.size() == 3);
  CHECK(rec.stage_best[1] <= rec.stage_best[0] + 1e-12);
  CHECK(rec.stage_best[2] <= rec.stage_best[1] + 1e-12);
}

TEST_CASE("determinism: same seed, same record") {
  Toy toy(4.0, 6.0);
  auto p = toy_problem(toy, 0.0, 5, 0.02);
  auto a = solve_instance(p, 33);
  auto b = solve_instance(p, 33);
  CHECK(a.robustness == b.robustness);
  CHECK(a.objective == b.objective);
  CHECK(a.controls == b.controls);
}

TEST_CASE("gamma to zero solves 50 seeded feasible toys with at least 90 percent success") {
  Toy toy(5.0, 6.0);
  int ok = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto p = toy_problem(toy, 2.0, 5);
    auto rec = solve_instance(p, 1000 + s);
    if (rec.feasible) ++ok;
  }
  CHECK(ok >= 45);
}

TEST_CASE("record JSONL round-trip") {
  Toy toy(4.0, 6.0);
  auto p = toy_problem(toy, 0.0, 4, 0.01);
  auto rec = solve_instance(p, 3);
  rec.n = 17;
  std::ostringstream os;
  write_records(os, {rec});
  std::istringstream is(os.str());
  auto back = read_records(is);
  REQUIRE(back.size() == 1);
  CHECK(back[0].n == 17);
  CHECK(back[0].x0 == rec.x0);
  CHECK(back[0].controls == rec.controls);
  CHECK(back[0].trajectory.states == rec.trajectory.states);
  CHECK(back[0].robustness == rec.robustness);
  CHECK(back[0].feasible == rec.feasible);
}

TEST_CASE("strictly increasing beta schedule is enforced") {
  Toy toy(4.0, 6.0);
  auto p = toy_problem(toy, 0.0, 4);
  p.opts.beta_schedule = {10.0, 10.0};
  CHECK_THROWS_AS(solve_instance(p, 1), Error);
}
