#include "stlctl/stl/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

namespace stlctl::stl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_horizon(const Formula& f, const Trajectory& traj, int t) {
  traj.check_consistent();
  const int need = t + horizon(f);
  if (t < 0 || need > traj.horizon())
    throw Error("trajectory horizon " + std::to_string(traj.horizon()) +
                " too short: evaluation at t=" + std::to_string(t) + " requires at least " +
                std::to_string(need));
}

// A formula whose robustness is +inf regardless of the trajectory.
bool trivially_true(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::True:
      return true;
    case Formula::Kind::Eventually:
    case Formula::Kind::Always:
      return trivially_true(*f.children[0]);
    case Formula::Kind::Until:
      return trivially_true(*f.children[0]) && trivially_true(*f.children[1]);
    default:
      return false;
  }
}

// Exact robustness series over each subformula's full valid range
// [0, T - horizon(sub)]. Shared subtrees are computed once.
struct ExactEval {
  const PredicateRegistry& reg;
  const Trajectory& traj;
  std::unordered_map<const Formula*, std::vector<double>> cache;

  const std::vector<double>& series(const Formula& f) {
    auto it = cache.find(&f);
    if (it != cache.end()) return it->second;
    const int len = traj.horizon() - horizon(f) + 1;
    std::vector<double> out(static_cast<std::size_t>(len));
    switch (f.kind) {
      case Formula::Kind::True:
        std::fill(out.begin(), out.end(), kInf);
        break;
      case Formula::Kind::Predicate: {
        const auto& p = reg.at(f.pred);
        for (int t = 0; t < len; ++t) out[static_cast<std::size_t>(t)] = p.eval(traj.states[static_cast<std::size_t>(t)]);
        break;
      }
      case Formula::Kind::Not: {
        const auto& c = series(*f.children[0]);
        for (int t = 0; t < len; ++t) out[static_cast<std::size_t>(t)] = -c[static_cast<std::size_t>(t)];
        break;
      }
      case Formula::Kind::And:
      case Formula::Kind::Or: {
        const bool is_and = f.kind == Formula::Kind::And;
        std::fill(out.begin(), out.end(), is_and ? kInf : -kInf);
        for (const auto& child : f.children) {
          const auto& c = series(*child);
          for (int t = 0; t < len; ++t) {
            double& o = out[static_cast<std::size_t>(t)];
            o = is_and ? std::min(o, c[static_cast<std::size_t>(t)]) : std::max(o, c[static_cast<std::size_t>(t)]);
          }
        }
        break;
      }
      case Formula::Kind::Until: {
        const auto& r1 = series(*f.children[0]);
        const auto& r2 = series(*f.children[1]);
        for (int t = 0; t < len; ++t) {
          double prefix = kInf;
          double best = -kInf;
          for (int t1 = t; t1 <= t + f.hi; ++t1) {
            prefix = std::min(prefix, r1[static_cast<std::size_t>(t1)]);
            if (t1 >= t + f.lo) best = std::max(best, std::min(r2[static_cast<std::size_t>(t1)], prefix));
          }
          out[static_cast<std::size_t>(t)] = best;
        }
        break;
      }
      case Formula::Kind::Eventually:
      case Formula::Kind::Always: {
        const bool is_max = f.kind == Formula::Kind::Eventually;
        const auto& c = series(*f.children[0]);
        for (int t = 0; t < len; ++t) {
          double acc = is_max ? -kInf : kInf;
          for (int k = t + f.lo; k <= t + f.hi; ++k)
            acc = is_max ? std::max(acc, c[static_cast<std::size_t>(k)]) : std::min(acc, c[static_cast<std::size_t>(k)]);
          out[static_cast<std::size_t>(t)] = acc;
        }
        break;
      }
    }
    return cache.emplace(&f, std::move(out)).first->second;
  }
};

}  // namespace

double robustness(const Formula& f, const PredicateRegistry& reg, const Trajectory& traj, int t) {
  check_horizon(f, traj, t);
  ExactEval ev{reg, traj, {}};
  return ev.series(f)[static_cast<std::size_t>(t)];
}

bool eval_bool(const Formula& f, const PredicateRegistry& reg, const Trajectory& traj, int t) {
  check_horizon(f, traj, t);
  switch (f.kind) {
    case Formula::Kind::True:
      return true;
    case Formula::Kind::Predicate:
      return reg.at(f.pred).eval(traj.states[static_cast<std::size_t>(t)]) > 0.0;
    case Formula::Kind::Not:
      return !eval_bool(*f.children[0], reg, traj, t);
    case Formula::Kind::And:
      for (const auto& c : f.children)
        if (!eval_bool(*c, reg, traj, t)) return false;
      return true;
    case Formula::Kind::Or:
      for (const auto& c : f.children)
        if (eval_bool(*c, reg, traj, t)) return true;
      return false;
    case Formula::Kind::Until:
      for (int t1 = t + f.lo; t1 <= t + f.hi; ++t1) {
        if (!eval_bool(*f.children[1], reg, traj, t1)) continue;
        bool prefix_ok = true;
        for (int t2 = t; t2 <= t1 && prefix_ok; ++t2)
          prefix_ok = eval_bool(*f.children[0], reg, traj, t2);
        if (prefix_ok) return true;
      }
      return false;
    case Formula::Kind::Eventually:
      for (int k = t + f.lo; k <= t + f.hi; ++k)
        if (eval_bool(*f.children[0], reg, traj, k)) return true;
      return false;
    case Formula::Kind::Always:
      for (int k = t + f.lo; k <= t + f.hi; ++k)
        if (!eval_bool(*f.children[0], reg, traj, k)) return false;
      return true;
  }
  throw Error("eval_bool: unreachable");
}

namespace {

// --- reduction-structure analysis -----------------------------------
//
// The smooth evaluator flattens runs of same-direction connectives
// (And over Always over And becomes one wide reduction), centers each
// softmax by -log(arity)/beta so that every reduction
// under-approximates its exact counterpart, and sharpens the internal
// temperature by K = (worst root-to-leaf sum of log arities)/log(m_max).
// A 1-Lipschitz induction then gives, for negation-over-scalar-margin
// formulas,
//     0 <= exact - smooth <= log(m_max)/beta,
// and since centered log-sum-exp reductions are pointwise monotone in
// beta (convexity of the cumulant generating function), the gap is
// monotone non-increasing in beta as well.

// Number of scalar terms a min- (or max-) directed flattening of f
// contributes. Trivially-true subformulas contribute nothing to a min.
int count_parts(const Formula& f, bool is_min) {
  if (trivially_true(f)) return is_min ? 0 : -1;  // -1: caller must reject
  if (is_min && f.kind == Formula::Kind::And) {
    int n = 0;
    for (const auto& c : f.children) n += count_parts(*c, true);
    return n;
  }
  if (!is_min && f.kind == Formula::Kind::Or) {
    int n = 0;
    for (const auto& c : f.children) {
      const int k = count_parts(*c, false);
      if (k < 0) return -1;
      n += k;
    }
    return n;
  }
  if (is_min && f.kind == Formula::Kind::Always)
    return (f.hi - f.lo + 1) * count_parts(*f.children[0], true);
  if (!is_min && f.kind == Formula::Kind::Eventually) {
    const int k = count_parts(*f.children[0], false);
    return k < 0 ? -1 : (f.hi - f.lo + 1) * k;
  }
  return 1;
}

// Compile roots remaining after directional absorption.
void frontier(const Formula& f, bool is_min, std::vector<const Formula*>& out) {
  if (trivially_true(f)) return;
  if ((is_min && f.kind == Formula::Kind::And) || (!is_min && f.kind == Formula::Kind::Or)) {
    for (const auto& c : f.children) frontier(*c, is_min, out);
    return;
  }
  if ((is_min && f.kind == Formula::Kind::Always) ||
      (!is_min && f.kind == Formula::Kind::Eventually)) {
    frontier(*f.children[0], is_min, out);
    return;
  }
  out.push_back(&f);
}

struct ArityInfo {
  double path = 0.0;  // max over root-leaf paths of the summed log arities
  int arity = 1;      // widest single reduction
};

ArityInfo analyze(const Formula& f, const PredicateRegistry& reg) {
  auto over_frontier = [&](const std::vector<const Formula*>& roots) {
    ArityInfo best;
    for (const Formula* r : roots) {
      ArityInfo i = analyze(*r, reg);
      best.path = std::max(best.path, i.path);
      best.arity = std::max(best.arity, i.arity);
    }
    return best;
  };
  auto layered = [&](int m, const ArityInfo& sub) {
    ArityInfo out;
    out.arity = std::max(m, sub.arity);
    out.path = (m > 1 ? std::log(static_cast<double>(m)) : 0.0) + sub.path;
    return out;
  };
  switch (f.kind) {
    case Formula::Kind::True:
      return {};
    case Formula::Kind::Predicate: {
      const int a = reg.at(f.pred).arity;
      return {a > 1 ? std::log(static_cast<double>(a)) : 0.0, std::max(a, 1)};
    }
    case Formula::Kind::Not:
      return analyze(*f.children[0], reg);
    case Formula::Kind::And:
    case Formula::Kind::Always: {
      std::vector<const Formula*> roots;
      frontier(f, true, roots);
      return layered(count_parts(f, true), over_frontier(roots));
    }
    case Formula::Kind::Or:
    case Formula::Kind::Eventually: {
      std::vector<const Formula*> roots;
      frontier(f, false, roots);
      return layered(count_parts(f, false), over_frontier(roots));
    }
    case Formula::Kind::Until: {
      const int m_outer = f.hi - f.lo + 1;
      const int left = count_parts(*f.children[0], true);
      const int right = count_parts(*f.children[1], true);
      const int m_inner = right + (f.hi + 1) * left;
      std::vector<const Formula*> roots;
      frontier(*f.children[0], true, roots);
      frontier(*f.children[1], true, roots);
      return layered(m_outer, layered(m_inner, over_frontier(roots)));
    }
  }
  return {};
}

struct SmoothEval {
  ad::Tape& tape;
  const PredicateRegistry& reg;
  std::span<const int> states;
  double beta;  // effective (K-scaled) temperature
  std::map<std::pair<const Formula*, int>, int> memo;

  int reduce(std::vector<int>& parts, bool is_min) {
    if (parts.empty()) throw Error("smooth robustness: empty reduction");
    if (parts.size() == 1) return parts[0];
    int stacked = tape.stack(parts);
    if (is_min) return tape.softmin(stacked, beta);
    // centered softmax: under-approximates the exact max
    const double shift = std::log(static_cast<double>(parts.size())) / beta;
    return tape.affine(tape.softmax(stacked, beta), 1.0, -shift);
  }

  // Appends node ids whose is_min-directed reduction equals the smooth
  // robustness of f at t, absorbing same-direction connectives.
  void parts(const Formula& f, int t, bool is_min, std::vector<int>& out) {
    if (trivially_true(f)) {
      if (is_min) return;  // neutral element of min
      throw Error("smooth robustness of a trivially-true subformula is unbounded");
    }
    if (is_min && f.kind == Formula::Kind::And) {
      for (const auto& c : f.children) parts(*c, t, true, out);
      return;
    }
    if (!is_min && f.kind == Formula::Kind::Or) {
      for (const auto& c : f.children) parts(*c, t, false, out);
      return;
    }
    if (is_min && f.kind == Formula::Kind::Always) {
      for (int k = t + f.lo; k <= t + f.hi; ++k) parts(*f.children[0], k, true, out);
      return;
    }
    if (!is_min && f.kind == Formula::Kind::Eventually) {
      for (int k = t + f.lo; k <= t + f.hi; ++k) parts(*f.children[0], k, false, out);
      return;
    }
    out.push_back(compile(f, t));
  }

  int compile(const Formula& f, int t) {
    const auto key = std::make_pair(&f, t);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    if (trivially_true(f))
      throw Error("smooth robustness of a trivially-true subformula is unbounded");
    int node = -1;
    std::vector<int> group;
    switch (f.kind) {
      case Formula::Kind::True:
        throw Error("smooth robustness: unreachable 'true'");
      case Formula::Kind::Predicate:
        node = reg.at(f.pred).compile(tape, states[static_cast<std::size_t>(t)], beta);
        break;
      case Formula::Kind::Not:
        node = tape.affine(compile(*f.children[0], t), -1.0, 0.0);
        break;
      case Formula::Kind::And:
      case Formula::Kind::Always:
        parts(f, t, true, group);
        node = reduce(group, true);
        break;
      case Formula::Kind::Or:
      case Formula::Kind::Eventually:
        parts(f, t, false, group);
        node = reduce(group, false);
        break;
      case Formula::Kind::Until: {
        const Formula& left = *f.children[0];
        const Formula& right = *f.children[1];
        std::vector<int> window, inner;
        for (int t1 = t + f.lo; t1 <= t + f.hi; ++t1) {
          inner.clear();
          parts(right, t1, true, inner);
          for (int t2 = t; t2 <= t1; ++t2) parts(left, t2, true, inner);
          window.push_back(reduce(inner, true));
        }
        node = reduce(window, false);
        break;
      }
    }
    memo.emplace(key, node);
    return node;
  }
};

}  // namespace

SmoothRobustness smooth_robustness(ad::Tape& tape, const Formula& f, const PredicateRegistry& reg,
                                   std::span<const int> states, int t, double beta) {
  if (!(beta > 0.0)) throw Error("smooth robustness: beta must be positive");
  const int T = static_cast<int>(states.size()) - 1;
  const int need = t + horizon(f);
  if (t < 0 || need > T)
    throw Error("state sequence of length " + std::to_string(T + 1) +
                " too short: evaluation at t=" + std::to_string(t) + " requires at least " +
                std::to_string(need + 1));
  if (trivially_true(f)) throw Error("smooth robustness of a trivially-true formula is unbounded");
  const ArityInfo info = analyze(f, reg);
  double scale = 1.0;
  if (info.arity > 1)
    scale = std::max(1.0, info.path / std::log(static_cast<double>(info.arity)));
  SmoothEval ev{tape, reg, states, scale * beta, {}};
  int node = ev.compile(f, t);
  return {node, info.arity};
}

}  // namespace stlctl::stl
