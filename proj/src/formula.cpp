#include "stlctl/stl/formula.hpp"

#include <algorithm>

#include "stlctl/stl/predicates.hpp"

namespace stlctl::stl {

namespace {

FormulaPtr node(Formula f) { return std::make_shared<const Formula>(std::move(f)); }

void check_interval(int lo, int hi) {
  if (lo < 0 || hi < 0 || lo > hi)
    throw Error("invalid interval [" + std::to_string(lo) + "," + std::to_string(hi) +
                "]: bounds must be nonnegative with a <= b");
}

// Flattens same-kind children and applies True absorption:
//   And: drop True children (all True -> True)
//   Or:  any True child -> True
FormulaPtr make_nary(Formula::Kind kind, std::vector<FormulaPtr> children) {
  std::vector<FormulaPtr> flat;
  for (auto& c : children) {
    if (!c) throw Error("null child in formula");
    if (c->kind == kind) {
      flat.insert(flat.end(), c->children.begin(), c->children.end());
    } else if (c->kind == Formula::Kind::True) {
      if (kind == Formula::Kind::Or) return make_true();
    } else {
      flat.push_back(std::move(c));
    }
  }
  if (flat.empty()) {
    // And of nothing (or only True children) is True; Or of nothing has
    // no representation here.
    if (kind == Formula::Kind::And) return make_true();
    throw Error("or-formula requires at least one child");
  }
  if (flat.size() == 1) return flat[0];
  Formula f;
  f.kind = kind;
  f.children = std::move(flat);
  return node(std::move(f));
}

}  // namespace

FormulaPtr make_true() {
  Formula f;
  f.kind = Formula::Kind::True;
  return node(std::move(f));
}

FormulaPtr make_pred(int pred_id) {
  Formula f;
  f.kind = Formula::Kind::Predicate;
  f.pred = pred_id;
  return node(std::move(f));
}

FormulaPtr make_not(FormulaPtr child) {
  Formula f;
  f.kind = Formula::Kind::Not;
  f.children = {std::move(child)};
  return node(std::move(f));
}

FormulaPtr make_and(std::vector<FormulaPtr> children) {
  return make_nary(Formula::Kind::And, std::move(children));
}

FormulaPtr make_or(std::vector<FormulaPtr> children) {
  return make_nary(Formula::Kind::Or, std::move(children));
}

FormulaPtr make_until(FormulaPtr left, FormulaPtr right, int lo, int hi) {
  check_interval(lo, hi);
  Formula f;
  f.kind = Formula::Kind::Until;
  f.children = {std::move(left), std::move(right)};
  f.lo = lo;
  f.hi = hi;
  return node(std::move(f));
}

FormulaPtr make_eventually(FormulaPtr child, int lo, int hi) {
  check_interval(lo, hi);
  Formula f;
  f.kind = Formula::Kind::Eventually;
  f.children = {std::move(child)};
  f.lo = lo;
  f.hi = hi;
  return node(std::move(f));
}

FormulaPtr make_always(FormulaPtr child, int lo, int hi) {
  check_interval(lo, hi);
  Formula f;
  f.kind = Formula::Kind::Always;
  f.children = {std::move(child)};
  f.lo = lo;
  f.hi = hi;
  return node(std::move(f));
}

namespace {

FormulaPtr normalize_impl(const FormulaPtr& f, bool negated) {
  switch (f->kind) {
    case Formula::Kind::True:
      if (negated)
        throw Error("cannot normalize: negation of 'true' has no representation in this grammar");
      return f;
    case Formula::Kind::Predicate:
      return negated ? make_not(f) : f;
    case Formula::Kind::Not:
      return normalize_impl(f->children[0], !negated);
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      const bool as_and = (f->kind == Formula::Kind::And) != negated;
      std::vector<FormulaPtr> kids;
      kids.reserve(f->children.size());
      for (const auto& c : f->children) kids.push_back(normalize_impl(c, negated));
      return as_and ? make_and(std::move(kids)) : make_or(std::move(kids));
    }
    case Formula::Kind::Until: {
      if (negated)
        throw Error(
            "cannot normalize: negation over 'until' requires a release operator, which this "
            "grammar does not include");
      return make_until(normalize_impl(f->children[0], false),
                        normalize_impl(f->children[1], false), f->lo, f->hi);
    }
    case Formula::Kind::Eventually: {
      auto c = normalize_impl(f->children[0], negated);
      return negated ? make_always(std::move(c), f->lo, f->hi)
                     : make_eventually(std::move(c), f->lo, f->hi);
    }
    case Formula::Kind::Always: {
      auto c = normalize_impl(f->children[0], negated);
      return negated ? make_eventually(std::move(c), f->lo, f->hi)
                     : make_always(std::move(c), f->lo, f->hi);
    }
  }
  throw Error("normalize: unreachable");
}

}  // namespace

FormulaPtr normalize(const FormulaPtr& f) { return normalize_impl(f, false); }

int horizon(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::True:
    case Formula::Kind::Predicate:
      return 0;
    case Formula::Kind::Not:
      return horizon(*f.children[0]);
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      int h = 0;
      for (const auto& c : f.children) h = std::max(h, horizon(*c));
      return h;
    }
    case Formula::Kind::Until:
      return f.hi + std::max(horizon(*f.children[0]), horizon(*f.children[1]));
    case Formula::Kind::Eventually:
    case Formula::Kind::Always:
      return f.hi + horizon(*f.children[0]);
  }
  return 0;
}

bool equal(const Formula& a, const Formula& b) {
  if (a.kind != b.kind || a.pred != b.pred || a.lo != b.lo || a.hi != b.hi ||
      a.children.size() != b.children.size())
    return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!equal(*a.children[i], *b.children[i])) return false;
  return true;
}

namespace {

// Lower value binds looser. Children at or below the parent level get
// parenthesized so the canonical text reparses to the same tree.
int level(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Or: return 0;
    case Formula::Kind::And: return 1;
    case Formula::Kind::Until: return 2;
    case Formula::Kind::Not:
    case Formula::Kind::Eventually:
    case Formula::Kind::Always: return 3;
    default: return 4;
  }
}

std::string interval_text(const Formula& f) {
  return "[" + std::to_string(f.lo) + "," + std::to_string(f.hi) + "]";
}

std::string render(const Formula& f, const PredicateRegistry& reg, int parent_level) {
  std::string out;
  switch (f.kind) {
    case Formula::Kind::True:
      out = "true";
      break;
    case Formula::Kind::Predicate:
      out = reg.at(f.pred).name;
      break;
    case Formula::Kind::Not:
      out = "not " + render(*f.children[0], reg, level(f));
      break;
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      const char* sep = f.kind == Formula::Kind::And ? " and " : " or ";
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        if (i) out += sep;
        out += render(*f.children[i], reg, level(f));
      }
      break;
    }
    case Formula::Kind::Until:
      out = render(*f.children[0], reg, level(f)) + " until" + interval_text(f) + " " +
            render(*f.children[1], reg, level(f));
      break;
    case Formula::Kind::Eventually:
      out = "F" + interval_text(f) + " " + render(*f.children[0], reg, level(f));
      break;
    case Formula::Kind::Always:
      out = "G" + interval_text(f) + " " + render(*f.children[0], reg, level(f));
      break;
  }
  if (level(f) <= parent_level && f.kind != Formula::Kind::True &&
      f.kind != Formula::Kind::Predicate)
    return "(" + out + ")";
  return out;
}

}  // namespace

std::string to_text(const Formula& f, const PredicateRegistry& reg) { return render(f, reg, -1); }

}  // namespace stlctl::stl
