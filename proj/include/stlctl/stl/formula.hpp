#pragma once
#include <memory>
#include <string>
#include <vector>

#include "stlctl/error.hpp"

namespace stlctl::stl {

class PredicateRegistry;

// Immutable STL formula node. Trees are shared via shared_ptr and safe
// to read from any thread.
//
// Normalized form (produced by normalize(), and by parse()):
//   - Not appears only directly above a Predicate,
//   - And/Or are flattened, n-ary, with no True children
//     (a formula that simplifies away entirely becomes True).
struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind { True, Predicate, Not, And, Or, Until, Eventually, Always };

  Kind kind = Kind::True;
  int pred = -1;                    // Predicate: registry id
  std::vector<FormulaPtr> children;  // Not:1, And/Or:n, Until:2, F/G:1
  int lo = 0;                        // interval [lo, hi] for Until/F/G
  int hi = 0;
};

FormulaPtr make_true();
FormulaPtr make_pred(int pred_id);
FormulaPtr make_not(FormulaPtr f);
// And/Or constructors flatten nested conjunctions/disjunctions of the
// same kind and drop/absorb True children.
FormulaPtr make_and(std::vector<FormulaPtr> children);
FormulaPtr make_or(std::vector<FormulaPtr> children);
FormulaPtr make_until(FormulaPtr left, FormulaPtr right, int lo, int hi);
FormulaPtr make_eventually(FormulaPtr child, int lo, int hi);
FormulaPtr make_always(FormulaPtr child, int lo, int hi);

// Pushes negation down to predicate level (De Morgan, ~G=F~, ~F=G~,
// double-negation elimination). Negation over Until or True has no
// representation in this grammar fragment and is rejected.
FormulaPtr normalize(const FormulaPtr& f);

// Nesting-sum of interval upper bounds: the number of steps beyond t
// the formula can inspect.
int horizon(const Formula& f);

bool equal(const Formula& a, const Formula& b);

// Canonical text form; parse(to_text(f)) reproduces f for normalized
// formulas. Predicate names come from the registry.
std::string to_text(const Formula& f, const PredicateRegistry& reg);

}  // namespace stlctl::stl
