#pragma once
#include <string>

#include "stlctl/stl/formula.hpp"
#include "stlctl/stl/predicates.hpp"

namespace stlctl::stl {

// Parses the STL text grammar:
//
//   formula := or_expr
//   or_expr := and_expr ("or" and_expr)*
//   and_expr := until_expr ("and" until_expr)*
//   until_expr := unary ("until" "[" a "," b "]" until_expr)?   (right-assoc)
//   unary := "not" unary | "F" "[" a "," b "]" unary | "G" "[" a "," b "]" unary | atom
//   atom := "true" | predicate-name | "(" formula ")"
//
// "and"/"or" are left-associative and flattened; "not" binds tightest.
// Predicate names resolve against the registry. The result is
// normalized (negation pushed to predicate level). Throws ParseError
// with line/column on malformed text or unknown predicate names.
FormulaPtr parse(const std::string& text, const PredicateRegistry& registry);

}  // namespace stlctl::stl
