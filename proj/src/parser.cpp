#include "stlctl/stl/parser.hpp"

#include <cctype>
#include <vector>

namespace stlctl::stl {

namespace {

enum class Tok { True, Ident, Not, And, Or, Until, Finally, Globally, LParen, RParen, LBracket, RBracket, Comma, Number, End };

struct Token {
  Tok kind;
  std::string text;
  long value = 0;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        col_ = 1;
        ++pos_;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
        continue;
      }
      int line = line_, col = col_;
      if (c == '(') { out.push_back({Tok::LParen, "(", 0, line, col}); advance(); continue; }
      if (c == ')') { out.push_back({Tok::RParen, ")", 0, line, col}); advance(); continue; }
      if (c == '[') { out.push_back({Tok::LBracket, "[", 0, line, col}); advance(); continue; }
      if (c == ']') { out.push_back({Tok::RBracket, "]", 0, line, col}); advance(); continue; }
      if (c == ',') { out.push_back({Tok::Comma, ",", 0, line, col}); advance(); continue; }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        std::string num;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          num += src_[pos_];
          advance();
        }
        out.push_back({Tok::Number, num, std::stol(num), line, col});
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string id;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          id += src_[pos_];
          advance();
        }
        Tok kind = Tok::Ident;
        if (id == "true") kind = Tok::True;
        else if (id == "not") kind = Tok::Not;
        else if (id == "and") kind = Tok::And;
        else if (id == "or") kind = Tok::Or;
        else if (id == "until") kind = Tok::Until;
        else if (id == "F") kind = Tok::Finally;
        else if (id == "G") kind = Tok::Globally;
        out.push_back({kind, id, 0, line, col});
        continue;
      }
      throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    out.push_back({Tok::End, "<end>", 0, line_, col_});
    return out;
  }

 private:
  void advance() {
    ++pos_;
    ++col_;
  }
  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, const PredicateRegistry& reg)
      : toks_(std::move(toks)), reg_(reg) {}

  FormulaPtr run() {
    FormulaPtr f = or_expr();
    expect(Tok::End, "end of input");
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind == k) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(Tok k, const std::string& what) {
    if (!accept(k))
      throw ParseError("expected " + what + ", got '" + peek().text + "'", peek().line, peek().col);
  }

  std::pair<int, int> interval() {
    expect(Tok::LBracket, "'['");
    const Token& a = peek();
    expect(Tok::Number, "interval lower bound");
    int lo = static_cast<int>(a.value);
    expect(Tok::Comma, "','");
    const Token& b = peek();
    expect(Tok::Number, "interval upper bound");
    int hi = static_cast<int>(b.value);
    expect(Tok::RBracket, "']'");
    if (lo > hi)
      throw ParseError("interval [" + std::to_string(lo) + "," + std::to_string(hi) +
                           "] has a > b",
                       a.line, a.col);
    return {lo, hi};
  }

  FormulaPtr or_expr() {
    std::vector<FormulaPtr> kids{and_expr()};
    while (accept(Tok::Or)) kids.push_back(and_expr());
    return kids.size() == 1 ? kids[0] : make_or(std::move(kids));
  }

  FormulaPtr and_expr() {
    std::vector<FormulaPtr> kids{until_expr()};
    while (accept(Tok::And)) kids.push_back(until_expr());
    return kids.size() == 1 ? kids[0] : make_and(std::move(kids));
  }

  FormulaPtr until_expr() {
    FormulaPtr left = unary();
    if (accept(Tok::Until)) {
      auto [lo, hi] = interval();
      FormulaPtr right = until_expr();
      return make_until(std::move(left), std::move(right), lo, hi);
    }
    return left;
  }

  FormulaPtr unary() {
    const Token& t = peek();
    if (accept(Tok::Not)) return make_not(unary());
    if (accept(Tok::Finally)) {
      auto [lo, hi] = interval();
      return make_eventually(unary(), lo, hi);
    }
    if (accept(Tok::Globally)) {
      auto [lo, hi] = interval();
      return make_always(unary(), lo, hi);
    }
    if (accept(Tok::True)) return make_true();
    if (peek().kind == Tok::Ident) {
      const Token& id = take();
      int pred = reg_.find(id.text);
      if (pred < 0) throw ParseError("unknown predicate '" + id.text + "'", id.line, id.col);
      return make_pred(pred);
    }
    if (accept(Tok::LParen)) {
      FormulaPtr f = or_expr();
      expect(Tok::RParen, "')'");
      return f;
    }
    throw ParseError("expected formula, got '" + t.text + "'", t.line, t.col);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const PredicateRegistry& reg_;
};

}  // namespace

FormulaPtr parse(const std::string& text, const PredicateRegistry& registry) {
  Parser p(Lexer(text).run(), registry);
  FormulaPtr raw = p.run();
  try {
    return normalize(raw);
  } catch (const Error& e) {
    throw ParseError(e.what(), 1, 1);
  }
}

}  // namespace stlctl::stl
