#pragma once

// Expression language for chart fields: a small recursive-descent parser, a
// printer that re-parses to the same tree, and compilation to ScalarField.
//
// Grammar (whitespace and newlines are insignificant):
//   expr     := term (('+' | '-') term)*
//   term     := unary (('*' | '/') unary)*
//   unary    := '-' unary | power
//   power    := atom ('^' exponent)?
//   exponent := '-'? INTEGER ('^' exponent)?        constant, right associative
//   atom     := NUMBER | NUMBER 'i' | 'i' | 'pi' | 'u1' | 'u2' | 'u3'
//             | FUNC '(' expr ')' | '(' expr ')'
//   FUNC     := 'sin' | 'cos' | 'exp' | 'sqrt' | 'conj'

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "crverify/chart_calculus.hpp"
#include "crverify/errors.hpp"

namespace crverify {

enum class ExprKind { number, imaginary, variable, pi, negate, function, binary, power };
enum class ExprFunc { sin, cos, exp, sqrt, conj };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprKind kind = ExprKind::number;
  double value = 0.0;  // number, imaginary coefficient
  int index = 0;       // variable axis
  ExprFunc func = ExprFunc::sin;
  char op = '+';     // binary operator
  int exponent = 1;  // power
  std::vector<Expr> args;
};

inline const char* to_string(ExprFunc f) {
  switch (f) {
    case ExprFunc::sin: return "sin";
    case ExprFunc::cos: return "cos";
    case ExprFunc::exp: return "exp";
    case ExprFunc::sqrt: return "sqrt";
    case ExprFunc::conj: return "conj";
  }
  return "?";
}

/// Structural equality of two trees.
inline bool equal(const Expr& a, const Expr& b) {
  if (a->kind != b->kind || a->args.size() != b->args.size()) return false;
  switch (a->kind) {
    case ExprKind::number:
    case ExprKind::imaginary:
      if (a->value != b->value) return false;
      break;
    case ExprKind::variable:
      if (a->index != b->index) return false;
      break;
    case ExprKind::function:
      if (a->func != b->func) return false;
      break;
    case ExprKind::binary:
      if (a->op != b->op) return false;
      break;
    case ExprKind::power:
      if (a->exponent != b->exponent) return false;
      break;
    default:
      break;
  }
  for (std::size_t k = 0; k < a->args.size(); ++k)
    if (!equal(a->args[k], b->args[k])) return false;
  return true;
}

namespace detail {

struct Token {
  enum Kind { number, imaginary, ident, op, end } kind = end;
  std::string text;
  double value = 0.0;
  int line = 1, column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = column_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char ch = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(ch)) || (ch == '.' && pos_ + 1 < src_.size() &&
                                                           std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number(t);
      } else if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
        t.kind = Token::ident;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (std::string_view("+-*/^(),").find(ch) != std::string_view::npos) {
        t.kind = Token::op;
        t.text = std::string(1, ch);
        advance();
      } else {
        throw SyntaxError(std::string("unexpected character '") + ch + "'", t.line, t.column);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  bool digit_at(std::size_t k) const {
    return k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]));
  }

  void lex_number(Token& t) {
    const std::size_t start = pos_;
    while (digit_at(pos_)) advance();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      while (digit_at(pos_)) advance();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t k = pos_ + 1;
      if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
      if (digit_at(k)) {
        while (pos_ < k) advance();
        while (digit_at(pos_)) advance();
      }
    }
    t.text = std::string(src_.substr(start, pos_ - start));
    const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
    if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
      throw SyntaxError("malformed number '" + t.text + "'", t.line, t.column);
    t.kind = Token::number;
    const bool ident_follows = pos_ + 1 < src_.size() &&
                               (std::isalnum(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '_');
    if (pos_ < src_.size() && src_[pos_] == 'i' && !ident_follows) {
      advance();
      t.kind = Token::imaginary;
      t.text += 'i';
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1, column_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Expr parse() {
    Expr e = expr();
    if (peek().kind != Token::end) fail("unexpected '" + peek().text + "'");
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }
  bool is_op(const char* s) const { return peek().kind == Token::op && peek().text == s; }

  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError(what, peek().line, peek().column);
  }

  void expect(const char* s) {
    if (!is_op(s)) fail(std::string("expected '") + s + "'" + (peek().kind == Token::end ? " before end of input" : ""));
    ++pos_;
  }

  static Expr node(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

  static Expr binary(char op, Expr a, Expr b) {
    ExprNode n;
    n.kind = ExprKind::binary;
    n.op = op;
    n.args = {std::move(a), std::move(b)};
    return node(std::move(n));
  }

  Expr expr() {
    Expr e = term();
    while (is_op("+") || is_op("-")) {
      const char op = take().text[0];
      e = binary(op, e, term());
    }
    return e;
  }

  Expr term() {
    Expr e = unary();
    while (is_op("*") || is_op("/")) {
      const char op = take().text[0];
      e = binary(op, e, unary());
    }
    return e;
  }

  Expr unary() {
    if (is_op("-")) {
      ++pos_;
      ExprNode n;
      n.kind = ExprKind::negate;
      n.args = {unary()};
      return node(std::move(n));
    }
    return power();
  }

  Expr power() {
    Expr base = atom();
    if (!is_op("^")) return base;
    ++pos_;
    ExprNode n;
    n.kind = ExprKind::power;
    n.exponent = exponent();
    n.args = {std::move(base)};
    return node(std::move(n));
  }

  int exponent() {
    bool neg = false;
    if (is_op("-")) {
      ++pos_;
      neg = true;
    }
    if (peek().kind != Token::number) fail("exponent must be an integer constant");
    const Token t = peek();
    if (t.value != std::floor(t.value) || std::abs(t.value) > 64 || t.text.find_first_of(".eE") != std::string::npos)
      fail("exponent must be an integer constant");
    ++pos_;
    int k = static_cast<int>(t.value);
    if (is_op("^")) {
      ++pos_;
      const int rhs = exponent();
      if (rhs < 0) fail("integer power needs a nonnegative exponent");
      long long acc = 1;
      for (int j = 0; j < rhs; ++j) {
        acc *= k;
        if (std::llabs(acc) > 64) fail("exponent out of range");
      }
      k = static_cast<int>(acc);
    }
    return neg ? -k : k;
  }

  Expr atom() {
    const Token t = peek();
    switch (t.kind) {
      case Token::number: {
        ++pos_;
        ExprNode n;
        n.kind = ExprKind::number;
        n.value = t.value;
        return node(std::move(n));
      }
      case Token::imaginary: {
        ++pos_;
        ExprNode n;
        n.kind = ExprKind::imaginary;
        n.value = t.value;
        return node(std::move(n));
      }
      case Token::ident:
        return identifier();
      case Token::op:
        if (t.text == "(") {
          ++pos_;
          Expr e = expr();
          expect(")");
          return e;
        }
        fail("unexpected '" + t.text + "'");
      case Token::end:
        fail("unexpected end of input");
    }
    fail("unexpected token");
  }

  Expr identifier() {
    const Token t = take();
    ExprNode n;
    if (t.text == "i") {
      n.kind = ExprKind::imaginary;
      n.value = 1.0;
      return node(std::move(n));
    }
    if (t.text == "pi") {
      n.kind = ExprKind::pi;
      return node(std::move(n));
    }
    if (t.text == "u1" || t.text == "u2" || t.text == "u3") {
      n.kind = ExprKind::variable;
      n.index = t.text[1] - '1';
      return node(std::move(n));
    }
    static const std::array<std::pair<const char*, ExprFunc>, 5> funcs{{{"sin", ExprFunc::sin},
                                                                        {"cos", ExprFunc::cos},
                                                                        {"exp", ExprFunc::exp},
                                                                        {"sqrt", ExprFunc::sqrt},
                                                                        {"conj", ExprFunc::conj}}};
    for (const auto& [name, f] : funcs) {
      if (t.text != name) continue;
      expect("(");
      n.kind = ExprKind::function;
      n.func = f;
      n.args = {expr()};
      expect(")");
      return node(std::move(n));
    }
    throw UnknownSymbol(t.text, t.line, t.column);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Binding strength used by the printer: sum < product < unary < power < atom.
inline int precedence(const ExprNode& e) {
  switch (e.kind) {
    case ExprKind::binary: return (e.op == '+' || e.op == '-') ? 1 : 2;
    case ExprKind::negate: return 3;
    case ExprKind::power: return 4;
    default: return 5;
  }
}

inline std::string print(const ExprNode& e) {
  auto wrap = [](const ExprNode& child, bool paren) {
    const std::string s = print(child);
    return paren ? "(" + s + ")" : s;
  };
  switch (e.kind) {
    case ExprKind::number: return format_number(e.value);
    case ExprKind::imaginary: return e.value == 1.0 ? "i" : format_number(e.value) + "i";
    case ExprKind::variable: return "u" + std::to_string(e.index + 1);
    case ExprKind::pi: return "pi";
    case ExprKind::negate: return "-" + wrap(*e.args[0], precedence(*e.args[0]) < 3);
    case ExprKind::function: return std::string(to_string(e.func)) + "(" + print(*e.args[0]) + ")";
    case ExprKind::power: return wrap(*e.args[0], precedence(*e.args[0]) < 5) + "^" + std::to_string(e.exponent);
    case ExprKind::binary: {
      const int p = precedence(e);
      const std::string sep = p == 1 ? std::string(" ") + e.op + " " : std::string(1, e.op);
      return wrap(*e.args[0], precedence(*e.args[0]) < p) + sep + wrap(*e.args[1], precedence(*e.args[1]) <= p);
    }
  }
  return "?";
}

template <class T>
T ipow(const T& x, int k) {
  if (k < 0) return T(1.0) / ipow(x, -k);
  T result(1.0);
  for (int j = 0; j < k; ++j) result = result * x;
  return result;
}

template <class T>
T evaluate(const ExprNode& e, const std::array<T, 3>& u) {
  using std::conj;
  using std::cos;
  using std::exp;
  using std::sin;
  using std::sqrt;
  switch (e.kind) {
    case ExprKind::number: return T(cplx(e.value, 0.0));
    case ExprKind::imaginary: return T(cplx(0.0, e.value));
    case ExprKind::variable: return u[static_cast<std::size_t>(e.index)];
    case ExprKind::pi: return T(cplx(std::numbers::pi, 0.0));
    case ExprKind::negate: return T(0.0) - evaluate(*e.args[0], u);
    case ExprKind::power: return ipow(evaluate(*e.args[0], u), e.exponent);
    case ExprKind::function: {
      const T x = evaluate(*e.args[0], u);
      switch (e.func) {
        case ExprFunc::sin: return sin(x);
        case ExprFunc::cos: return cos(x);
        case ExprFunc::exp: return exp(x);
        case ExprFunc::sqrt: return sqrt(x);
        case ExprFunc::conj: return conj(x);
      }
      break;
    }
    case ExprKind::binary: {
      const T a = evaluate(*e.args[0], u), b = evaluate(*e.args[1], u);
      switch (e.op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/': return a / b;
      }
      break;
    }
  }
  return T(0.0);
}

}  // namespace detail

/// Default differentiation budget of DSL-defined fields.
inline constexpr int kDefaultExprOrder = 6;

inline Expr parse_expr(std::string_view text) {
  return detail::Parser(detail::Lexer(text).run()).parse();
}

/// Minimal-parenthesis rendering; numbers use round-trip precision.
inline std::string print_expr(const Expr& e) { return detail::print(*e); }

/// Value at a point without differentiation.
inline cplx evaluate(const Expr& e, const ChartPoint& p) {
  const std::array<cplx, 3> u{cplx(p[0]), cplx(p[1]), cplx(p[2])};
  return detail::evaluate(*e, u);
}

/// The expression as a field, differentiable up to `max_order`.
inline ScalarField to_field(const Expr& e, int max_order = kDefaultExprOrder) {
  return make_field(
      [e](const auto& u) {
        using T = typename std::decay_t<decltype(u)>::value_type;
        return detail::evaluate<T>(*e, u);
      },
      max_order);
}

inline ScalarField parse_field(std::string_view text, int max_order = kDefaultExprOrder) {
  return to_field(parse_expr(text), max_order);
}

}  // namespace crverify
