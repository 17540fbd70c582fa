#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crverify/expr.hpp"

using namespace crverify;

namespace {

const cplx I(0.0, 1.0);

cplx at(const std::string& s, double u1 = 0, double u2 = 0, double u3 = 0) {
  return evaluate(parse_expr(s), ChartPoint(u1, u2, u3));
}

template <class E>
void expect_location(const std::string& text, int line, int column) {
  try {
    parse_expr(text);
    ADD_FAILURE() << "no error for '" << text << "'";
  } catch (const E& e) {
    EXPECT_EQ(e.line(), line) << text;
    EXPECT_EQ(e.column(), column) << text;
  }
}

// Random tree over every node kind.
Expr random_expr(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 7 : 3);
  std::uniform_real_distribution<double> num(0.0, 100.0);
  ExprNode n;
  switch (pick(rng)) {
    case 0:
      n.kind = ExprKind::number;
      n.value = num(rng);
      break;
    case 1:
      n.kind = ExprKind::imaginary;
      n.value = (rng() % 3 == 0) ? 1.0 : num(rng);
      break;
    case 2:
      n.kind = ExprKind::variable;
      n.index = static_cast<int>(rng() % 3);
      break;
    case 3:
      n.kind = ExprKind::pi;
      break;
    case 4:
      n.kind = ExprKind::negate;
      n.args = {random_expr(rng, depth - 1)};
      break;
    case 5:
      n.kind = ExprKind::function;
      n.func = static_cast<ExprFunc>(rng() % 5);
      n.args = {random_expr(rng, depth - 1)};
      break;
    case 6:
      n.kind = ExprKind::power;
      n.exponent = static_cast<int>(rng() % 7) - 3;
      n.args = {random_expr(rng, depth - 1)};
      break;
    default:
      n.kind = ExprKind::binary;
      n.op = "+-*/"[rng() % 4];
      n.args = {random_expr(rng, depth - 1), random_expr(rng, depth - 1)};
      break;
  }
  return std::make_shared<const ExprNode>(std::move(n));
}

}  // namespace

TEST(Parse, Examples) {
  EXPECT_NEAR(std::abs(at("u1^2 + u2^2", 1, 2, 0) - 5.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(at("(u1 - i*u2)/sqrt(2)", 1, 1, 0) - (1.0 - I) / std::sqrt(2.0)), 0.0, 1e-15);
  expect_location<SyntaxError>("u1 +", 1, 5);
}

TEST(Parse, Precedence) {
  EXPECT_EQ(at("-u1^2", 3), cplx(-9.0));
  EXPECT_EQ(at("-2^2"), cplx(-4.0));
  EXPECT_EQ(at("2^3^2"), cplx(512.0));
  EXPECT_EQ(at("8/4/2"), cplx(1.0));
  EXPECT_EQ(at("2-3-4"), cplx(-5.0));
  EXPECT_EQ(at("2*3+4*5"), cplx(26.0));
  EXPECT_EQ(at("2*(3+4)*5"), cplx(70.0));
  EXPECT_EQ(at("u1^-2", 2), cplx(0.25));
  EXPECT_EQ(at("--u1", 2), cplx(2.0));
}

TEST(Parse, AtomsAndFunctions) {
  EXPECT_EQ(at("2i*2i"), cplx(-4.0));
  EXPECT_EQ(at("i"), I);
  EXPECT_EQ(at("1.5e1i"), cplx(0.0, 15.0));
  EXPECT_EQ(at("pi"), cplx(std::numbers::pi));
  EXPECT_EQ(at("u3", 0, 0, 7), cplx(7.0));
  EXPECT_NEAR(std::abs(at("exp(i*pi) + 1")), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(at("sin(u1)^2 + cos(u1)^2", 0.7) - 1.0), 0.0, 1e-15);
  EXPECT_EQ(at("conj(1 + 2i)"), cplx(1.0, -2.0));
  EXPECT_EQ(at("sqrt(4)"), cplx(2.0));
  EXPECT_EQ(at(".5 + 1e-1"), cplx(0.6));
}

TEST(Parse, Errors) {
  expect_location<UnknownSymbol>("u4 + 1", 1, 1);
  expect_location<UnknownSymbol>("2*foo", 1, 3);
  expect_location<SyntaxError>("u1 u2", 1, 4);
  expect_location<SyntaxError>("(u1 + 2", 1, 8);
  expect_location<SyntaxError>("u1 +\n  * u2", 2, 3);
  expect_location<SyntaxError>("sin u1", 1, 5);
  expect_location<SyntaxError>("u1^1.5", 1, 4);
  expect_location<SyntaxError>("u1^u2", 1, 4);
  expect_location<SyntaxError>("u1 $ 2", 1, 4);
  expect_location<SyntaxError>("", 1, 1);
  try {
    parse_expr("2*foo");
  } catch (const UnknownSymbol& e) {
    EXPECT_EQ(e.symbol(), "foo");
    EXPECT_EQ(e.code(), ErrorCode::unknown_symbol);
  }
}

TEST(Print, MinimalParentheses) {
  EXPECT_EQ(print_expr(parse_expr("(u1 + u2) * u3")), "(u1 + u2)*u3");
  EXPECT_EQ(print_expr(parse_expr("u1 + (u2 * u3)")), "u1 + u2*u3");
  EXPECT_EQ(print_expr(parse_expr("u1 - (u2 - u3)")), "u1 - (u2 - u3)");
  EXPECT_EQ(print_expr(parse_expr("(-u1)^2")), "(-u1)^2");
  EXPECT_EQ(print_expr(parse_expr("-u1^2")), "-u1^2");
  EXPECT_EQ(print_expr(parse_expr("0.1 + 2i")), "0.10000000000000001 + 2i");
}

TEST(Print, RoundTripExamples) {
  for (const char* s : {"u1^2 + u2^2", "(u1 - i*u2)/sqrt(2)", "u1/(u2/u3)", "2^3^2", "-(u1 + u2)", "conj(exp(i*u3))",
                        "u1 - -u2", "1e300*u1", "((u1))", "sin(cos(u1))^-3"}) {
    const Expr e = parse_expr(s);
    EXPECT_TRUE(equal(e, parse_expr(print_expr(e)))) << s << " -> " << print_expr(e);
  }
}

TEST(Print, RoundTripRandomTrees) {
  std::mt19937 rng(12345);
  for (int k = 0; k < 500; ++k) {
    const Expr e = random_expr(rng, 5);
    const std::string s = print_expr(e);
    EXPECT_TRUE(equal(e, parse_expr(s))) << s;
  }
}

TEST(Field, DerivativesMatchClosedForm) {
  const ScalarField h = parse_field("u1^2*sin(u2) + exp(i*u3)");
  const CVectorField d1 = coordinate_field(0), d2 = coordinate_field(1), d3 = coordinate_field(2);
  const ChartPoint p(0.4, -0.3, 1.1);
  EXPECT_NEAR(std::abs(derive(d1, h)(p) - 2 * 0.4 * std::sin(-0.3)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(derive(d2, derive(d1, h))(p) - 2 * 0.4 * std::cos(-0.3)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(derive(d3, h)(p) - I * std::exp(I * 1.1)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(derive(d1, h)(p, DiffMode::fd) - 2 * 0.4 * std::sin(-0.3)), 0.0, 1e-8);
}

TEST(Field, OrderBudget) {
  const ScalarField h = parse_field("u1^3", 1);
  const CVectorField d1 = coordinate_field(0);
  const ChartPoint p(0.5, 0, 0);
  EXPECT_NEAR(std::abs(derive(d1, h)(p) - 0.75), 0.0, 1e-15);
  EXPECT_THROW(derive(d1, derive(d1, h))(p), DepthExceeded);
  const ScalarField g = parse_field("u1^3");
  EXPECT_NEAR(std::abs(derive(d1, derive(d1, derive(d1, g)))(p) - 6.0), 0.0, 1e-13);
}
