#include <gtest/gtest.h>

#include <cmath>

#include "lorentz/config.hpp"
#include "lorentz/core.hpp"
#include "lorentz/expr.hpp"

using lorentz::ConfigEntry;
using lorentz::ParseError;
using lorentz::expr::Expression;
using lorentz::expr::SymbolTable;

namespace {

double eval_at(const std::string& text, double t = 0.0, double x1 = 0.0, double x2 = 0.0) {
  SymbolTable sym;
  double v[4] = {t, x1, x2, 0.0};
  return Expression::parse(text, sym).eval(v);
}

}  // namespace

TEST(Expression, Precedence) {
  EXPECT_DOUBLE_EQ(eval_at("1 + 2*3"), 7.0);
  EXPECT_DOUBLE_EQ(eval_at("2^3^2"), 512.0);
  EXPECT_DOUBLE_EQ(eval_at("-2^2"), -4.0);
  EXPECT_DOUBLE_EQ(eval_at("2^-1"), 0.5);
  EXPECT_DOUBLE_EQ(eval_at("8/4/2"), 1.0);
  EXPECT_DOUBLE_EQ(eval_at("1 - 2 - 3"), -4.0);
}

TEST(Expression, VariablesAndFunctions) {
  EXPECT_DOUBLE_EQ(eval_at("t*x1 + x2", 2.0, 3.0, 4.0), 10.0);
  EXPECT_NEAR(eval_at("exp(log(3))"), 3.0, 1e-15);
  EXPECT_NEAR(eval_at("cosh(t)^2 - sinh(t)^2", 0.7), 1.0, 1e-14);
  EXPECT_NEAR(eval_at("sin(pi/2) + cos(0) + sqrt(4)"), 4.0, 1e-15);
  EXPECT_NEAR(eval_at("e"), std::exp(1.0), 1e-15);
}

TEST(Expression, UserConstants) {
  SymbolTable sym;
  sym.constants["M"] = 2.0;
  double v[4] = {0, 4, 0, 0};
  EXPECT_DOUBLE_EQ(Expression::parse("1 - 2*M/x1", sym).eval(v), 0.0);
}

TEST(Expression, CanonicalRoundTrip) {
  SymbolTable sym;
  for (const char* text : {"1 + 2*3", "(1 + 2)*3", "a - (b - c)", "2^3^2", "(2^3)^2", "-(x1 + t)",
                           "x1/(t*x2)", "exp(-t^2)/(1 + x1^2)", "-x1^2", "(-x1)^2", "1e-3*t"}) {
    sym.constants = {{"a", 1.5}, {"b", 0.25}, {"c", -3.0}};
    Expression e = Expression::parse(text, sym);
    std::string canon = e.to_string();
    Expression back = Expression::parse(canon, sym);
    EXPECT_EQ(back.to_string(), canon) << text;
    double v[4] = {0.3, -1.25, 2.5, 0.0};
    EXPECT_EQ(e.eval(v), back.eval(v)) << text;
  }
}

TEST(Expression, ErrorsCarryLocation) {
  SymbolTable sym;
  sym.spatial_dim = 2;
  try {
    Expression::parse("1 + x3", sym, 7, 10);
    FAIL();
  } catch (const ParseError& err) {
    EXPECT_EQ(err.line(), 7);
    EXPECT_EQ(err.column(), 14);
    EXPECT_EQ(err.token(), "x3");
  }
  EXPECT_THROW(Expression::parse("foo(t)", sym), ParseError);
  EXPECT_THROW(Expression::parse("1 +", sym), ParseError);
  EXPECT_THROW(Expression::parse("(1 + t", sym), ParseError);
  EXPECT_THROW(Expression::parse("2 ** 3", sym), ParseError);
  EXPECT_THROW(Expression::parse("q", sym), ParseError);
  EXPECT_THROW(Expression::parse("1e999", sym), ParseError);
}

TEST(Config, StatementsAndTypes) {
  auto entries = lorentz::parse_config(
      "# header\nmodel = \"schwarzschild\" ; M = 1.5\n[domain]\nt = -1, 2\nname = bare\n");
  ASSERT_EQ(entries.size(), 4u);
  EXPECT_EQ(entries[0].key, "model");
  EXPECT_EQ(entries[0].type, ConfigEntry::Type::String);
  EXPECT_EQ(entries[0].text, "schwarzschild");
  EXPECT_EQ(entries[1].type, ConfigEntry::Type::Number);
  EXPECT_DOUBLE_EQ(entries[1].numbers[0], 1.5);
  EXPECT_EQ(entries[2].section, "domain");
  EXPECT_EQ(entries[2].type, ConfigEntry::Type::List);
  ASSERT_EQ(entries[2].numbers.size(), 2u);
  EXPECT_EQ(entries[3].text, "bare");
  EXPECT_EQ(entries[3].line, 5);
}

TEST(Config, Errors) {
  EXPECT_THROW(lorentz::parse_config("a = 1\na = 2\n"), ParseError);
  EXPECT_THROW(lorentz::parse_config("a = \"unterminated\n"), ParseError);
  EXPECT_THROW(lorentz::parse_config("= 3\n"), ParseError);
  EXPECT_THROW(lorentz::parse_config("[open\n"), ParseError);
  try {
    lorentz::parse_config("ok = 1\nbad = 1.2.3\n");
    FAIL();
  } catch (const ParseError& err) {
    EXPECT_EQ(err.line(), 2);
  }
}
