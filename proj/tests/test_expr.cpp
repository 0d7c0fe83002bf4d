#include <doctest.h>

#include <cmath>

#include "exitlab/expr.hpp"

using exitlab::expr::ParseError;
using exitlab::expr::ScalarFunction;

TEST_CASE("basic arithmetic and precedence") {
  CHECK(ScalarFunction::parse("1 + 2*3")(0.0) == doctest::Approx(7.0));
  CHECK(ScalarFunction::parse("(1 + 2)*3")(0.0) == doctest::Approx(9.0));
  CHECK(ScalarFunction::parse("2^3^2")(0.0) == doctest::Approx(512.0));
  CHECK(ScalarFunction::parse("-x^2")(3.0) == doctest::Approx(-9.0));
  CHECK(ScalarFunction::parse("x - x^3/6")(0.5) ==
        doctest::Approx(0.5 - 0.125 / 6.0));
}

TEST_CASE("functions") {
  const auto f = ScalarFunction::parse("sin(x) + cos(x) + exp(x) + tanh(x) + abs(x)");
  const double x = -0.3;
  CHECK(f(x) == doctest::Approx(std::sin(x) + std::cos(x) + std::exp(x) +
                                std::tanh(x) + std::fabs(x)));
}

TEST_CASE("round trip is a fixed point") {
  for (const char* text : {"x + x^3", "1 + 0.5*tanh(x)", "-(x - 2)*(x + 2)",
                           "exp(-x^2/2)", "x^2*sin(1/ (x + 3))"}) {
    const auto once = ScalarFunction::parse(text).text();
    const auto twice = ScalarFunction::parse(once).text();
    CHECK(once == twice);
    // and both denote the same function
    const auto f = ScalarFunction::parse(text);
    const auto g = ScalarFunction::parse(once);
    for (double x : {-1.0, -0.25, 0.0, 0.7, 2.0})
      CHECK(f(x) == doctest::Approx(g(x)).epsilon(1e-15));
  }
}

TEST_CASE("parse errors carry byte offsets") {
  CHECK_THROWS_AS(ScalarFunction::parse("x +"), ParseError);
  CHECK_THROWS_AS(ScalarFunction::parse("foo(x)"), ParseError);
  CHECK_THROWS_AS(ScalarFunction::parse("sin(x, x)"), ParseError);
  CHECK_THROWS_AS(ScalarFunction::parse("x 1"), ParseError);
  CHECK_THROWS_AS(ScalarFunction::parse(""), ParseError);
  try {
    ScalarFunction::parse("x + @");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("integer powers fold to repeated multiplication") {
  const auto f = ScalarFunction::parse("x^7");
  CHECK(f(1.3) == doctest::Approx(std::pow(1.3, 7)).epsilon(1e-15));
  const auto g = ScalarFunction::parse("x^0.5");
  CHECK(g(2.0) == doctest::Approx(std::sqrt(2.0)));
}
