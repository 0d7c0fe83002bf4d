#include <doctest.h>

#include <cmath>

#include "exitlab/flow.hpp"
#include "exitlab/model.hpp"
#include "exitlab/theory.hpp"

using namespace exitlab;

static model::ModelSpec make(const std::string& b, const std::string& s,
                             double qm, double qp) {
  model::RawModel r;
  r.b = b;
  r.sigma = s;
  r.q_minus = qm;
  r.q_plus = qp;
  return model::validate_model(r);
}

static theory::TheoremConstants consts(const model::ModelSpec& m) {
  flow::FlowSolverConfig cfg;
  return theory::make_constants(m, flow::build_conjugation_table(m, 257, cfg));
}

TEST_CASE("Lambda: symmetric linear model") {
  const auto c = consts(make("x", "1", -1.0, 1.0));
  CHECK(theory::lambda_constant(c, 0.0) ==
        doctest::Approx(2.0 / std::sqrt(M_PI)).epsilon(1e-8));
  // Gaussian factor: Lambda(x)/Lambda(0) = e^{-x^2}
  CHECK(theory::lambda_constant(c, 1.0) / theory::lambda_constant(c, 0.0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("Lambda and split: asymmetric interval") {
  const auto c = consts(make("x", "1", -0.5, 1.0));
  CHECK(theory::lambda_constant(c, 0.0) ==
        doctest::Approx(1.5 / std::sqrt(M_PI)).epsilon(1e-8));
  const auto split = theory::exit_split(c);
  CHECK(split.first == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
  CHECK(split.second == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("C constants") {
  const auto c = consts(make("x", "1", -0.5, 1.0));
  CHECK(c.C_plus == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(c.C_minus == doctest::Approx(std::log(0.5)).epsilon(1e-8));
}

TEST_CASE("deterministic time") {
  // T = (1/l)(log(R/eps) - log a), a = c eps^theta
  CHECK(theory::deterministic_T(0.01, 0.5, 0.5, 1.0) ==
        doctest::Approx(std::log(50.0) + std::log(10.0)).epsilon(1e-12));
  CHECK(theory::deterministic_T(0.1, 1.0, 1.0, 2.0) ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("recursion schedule and H variances against the series") {
  const double eps = 0.05, theta = 2.3, lambda = 1.4, sigma0 = 0.8;
  const auto s = theory::recursion_schedule(eps, theta, lambda, sigma0);
  CHECK(s.N == 3);  // floor(theta) + 1
  CHECK(s.alpha_eps == doctest::Approx((1.0 + theta) / s.N).epsilon(1e-12));
  CHECK(s.T_prime ==
        doctest::Approx(s.alpha_eps / lambda * std::log(1.0 / eps))
            .epsilon(1e-12));
  REQUIRE(static_cast<int>(s.H_variances.size()) == s.N + 1);
  // independent oracle: geometric series term by term
  const double r = std::pow(eps, 2.0 * s.alpha_eps);
  for (int k = 0; k <= s.N; ++k) {
    double series = 0.0;
    for (int j = 0; j < s.N - k; ++j)
      series += std::pow(r, j) * sigma0 * sigma0 / (2.0 * lambda);
    CHECK(s.H_variances[k] == doctest::Approx(series).epsilon(1e-10));
  }
  // theta < 1 collapses to a single block
  CHECK(theory::recursion_schedule(0.1, 0.5, 1.0, 1.0).N == 1);
}

TEST_CASE("scale function split: erf closed form for linear drift") {
  // b = x, sigma = 1: s'(y) = e^{-y^2/eps^2}, so
  // p+ = (erf(x0/eps) + erf(-qm/eps)) / (erf(-qm/eps) + erf(qp/eps)).
  const auto m = make("x", "1", -0.5, 1.0);
  const double eps = 0.25, x0 = 0.1;
  const double ref = (std::erf(x0 / eps) + std::erf(0.5 / eps)) /
                     (std::erf(0.5 / eps) + std::erf(1.0 / eps));
  CHECK(theory::scale_function_split(m, eps, x0) ==
        doctest::Approx(ref).epsilon(1e-8));
  // symmetric interval, start at the origin: exactly 1/2
  const auto sym = make("x", "1", -1.0, 1.0);
  CHECK(theory::scale_function_split(sym, 0.3, 0.0) ==
        doctest::Approx(0.5).epsilon(1e-10));
  // monotone in the start point
  CHECK(theory::scale_function_split(sym, 0.3, 0.1) >
        theory::scale_function_split(sym, 0.3, -0.1));
}
