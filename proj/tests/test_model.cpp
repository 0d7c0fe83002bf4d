#include <doctest.h>

#include "exitlab/model.hpp"

using namespace exitlab;

static model::RawModel raw(const std::string& b, const std::string& s,
                           double qm, double qp) {
  model::RawModel r;
  r.b = b;
  r.sigma = s;
  r.q_minus = qm;
  r.q_plus = qp;
  return r;
}

TEST_CASE("valid linear model") {
  const auto m = model::validate_model(raw("x", "1", -1.0, 1.0));
  CHECK(m.lambda == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.sigma0 == doctest::Approx(1.0));
  CHECK(m.linear_drift());
}

TEST_CASE("cubic model eta and lambda") {
  const auto m = model::validate_model(raw("x + x^3", "1", -0.7, 0.7));
  CHECK(m.lambda == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(m.linear_drift());
  CHECK(m.eta(0.5) == doctest::Approx(0.5).epsilon(1e-9));  // eta(x) = x here
}

TEST_CASE("rejects drift with nonzero b(0)") {
  CHECK_THROWS_AS(model::validate_model(raw("x + 0.1", "1", -1.0, 1.0)),
                  model::ModelError);
}

TEST_CASE("rejects attracting equilibrium") {
  CHECK_THROWS_AS(model::validate_model(raw("-x", "1", -1.0, 1.0)),
                  model::ModelError);
}

TEST_CASE("rejects second zero of b inside the interval") {
  // b = x (1 - x) vanishes again at x = 1 inside [-0.5, 1.5]
  CHECK_THROWS_AS(model::validate_model(raw("x*(1 - x)", "1", -0.5, 1.5)),
                  model::ModelError);
}

TEST_CASE("rejects degenerate diffusion at the origin") {
  CHECK_THROWS_AS(model::validate_model(raw("x", "x", -1.0, 1.0)),
                  model::ModelError);
}

TEST_CASE("rejects interval not containing the origin") {
  CHECK_THROWS_AS(model::validate_model(raw("x", "1", 0.5, 1.0)),
                  model::ModelError);
}

TEST_CASE("lambda cross-check against supplied value") {
  auto r = raw("x", "1", -1.0, 1.0);
  r.lambda = 2.0;  // disagrees with b'(0) = 1
  CHECK_THROWS_AS(model::validate_model(r), model::ModelError);
  r.lambda = 1.0;
  CHECK_NOTHROW(model::validate_model(r));
}

TEST_CASE("json loading") {
  const auto r = model::raw_model_from_json_text(
      R"({"b": "x", "sigma": "1", "q_minus": -0.5, "q_plus": 1.0, "R": 0.25})");
  CHECK(r.b == "x");
  CHECK(r.q_minus == doctest::Approx(-0.5));
  REQUIRE(r.R.has_value());
  CHECK(*r.R == doctest::Approx(0.25));
  CHECK_THROWS_AS(model::raw_model_from_json_text("{"), model::ModelError);
  CHECK_THROWS_AS(model::raw_model_from_json_text(R"({"b": "x"})"),
                  model::ModelError);
}
