#include <doctest.h>

#include <cmath>

#include "exitlab/flow.hpp"
#include "exitlab/model.hpp"
#include "exitlab/sde.hpp"
#include "exitlab/stats.hpp"

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

static sde::LinearizedCoeffs coeffs_for(const model::ModelSpec& m) {
  flow::FlowSolverConfig fcfg;
  const auto table = flow::build_conjugation_table(m, 257, fcfg);
  const auto nb = flow::choose_neighborhood(m, table, {});
  return sde::build_linearized_coeffs(m, table, nb);
}

TEST_CASE("config validation") {
  sde::SimConfig cfg;
  cfg.dt = 0.02;
  cfg.max_time = 1.0;
  CHECK_THROWS_AS(cfg.validate(), sde::SdeError);
  cfg.dt = 1e-3;
  cfg.epsilon = 1.0;
  CHECK_THROWS_AS(cfg.validate(), sde::SdeError);
}

TEST_CASE("zero noise reproduces the deterministic flow") {
  const auto m = make("x + x^3", "1", -0.7, 0.7);
  sde::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.epsilon = 0.0;
  cfg.max_time = 10.0;
  rng::Stream stream = rng::path_stream(1, 0);
  const auto res = sde::simulate_exit(m, 0.2, cfg, stream);
  flow::FlowSolverConfig fcfg;
  const auto det = flow::deterministic_exit_time(m, 0.2, fcfg);
  CHECK(res.side == det.side);
  // Euler at dt = 1e-3 carries an O(dt) bias near the steep boundary
  CHECK(res.tau == doctest::Approx(det.T).epsilon(2e-3));
}

TEST_CASE("OU moments at a fixed time") {
  const auto m = make("x", "1", -4.0, 4.0);  // wide interval: no exits
  sde::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.epsilon = 0.1;
  cfg.max_time = 3.0;
  const std::size_t n = 20000;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream stream = rng::path_stream(7, static_cast<std::uint32_t>(i));
    const auto v = sde::advance_segment(m, 0.05, 1.0, cfg, stream);
    REQUIRE(v.has_value());
    xs[i] = *v;
  }
  const double mean_ref = 0.05 * std::exp(1.0);
  const double var_ref = 0.01 * (std::exp(2.0) - 1.0) / 2.0;
  const double se_mean = std::sqrt(var_ref / n);
  CHECK(std::fabs(stats::mean(xs) - mean_ref) < 3.0 * se_mean);
  const double se_var = var_ref * std::sqrt(2.0 / n);
  CHECK(std::fabs(stats::variance(xs) - var_ref) < 3.0 * se_var + 3e-4);
}

TEST_CASE("Milstein agrees with Euler for additive noise") {
  const auto m = make("x", "1", -1.0, 1.0);
  sde::SimConfig a, b;
  a.dt = b.dt = 1e-3;
  a.epsilon = b.epsilon = 0.2;
  a.max_time = b.max_time = 50.0;
  b.scheme = sde::Scheme::kMilstein;
  rng::Stream s1 = rng::path_stream(3, 5);
  rng::Stream s2 = rng::path_stream(3, 5);
  const auto r1 = sde::simulate_exit(m, 0.0, a, s1);
  const auto r2 = sde::simulate_exit(m, 0.0, b, s2);
  CHECK(r1.tau == doctest::Approx(r2.tau).epsilon(1e-14));
  CHECK(r1.side == r2.side);
}

TEST_CASE("linearized run: Duhamel bookkeeping and exit identity") {
  const auto m = make("x + x^3", "1", -0.7, 0.7);
  const auto coeffs = coeffs_for(m);
  sde::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.epsilon = 0.1;
  cfg.max_time = 100.0;
  for (std::uint32_t i = 0; i < 50; ++i) {
    rng::Stream stream = rng::path_stream(11, i);
    const auto run = sde::simulate_linearized(coeffs, 0.1, cfg, stream, 0.0, true);
    REQUIRE(run.exit.has_value());
    // M = x + U + V along the whole recorded path
    for (std::size_t k = 0; k < run.trace.times.size(); ++k) {
      CHECK(run.trace.M[k] ==
            doctest::Approx(0.1 + run.trace.U[k] + run.trace.V[k])
                .epsilon(1e-12));
    }
    // tau_V = (1/l) log(R/eps) - (1/l) log |M(tau_V)|
    const double pred =
        (std::log(coeffs.R / cfg.epsilon) -
         std::log(std::fabs(run.exit->M_at_exit))) / coeffs.lambda;
    CHECK(run.exit->tau == doctest::Approx(pred).epsilon(1e-9));
    // sign coupling: sign(M) = sign(Y) at exit
    const double y = cfg.epsilon * std::exp(coeffs.lambda * run.exit->tau) *
                     run.exit->M_at_exit;
    CHECK((y > 0) == (run.exit->M_at_exit > 0));
    CHECK(run.exit->side == (y > 0 ? 1 : -1));
  }
}

TEST_CASE("Ito isometry: variance of U at a fixed horizon") {
  const auto m = make("x", "1", -1.0, 1.0);
  const auto coeffs = coeffs_for(m);
  sde::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.epsilon = 0.05;
  cfg.max_time = 10.0;
  const double T = 2.0;
  const std::size_t n = 20000;
  std::vector<double> ms(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream stream = rng::path_stream(13, static_cast<std::uint32_t>(i));
    ms[i] = sde::simulate_linearized(coeffs, 0.0, cfg, stream, T, false).M_final;
  }
  // M(T) = int_0^T e^{-s} dW: variance (1 - e^{-2T}) / 2
  const double var_ref = (1.0 - std::exp(-2.0 * T)) / 2.0;
  CHECK(std::fabs(stats::mean(ms)) < 3.0 * std::sqrt(var_ref / n));
  CHECK(stats::variance(ms) ==
        doctest::Approx(var_ref).epsilon(3.0 * std::sqrt(2.0 / n) + 2e-3));
}

TEST_CASE("Malliavin derivative: exact for constant sigma") {
  const auto m = make("x", "1", -1.0, 1.0);
  const auto coeffs = coeffs_for(m);
  sde::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.epsilon = 0.1;
  cfg.max_time = 10.0;
  rng::Stream stream = rng::path_stream(17, 0);
  const double T = 2.0;
  const auto run = sde::simulate_linearized(coeffs, 0.0, cfg, stream, T, true);
  std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  const auto mt = sde::malliavin_derivative(run, coeffs, grid, T, cfg);
  for (std::size_t k = 0; k < grid.size(); ++k)
    CHECK(std::fabs(mt.value[k] - std::exp(-grid[k])) < 1e-12);
}

TEST_CASE("Malliavin derivative at t = T' is the bare integrand") {
  const auto m = make("x", "1 + 0.5*tanh(x)", -1.0, 1.0);
  const auto coeffs = coeffs_for(m);
  sde::SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.epsilon = 0.2;
  cfg.max_time = 10.0;
  rng::Stream stream = rng::path_stream(19, 3);
  const double T = 1.5;
  const auto run = sde::simulate_linearized(coeffs, 0.1, cfg, stream, T, true);
  std::vector<double> grid = {T};
  const auto mt = sde::malliavin_derivative(run, coeffs, grid, T, cfg);
  // D_{T'} M(T') = e^{-l T'} sigma_tilde(Y(T')): empty integrals
  const double y = cfg.epsilon * std::exp(T) * run.M_final;
  CHECK(mt.value[0] ==
        doctest::Approx(std::exp(-T) * coeffs.sigma_tilde(y)).epsilon(1e-9));
}
