#include <doctest.h>

#include <cmath>

#include "exitlab/density.hpp"
#include "exitlab/flow.hpp"
#include "exitlab/model.hpp"
#include "exitlab/rng.hpp"
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

TEST_CASE("T' policy window") {
  density::TPrimePolicy p;
  CHECK_NOTHROW(p.validate(0.1));
  p.exponent = 2.5;  // beyond 2 - kappa
  CHECK_THROWS_AS(p.validate(0.1), density::DensityError);
  p.exponent = 0.2;  // below 1 - 1/log(1/eps)
  CHECK_THROWS_AS(p.validate(0.1), density::DensityError);
}

TEST_CASE("kde on a synthetic Gaussian sample") {
  rng::Stream stream(123, 0, 0);
  const std::size_t n = 100000;
  std::vector<double> sample(n);
  const double sd = std::sqrt(0.5);
  for (auto& v : sample) v = sd * stream.normal();
  const auto est = density::kde(sample);
  CHECK(est.n == n);
  // sup error against the true density
  double sup = 0.0;
  for (std::size_t i = 0; i < est.grid.size(); ++i) {
    const double z = est.grid[i];
    const double ref = std::exp(-z * z) / std::sqrt(M_PI);
    sup = std::max(sup, std::fabs(est.values[i] - ref));
  }
  CHECK(sup <= 0.02);
  // trapezoid normalization on the +-6 sd grid
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < est.grid.size(); ++i)
    integral += 0.5 * (est.values[i] + est.values[i + 1]) *
                (est.grid[i + 1] - est.grid[i]);
  CHECK(integral >= 0.98);
  CHECK(integral <= 1.001);
}

TEST_CASE("kde rejects degenerate input") {
  std::vector<double> constant(2000, 1.0);
  CHECK_THROWS_AS(density::kde(constant), density::DensityError);
  std::vector<double> tiny(10, 0.0);
  CHECK_THROWS_AS(density::kde(tiny), density::DensityError);
}

TEST_CASE("kde normalization on a bimodal sample") {
  rng::Stream stream(55, 0, 0);
  std::vector<double> sample(20000);
  for (std::size_t i = 0; i < sample.size(); ++i)
    sample[i] = (i % 2 ? 3.0 : -3.0) + 0.5 * stream.normal();
  const auto est = density::kde(sample);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < est.grid.size(); ++i)
    integral += 0.5 * (est.values[i] + est.values[i + 1]) *
                (est.grid[i + 1] - est.grid[i]);
  CHECK(integral == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("weighted sup distance") {
  const density::GaussianReference ref{0.0, 0.5};
  // reference evaluated on a grid, no noise: distance zero
  density::DensityEstimate exact;
  for (int i = 0; i < 512; ++i) {
    const double z = -4.0 + 8.0 * i / 511.0;
    exact.grid.push_back(z);
    exact.values.push_back(ref.pdf(z));
  }
  CHECK(density::weighted_sup_distance(exact, ref) == doctest::Approx(0.0));
  // KDE of a sample drawn from the reference itself stays small
  rng::Stream stream(77, 0, 0);
  std::vector<double> sample(100000);
  for (auto& v : sample) v = std::sqrt(0.5) * stream.normal();
  const auto est = density::kde(sample);
  CHECK(density::weighted_sup_distance(est, ref) <= 0.05);
}

TEST_CASE("reference density at its center matches the tail coefficient") {
  const auto m = make("x", "1", -1.0, 1.0);
  const density::GaussianReference ref{0.3, m.sigma0 * m.sigma0 / (2.0 * m.lambda)};
  CHECK(ref.pdf(ref.mean) ==
        doctest::Approx(std::sqrt(m.lambda / M_PI) / m.sigma0).epsilon(1e-12));
}

TEST_CASE("sampled M matches the exact Gaussian law for the linear model") {
  const auto m = make("x", "1", -1.0, 1.0);
  sde::SimConfig cfg;
  cfg.dt = 5e-3;
  cfg.max_time = 10.0;
  density::TPrimePolicy policy;
  const double eps = 0.1;
  const auto sample = density::sample_M_at(m, eps, 0.2, policy, 20000, cfg, 9);
  const double var_ref = (1.0 - std::pow(eps, 3.0)) / 2.0;
  CHECK(std::fabs(stats::mean(sample) - 0.2) <
        3.0 * std::sqrt(var_ref / 20000.0));
  CHECK(stats::variance(sample) ==
        doctest::Approx(var_ref).epsilon(3.0 * std::sqrt(2.0 / 20000.0) + 6e-3));
}

TEST_CASE("small-ball guards") {
  const auto m = make("x", "1", -1.0, 1.0);
  flow::FlowSolverConfig fcfg;
  const auto table = flow::build_conjugation_table(m, 129, fcfg);
  const auto nb = flow::choose_neighborhood(m, table, {});
  const auto coeffs = sde::build_linearized_coeffs(m, table, nb);
  sde::SimConfig cfg;
  cfg.dt = 5e-3;
  cfg.max_time = 10.0;
  CHECK_THROWS_AS(
      density::small_ball_check(m, coeffs, 0.1, 0.0, -1.0, 100, cfg, 1),
      density::DensityError);
  const auto res =
      density::small_ball_check(m, coeffs, 0.1, 3.0, 0.5, 2000, cfg, 1);
  CHECK(res.too_few_hits);  // e^{-9} suppression: essentially no hits
  CHECK(res.hits <= 10);
}
