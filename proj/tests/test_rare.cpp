#include <doctest.h>

#include <cmath>

#include "exitlab/model.hpp"
#include "exitlab/rare.hpp"
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

// iid Bernoulli(q) survival per level: p = q^levels exactly, and every
// classify call reports the plus side.
struct Chain {
  using State = int;
  double q = 0.6;
  State initial_state() const { return 0; }
  std::optional<State> advance(const State& s, int, rng::Stream& stream) const {
    if (stream.uniform() < q) return s + 1;
    return std::nullopt;
  }
  int classify(const State&, rng::Stream&) const { return 1; }
};

TEST_CASE("fixed-effort splitting is unbiased on the enumerable chain") {
  Chain chain;
  const int levels = 4;
  const double exact = std::pow(chain.q, levels);
  std::vector<double> p(300);
  for (std::size_t rep = 0; rep < p.size(); ++rep)
    p[rep] = rare::fixed_effort_splitting(chain, levels, 500, 900 + rep).p_hat;
  const double se = stats::stddev(p) / std::sqrt(static_cast<double>(p.size()));
  CHECK(std::fabs(stats::mean(p) - exact) < 3.0 * se);
  // CI coverage sanity on one run
  const auto one = rare::fixed_effort_splitting(chain, levels, 5000, 1);
  CHECK(one.ci_low < exact);
  CHECK(one.ci_high > exact);
  CHECK(one.side_plus > 0);
  CHECK(one.side_minus == 0);
}

TEST_CASE("query guards") {
  const auto m = make("x", "1", -1.0, 1.0);
  sde::SimConfig cfg;
  cfg.dt = 5e-3;
  cfg.epsilon = 0.3;
  cfg.max_time = 30.0;
  CHECK_THROWS_AS(rare::tail_direct(m, {0.9, 0.3, 0.0}, 10, cfg, 1),
                  rare::RareError);
  CHECK_THROWS_AS(rare::tail_direct(m, {1.2, 0.3, 50.0}, 10, cfg, 1),
                  rare::RareError);  // x_start breaks the K(eps) policy
  CHECK_THROWS_AS(rare::tail_splitting(m, {1.2, 0.3, 0.0}, 0, 10, cfg, 1),
                  rare::RareError);
}

TEST_CASE("splitting with one level telescopes to the direct estimator") {
  const auto m = make("x", "1", -1.0, 1.0);
  sde::SimConfig cfg;
  cfg.dt = 5e-3;
  cfg.epsilon = 0.3;
  cfg.max_time = 40.0;
  rare::TailQuery q{1.2, 0.3, 0.0};
  const auto direct = rare::tail_direct(m, q, 800, cfg, 77);
  const auto split = rare::tail_splitting(m, q, 1, 800, cfg, 77);
  CHECK(split.p_hat == doctest::Approx(direct.p_hat).epsilon(1e-15));
}

TEST_CASE("survival probability is monotone in alpha") {
  const auto m = make("x", "1", -1.0, 1.0);
  sde::SimConfig cfg;
  cfg.dt = 5e-3;
  cfg.epsilon = 0.3;
  cfg.max_time = 40.0;
  // same seed: the same trajectories, nested survival events
  const auto a = rare::tail_direct(m, {1.2, 0.3, 0.0}, 600, cfg, 5);
  const auto b = rare::tail_direct(m, {1.6, 0.3, 0.0}, 600, cfg, 5);
  CHECK(b.p_hat <= a.p_hat);
}

TEST_CASE("conditional split needs a large enough sample") {
  rare::TailEstimate est;
  est.side_plus = 40;
  est.side_minus = 30;
  CHECK_THROWS_AS(rare::conditional_exit_distribution(est), rare::RareError);
  est.side_plus = 90;
  est.side_minus = 60;
  const auto split = rare::conditional_exit_distribution(est);
  CHECK(split.p_plus == doctest::Approx(0.6));
  CHECK(split.p_minus == doctest::Approx(0.4));
  CHECK(split.n_conditional == 150);
}

TEST_CASE("unconditional split against the scale-function value") {
  const auto m = make("x", "1", -0.5, 1.0);
  sde::SimConfig cfg;
  cfg.dt = 5e-3;
  cfg.epsilon = 0.25;
  cfg.max_time = 40.0;
  const auto side = rare::unconditional_exit_split(m, 0.25, 0.1, 4000, cfg, 21);
  const double ref = (std::erf(0.1 / 0.25) + std::erf(0.5 / 0.25)) /
                     (std::erf(0.5 / 0.25) + std::erf(1.0 / 0.25));
  const double se = std::sqrt(ref * (1.0 - ref) / static_cast<double>(side.n));
  CHECK(std::fabs(side.p_plus - ref) < 4.0 * se + 0.01);
}
