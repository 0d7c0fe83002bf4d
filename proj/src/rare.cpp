#include "exitlab/rare.hpp"

#include <cmath>

namespace exitlab::rare {
namespace {

// Splitting system over the original SDE: survival levels are times, the
// state is the position at the level boundary, classification continues the
// trajectory to its actual interval exit.
struct SdeSurvival {
  using State = double;

  const model::ModelSpec& m;
  sde::SimConfig cfg;
  double x0 = 0.0;
  double level_duration = 0.0;

  State initial_state() const { return x0; }

  std::optional<State> advance(const State& x, int /*level*/,
                               rng::Stream& stream) const {
    return sde::advance_segment(m, x, level_duration, cfg, stream);
  }

  int classify(const State& x, rng::Stream& stream) const {
    const sde::ExitResult r = sde::simulate_exit(m, x, cfg, stream);
    return r.censored ? 0 : r.side;
  }
};

void check_query(const model::ModelSpec& m, const TailQuery& query) {
  if (!(query.alpha > 1.0)) throw RareError("alpha must exceed 1");
  if (!(query.epsilon > 0.0 && query.epsilon < 1.0))
    throw RareError("epsilon must be in (0, 1)");
  if (!query.within_K_policy(m.lambda))
    throw RareError(
        "x_start violates the K(eps) policy bound "
        "sqrt((4/lambda) log(1/eps)); the theorem is not claimed there");
}

}  // namespace

TailEstimate tail_direct(const model::ModelSpec& m, const TailQuery& query,
                         std::size_t n, const sde::SimConfig& cfg,
                         std::uint64_t seed) {
  check_query(m, query);
  const double t_star = query.horizon(m.lambda);
  const double x0 = query.epsilon * query.x_start;

  std::vector<sde::ExitResult> results(n);
  parallel::parallel_for(n, [&](std::size_t i) {
    rng::Stream stream = rng::path_stream(seed, static_cast<std::uint32_t>(i));
    results[i] = sde::simulate_exit(m, x0, cfg, stream);
  });

  TailEstimate est;
  est.method = TailMethod::kDirect;
  est.n_effective = n;
  std::size_t survivors = 0;
  for (const auto& r : results) {
    const bool survived = r.censored || r.tau > t_star;
    if (!survived) continue;
    ++survivors;
    if (r.censored)
      ++est.censored;
    else if (r.side > 0)
      ++est.side_plus;
    else
      ++est.side_minus;
  }
  est.p_hat = static_cast<double>(survivors) / static_cast<double>(n);
  const stats::Interval ci = stats::wilson_ci(survivors, n);
  est.ci_low = ci.low;
  est.ci_high = ci.high;
  est.warning_low_expected_count = survivors < 25;
  return est;
}

TailEstimate tail_splitting(const model::ModelSpec& m, const TailQuery& query,
                            int levels, std::size_t paths_per_level,
                            const sde::SimConfig& cfg, std::uint64_t seed) {
  check_query(m, query);
  if (levels < 1) throw RareError("levels must be >= 1");
  const double t_star = query.horizon(m.lambda);

  SdeSurvival sys{m, cfg, query.epsilon * query.x_start,
                  t_star / static_cast<double>(levels)};
  TailEstimate est = fixed_effort_splitting(sys, levels, paths_per_level, seed);
  for (int k = 1; k <= levels; ++k)
    est.levels.push_back(t_star * k / static_cast<double>(levels));
  est.warning_low_expected_count =
      est.p_hat * static_cast<double>(paths_per_level) < 25.0;
  return est;
}

ConditionalSplit conditional_exit_distribution(const TailEstimate& estimate) {
  ConditionalSplit out;
  out.n_conditional = estimate.side_minus + estimate.side_plus;
  if (out.n_conditional < 100)
    throw RareError("insufficient conditional sample (need >= 100 "
                    "surviving-then-exiting paths, have " +
                    std::to_string(out.n_conditional) + ")");
  out.p_plus = static_cast<double>(estimate.side_plus) /
               static_cast<double>(out.n_conditional);
  out.p_minus = 1.0 - out.p_plus;
  out.ci_plus = stats::wilson_ci(estimate.side_plus, out.n_conditional);
  return out;
}

SideEstimate unconditional_exit_split(const model::ModelSpec& m, double eps,
                                      double x0, std::size_t n,
                                      const sde::SimConfig& cfg,
                                      std::uint64_t seed) {
  sde::SimConfig local = cfg;
  local.epsilon = eps;
  std::vector<sde::ExitResult> results(n);
  parallel::parallel_for(n, [&](std::size_t i) {
    rng::Stream stream = rng::path_stream(seed, static_cast<std::uint32_t>(i));
    results[i] = sde::simulate_exit(m, x0, local, stream);
  });
  std::size_t plus = 0, resolved = 0;
  for (const auto& r : results) {
    if (r.censored) continue;
    ++resolved;
    if (r.side > 0) ++plus;
  }
  SideEstimate out;
  out.n = resolved;
  out.p_plus = resolved ? static_cast<double>(plus) / resolved : 0.0;
  out.ci = stats::wilson_ci(plus, resolved);
  return out;
}

}  // namespace exitlab::rare
