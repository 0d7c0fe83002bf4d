#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "exitlab/model.hpp"
#include "exitlab/parallel.hpp"
#include "exitlab/rng.hpp"
#include "exitlab/sde.hpp"
#include "exitlab/stats.hpp"

namespace exitlab::rare {

class RareError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The event {tau_I > t*} with t* = (alpha/lambda) log(1/eps), started from
// X(0) = eps * x_start.
struct TailQuery {
  double alpha = 0.0;    // > 1
  double epsilon = 0.0;
  double x_start = 0.0;  // in units of eps
  double horizon(double lambda_) const {
    return alpha / lambda_ * std::log(1.0 / epsilon);
  }
  // |x| <= sqrt((2 theta_cap / lambda) log(1/eps)) with theta_cap = 2 keeps
  // the query inside the theorem's K(eps) hypothesis class.
  bool within_K_policy(double lambda_) const {
    const double cap = std::sqrt(4.0 / lambda_ * std::log(1.0 / epsilon));
    return std::fabs(x_start) <= cap;
  }
};

enum class TailMethod { kDirect, kSplitting };

struct TailEstimate {
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  TailMethod method = TailMethod::kDirect;
  std::size_t n_effective = 0;
  std::vector<double> levels;  // splitting thresholds in survival time
  std::vector<double> level_fractions;
  std::size_t side_minus = 0;  // conditional post-horizon exits at q-
  std::size_t side_plus = 0;   // and at q+
  std::size_t censored = 0;
  bool warning_low_expected_count = false;
};

TailEstimate tail_direct(const model::ModelSpec& m, const TailQuery& query,
                         std::size_t n, const sde::SimConfig& cfg,
                         std::uint64_t seed);

TailEstimate tail_splitting(const model::ModelSpec& m, const TailQuery& query,
                            int levels, std::size_t paths_per_level,
                            const sde::SimConfig& cfg, std::uint64_t seed);

struct ConditionalSplit {
  double p_minus = 0.0;
  double p_plus = 0.0;
  stats::Interval ci_plus;
  std::size_t n_conditional = 0;
};

// Empirical exit-side frequencies among paths surviving past the horizon.
ConditionalSplit conditional_exit_distribution(const TailEstimate& estimate);

struct SideEstimate {
  double p_plus = 0.0;
  stats::Interval ci;
  std::size_t n = 0;
};

// Plain Monte Carlo exit-side frequency (no conditioning), the empirical
// counterpart of the scale-function quadrature.
SideEstimate unconditional_exit_split(const model::ModelSpec& m, double eps,
                                      double x0, std::size_t n,
                                      const sde::SimConfig& cfg,
                                      std::uint64_t seed);

// Fixed-effort multilevel splitting over a generic survival process.
// System requirements:
//   using State = ...;
//   State initial_state() const;
//   std::optional<State> advance(const State&, int level, rng::Stream&) const;
//   int classify(const State&, rng::Stream&) const;   // exit side, else 0
// Level k advances use streams (seed, slot, k); at level 0 these coincide
// with direct Monte Carlo path streams, so levels == 1 reproduces the
// direct estimator path for path.
template <class System>
TailEstimate fixed_effort_splitting(const System& sys, int levels,
                                    std::size_t population,
                                    std::uint64_t seed) {
  if (levels < 1) throw RareError("splitting needs levels >= 1");
  if (population == 0) throw RareError("splitting needs a population");
  using State = typename System::State;

  TailEstimate est;
  est.method = TailMethod::kSplitting;
  est.n_effective = population * static_cast<std::size_t>(levels);

  std::vector<State> current(population, sys.initial_state());
  std::vector<std::optional<State>> advanced(population);
  double log_p = 0.0;
  double log_var = 0.0;  // delta-method variance of log p_hat
  bool extinct = false;

  for (int k = 0; k < levels && !extinct; ++k) {
    parallel::parallel_for(population, [&](std::size_t i) {
      rng::Stream stream = rng::level_stream(
          seed, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k));
      advanced[i] = sys.advance(current[i], k, stream);
    });
    std::vector<State> survivors;
    survivors.reserve(population);
    for (std::size_t i = 0; i < population; ++i)
      if (advanced[i]) survivors.push_back(*advanced[i]);
    const double frac =
        static_cast<double>(survivors.size()) / static_cast<double>(population);
    est.level_fractions.push_back(frac);
    if (survivors.empty()) {
      extinct = true;
      break;
    }
    log_p += std::log(frac);
    log_var += (1.0 - frac) / (frac * static_cast<double>(population));
    if (k + 1 < levels) {
      // Fixed effort: resample back to constant population (Markov restart
      // with fresh noise happens in the next level's advance).
      rng::Stream rs = rng::resample_stream(seed, static_cast<std::uint32_t>(k));
      std::vector<State> next(population);
      for (std::size_t i = 0; i < population; ++i)
        next[i] = survivors[rs.uniform_below(survivors.size())];
      current = std::move(next);
    } else {
      current = std::move(survivors);
    }
  }

  if (extinct) {
    est.p_hat = 0.0;
    est.ci_low = 0.0;
    // One-sided bound from the last non-extinct prefix: prob of zero
    // survivors at rate p is (1-p)^N, so p <= 1 - 0.05^{1/N} at 95%.
    est.ci_high = std::exp(log_p) *
                  (1.0 - std::pow(0.05, 1.0 / static_cast<double>(population)));
    return est;
  }

  est.p_hat = std::exp(log_p);
  const double half = 1.959963984540054 * std::sqrt(log_var);
  est.ci_low = std::exp(log_p - half);
  est.ci_high = std::min(1.0, std::exp(log_p + half));

  // Classify final survivors (continuation reuses per-slot streams keyed by
  // the level index past the last threshold).
  std::vector<int> sides(current.size(), 0);
  parallel::parallel_for(current.size(), [&](std::size_t i) {
    rng::Stream stream =
        rng::level_stream(seed, static_cast<std::uint32_t>(i),
                          static_cast<std::uint32_t>(levels));
    sides[i] = sys.classify(current[i], stream);
  });
  for (int s : sides) {
    if (s > 0)
      ++est.side_plus;
    else if (s < 0)
      ++est.side_minus;
    else
      ++est.censored;
  }
  return est;
}

}  // namespace exitlab::rare
