#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "exitlab/model.hpp"
#include "exitlab/sde.hpp"
#include "exitlab/stats.hpp"

namespace exitlab::density {

class DensityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gridded Gaussian-kernel density of M(T').
struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> values;
  double bandwidth = 0.0;
  std::size_t n = 0;
  double x_start = 0.0;
};

// The limiting law of M: Normal(x, sigma^2(0) / (2 lambda)).
struct GaussianReference {
  double mean = 0.0;
  double variance = 0.0;

  double pdf(double z) const {
    return std::exp(-(z - mean) * (z - mean) / (2.0 * variance)) /
           std::sqrt(2.0 * M_PI * variance);
  }
};

// Evaluation time for M: lambda T' = exponent * log(1/eps). The admissible
// window is [1 - c/log(1/eps), 2 - kappa]; the default sits at its midpoint
// scale, away from both degenerate ends.
struct TPrimePolicy {
  double exponent = 1.5;
  double c = 1.0;
  double kappa = 0.5;

  double horizon(double lambda, double eps) const {
    return exponent / lambda * std::log(1.0 / eps);
  }
  void validate(double eps) const;
};

std::vector<double> sample_M_at(const sde::LinearizedCoeffs& coeffs,
                                double eps, double x,
                                const TPrimePolicy& policy, std::size_t n,
                                const sde::SimConfig& cfg, std::uint64_t seed);

// Convenience wrapper that builds the conjugation internally.
std::vector<double> sample_M_at(const model::ModelSpec& m, double eps, double x,
                                const TPrimePolicy& policy, std::size_t n,
                                const sde::SimConfig& cfg, std::uint64_t seed);

// bandwidth <= 0 selects the normal-reference rule 1.06 sd n^{-1/5}.
DensityEstimate kde(const std::vector<double>& sample, double bandwidth = 0.0,
                    double x_start = 0.0);

// max over the grid of |p_est(z) - p_ref(z)| e^{|x - z|}, with x = ref.mean.
double weighted_sup_distance(const DensityEstimate& est,
                             const GaussianReference& ref);

struct SmallBallResult {
  double empirical = 0.0;
  double theoretical = 0.0;
  double a = 0.0;          // ball radius c_a eps^theta
  double T_eps = 0.0;      // horizon used
  std::size_t hits = 0;
  std::size_t n = 0;
  bool too_few_hits = false;  // < 25 hits: widen n
};

// P(0 < sign * M(T_eps) <= a(eps)) against the Gaussian plug-in
// sqrt(lambda/pi) e^{-lambda (x/sigma(0))^2} / sigma(0) * a(eps).
SmallBallResult small_ball_check(const model::ModelSpec& m,
                                 const sde::LinearizedCoeffs& coeffs,
                                 double eps, double x, double theta,
                                 std::size_t n, const sde::SimConfig& cfg,
                                 std::uint64_t seed, int sign = 1,
                                 double c_a = 1.0);

}  // namespace exitlab::density
