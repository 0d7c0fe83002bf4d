#include "exitlab/density.hpp"

#include <algorithm>
#include <cmath>

#include "exitlab/flow.hpp"
#include "exitlab/parallel.hpp"
#include "exitlab/rng.hpp"
#include "exitlab/theory.hpp"

namespace exitlab::density {

void TPrimePolicy::validate(double eps) const {
  if (!(eps > 0.0 && eps < 1.0))
    throw DensityError("epsilon must be in (0, 1)");
  const double lo = 1.0 - c / std::log(1.0 / eps);
  const double hi = 2.0 - kappa;
  if (!(exponent >= lo && exponent <= hi))
    throw DensityError(
        "T' policy exponent " + std::to_string(exponent) +
        " outside the admissible window [" + std::to_string(lo) + ", " +
        std::to_string(hi) + "]");
}

std::vector<double> sample_M_at(const sde::LinearizedCoeffs& coeffs,
                                double eps, double x,
                                const TPrimePolicy& policy, std::size_t n,
                                const sde::SimConfig& cfg, std::uint64_t seed) {
  policy.validate(eps);
  const double T_prime = policy.horizon(coeffs.lambda, eps);

  sde::SimConfig local = cfg;
  local.epsilon = eps;
  if (local.max_time < T_prime) local.max_time = T_prime + 1.0;
  local.validate();

  std::vector<double> out(n);
  parallel::parallel_for(n, [&](std::size_t i) {
    rng::Stream stream = rng::path_stream(seed, static_cast<std::uint32_t>(i));
    const sde::LinearizedRun run =
        sde::simulate_linearized(coeffs, x, local, stream, T_prime, false);
    out[i] = run.M_final;
  });
  return out;
}

std::vector<double> sample_M_at(const model::ModelSpec& m, double eps, double x,
                                const TPrimePolicy& policy, std::size_t n,
                                const sde::SimConfig& cfg, std::uint64_t seed) {
  flow::FlowSolverConfig fcfg;
  const flow::ConjugationTable table = flow::build_conjugation_table(m, 257, fcfg);
  const model::Neighborhood nb = flow::choose_neighborhood(m, table, m.requested_R);
  const sde::LinearizedCoeffs coeffs = sde::build_linearized_coeffs(m, table, nb);
  return sample_M_at(coeffs, eps, x, policy, n, cfg, seed);
}

DensityEstimate kde(const std::vector<double>& sample, double bandwidth,
                    double x_start) {
  if (sample.size() < 1000)
    throw DensityError("kde needs at least 10^3 samples");
  const double mu = stats::mean(sample);
  const double sd = stats::stddev(sample);
  if (!(sd > 0.0)) throw DensityError("degenerate sample: zero variance");

  DensityEstimate est;
  est.n = sample.size();
  est.x_start = x_start;
  est.bandwidth = bandwidth > 0.0
                      ? bandwidth
                      : 1.06 * sd * std::pow(static_cast<double>(est.n), -0.2);

  constexpr std::size_t kGrid = 512;
  const double lo = mu - 6.0 * sd, hi = mu + 6.0 * sd;
  const double dz = (hi - lo) / static_cast<double>(kGrid - 1);
  est.grid.resize(kGrid);
  est.values.assign(kGrid, 0.0);
  for (std::size_t j = 0; j < kGrid; ++j)
    est.grid[j] = lo + dz * static_cast<double>(j);

  const double inv_h = 1.0 / est.bandwidth;
  const double norm =
      inv_h / (std::sqrt(2.0 * M_PI) * static_cast<double>(est.n));
  // Kernel support truncated at 8 bandwidths: error < 1e-15 relative.
  const double reach = 8.0 * est.bandwidth;
  for (double v : sample) {
    const std::size_t j0 = static_cast<std::size_t>(
        std::max(0.0, std::ceil((v - reach - lo) / dz)));
    const std::size_t j1 = static_cast<std::size_t>(std::min(
        static_cast<double>(kGrid - 1), std::floor((v + reach - lo) / dz)));
    for (std::size_t j = j0; j <= j1 && j < kGrid; ++j) {
      const double u = (est.grid[j] - v) * inv_h;
      est.values[j] += std::exp(-0.5 * u * u);
    }
  }
  for (double& p : est.values) p *= norm;
  return est;
}

double weighted_sup_distance(const DensityEstimate& est,
                             const GaussianReference& ref) {
  double worst = 0.0;
  for (std::size_t j = 0; j < est.grid.size(); ++j) {
    const double z = est.grid[j];
    const double gap = std::fabs(est.values[j] - ref.pdf(z)) *
                       std::exp(std::fabs(ref.mean - z));
    worst = std::max(worst, gap);
  }
  return worst;
}

SmallBallResult small_ball_check(const model::ModelSpec& m,
                                 const sde::LinearizedCoeffs& coeffs,
                                 double eps, double x, double theta,
                                 std::size_t n, const sde::SimConfig& cfg,
                                 std::uint64_t seed, int sign, double c_a) {
  if (!(theta > 0.0)) throw DensityError("theta must be positive");
  if (sign != 1 && sign != -1) throw DensityError("sign must be +1 or -1");

  SmallBallResult res;
  res.n = n;
  res.a = c_a * std::pow(eps, theta);
  res.T_eps = theory::deterministic_T(eps, coeffs.R, theta, m.lambda, c_a);
  res.theoretical = std::sqrt(m.lambda / M_PI) *
                    std::exp(-m.lambda * (x / m.sigma0) * (x / m.sigma0)) /
                    m.sigma0 * res.a;

  sde::SimConfig local = cfg;
  local.epsilon = eps;
  if (local.max_time < res.T_eps) local.max_time = res.T_eps + 1.0;
  local.validate();

  std::vector<unsigned char> hit(n, 0);
  parallel::parallel_for(n, [&](std::size_t i) {
    rng::Stream stream = rng::path_stream(seed, static_cast<std::uint32_t>(i));
    const sde::LinearizedRun run =
        sde::simulate_linearized(coeffs, x, local, stream, res.T_eps, false);
    const double v = sign * run.M_final;
    hit[i] = (v > 0.0 && v <= res.a) ? 1 : 0;
  });
  for (unsigned char h : hit) res.hits += h;
  res.empirical = static_cast<double>(res.hits) / static_cast<double>(n);
  res.too_few_hits = res.hits < 25;
  return res;
}

}  // namespace exitlab::density
