#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "exitlab/flow.hpp"
#include "exitlab/model.hpp"
#include "exitlab/rng.hpp"

namespace exitlab::sde {

class SdeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Scheme { kEuler, kMilstein };

struct SimConfig {
  double dt = 1e-3;
  double epsilon = 0.1;
  Scheme scheme = Scheme::kEuler;
  double max_time = 0.0;  // 0 -> filled by default_max_time

  void validate() const {
    if (!(dt > 0.0 && dt <= 0.01)) throw SdeError("dt must be in (0, 0.01]");
    if (!(epsilon >= 0.0 && epsilon < 1.0))
      throw SdeError("epsilon must be in [0, 1)");
    if (!(max_time > 0.0)) throw SdeError("max_time must be positive");
  }
};

inline double default_max_time(const model::ModelSpec& m, double epsilon) {
  if (epsilon <= 0.0) return 20.0 / m.lambda;
  return (2.0 / m.lambda) * std::log(1.0 / epsilon) + 20.0 / m.lambda;
}

struct ExitRecord {
  double tau = 0.0;
  int side = 0;  // +1 at q_plus, -1 at q_minus
};

struct Path {
  std::vector<double> times;
  std::vector<double> states;
  std::vector<double> dw;  // dw[i] drives the step times[i] -> times[i+1]
  std::optional<ExitRecord> exit;
  bool censored = false;
};

// Light result for batch runs that do not need the trajectory.
struct ExitResult {
  double tau = 0.0;
  int side = 0;
  bool censored = false;
};

Path simulate_path(const model::ModelSpec& m, double x0, const SimConfig& cfg,
                   rng::Stream& stream);

ExitResult simulate_exit(const model::ModelSpec& m, double x0,
                         const SimConfig& cfg, rng::Stream& stream);

// Advance an interior state for a fixed duration; nullopt if the path exits
// the interval first (exit details in *exit_out when given).
std::optional<double> advance_segment(const model::ModelSpec& m, double x,
                                      double duration, const SimConfig& cfg,
                                      rng::Stream& stream,
                                      ExitRecord* exit_out = nullptr);

// n independent exit samples from x0, streams keyed by (seed, path index).
std::vector<ExitResult> exit_summary(const model::ModelSpec& m, double x0,
                                     const SimConfig& cfg, std::size_t n,
                                     std::uint64_t seed);

// Coefficients of the linearized SDE
//   dY = lambda Y dt + eps sigma_tilde(Y) dW + (eps^2/2) h(Y) dt,
// with sigma_tilde(y) = f'(g(y)) sigma(g(y)), h(y) = f''(g(y)) sigma^2(g(y)).
// Outside [-R, R] the coefficients are frozen at their boundary values.
// When the drift is exactly linear (eta == 0) the conjugation is the
// identity and the coefficients reduce to sigma itself; that path is exact
// and avoids table interpolation noise.
struct LinearizedCoeffs {
  double R = 0.0;
  double lambda = 0.0;
  double sigma0 = 0.0;
  bool identity = false;
  expr::ScalarFunction sigma;  // identity mode only

  std::vector<double> st, hh, stp, hhp;  // tables over the y grid
  double y_lo = 0.0, inv_dy = 0.0;

  double clamp(double y) const { return y < -R ? -R : (y > R ? R : y); }

  double sigma_tilde(double y) const {
    y = clamp(y);
    if (identity) return sigma(y);
    return lookup(st, y);
  }
  double h(double y) const {
    if (identity) return 0.0;
    return lookup(hh, clamp(y));
  }
  double sigma_tilde_prime(double y) const {
    if (y < -R || y > R) return 0.0;  // frozen continuation
    if (identity) return sigma.derivative(y, 1e-6);
    return lookup(stp, y);
  }
  double h_prime(double y) const {
    if (y < -R || y > R) return 0.0;
    if (identity) return 0.0;
    return lookup(hhp, y);
  }

 private:
  double lookup(const std::vector<double>& tab, double y) const {
    const double u = (y - y_lo) * inv_dy;
    std::size_t i = static_cast<std::size_t>(u);
    if (i >= tab.size() - 1) i = tab.size() - 2;
    const double s = u - static_cast<double>(i);
    return tab[i] + s * (tab[i + 1] - tab[i]);
  }
};

LinearizedCoeffs build_linearized_coeffs(const model::ModelSpec& m,
                                         const flow::ConjugationTable& table,
                                         const model::Neighborhood& nb);

// Duhamel decomposition M(t) = x + U(t) + V(t) with Y(t) = eps e^{lambda t} M(t).
struct DuhamelTrace {
  std::vector<double> times;
  std::vector<double> M, U, V;
  double x0_lin = 0.0;
};

struct ExitV {
  double tau = 0.0;
  double M_at_exit = 0.0;
  int side = 0;
};

struct LinearizedRun {
  DuhamelTrace trace;         // filled only when record was requested
  std::vector<double> dw;     // ditto
  std::optional<ExitV> exit;  // first crossing of |Y| = R
  double M_final = 0.0;
  double T_final = 0.0;
  bool censored = false;  // only for T_end <= 0 runs that hit max_time
};

// Simulates the linearized process in M coordinates (so Y = eps e^{lt} M is
// exact bookkeeping). T_end > 0: run to the deterministic horizon, recording
// the first V-exit on the way and continuing with frozen coefficients.
// T_end <= 0: stop at the V-exit (censored at cfg.max_time otherwise).
LinearizedRun simulate_linearized(const LinearizedCoeffs& coeffs, double x_lin,
                                  const SimConfig& cfg, rng::Stream& stream,
                                  double T_end, bool record);

struct MalliavinTrace {
  std::vector<double> t_grid;
  std::vector<double> value;       // D_t M(T')
  std::vector<double> z_stoch;     // eps * int_t^{T'} sigma_tilde'(Y) dW
  std::vector<double> z_drift;     // (eps^2/2) int_t^{T'} (h' - sigma_tilde'^2) ds
};

// Pathwise Malliavin derivative via the exponential closed form, evaluated
// on the run's own grid and Brownian increments. Requires a recorded run.
MalliavinTrace malliavin_derivative(const LinearizedRun& run,
                                    const LinearizedCoeffs& coeffs,
                                    const std::vector<double>& t_grid,
                                    double T_prime, const SimConfig& cfg);

}  // namespace exitlab::sde
