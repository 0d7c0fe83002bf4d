#include "exitlab/sde.hpp"

#include <algorithm>
#include <cmath>

#include "exitlab/parallel.hpp"

namespace exitlab::sde {
namespace {

// Crossing fraction of the step [x0, x1] against a boundary.
inline double crossing_fraction(double x0, double x1, double boundary) {
  return (boundary - x0) / (x1 - x0);
}

struct StepperX {
  const model::ModelSpec& m;
  const SimConfig& cfg;
  double sqrt_dt;
  bool milstein;

  explicit StepperX(const model::ModelSpec& m_, const SimConfig& cfg_)
      : m(m_), cfg(cfg_), sqrt_dt(std::sqrt(cfg_.dt)),
        milstein(cfg_.scheme == Scheme::kMilstein) {}

  double step(double x, double dw) const {
    const double s = m.sigma(x);
    double next = x + m.b(x) * cfg.dt + cfg.epsilon * s * dw;
    if (milstein) {
      const double sp = m.sigma.derivative(x, 1e-6);
      next += 0.5 * cfg.epsilon * cfg.epsilon * s * sp * (dw * dw - cfg.dt);
    }
    return next;
  }
};

}  // namespace

Path simulate_path(const model::ModelSpec& m, double x0, const SimConfig& cfg,
                   rng::Stream& stream) {
  cfg.validate();
  if (!(x0 >= m.q_minus && x0 <= m.q_plus))
    throw SdeError("x0 outside the closed interval");
  Path path;
  path.times.push_back(0.0);
  path.states.push_back(x0);
  if (x0 == m.q_minus || x0 == m.q_plus) {
    path.exit = ExitRecord{0.0, x0 == m.q_plus ? +1 : -1};
    return path;
  }
  const StepperX stepper(m, cfg);
  double x = x0, t = 0.0;
  while (t < cfg.max_time) {
    const double dw = stepper.sqrt_dt * stream.normal();
    const double next = stepper.step(x, dw);
    if (!std::isfinite(next)) throw SdeError("non-finite state encountered");
    path.dw.push_back(dw);
    t += cfg.dt;
    if (next <= m.q_minus || next >= m.q_plus) {
      const int side = next >= m.q_plus ? +1 : -1;
      const double boundary = side > 0 ? m.q_plus : m.q_minus;
      const double frac = crossing_fraction(x, next, boundary);
      path.times.push_back(t);
      path.states.push_back(boundary);
      path.exit = ExitRecord{t - cfg.dt + frac * cfg.dt, side};
      return path;
    }
    path.times.push_back(t);
    path.states.push_back(next);
    x = next;
  }
  path.censored = true;
  return path;
}

ExitResult simulate_exit(const model::ModelSpec& m, double x0,
                         const SimConfig& cfg, rng::Stream& stream) {
  cfg.validate();
  if (!(x0 >= m.q_minus && x0 <= m.q_plus))
    throw SdeError("x0 outside the closed interval");
  if (x0 == m.q_minus || x0 == m.q_plus)
    return {0.0, x0 == m.q_plus ? +1 : -1, false};
  const StepperX stepper(m, cfg);
  double x = x0, t = 0.0;
  while (t < cfg.max_time) {
    const double dw = stepper.sqrt_dt * stream.normal();
    const double next = stepper.step(x, dw);
    t += cfg.dt;
    if (next <= m.q_minus || next >= m.q_plus) {
      const int side = next >= m.q_plus ? +1 : -1;
      const double boundary = side > 0 ? m.q_plus : m.q_minus;
      const double frac = crossing_fraction(x, next, boundary);
      return {t - cfg.dt + frac * cfg.dt, side, false};
    }
    x = next;
  }
  return {cfg.max_time, 0, true};
}

std::optional<double> advance_segment(const model::ModelSpec& m, double x,
                                      double duration, const SimConfig& cfg,
                                      rng::Stream& stream,
                                      ExitRecord* exit_out) {
  const StepperX stepper(m, cfg);
  const long long n_steps =
      static_cast<long long>(std::llround(duration / cfg.dt));
  for (long long i = 0; i < n_steps; ++i) {
    const double dw = stepper.sqrt_dt * stream.normal();
    const double next = stepper.step(x, dw);
    if (next <= m.q_minus || next >= m.q_plus) {
      if (exit_out) {
        const int side = next >= m.q_plus ? +1 : -1;
        const double boundary = side > 0 ? m.q_plus : m.q_minus;
        const double frac = crossing_fraction(x, next, boundary);
        *exit_out = {static_cast<double>(i) * cfg.dt + frac * cfg.dt, side};
      }
      return std::nullopt;
    }
    x = next;
  }
  return x;
}

std::vector<ExitResult> exit_summary(const model::ModelSpec& m, double x0,
                                     const SimConfig& cfg, std::size_t n,
                                     std::uint64_t seed) {
  std::vector<ExitResult> out(n);
  parallel::parallel_for(n, [&](std::size_t i) {
    rng::Stream stream =
        rng::path_stream(seed, static_cast<std::uint32_t>(i));
    out[i] = simulate_exit(m, x0, cfg, stream);
  });
  return out;
}

LinearizedCoeffs build_linearized_coeffs(const model::ModelSpec& m,
                                         const flow::ConjugationTable& table,
                                         const model::Neighborhood& nb) {
  LinearizedCoeffs c;
  c.R = nb.R;
  c.lambda = m.lambda;
  c.sigma0 = m.sigma0;
  if (m.linear_drift()) {
    c.identity = true;
    c.sigma = m.sigma;
    return c;
  }
  constexpr int kNodes = 4097;
  c.st.resize(kNodes);
  c.hh.resize(kNodes);
  c.y_lo = -nb.R;
  const double dy = 2.0 * nb.R / (kNodes - 1);
  c.inv_dy = 1.0 / dy;
  // f' and f'' from the conjugation identity f'(x) b(x) = lambda f(x):
  //   f'  = lambda f / b,     f'' = f' (lambda - b') / b,
  // with the limits f'(0) = 1, f''(0) = -2 eta(0)/lambda at the fixed point.
  const double x_c = 1e-3 * std::min(1.0, nb.R);
  const double eta0 = 0.5 * (m.eta(x_c) + m.eta(-x_c));
  const double f2_at_0 = -2.0 * eta0 / m.lambda;
  for (int j = 0; j < kNodes; ++j) {
    const double y = c.y_lo + dy * j;
    const double x = table.g(y);
    double fp, fpp;
    if (std::fabs(x) < x_c) {
      fp = 1.0 + f2_at_0 * x;
      fpp = f2_at_0;
    } else {
      const double bx = m.b(x);
      fp = m.lambda * table.f(x) / bx;
      const double bprime = m.b.derivative(x, 1e-5);
      fpp = fp * (m.lambda - bprime) / bx;
    }
    const double sig = m.sigma(x);
    c.st[j] = fp * sig;
    c.hh[j] = fpp * sig * sig;
  }
  c.stp.resize(kNodes);
  c.hhp.resize(kNodes);
  for (int j = 0; j < kNodes; ++j) {
    const int lo = j == 0 ? 0 : j - 1;
    const int hi = j == kNodes - 1 ? kNodes - 1 : j + 1;
    c.stp[j] = (c.st[hi] - c.st[lo]) / ((hi - lo) * dy);
    c.hhp[j] = (c.hh[hi] - c.hh[lo]) / ((hi - lo) * dy);
  }
  return c;
}

LinearizedRun simulate_linearized(const LinearizedCoeffs& coeffs, double x_lin,
                                  const SimConfig& cfg, rng::Stream& stream,
                                  double T_end, bool record) {
  cfg.validate();
  const double eps = cfg.epsilon;
  if (!(std::fabs(eps * x_lin) < coeffs.R))
    throw SdeError("initial linearized state |eps x| must be below R");

  LinearizedRun run;
  const double horizon = T_end > 0.0 ? T_end : cfg.max_time;
  const double dt = cfg.dt;
  const double sqrt_dt = std::sqrt(dt);
  const double lam = coeffs.lambda;
  const double grow = std::exp(lam * dt);

  double M = x_lin, U = 0.0, V = 0.0;
  double t = 0.0;
  double e_lt = 1.0;  // e^{lambda t}

  if (record) {
    run.trace.x0_lin = x_lin;
    run.trace.times.push_back(0.0);
    run.trace.M.push_back(M);
    run.trace.U.push_back(0.0);
    run.trace.V.push_back(0.0);
  }

  while (t < horizon - 1e-9) {
    const double step = std::min(dt, horizon - t);
    const bool full = step == dt;
    const double y = eps * e_lt * M;
    const double st = coeffs.sigma_tilde(y);
    const double hv = coeffs.h(y);
    const double e_mlt = 1.0 / e_lt;
    const double dw = (full ? sqrt_dt : std::sqrt(step)) * stream.normal();

    const double dU = e_mlt * st * dw;
    const double v0 = 0.5 * eps * e_mlt * hv;
    const double e_lt_next = full ? e_lt * grow : e_lt * std::exp(lam * step);
    // Trapezoid on the V integrand, with an Euler predictor for Y(t+dt).
    const double y_pred = eps * e_lt_next * (M + dU + step * v0);
    const double v1 =
        0.5 * eps / e_lt_next * coeffs.h(coeffs.clamp(y_pred));
    const double dV = 0.5 * step * (v0 + v1);

    // M is recomputed from x + U + V so the bookkeeping identity is exact.
    const double U_next = U + dU;
    const double V_next = V + dV;
    const double M_next = x_lin + U_next + V_next;
    const double t_next = t + step;
    const double y_next = eps * e_lt_next * M_next;

    if (!run.exit && std::fabs(y_next) >= coeffs.R) {
      // Solve eps e^{lambda s} |M(s)| = R on [t, t_next] with M linear in s.
      double lo = t, hi = t_next;
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        const double frac = (mid - t) / step;
        const double Mm = M + frac * (M_next - M);
        const double ym = eps * std::exp(lam * mid) * Mm;
        if (std::fabs(ym) < coeffs.R)
          lo = mid;
        else
          hi = mid;
      }
      const double tau = 0.5 * (lo + hi);
      const double frac = (tau - t) / step;
      const double M_tau = M + frac * (M_next - M);
      run.exit = ExitV{tau, M_tau, M_tau > 0 ? +1 : -1};
      if (T_end <= 0.0) {
        run.M_final = M_tau;
        run.T_final = tau;
        if (record) {
          run.trace.times.push_back(tau);
          run.trace.M.push_back(M_tau);
          run.trace.U.push_back(U + frac * dU);
          run.trace.V.push_back(V + frac * dV);
          run.dw.push_back(dw);
        }
        return run;
      }
    }

    M = M_next;
    U = U_next;
    V = V_next;
    t = t_next;
    e_lt = e_lt_next;
    if (record) {
      run.trace.times.push_back(t);
      run.trace.M.push_back(M);
      run.trace.U.push_back(U);
      run.trace.V.push_back(V);
      run.dw.push_back(dw);
    }
  }

  run.M_final = M;
  run.T_final = t;
  if (T_end <= 0.0 && !run.exit) run.censored = true;
  return run;
}

MalliavinTrace malliavin_derivative(const LinearizedRun& run,
                                    const LinearizedCoeffs& coeffs,
                                    const std::vector<double>& t_grid,
                                    double T_prime, const SimConfig& cfg) {
  if (run.trace.times.empty())
    throw SdeError("malliavin_derivative needs a recorded run");
  if (T_prime > run.T_final + 1e-12)
    throw SdeError("T_prime beyond the simulated horizon");
  const auto& times = run.trace.times;
  std::size_t n_end = times.size() - 1;
  while (n_end > 0 && times[n_end] > T_prime + 1e-12) --n_end;

  const double eps = cfg.epsilon;
  // Suffix sums of the stochastic and drift integrals of Z over [t, T'].
  std::vector<double> suf_stoch(n_end + 1, 0.0), suf_drift(n_end + 1, 0.0);
  std::vector<double> y_at(n_end + 1);
  for (std::size_t i = 0; i <= n_end; ++i)
    y_at[i] = eps * std::exp(coeffs.lambda * times[i]) * run.trace.M[i];
  for (std::size_t i = n_end; i-- > 0;) {
    const double sp = coeffs.sigma_tilde_prime(y_at[i]);
    const double hp = coeffs.h_prime(y_at[i]);
    const double ds = times[i + 1] - times[i];
    suf_stoch[i] = suf_stoch[i + 1] + sp * run.dw[i];
    suf_drift[i] = suf_drift[i + 1] + (hp - sp * sp) * ds;
  }

  MalliavinTrace out;
  out.t_grid = t_grid;
  out.value.reserve(t_grid.size());
  out.z_stoch.reserve(t_grid.size());
  out.z_drift.reserve(t_grid.size());
  for (double tq : t_grid) {
    if (tq > T_prime + 1e-12)
      throw SdeError("t_grid point beyond T_prime");
    // Snap to the nearest recorded time (the grid is a subset of the path
    // times up to rounding).
    const auto it = std::lower_bound(times.begin(), times.begin() + n_end + 1, tq);
    std::size_t i = static_cast<std::size_t>(it - times.begin());
    if (i > n_end) i = n_end;
    if (i > 0 && times[i] - tq > tq - times[i - 1]) --i;
    const double zs = eps * suf_stoch[i];
    const double zd = 0.5 * eps * eps * suf_drift[i];
    const double base = std::exp(-coeffs.lambda * times[i]) *
                        coeffs.sigma_tilde(coeffs.clamp(y_at[i]));
    out.value.push_back(base * std::exp(zs + zd));
    out.z_stoch.push_back(zs);
    out.z_drift.push_back(zd);
  }
  return out;
}

}  // namespace exitlab::sde
