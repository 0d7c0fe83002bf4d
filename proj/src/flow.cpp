#include "exitlab/flow.hpp"

#include <algorithm>
#include <cmath>

namespace exitlab::flow {
namespace {

// One classical RK4 step for dx/dt = dir * b(x).
inline double rk4_step(const expr::ScalarFunction& b, double x, double h,
                       double dir) {
  const double k1 = dir * b(x);
  const double k2 = dir * b(x + 0.5 * h * k1);
  const double k3 = dir * b(x + 0.5 * h * k2);
  const double k4 = dir * b(x + h * k3);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Bounds {
  double lo, hi;
};

Bounds enlarged_interval(const model::ModelSpec& m) {
  const double w = 0.5 * (m.q_plus - m.q_minus);
  return {m.q_minus - w, m.q_plus + w};
}

// Integrate dx/ds = dir * b(x) for duration s >= 0 with fixed step.
double advance(const model::ModelSpec& m, double x, double s, double dir,
               const FlowSolverConfig& cfg, const Bounds& bounds) {
  const double h = cfg.dt;
  const long long n_full = static_cast<long long>(s / h);
  for (long long i = 0; i < n_full; ++i) {
    x = rk4_step(m.b, x, h, dir);
    if (!(x >= bounds.lo && x <= bounds.hi))
      throw FlowError("flow escaped the enlarged interval during integration");
  }
  const double rem = s - n_full * h;
  if (rem > 0.0) {
    x = rk4_step(m.b, x, rem, dir);
    if (!(x >= bounds.lo && x <= bounds.hi))
      throw FlowError("flow escaped the enlarged interval during integration");
  }
  return x;
}

}  // namespace

double integrate_flow(const model::ModelSpec& m, double x0, double t,
                      const FlowSolverConfig& cfg) {
  const Bounds bounds = enlarged_interval(m);
  if (!(x0 >= bounds.lo && x0 <= bounds.hi))
    throw FlowError("initial point outside the enlarged interval");
  if (t == 0.0) return x0;
  return advance(m, x0, std::fabs(t), t > 0 ? 1.0 : -1.0, cfg, bounds);
}

DeterministicExit deterministic_exit_time(const model::ModelSpec& m, double x,
                                          const FlowSolverConfig& cfg) {
  if (x == 0.0) throw FlowError("x = 0 never exits");
  if (!(x > m.q_minus && x < m.q_plus))
    throw FlowError("x outside the open interval");
  const Bounds bounds = enlarged_interval(m);
  const double h = cfg.dt;
  double t = 0.0;
  double prev = x;
  // The repelling origin guarantees a finite exit; cap generously anyway.
  const double t_max = 1e4 / m.lambda;
  while (t < t_max) {
    const double next = rk4_step(m.b, prev, h, 1.0);
    if (next <= m.q_minus || next >= m.q_plus) {
      // Bisect the step length to land on the boundary within tol.
      const int side = next >= m.q_plus ? +1 : -1;
      const double target = side > 0 ? m.q_plus : m.q_minus;
      double lo = 0.0, hi = h;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double xm = rk4_step(m.b, prev, mid, 1.0);
        if ((side > 0 ? xm < target : xm > target))
          lo = mid;
        else
          hi = mid;
        if (hi - lo < cfg.tol * h) break;
      }
      return {t + 0.5 * (lo + hi), side};
    }
    if (!(next >= bounds.lo && next <= bounds.hi))
      throw FlowError("flow blow-up before boundary crossing");
    prev = next;
    t += h;
  }
  throw FlowError("no deterministic exit before t_max");
}

double conjugation(const model::ModelSpec& m, double x,
                   const FlowSolverConfig& cfg) {
  if (x == 0.0) return 0.0;
  if (!(x >= m.q_minus && x <= m.q_plus))
    throw FlowError("conjugation requested outside [q_minus, q_plus]");
  const Bounds bounds = enlarged_interval(m);
  const double t_max = 50.0 / m.lambda;
  double t = 2.0 / m.lambda;
  double state = advance(m, x, t, -1.0, cfg, bounds);
  double value = std::exp(m.lambda * t) * state;
  while (t < t_max) {
    state = advance(m, state, t, -1.0, cfg, bounds);  // continue to 2t
    t *= 2.0;
    const double next = std::exp(m.lambda * t) * state;
    if (std::fabs(next - value) < cfg.tol) return next;
    value = next;
  }
  throw FlowError("conjugation limit did not converge before t_max");
}

double ConjugationTable::f(double x) const {
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t i = it == grid.begin() ? 0 : (it - grid.begin() - 1);
  if (i >= grid.size() - 1) i = grid.size() - 2;
  const double h = grid[i + 1] - grid[i];
  const double s = (x - grid[i]) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  return h00 * f_values[i] + h10 * h * slopes[i] + h01 * f_values[i + 1] +
         h11 * h * slopes[i + 1];
}

double ConjugationTable::g(double y) const {
  if (!(y >= f_qminus && y <= f_qplus))
    throw FlowError("g requested outside [f(q_minus), f(q_plus)]");
  const auto it = std::upper_bound(f_values.begin(), f_values.end(), y);
  std::size_t i = it == f_values.begin() ? 0 : (it - f_values.begin() - 1);
  if (i >= grid.size() - 1) i = grid.size() - 2;
  double lo = grid[i], hi = grid[i + 1];
  for (int k = 0; k < 64; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

ConjugationTable build_conjugation_table(const model::ModelSpec& m, int n_grid,
                                         const FlowSolverConfig& cfg) {
  if (n_grid < 64) throw FlowError("conjugation table needs n_grid >= 64");
  ConjugationTable t;
  t.grid.resize(n_grid);
  t.f_values.resize(n_grid);
  for (int i = 0; i < n_grid; ++i) {
    const double x =
        m.q_minus + (m.q_plus - m.q_minus) * i / double(n_grid - 1);
    t.grid[i] = x;
    t.f_values[i] = conjugation(m, x, cfg);
  }
  for (int i = 0; i + 1 < n_grid; ++i) {
    if (!(t.f_values[i] < t.f_values[i + 1]))
      throw FlowError("conjugation table is not strictly increasing");
  }
  t.f_qminus = t.f_values.front();
  t.f_qplus = t.f_values.back();

  // Fritsch-Carlson slopes keep the interpolant monotone.
  const int n = n_grid;
  std::vector<double> d(n - 1);
  for (int i = 0; i < n - 1; ++i)
    d[i] = (t.f_values[i + 1] - t.f_values[i]) / (t.grid[i + 1] - t.grid[i]);
  t.slopes.resize(n);
  t.slopes[0] = d[0];
  t.slopes[n - 1] = d[n - 2];
  for (int i = 1; i < n - 1; ++i) {
    if (d[i - 1] * d[i] <= 0.0)
      t.slopes[i] = 0.0;
    else
      t.slopes[i] = 2.0 / (1.0 / d[i - 1] + 1.0 / d[i]);
  }
  for (int i = 0; i < n - 1; ++i) {
    const double a = t.slopes[i] / d[i];
    const double b = t.slopes[i + 1] / d[i];
    const double r = a * a + b * b;
    if (r > 9.0) {
      const double s = 3.0 / std::sqrt(r);
      t.slopes[i] = s * a * d[i];
      t.slopes[i + 1] = s * b * d[i];
    }
  }

  // Sanity at the fixed point: f(0) = 0 and unit derivative.
  if (std::fabs(t.f(0.0)) > 1e-6)
    throw FlowError("conjugation table violates f(0) = 0");
  const double h = 1e-4 * std::min(-m.q_minus, m.q_plus);
  const double secant = (t.f(h) - t.f(-h)) / (2.0 * h);
  if (std::fabs(secant - 1.0) > 1e-4)
    throw FlowError("conjugation table violates f'(0) = 1");
  return t;
}

double inverse_conjugation(const model::ModelSpec& m,
                           const ConjugationTable& table, double y,
                           const FlowSolverConfig& cfg) {
  if (!(y >= table.f_qminus && y <= table.f_qplus))
    throw FlowError("y outside [f(q_minus), f(q_plus)]");
  if (y == 0.0) return 0.0;
  const auto it =
      std::upper_bound(table.f_values.begin(), table.f_values.end(), y);
  std::size_t i = it == table.f_values.begin() ? 0 : (it - table.f_values.begin() - 1);
  if (i >= table.grid.size() - 1) i = table.grid.size() - 2;
  double lo = table.grid[i], hi = table.grid[i + 1];
  for (int k = 0; k < 40 && hi - lo > cfg.tol * 1e-3; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (conjugation(m, mid, cfg) < y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

model::Neighborhood choose_neighborhood(const model::ModelSpec& m,
                                        const ConjugationTable& table,
                                        std::optional<double> requested_R) {
  const double r_max = std::min(-table.f_qminus, table.f_qplus);
  double R;
  if (requested_R) {
    R = *requested_R;
    if (!(R > 0.0 && R < r_max))
      throw FlowError("requested R is outside the image of the interval");
  } else {
    R = 0.5 * r_max;
  }
  model::Neighborhood nb;
  nb.R = R;
  nb.v_minus = table.g(-R);
  nb.v_plus = table.g(R);
  if (!(nb.v_minus > m.q_minus && nb.v_plus < m.q_plus))
    throw FlowError("neighborhood is not strictly inside the interval");
  // sigma-tilde(y) = f'(g(y)) sigma(g(y)) must stay positive on [-R, R];
  // f' comes from the conjugation identity f'(x) b(x) = lambda f(x).
  for (int i = 0; i <= 512; ++i) {
    const double y = -R + 2.0 * R * i / 512.0;
    const double x = table.g(y);
    const double fp =
        std::fabs(x) < 1e-9 ? 1.0 : m.lambda * table.f(x) / m.b(x);
    if (!(fp * m.sigma(x) > 0.0))
      throw FlowError("sigma-tilde vanishes on [-R, R]");
  }
  return nb;
}

}  // namespace exitlab::flow
