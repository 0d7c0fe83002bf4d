#include "exitlab/theory.hpp"

#include <cmath>

#include "exitlab/stats.hpp"

namespace exitlab::theory {

TheoremConstants make_constants(const model::ModelSpec& m,
                                const flow::ConjugationTable& table) {
  TheoremConstants c;
  c.lambda_ = m.lambda;
  c.sigma0 = m.sigma0;
  c.f_qminus = table.f_qminus;
  c.f_qplus = table.f_qplus;
  c.C_minus = std::log(std::fabs(c.f_qminus)) / c.lambda_;
  c.C_plus = std::log(std::fabs(c.f_qplus)) / c.lambda_;
  return c;
}

double lambda_constant(const TheoremConstants& c, double x) {
  const double z = x / c.sigma0;
  return std::sqrt(c.lambda_ / M_PI) * std::exp(-c.lambda_ * z * z) /
         c.sigma0 * (std::fabs(c.f_qplus) + std::fabs(c.f_qminus));
}

std::pair<double, double> exit_split(const TheoremConstants& c) {
  const double total = std::fabs(c.f_qplus) + std::fabs(c.f_qminus);
  return {std::fabs(c.f_qminus) / total, std::fabs(c.f_qplus) / total};
}

double deterministic_T(double eps, double R, double theta, double lambda_,
                       double c_a) {
  const double a_eps = c_a * std::pow(eps, theta);
  return (std::log(R / eps) - std::log(a_eps)) / lambda_;
}

RecursionSchedule recursion_schedule(double eps, double theta, double lambda_,
                                     double sigma0) {
  RecursionSchedule s;
  s.theta = theta;
  s.N = theta >= 1.0 ? static_cast<int>(std::floor(theta)) + 1 : 1;
  const double log_inv_eps = std::log(1.0 / eps);
  s.alpha_eps = (1.0 + theta) / s.N;
  s.T_prime = s.alpha_eps * log_inv_eps / lambda_;
  const double q = std::pow(eps, 2.0 * s.alpha_eps);
  for (int k = 0; k <= s.N; ++k) {
    s.T_k.push_back(k * s.T_prime);
    const double var = sigma0 * sigma0 / (2.0 * lambda_) *
                       (1.0 - std::pow(eps, 2.0 * (s.N - k) * s.alpha_eps)) /
                       (1.0 - q);
    s.H_variances.push_back(var);
  }
  return s;
}

double scale_function_split(const model::ModelSpec& m, double eps, double x0) {
  if (!(x0 >= m.q_minus && x0 <= m.q_plus))
    throw TheoryError("x0 outside the interval");
  const double c = 2.0 / (eps * eps);
  const auto drift_over_var = [&](double u) {
    const double s = m.sigma(u);
    return m.b(u) / (s * s);
  };
  // B(y) = int_0^y b/sigma^2; s'(y) = exp(-c B(y)). B has its minimum at 0
  // (drift repels from the origin), so the exponent is always <= 0.
  const auto s_prime = [&](double y) {
    const double B = stats::adaptive_simpson(drift_over_var, 0.0, y, 1e-13);
    return std::exp(-c * B);
  };
  const double denom =
      stats::adaptive_simpson(s_prime, m.q_minus, m.q_plus, 1e-12);
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw TheoryError("scale-function quadrature did not converge");
  const double num = stats::adaptive_simpson(s_prime, m.q_minus, x0, 1e-12);
  return num / denom;
}

}  // namespace exitlab::theory
