#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "exitlab/flow.hpp"
#include "exitlab/model.hpp"

namespace exitlab::theory {

class TheoryError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Closed-form ingredients of the exit-time tail constant.
struct TheoremConstants {
  double lambda_ = 0.0;
  double sigma0 = 0.0;
  double f_qminus = 0.0;
  double f_qplus = 0.0;
  double C_minus = 0.0;  // (1/lambda) log|f(q-)|
  double C_plus = 0.0;   // (1/lambda) log|f(q+)|
};

TheoremConstants make_constants(const model::ModelSpec& m,
                                const flow::ConjugationTable& table);

// Lambda(x) = sqrt(lambda/pi) e^{-lambda (x/sigma0)^2} / sigma0
//             * (|f(q+)| + |f(q-)|),
// the constant in P(tau_I > (alpha/lambda) log(1/eps)) ~ Lambda eps^{alpha-1}.
double lambda_constant(const TheoremConstants& c, double x);

// Limiting conditional exit split (p_minus, p_plus) = |f(q-+)| / sum.
std::pair<double, double> exit_split(const TheoremConstants& c);

// T_eps = (1/lambda)(log(R/eps) - log a(eps)) with a(eps) = c_a eps^theta.
double deterministic_T(double eps, double R, double theta, double lambda_,
                       double c_a = 1.0);

// The block schedule used to extend the density proposition to long
// horizons; exposed read-only for inspection, no estimator consumes it.
struct RecursionSchedule {
  double theta = 0.0;
  int N = 1;
  double alpha_eps = 0.0;      // lambda T' / log(1/eps)
  double T_prime = 0.0;
  std::vector<double> T_k;     // k T', k = 0..N
  std::vector<double> H_variances;  // per k = 0..N
};

RecursionSchedule recursion_schedule(double eps, double theta, double lambda_,
                                     double sigma0);

// Exact 1-D exit-side probability p_plus via the scale function,
//   s'(y) = exp(-(2/eps^2) int_0^y b/sigma^2),
// by nested adaptive Simpson quadrature.
double scale_function_split(const model::ModelSpec& m, double eps, double x0);

}  // namespace exitlab::theory
