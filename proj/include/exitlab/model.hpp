#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "exitlab/expr.hpp"

namespace exitlab::model {

class ModelError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raw user input, straight from a config file or CLI flags.
struct RawModel {
  std::string b;
  std::string sigma;
  double q_minus = 0.0;
  double q_plus = 0.0;
  std::optional<double> lambda;
  std::optional<double> R;  // forwarded to choose_neighborhood
};

// A validated exit problem: drift b with a unique repelling zero at the
// origin of the interval, diffusion sigma positive at 0, and the
// linearization data lambda = b'(0), eta(x) = (b(x) - lambda x)/x^2.
struct ModelSpec {
  expr::ScalarFunction b;
  expr::ScalarFunction sigma;
  double q_minus = 0.0;
  double q_plus = 0.0;
  double lambda = 0.0;
  double eta_bound = 0.0;
  double sigma0 = 0.0;
  std::optional<double> requested_R;

  double eta(double x) const {
    return (b(x) - lambda * x) / (x * x);
  }
  bool linear_drift() const { return eta_bound < 1e-12; }
};

// The neighborhood V = g([-R, R]) in which the linearized dynamics is used.
struct Neighborhood {
  double R = 0.0;
  double v_minus = 0.0;
  double v_plus = 0.0;
};

RawModel load_model_file(const std::string& path);
RawModel raw_model_from_json_text(const std::string& text);

// Checks every ModelSpec invariant; throws ModelError listing all violations.
// lambda is taken from the user when present (and cross-checked against the
// central-difference estimate of b'(0)), otherwise filled from the estimate.
ModelSpec validate_model(const RawModel& raw);

}  // namespace exitlab::model
