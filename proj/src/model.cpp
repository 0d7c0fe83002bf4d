#include "exitlab/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace exitlab::model {
namespace {

constexpr int kGridPoints = 10000;
constexpr double kLambdaStep = 1e-5;

// Bisection refinement of a sign change of b on [lo, hi].
double refine_zero(const expr::ScalarFunction& b, double lo, double hi) {
  double flo = b(lo);
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = b(mid);
    if ((flo < 0) == (fm < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

RawModel raw_model_from_json_text(const std::string& text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    RawModel raw;
    raw.b = j.at("b").get<std::string>();
    raw.sigma = j.at("sigma").get<std::string>();
    raw.q_minus = j.at("q_minus").get<double>();
    raw.q_plus = j.at("q_plus").get<double>();
    if (j.contains("lambda")) raw.lambda = j["lambda"].get<double>();
    if (j.contains("R")) raw.R = j["R"].get<double>();
    return raw;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("model config: ") + e.what());
  }
}

RawModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot read model file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return raw_model_from_json_text(buf.str());
}

ModelSpec validate_model(const RawModel& raw) {
  std::vector<std::string> violations;

  ModelSpec spec;
  try {
    spec.b = expr::ScalarFunction::parse(raw.b);
  } catch (const expr::ParseError& e) {
    throw ModelError(std::string("drift b: ") + e.what());
  }
  try {
    spec.sigma = expr::ScalarFunction::parse(raw.sigma);
  } catch (const expr::ParseError& e) {
    throw ModelError(std::string("diffusion sigma: ") + e.what());
  }
  spec.q_minus = raw.q_minus;
  spec.q_plus = raw.q_plus;
  spec.requested_R = raw.R;

  if (!(raw.q_minus < 0.0 && 0.0 < raw.q_plus))
    violations.push_back("interval must satisfy q_minus < 0 < q_plus");

  const double b0 = spec.b(0.0);
  if (!(std::fabs(b0) <= 1e-10))
    violations.push_back("b(0) != 0 (got " + std::to_string(b0) + ")");

  const double lambda_est =
      (spec.b(kLambdaStep) - spec.b(-kLambdaStep)) / (2.0 * kLambdaStep);
  if (raw.lambda) {
    spec.lambda = *raw.lambda;
    const double rel =
        std::fabs(spec.lambda - lambda_est) / std::max(std::fabs(spec.lambda), 1e-300);
    if (rel > 1e-6)
      violations.push_back(
          "supplied lambda disagrees with central-difference b'(0): " +
          std::to_string(spec.lambda) + " vs " + std::to_string(lambda_est));
  } else {
    spec.lambda = lambda_est;
  }
  if (!(spec.lambda > 0.0)) violations.push_back("lambda must be positive");

  spec.sigma0 = spec.sigma(0.0);
  if (!(spec.sigma0 > 0.0)) violations.push_back("sigma(0) must be positive");

  // Zeros of b other than the origin: scan a uniform grid for sign changes
  // and roots, refine by bisection, reject anything away from 0.
  if (violations.empty()) {
    const double width = spec.q_plus - spec.q_minus;
    const double origin_slack = 1e-7 * width;
    double prev_x = spec.q_minus;
    double prev_b = spec.b(prev_x);
    double eta_max = 0.0;
    for (int i = 1; i <= kGridPoints; ++i) {
      const double x = spec.q_minus + width * i / kGridPoints;
      const double bx = spec.b(x);
      if (!std::isfinite(bx)) {
        violations.push_back("b is non-finite at x=" + std::to_string(x));
        break;
      }
      const bool spans_origin = prev_x <= 0.0 && x >= 0.0;
      if (!spans_origin && ((prev_b < 0) != (bx < 0) || bx == 0.0)) {
        const double root = bx == 0.0 ? x : refine_zero(spec.b, prev_x, x);
        if (std::fabs(root) > origin_slack) {
          violations.push_back("b has a second zero near x=" +
                               std::to_string(root));
          break;
        }
      }
      if (std::fabs(x) > origin_slack) {
        const double eta = std::fabs((bx - spec.lambda * x) / (x * x));
        if (std::isfinite(eta)) eta_max = std::max(eta_max, eta);
      }
      prev_x = x;
      prev_b = bx;
    }
    spec.eta_bound = eta_max;
  }

  if (!violations.empty()) {
    std::string msg = "invalid model:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw ModelError(msg);
  }
  return spec;
}

}  // namespace exitlab::model
