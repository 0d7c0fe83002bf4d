#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "exitlab/model.hpp"

namespace exitlab::flow {

class FlowError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FlowSolverConfig {
  double dt = 1e-3;   // base step of the fixed-step RK4 integrator
  double tol = 1e-9;  // convergence tolerance for limits and root finds
};

// S^t x0 for the deterministic flow dx/dt = b(x); t may be negative.
// Aborts if the trajectory escapes a bounded enlargement of the interval.
double integrate_flow(const model::ModelSpec& m, double x0, double t,
                      const FlowSolverConfig& cfg);

struct DeterministicExit {
  double T = 0.0;
  int side = 0;  // +1 exits at q_plus, -1 at q_minus
};

DeterministicExit deterministic_exit_time(const model::ModelSpec& m, double x,
                                          const FlowSolverConfig& cfg);

// The linearizing conjugation f(x) = lim_{t->inf} e^{lambda t} S^{-t} x,
// computed by doubling t until two successive values agree to cfg.tol.
double conjugation(const model::ModelSpec& m, double x,
                   const FlowSolverConfig& cfg);

// Tabulated conjugation over [q_minus, q_plus] with monotone cubic
// interpolation between nodes; g is the inverse by bisection.
struct ConjugationTable {
  std::vector<double> grid;      // strictly increasing x values
  std::vector<double> f_values;  // f(grid), strictly increasing
  std::vector<double> slopes;    // Hermite slopes (Fritsch-Carlson)
  double f_qminus = 0.0;
  double f_qplus = 0.0;

  double f(double x) const;
  double g(double y) const;
};

ConjugationTable build_conjugation_table(const model::ModelSpec& m, int n_grid,
                                         const FlowSolverConfig& cfg);

// g(y) computed against conjugation() directly: table bisection for the
// bracket, then bisection refinements on f itself.
double inverse_conjugation(const model::ModelSpec& m,
                           const ConjugationTable& table, double y,
                           const FlowSolverConfig& cfg);

// Picks R (default: half the smaller endpoint image) and maps [-R, R]
// back through g. Throws if the requested R is outside the image of the
// interval or if the linearized diffusion degenerates on [-R, R].
model::Neighborhood choose_neighborhood(const model::ModelSpec& m,
                                        const ConjugationTable& table,
                                        std::optional<double> requested_R);

}  // namespace exitlab::flow
