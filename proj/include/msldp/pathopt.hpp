#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "msldp/control.hpp"
#include "msldp/functional.hpp"
#include "msldp/path.hpp"
#include "msldp/ratefn.hpp"

namespace msldp {

class PathOptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimize S(phi) + h(phi) over knot states on a uniform grid of M intervals on [0, T], with phi(0) = x0
/// and either a fixed endpoint x1 or a free endpoint (then h usually carries a terminal cost).
struct PathProblem {
  double T = 1.0;
  int M = 32;
  std::vector<double> x0;
  std::optional<std::vector<double>> x1;
  const PathFunctional* h = nullptr;  // null: h = 0
};

struct PathOptOptions {
  int max_iterations = 20000;
  double gradient_tol = 1e-6;  // stop when |grad|_inf <= tol * (1 + |value|)
  double fd_step = 1e-5;       // relative: step = fd_step * (1 + |coordinate|)
  double armijo = 1e-4;
  int max_backtracks = 60;
  int threads = 1;             // knot-gradient workers
};

struct PathOptResult {
  DiscretePath path;
  VelocitySchedule schedule;
  double value = 0.0;   // S + h
  double action = 0.0;  // S alone
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // value after every accepted step, starting with the initial value
};

/// Discrete objective: sum_k dt L(midpoint, velocity) plus h on the knots. Infinite when any local
/// rate fails.
double path_objective(const PathProblem& problem, const RateEvaluator& rate, const DiscretePath& path);

/// Centered finite-difference gradient of the objective in the free knot coordinates (zero on fixed
/// knots), using only the intervals adjacent to each knot.
std::vector<double> path_gradient(const PathProblem& problem, const RateEvaluator& rate, const DiscretePath& path,
                                  double fd_step, int threads = 1);

/// Projected gradient descent with Barzilai-Borwein trial steps and Armijo backtracking. The returned
/// iterate is the best one found; `converged` is false when the iteration limit is hit.
PathOptResult minimize_action(const PathProblem& problem, const RateEvaluator& rate,
                              const PathOptOptions& options = {}, const DiscretePath* init = nullptr);

/// CSV rows t, x_1..x_d, v_1..v_d with v the velocity of the interval starting at t (empty on the last row).
void write_path_velocity_csv(std::ostream& os, const PathOptResult& result);

}  // namespace msldp
