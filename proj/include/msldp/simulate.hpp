#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <vector>

#include "msldp/control.hpp"
#include "msldp/model.hpp"
#include "msldp/path.hpp"

namespace msldp {

class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& what, long step = -1) : std::runtime_error(what), step_(step) {}
  /// Step at which the state became non-finite, -1 for configuration errors.
  long step() const { return step_; }

 private:
  long step_;
};

/// Per-trajectory generator: mt19937_64 seeded through seed_seq from (seed, stream), so a trajectory's
/// noise depends only on its index and never on scheduling.
std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t stream);

struct SimulationOptions {
  double eps = 0.1;
  double T = 1.0;
  double dt = 0.0;           // 0: largest T/M not exceeding delta^2/dt_divisor
  double dt_divisor = 10.0;  // >= 10; raise it when the fast drift is steep
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;  // trajectory index
  int record_every = 1;      // store every k-th state (the final state is always stored)
  std::vector<double> x0;    // empty: model x0
};

/// Called once per Euler step with the state at the start of the step, the wrapped fast variable
/// (user units) and the control used on the step.
using StepObserver = std::function<void(double t, double dt, const double* x, const double* y, const double* u)>;

/// Number of Euler steps and step size for the options (validates dt <= delta^2/10).
std::pair<long, double> time_grid(const MultiscaleModel& model, const SimulationOptions& options);

/// Euler-Maruyama for dX = [(eps/delta) b + c + sigma u] dt + sqrt(eps) sigma dW with X/delta as fast
/// variable. With a control the log-weight accumulates -(1/sqrt eps) u.dW - |u|^2 dt / (2 eps).
DiscretePath simulate(const MultiscaleModel& model, const SimulationOptions& options,
                      const FeedbackControl* control = nullptr, const StepObserver& observer = {});

/// Same, with caller-provided normal increments (steps * d of them, already scaled to N(0, dt)).
DiscretePath simulate_with_increments(const MultiscaleModel& model, const SimulationOptions& options,
                                      const std::vector<double>& dW, const FeedbackControl* control = nullptr);

struct OccupationOptions {
  double window = 0.0;  // Delta; 0 means sqrt(eps)
  int y_bins = 32;      // per dimension
  int z_bins = 33;      // per dimension
  double z_lo = -4.0;
  double z_hi = 4.0;
  double t_bin = 0.0;   // outer-time bin width; 0 means Delta
};

/// Binned sliding-window occupation measure
///   P(A x B x C) = int_C (1/Delta) int_t^{t+Delta} 1_A(u_s) 1_B(y_s) ds dt,
/// with y in unit-torus coordinates and contributions beyond T dropped.
struct OccupationMeasure {
  int dim = 1;
  double window = 0.0;
  double T = 0.0;
  int y_bins = 32, z_bins = 33, t_bins = 1;
  double t_bin = 0.0;
  double z_lo = -4.0, z_hi = 4.0;
  double clipped = 0.0;       // mass whose control fell outside [z_lo, z_hi] (counted in the edge bins)
  std::vector<double> mass;   // index (t * Z + z) * Y + y with Z = z_bins^d, Y = y_bins^d

  int z_cells() const;
  int y_cells() const;
  double total() const;
  /// Mass of Z x Y x [0, t] for t on a bin edge (partial bins are prorated).
  double mass_until(double t) const;
  /// Marginals normalized to probability vectors.
  std::vector<double> y_marginal() const;
  std::vector<double> z_marginal() const;
};

class OccupationAccumulator {
 public:
  OccupationAccumulator(int dim, double T, double eps, std::vector<double> period, const OccupationOptions& options);
  /// Adds the step [s, s + dt) with fast variable y (user units) and control u (null: zero).
  void add(double s, double dt, const double* y, const double* u);
  StepObserver observer();
  const OccupationMeasure& result() const { return measure_; }
  /// Merges another accumulator with the same layout (mass adds).
  void merge(const OccupationAccumulator& other);

 private:
  OccupationMeasure measure_;
  std::vector<double> period_;
};

/// From a fully recorded path (record_every = 1) and its per-step controls (steps * d; empty for zero).
OccupationMeasure occupation_measure(const MultiscaleModel& model, const DiscretePath& path,
                                     const std::vector<double>& controls, double eps,
                                     const OccupationOptions& options = {});

/// Wasserstein-1 distance on the unit circle between two histograms on the same equal-width bins.
double wasserstein1_circle(const std::vector<double>& p, const std::vector<double>& q);

/// CSV rows t, x_1..x_d, logweight (running value; the final value when not recorded).
void write_path_csv(std::ostream& os, const DiscretePath& path);

}  // namespace msldp
