#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msldp/homogenize.hpp"
#include "msldp/model.hpp"
#include "msldp/path.hpp"
#include "msldp/ratefn.hpp"

namespace msldp {

/// Piecewise-constant velocity on knots t_0 < ... < t_M, right-continuous.
struct VelocitySchedule {
  int dim = 1;
  std::vector<double> knots;
  std::vector<double> velocities;  // M * dim

  std::size_t intervals() const { return knots.empty() ? 0 : knots.size() - 1; }
  /// Interval containing t, clamped to the first/last interval outside [t_0, t_M].
  std::size_t interval(double t) const;
  std::span<const double> velocity(std::size_t k) const {
    return {velocities.data() + k * dim, static_cast<std::size_t>(dim)};
  }
};

/// Forward-difference velocities of a discrete path.
VelocitySchedule schedule_from_path(const DiscretePath& path);
VelocitySchedule constant_schedule(const std::vector<double>& velocity, double T);

/// Immutable control field u(t, x, y) with y in user units; safe to evaluate concurrently.
class ControlField {
 public:
  using Evaluator = std::function<void(double t, const double* x, const double* y, double* u)>;

  ControlField() = default;
  ControlField(Regime regime, int dim, std::vector<double> period, Evaluator eval,
               std::map<std::string, double> diagnostics = {});

  Regime regime() const { return regime_; }
  int dim() const { return dim_; }
  const std::vector<double>& period() const { return period_; }
  bool is_zero() const { return !eval_; }
  /// Construction diagnostics, e.g. the worst HJB residual of the stored Bellman solutions.
  const std::map<std::string, double>& diagnostics() const { return diagnostics_; }

  void operator()(double t, const double* x, const double* y, double* u) const;

 private:
  Regime regime_ = Regime::One;
  int dim_ = 1;
  std::vector<double> period_;
  Evaluator eval_;
  std::map<std::string, double> diagnostics_;
};

ControlField zero_control(int dim, std::vector<double> period = {});

/// u = sigma^T (I + dchi/dy)^T q^{-1}(x) (psi'_t - r(x)).
ControlField regime1_control(std::shared_ptr<const HomogenizedModel> hom, VelocitySchedule schedule);

struct Regime2ControlOptions {
  Regime2Options rate;
  /// x-lattice used when b, c or sigma depend on x; empty count means x0 +- 2 with 21 nodes.
  LatticeAxis lattice{0.0, 0.0, 0};
};

/// u = sigma (zeta_beta - W'_beta) from the Bellman solution at every (interval, x-lattice node),
/// linear in x between nodes and in y between grid points (d = 1).
ControlField regime2_control(const MultiscaleModel& model, const VelocitySchedule& schedule, double gamma,
                             const Regime2ControlOptions& options = {});

/// u(t, X) = field(t, X, X/delta mod L).
class FeedbackControl {
 public:
  FeedbackControl() = default;
  FeedbackControl(ControlField field, double eps, double delta);

  const ControlField& field() const { return field_; }
  double eps() const { return eps_; }
  double delta() const { return delta_; }
  bool is_zero() const { return field_.is_zero(); }
  int dim() const { return field_.dim(); }

  /// Fast variable y = X/delta wrapped into [0, L_k).
  void fast_variable(const double* x, double* y) const;
  void operator()(double t, const double* x, double* u) const;

 private:
  ControlField field_;
  double eps_ = 1.0;
  double delta_ = 1.0;
};

FeedbackControl bind_feedback(ControlField field, double eps, double delta);

struct ControlBounds {
  double sup_norm = 0.0;     // max |u| over the samples
  double lipschitz_y = 0.0;  // max |u(y') - u(y)| / |y' - y| over neighbouring y samples
};

/// Samples the field on nt x nx^d x ny^d points of [t0, t1] x box(x_lo, x_hi) x cell.
ControlBounds sample_bounds(const ControlField& field, double t0, double t1, const std::vector<double>& x_lo,
                            const std::vector<double>& x_hi, int nt = 5, int nx = 5, int ny = 64);

/// CSV rows t, x_1..x_d, y_1..y_d, u_1..u_d on the given times and x-points and an ny^d cell lattice.
void write_control_csv(std::ostream& os, const ControlField& field, const std::vector<double>& times,
                       const std::vector<std::vector<double>>& xs, int ny);

}  // namespace msldp
