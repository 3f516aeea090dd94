#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "msldp/model.hpp"
#include "msldp/torus.hpp"

namespace msldp {

struct HomogenizationOptions {
  int n = 0;      // grid points per y-direction; 0 picks 512 (d = 1) or 64 (d = 2)
  int order = 6;  // finite-difference order for the fast generator and for d chi / dy
  bool require_centering = true;
};

/// Fast-variable data at a frozen x.
struct CellSolution {
  TorusGrid grid;
  std::vector<double> x;
  Eigen::VectorXd mu;                 // invariant density w.r.t. the unit-torus measure
  std::vector<Eigen::VectorXd> chi;   // d components
  std::vector<Eigen::VectorXd> dchi;  // d*d, entry l*d+k is d chi_l / d y_k in user units
  Eigen::VectorXd r;
  Eigen::MatrixXd q;
  Eigen::MatrixXd drift_gain;  // integral of (I + dchi) mu; r = drift_gain * c when c does not depend on y

  double centering_residual = 0.0;
  double stationary_residual = 0.0;
  double cell_residual = 0.0;        // ||L chi + b||_inf of the discrete system
  double chi_mean_residual = 0.0;    // max_l |quadrature(chi_l mu)|
};

struct CenteringCheck {
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Discretized L^1_x: b . grad_y + (1/2) sigma sigma^T : grad_y grad_y on the unit torus.
SparseMatrix fast_generator(const MultiscaleModel& model, const std::vector<double>& x, const TorusGrid& grid,
                            int order);

CenteringCheck check_centering(const MultiscaleModel& model, const std::vector<double>& x,
                               const HomogenizationOptions& options = {});

/// Invariant measure, cell solution, derivative and effective coefficients at x.
CellSolution solve_cell_problem(const MultiscaleModel& model, const std::vector<double>& x,
                                const HomogenizationOptions& options = {});

struct SeparableResult {
  std::vector<double> Z;     // integral of exp(-Q_i / D)
  std::vector<double> Zhat;  // integral of exp(+Q_i / D)
  Eigen::VectorXd theta;     // diagonal of Theta
  Eigen::MatrixXd q;         // 2 D Theta
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> r;  // -Theta grad V; empty without V
};

/// Closed form for Langevin drift b = -grad Q with Q(y) = sum_i Q_i(y_i), sigma = sqrt(2D) I.
/// Q_i may use y or y_i as variable; V (optional) uses x or x_1..x_d.
SeparableResult separable_effective_diffusivity(const std::vector<expr::Expression>& Q, double D,
                                                const std::vector<double>& period = {},
                                                const expr::Expression* V = nullptr, int n = 2048);

struct LatticeAxis {
  double lo = 0.0;
  double hi = 0.0;
  int count = 1;
};

/// Homogenized coefficients over x. When b and sigma do not depend on x a single cell solve is shared
/// (and r is exact whenever c does not depend on y); otherwise cells are solved lazily on a tensor
/// x-lattice and r, q are linearly interpolated between lattice nodes.
class HomogenizedModel {
 public:
  HomogenizedModel(MultiscaleModel model, HomogenizationOptions options = {}, std::vector<LatticeAxis> lattice = {});

  const MultiscaleModel& model() const { return model_; }
  bool shared_cell() const { return shared_; }
  int dim() const { return model_.dim(); }

  /// r(x) and q(x); throws std::out_of_range outside the lattice hull.
  void effective(const double* x, double* r, double* q) const;
  Eigen::VectorXd r(const std::vector<double>& x) const;
  Eigen::MatrixXd q(const std::vector<double>& x) const;

  /// d chi / dy at (x, y) with y in user units (periodically wrapped), d*d row-major.
  void dchi(const double* x, const double* y, double* out) const;

  /// Cell solution at the lattice node nearest to x (or the shared cell).
  const CellSolution& cell(const std::vector<double>& x) const;

 private:
  const CellSolution& node(const std::vector<int>& index) const;
  void locate(const double* x, std::vector<int>& base, std::vector<double>& frac) const;

  MultiscaleModel model_;
  HomogenizationOptions options_;
  std::vector<LatticeAxis> lattice_;
  bool shared_ = false;
  bool exact_r_ = false;
  std::shared_ptr<const CellSolution> single_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<int>, std::shared_ptr<const CellSolution>> memo_;
};

}  // namespace msldp
