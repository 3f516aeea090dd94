#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "msldp/homogenize.hpp"
#include "msldp/model.hpp"
#include "msldp/path.hpp"
#include "msldp/torus.hpp"

namespace msldp {

/// The attaining control. Regime 1 stores the gain q^{-1}(beta - r), so that
/// u(y) = sigma^T (I + dchi)^T gain; Regimes 2 and 3 store the control on a torus grid.
struct ControlDescriptor {
  Eigen::VectorXd gain;
  TorusGrid grid;
  Eigen::VectorXd values;
};

struct LocalRateResult {
  Regime regime = Regime::One;
  std::vector<double> x;
  std::vector<double> beta;
  double value = 0.0;
  std::optional<double> dual;  // zeta (Regime 2) or theta (Regime 3)
  ControlDescriptor control;

  // Regime 2 diagnostics
  double duality_residual = 0.0;  // |value - (zeta beta - H(zeta))| at the refined maximizer
  double primal_value = 0.0;      // (1/2) int u^2 dmu_u under the controlled invariant measure
  double primal_velocity = 0.0;   // int lambda_2 dmu_u, should reproduce beta
  double hjb_residual = 0.0;
};

LocalRateResult local_rate_r1(const Eigen::VectorXd& r, const Eigen::MatrixXd& q, const std::vector<double>& beta);
LocalRateResult local_rate_r1(const HomogenizedModel& hom, const std::vector<double>& x,
                              const std::vector<double>& beta);

struct Regime2Options {
  int n = 512;            // initial grid; doubled automatically until the twisted operator is Metzler
  int n_max = 1 << 15;
  double peclet_max = 0.2;  // refine until |drift| h / (2 diffusion) <= peclet_max at every node
  double zeta_max = 1e4;  // bracket search limit
  double fd_step = 1e-4;  // relative step for dH/dzeta
};

/// Solution of the ergodic Bellman equation at a fixed dual variable zeta (d = 1).
struct BellmanSolution {
  double zeta = 0.0;
  double gamma = 1.0;
  TorusGrid grid;
  Eigen::VectorXd log_psi;  // log of the positive periodic eigenfunction, max 0
  Eigen::VectorXd psi;      // exp(log_psi); entries can underflow when gamma is small
  Eigen::VectorXd Wbar;  // periodic value function -gamma log psi, Wbar(0) = 0
  double Ltilde = 0.0;   // -gamma * principal eigenvalue
  double H = 0.0;        // -Ltilde
  double eigen_residual = 0.0;
  double hjb_residual = 0.0;  // max_j | -gamma (A psi)_j / psi_j - Ltilde |
  Eigen::VectorXd control;    // u(y_j) = sigma (zeta + gamma psi'/psi), central differences
};

BellmanSolution dual_r2(const MultiscaleModel& model, const std::vector<double>& x, double zeta, double gamma,
                        const Regime2Options& options = {});

LocalRateResult local_rate_r2(const MultiscaleModel& model, const std::vector<double>& x, double beta, double gamma,
                              const Regime2Options& options = {});

/// beta_0 = int (gamma b + c) dmu_0, the velocity of the uncontrolled fast process (d = 1).
double zero_cost_velocity_r2(const MultiscaleModel& model, const std::vector<double>& x, double gamma,
                             const Regime2Options& options = {});

struct Regime3Options {
  int n = 4096;  // rectangle-rule nodes on the unit torus
};

LocalRateResult local_rate_r3(const MultiscaleModel& model, const std::vector<double>& x, double beta,
                              const Regime3Options& options = {});

/// L(x, beta) for any regime.
using RateEvaluator = std::function<double(const std::vector<double>& x, const std::vector<double>& beta)>;

/// The Regime-1 evaluator keeps a reference to `hom`; the others copy the model.
RateEvaluator rate_evaluator(const HomogenizedModel& hom);
RateEvaluator rate_evaluator_r2(const MultiscaleModel& model, double gamma, const Regime2Options& options = {});
RateEvaluator rate_evaluator_r3(const MultiscaleModel& model, const Regime3Options& options = {});

/// Composite midpoint rule for S = int L(phi, phi') dt with forward-difference velocities.
/// Returns +infinity if any interval evaluation fails.
double action(const DiscretePath& path, const RateEvaluator& rate);

}  // namespace msldp
