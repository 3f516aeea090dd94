#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace msldp {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Uniform grid on the unit torus [0,1)^d, nodes j/n. Node index runs fastest in y_1.
struct TorusGrid {
  int d = 1;
  int n = 64;

  TorusGrid() = default;
  TorusGrid(int dim, int points);

  int size() const { return d == 1 ? n : n * n; }
  double h() const { return 1.0 / n; }
  double weight() const { return d == 1 ? 1.0 / n : 1.0 / (double(n) * n); }
  std::array<int, 2> multi_index(int idx) const { return {idx % n, d == 1 ? 0 : idx / n}; }
  int index(int i0, int i1 = 0) const;
  /// Node coordinate on the unit torus.
  double node(int idx, int k) const { return multi_index(idx)[k] * h(); }
};

/// Rectangle rule h^d sum f_j.
double quadrature(const TorusGrid& grid, const Eigen::VectorXd& f);

/// Coefficients of  sum_k drift_k d_k + sum_ij diffusion_ij d_i d_j + potential  on the unit torus,
/// one value per node. diffusion holds d*d entries (row-major) and must be symmetric.
struct OperatorCoefficients {
  std::vector<Eigen::VectorXd> drift;
  std::vector<Eigen::VectorXd> diffusion;
  Eigen::VectorXd potential;  // empty means zero
};

/// Central finite differences of even order (2, 4, 6 or 8) with periodic wrap.
/// Without a potential the row sums are exactly zero.
SparseMatrix assemble_operator(const TorusGrid& grid, const OperatorCoefficients& coeffs, int order = 2);

/// Central difference d f / d y_k on the unit torus.
Eigen::VectorXd derivative(const TorusGrid& grid, const Eigen::VectorXd& f, int k, int order = 2);

struct StationaryResult {
  Eigen::VectorXd density;  // quadrature(density) = 1
  double residual = 0.0;    // ||L^T m||_inf / ||m||_inf
  int iterations = 0;
};

/// Null vector of L^T for an elliptic generator L, via shifted inverse iteration.
StationaryResult stationary_density(const TorusGrid& grid, const SparseMatrix& generator, int max_iterations = 20);

struct EigenResult {
  double eigenvalue = 0.0;
  Eigen::VectorXd vector;  // positive, max entry 1
  double residual = 0.0;   // ||A v - lambda v||_inf
  int iterations = 0;
};

/// Eigenvalue of maximal real part and its positive eigenvector for an irreducible matrix with
/// nonnegative off-diagonal entries (Noda iteration).
EigenResult principal_eigenpair(const SparseMatrix& a, double tol = 1e-13, int max_iterations = 100);

struct LogEigenResult {
  double eigenvalue = 0.0;
  Eigen::VectorXd log_vector;  // log of the positive eigenvector, max entry 0
  double residual = 0.0;       // max_j | sum_k a_jk exp(u_k - u_j) - lambda |
  int iterations = 0;
};

/// Same eigenpair as principal_eigenpair, computed by damped Newton on the log-coordinates
/// u = log v. Eigenvectors whose entries span more than the double-precision range (strongly
/// localized Cole-Hopf transforms) stay representable. `start` is an optional initial u.
LogEigenResult principal_log_eigenpair(const SparseMatrix& a, const Eigen::VectorXd* start = nullptr,
                                       int max_iterations = 200);

/// Solves L chi = rhs subject to quadrature(chi * m) = 0 through the bordered system
/// [L 1; w m^T 0] [chi; lambda] = [rhs; 0].
Eigen::VectorXd solve_bordered(const TorusGrid& grid, const SparseMatrix& generator, const Eigen::VectorXd& m,
                               const Eigen::VectorXd& rhs, double* multiplier = nullptr);

/// Periodic linear (d = 1) or bilinear (d = 2) interpolation at a point of the unit torus.
double interpolate(const TorusGrid& grid, const Eigen::VectorXd& f, const double* y);

/// Stencil weights for offsets 1..p (first derivative, antisymmetric) and 0..p (second derivative).
std::vector<double> first_derivative_weights(int order);
std::vector<double> second_derivative_weights(int order);

}  // namespace msldp
