#include "msldp/torus.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SparseLU>

namespace msldp {

TorusGrid::TorusGrid(int dim, int points) : d(dim), n(points) {
  if (d != 1 && d != 2) throw std::invalid_argument("torus grids support d = 1 or 2, got " + std::to_string(d));
  if (n < 4 || (n & (n - 1)) != 0) {
    throw std::invalid_argument("torus grid size must be a power of two >= 4, got " + std::to_string(n));
  }
}

int TorusGrid::index(int i0, int i1) const {
  i0 = ((i0 % n) + n) % n;
  i1 = ((i1 % n) + n) % n;
  return d == 1 ? i0 : i0 + n * i1;
}

double quadrature(const TorusGrid& grid, const Eigen::VectorXd& f) { return f.sum() * grid.weight(); }

std::vector<double> first_derivative_weights(int order) {
  switch (order) {
    case 2: return {0.5};
    case 4: return {2.0 / 3.0, -1.0 / 12.0};
    case 6: return {3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
    case 8: return {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
    default: throw std::invalid_argument("stencil order must be 2, 4, 6 or 8");
  }
}

std::vector<double> second_derivative_weights(int order) {
  switch (order) {
    case 2: return {-2.0, 1.0};
    case 4: return {-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0};
    case 6: return {-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0};
    case 8: return {-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};
    default: throw std::invalid_argument("stencil order must be 2, 4, 6 or 8");
  }
}

SparseMatrix assemble_operator(const TorusGrid& grid, const OperatorCoefficients& coeffs, int order) {
  const int d = grid.d;
  const int n = grid.n;
  const int N = grid.size();
  const double h = grid.h();
  const auto w1 = first_derivative_weights(order);
  const auto w2 = second_derivative_weights(order);
  const int p = static_cast<int>(w1.size());
  if (n < 2 * p + 1) throw std::invalid_argument("grid too small for the requested stencil order");
  if (static_cast<int>(coeffs.drift.size()) != d || static_cast<int>(coeffs.diffusion.size()) != d * d) {
    throw std::invalid_argument("operator coefficients do not match the grid dimension");
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(N) * (d == 1 ? 2 * p + 1 : (2 * p + 1) * (2 * p + 1)));
  std::vector<double> row_offdiag(N, 0.0);
  auto add = [&](int row, int col, double v) {
    if (v == 0.0) return;
    if (row == col) {
      // offsets that wrap onto the node itself only occur for degenerate grids
      throw std::invalid_argument("grid too small for the requested stencil order");
    }
    triplets.emplace_back(row, col, v);
    row_offdiag[row] += v;
  };
  for (int idx = 0; idx < N; ++idx) {
    const auto mi = grid.multi_index(idx);
    for (int k = 0; k < d; ++k) {
      const double a = coeffs.drift[k][idx];
      const double D = coeffs.diffusion[k * d + k][idx];
      for (int s = 1; s <= p; ++s) {
        std::array<int, 2> plus = mi, minus = mi;
        plus[k] += s;
        minus[k] -= s;
        const double first = a * w1[s - 1] / h;
        const double second = D * w2[s] / (h * h);
        add(idx, grid.index(plus[0], plus[1]), second + first);
        add(idx, grid.index(minus[0], minus[1]), second - first);
      }
    }
    if (d == 2) {
      // symmetric mixed term: (D_01 + D_10) d_0 d_1
      const double m = coeffs.diffusion[1][idx] + coeffs.diffusion[2][idx];
      if (m != 0.0) {
        for (int s = -p; s <= p; ++s) {
          if (s == 0) continue;
          const double ws = (s > 0 ? 1.0 : -1.0) * w1[std::abs(s) - 1];
          for (int t = -p; t <= p; ++t) {
            if (t == 0) continue;
            const double wt = (t > 0 ? 1.0 : -1.0) * w1[std::abs(t) - 1];
            add(idx, grid.index(mi[0] + s, mi[1] + t), m * ws * wt / (h * h));
          }
        }
      }
    }
  }
  for (int idx = 0; idx < N; ++idx) {
    double diag = -row_offdiag[idx];
    if (coeffs.potential.size() == N) diag += coeffs.potential[idx];
    triplets.emplace_back(idx, idx, diag);
  }
  SparseMatrix op(N, N);
  op.setFromTriplets(triplets.begin(), triplets.end());
  op.makeCompressed();
  return op;
}

Eigen::VectorXd derivative(const TorusGrid& grid, const Eigen::VectorXd& f, int k, int order) {
  const auto w1 = first_derivative_weights(order);
  const int p = static_cast<int>(w1.size());
  const int N = grid.size();
  Eigen::VectorXd out(N);
  for (int idx = 0; idx < N; ++idx) {
    const auto mi = grid.multi_index(idx);
    double acc = 0.0;
    for (int s = 1; s <= p; ++s) {
      std::array<int, 2> plus = mi, minus = mi;
      plus[k] += s;
      minus[k] -= s;
      acc += w1[s - 1] * (f[grid.index(plus[0], plus[1])] - f[grid.index(minus[0], minus[1])]);
    }
    out[idx] = acc / grid.h();
  }
  return out;
}

StationaryResult stationary_density(const TorusGrid& grid, const SparseMatrix& generator, int max_iterations) {
  const int N = grid.size();
  SparseMatrix lt = generator.transpose();
  double scale = 0.0;
  for (int k = 0; k < lt.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(lt, k); it; ++it) scale = std::max(scale, std::fabs(it.value()));
  }
  if (scale == 0.0) {
    StationaryResult r;
    r.density = Eigen::VectorXd::Ones(N);
    return r;
  }
  // shift just off the zero eigenvalue; the remaining spectrum has strictly negative real part
  const double tau = 1e-10 * scale;
  SparseMatrix shifted = lt;
  for (int i = 0; i < N; ++i) shifted.coeffRef(i, i) -= tau;
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(shifted);
  if (lu.info() != Eigen::Success) throw NumericalError("stationary density: factorization failed");

  Eigen::VectorXd m = Eigen::VectorXd::Ones(N);
  StationaryResult result;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd next = lu.solve(m);
    if (lu.info() != Eigen::Success || !next.allFinite()) throw NumericalError("stationary density: solve failed");
    next /= quadrature(grid, next);
    const double change = (next - m).lpNorm<Eigen::Infinity>() / next.lpNorm<Eigen::Infinity>();
    m = next;
    result.iterations = it;
    const double res = (lt * m).lpNorm<Eigen::Infinity>() / m.lpNorm<Eigen::Infinity>();
    result.residual = res;
    if (change < 1e-14 || (it > 2 && change >= previous)) break;
    previous = change;
  }
  if (m.minCoeff() <= 0.0) {
    throw NumericalError("stationary density: negative mass detected (min " + std::to_string(m.minCoeff()) +
                         "); grid too coarse for this drift");
  }
  if (!(result.residual <= 1e-10 * scale)) {
    throw NumericalError("stationary density: inverse iteration did not converge (residual " +
                         std::to_string(result.residual) + ")");
  }
  result.density = m;
  return result;
}

EigenResult principal_eigenpair(const SparseMatrix& a, double tol, int max_iterations) {
  const int N = static_cast<int>(a.rows());
  double scale = 0.0;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      if (it.row() != it.col() && it.value() < 0.0) {
        throw NumericalError(
            "principal eigenpair: negative off-diagonal entry; the dominant eigenvalue may be complex "
            "(discretization too coarse)");
      }
      scale = std::max(scale, std::fabs(it.value()));
    }
  }
  Eigen::VectorXd x = Eigen::VectorXd::Ones(N);
  auto bounds = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd ratio = (a * v).cwiseQuotient(v);
    return std::pair<double, double>(ratio.minCoeff(), ratio.maxCoeff());
  };
  auto [lower, upper] = bounds(x);
  EigenResult result;
  Eigen::SparseLU<SparseMatrix> lu;
  SparseMatrix identity(N, N);
  identity.setIdentity();
  lu.analyzePattern(a);
  double gap = upper - lower;
  int stalled = 0;
  for (int it = 1; it <= max_iterations && gap > tol * (1.0 + std::fabs(upper)); ++it) {
    // shift strictly above the Perron root so that (shift I - A) is a nonsingular M-matrix
    const double shift = upper + 1e-12 * (1.0 + std::fabs(upper));
    SparseMatrix m = shift * identity - a;
    lu.factorize(m);
    if (lu.info() != Eigen::Success) throw NumericalError("principal eigenpair: factorization failed");
    Eigen::VectorXd y = lu.solve(x);
    if (!y.allFinite() || y.minCoeff() <= 0.0) break;  // shift hit the rounding floor of the Perron root
    x = y / y.maxCoeff();
    auto [lo, hi] = bounds(x);
    lower = std::max(lower, lo);
    upper = std::min(upper, hi);
    result.iterations = it;
    // the Collatz-Wielandt gap bottoms out at rounding level for stiff operators; early iterations
    // can also contract slowly, so stagnation only counts once the gap is near that level
    const double next_gap = upper - lower;
    stalled = next_gap > 0.5 * gap && next_gap <= 1e-8 * scale ? stalled + 1 : 0;
    gap = next_gap;
    if (stalled >= 2) break;
  }
  if (x.minCoeff() <= 0.0) throw NumericalError("principal eigenpair: eigenvector lost positivity");
  if (upper - lower > 1e-8 * (scale + std::fabs(upper))) {
    throw NumericalError("principal eigenpair: Noda iteration did not converge (bound gap " +
                         std::to_string(upper - lower) + ")");
  }
  result.eigenvalue = 0.5 * (lower + upper);
  result.vector = x;
  result.residual = (a * x - result.eigenvalue * x).lpNorm<Eigen::Infinity>();
  return result;
}

LogEigenResult principal_log_eigenpair(const SparseMatrix& a, const Eigen::VectorXd* start, int max_iterations) {
  const int N = static_cast<int>(a.rows());
  double scale = 0.0;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      if (it.row() != it.col() && it.value() < 0.0) {
        throw NumericalError("principal eigenpair: negative off-diagonal entry (discretization too coarse)");
      }
      scale = std::max(scale, std::fabs(it.value()));
    }
  }
  Eigen::VectorXd u = start ? *start : Eigen::VectorXd::Zero(N);
  if (u.size() != N) throw std::invalid_argument("principal_log_eigenpair: start vector has the wrong size");

  // ratios r_j(u) = sum_k a_jk exp(u_k - u_j); the equations are r_j(u) = lambda
  const SparseMatrix at = a.transpose();  // column-major transpose iterates rows of a
  auto ratios = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r, std::vector<Eigen::Triplet<double>>* jac) {
    r.setZero(N);
    for (int j = 0; j < N; ++j) {
      for (SparseMatrix::InnerIterator it(at, j); it; ++it) {
        const int k = static_cast<int>(it.row());
        if (k == j) {
          r[j] += it.value();
          continue;
        }
        const double e = it.value() * std::exp(v[k] - v[j]);
        r[j] += e;
        if (jac) {
          jac->emplace_back(j, k, e);
          jac->emplace_back(j, j, -e);
        }
      }
    }
    return r.allFinite();
  };

  Eigen::VectorXd r(N);
  if (!ratios(u, r, nullptr)) throw NumericalError("principal eigenpair: start vector overflows");
  double lambda = r.mean();
  auto merit = [&](const Eigen::VectorXd& rr, double lam) { return (rr.array() - lam).square().sum(); };
  double f = merit(r, lambda);
  LogEigenResult result;
  Eigen::SparseLU<SparseMatrix> lu;
  const double floor = 2.0 * std::numeric_limits<double>::epsilon() * scale;
  for (int it = 1; it <= max_iterations; ++it) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(3 * static_cast<std::size_t>(a.nonZeros()) + 2 * N);
    ratios(u, r, &trip);
    if ((r.array() - lambda).abs().maxCoeff() <= floor) break;
    for (int j = 0; j < N; ++j) trip.emplace_back(j, N, -1.0);
    trip.emplace_back(N, 0, 1.0);  // u_0 held fixed
    SparseMatrix J(N + 1, N + 1);
    J.setFromTriplets(trip.begin(), trip.end());
    J.makeCompressed();
    if (it == 1) lu.analyzePattern(J);
    lu.factorize(J);
    if (lu.info() != Eigen::Success) throw NumericalError("principal eigenpair: Newton system is singular");
    Eigen::VectorXd rhs(N + 1);
    rhs.head(N) = -(r.array() - lambda).matrix();
    rhs[N] = 0.0;
    const Eigen::VectorXd step = lu.solve(rhs);
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial_u(N), trial_r(N);
    // near the rounding floor a rejected full step means no further progress is possible
    const int max_halvings = (r.array() - lambda).abs().maxCoeff() <= 1e4 * floor ? 1 : 60;
    for (int ls = 0; ls < max_halvings; ++ls, t *= 0.5) {
      trial_u = u + t * step.head(N);
      const double trial_lambda = lambda + t * step[N];
      if (!ratios(trial_u, trial_r, nullptr)) continue;
      const double fn = merit(trial_r, trial_lambda);
      if (fn <= (1.0 - 1e-4 * t) * f) {
        u = trial_u;
        lambda = trial_lambda;
        f = fn;
        accepted = true;
        break;
      }
    }
    result.iterations = it;
    if (!accepted) break;  // rounding floor reached
  }
  ratios(u, r, nullptr);
  result.eigenvalue = lambda;
  result.residual = (r.array() - lambda).abs().maxCoeff();
  result.log_vector = u.array() - u.maxCoeff();
  if (!(result.residual <= 1e-9 * (scale + std::fabs(lambda)))) {
    throw NumericalError("principal eigenpair: log-space Newton did not converge (residual " +
                         std::to_string(result.residual) + ")");
  }
  return result;
}

Eigen::VectorXd solve_bordered(const TorusGrid& grid, const SparseMatrix& generator, const Eigen::VectorXd& m,
                               const Eigen::VectorXd& rhs, double* multiplier) {
  const int N = grid.size();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(generator.nonZeros() + 2 * N);
  for (int k = 0; k < generator.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(generator, k); it; ++it) triplets.emplace_back(it.row(), it.col(), it.value());
  }
  const double w = grid.weight();
  for (int i = 0; i < N; ++i) {
    triplets.emplace_back(i, N, 1.0);
    triplets.emplace_back(N, i, w * m[i]);
  }
  SparseMatrix big(N + 1, N + 1);
  big.setFromTriplets(triplets.begin(), triplets.end());
  big.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(big);
  if (lu.info() != Eigen::Success) throw NumericalError("bordered system is singular (centering failure?)");
  Eigen::VectorXd b(N + 1);
  b.head(N) = rhs;
  b[N] = 0.0;
  Eigen::VectorXd sol = lu.solve(b);
  if (lu.info() != Eigen::Success || !sol.allFinite()) throw NumericalError("bordered solve failed");
  if (multiplier) *multiplier = sol[N];
  return sol.head(N);
}

double interpolate(const TorusGrid& grid, const Eigen::VectorXd& f, const double* y) {
  const int n = grid.n;
  auto split = [n](double v, int& i, double& frac) {
    double s = (v - std::floor(v)) * n;
    i = static_cast<int>(s);
    if (i >= n) i = n - 1;
    frac = s - i;
  };
  int i0 = 0;
  double t0 = 0.0;
  split(y[0], i0, t0);
  if (grid.d == 1) return (1.0 - t0) * f[i0] + t0 * f[(i0 + 1) % n];
  int i1 = 0;
  double t1 = 0.0;
  split(y[1], i1, t1);
  const double f00 = f[grid.index(i0, i1)];
  const double f10 = f[grid.index(i0 + 1, i1)];
  const double f01 = f[grid.index(i0, i1 + 1)];
  const double f11 = f[grid.index(i0 + 1, i1 + 1)];
  return (1 - t0) * (1 - t1) * f00 + t0 * (1 - t1) * f10 + (1 - t0) * t1 * f01 + t0 * t1 * f11;
}

}  // namespace msldp
