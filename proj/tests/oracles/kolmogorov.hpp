#pragma once

// Laplace functional E exp(-F(X_T)/eps) of a 1-D diffusion dX = c(X) dt + sqrt(eps) sigma dW with constant
// sigma, from the backward Kolmogorov equation u_t + c u' + (eps sigma^2 / 2) u'' = 0, u(T) = exp(-F/eps).
// Crank-Nicolson on a truncated interval with frozen end values, after a few damping backward-Euler steps.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline double kolmogorov_laplace(const std::function<double(double)>& c, const std::function<double(double)>& F,
                                 double sigma, double eps, double x0, double T, double lo, double hi,
                                 int nx = 7001, int nt = 4000) {
  const double h = (hi - lo) / (nx - 1);
  const double diff = 0.5 * eps * sigma * sigma;
  std::vector<double> x(nx), sub(nx, 0.0), diag(nx, 0.0), sup(nx, 0.0), u(nx);
  for (int i = 0; i < nx; ++i) {
    x[i] = lo + i * h;
    u[i] = std::exp(-F(x[i]) / eps);
    if (i == 0 || i == nx - 1) continue;
    sub[i] = diff / (h * h) - c(x[i]) / (2 * h);
    diag[i] = -2 * diff / (h * h);
    sup[i] = diff / (h * h) + c(x[i]) / (2 * h);
  }
  // (I - theta dt A) u_new = (I + (1 - theta) dt A) u, solved by the Thomas algorithm
  auto step = [&](double dt, double theta) {
    std::vector<double> rhs(nx), a(nx), b(nx), cc(nx);
    for (int i = 0; i < nx; ++i) {
      double Au = diag[i] * u[i];
      if (i > 0) Au += sub[i] * u[i - 1];
      if (i < nx - 1) Au += sup[i] * u[i + 1];
      rhs[i] = u[i] + (1 - theta) * dt * Au;
      a[i] = -theta * dt * sub[i];
      b[i] = 1 - theta * dt * diag[i];
      cc[i] = -theta * dt * sup[i];
    }
    for (int i = 1; i < nx; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * cc[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    u[nx - 1] = rhs[nx - 1] / b[nx - 1];
    for (int i = nx - 2; i >= 0; --i) u[i] = (rhs[i] - cc[i] * u[i + 1]) / b[i];
  };
  const double dt = T / nt;
  for (int k = 0; k < 4; ++k) step(dt / 4, 1.0);
  for (int k = 1; k < nt; ++k) step(dt, 0.5);
  const int i = static_cast<int>((x0 - lo) / h);
  const double t = (x0 - x[i]) / h;
  return (1 - t) * u[i] + t * u[i + 1];
}

}  // namespace oracle
