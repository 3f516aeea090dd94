#include "msldp/ratefn.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/tools/roots.hpp>

namespace msldp {

namespace {

void require_1d(const MultiscaleModel& model, const char* what) {
  if (model.dim() != 1) throw std::invalid_argument(std::string(what) + " supports d = 1 only");
}

// b, c, sigma sampled on an n-node unit-torus grid (user y = L y_u).
struct Samples1D {
  TorusGrid grid;
  double L = 1.0;
  Eigen::VectorXd b, c, sigma;
};

Samples1D sample_1d(const MultiscaleModel& model, const std::vector<double>& x, int n) {
  Samples1D s;
  s.grid = TorusGrid(1, n);
  s.L = model.coefficients().period()[0];
  s.b.resize(n);
  s.c.resize(n);
  s.sigma.resize(n);
  const auto& f = model.coefficients();
  for (int j = 0; j < n; ++j) {
    const double y = s.L * s.grid.node(j, 0);
    f.b(x.data(), &y, &s.b[j]);
    f.c(x.data(), &y, &s.c[j]);
    f.sigma(x.data(), &y, &s.sigma[j]);
  }
  return s;
}

// Twisted Regime-2 operator
//   A psi = (gamma/2) sigma^2 psi'' + (sigma^2 zeta + gamma b + c) psi' + [sigma^2 zeta^2/(2 gamma) + (gamma b + c) zeta/gamma] psi
// whose principal eigenvalue Lambda gives H(zeta) = gamma Lambda.
class TwistedProblem {
 public:
  TwistedProblem(const MultiscaleModel& model, std::vector<double> x, double gamma, Regime2Options options)
      : model_(model), x_(std::move(x)), gamma_(gamma), options_(options) {
    if (!(gamma > 0.0)) throw std::invalid_argument("Regime 2 requires gamma > 0");
  }

  BellmanSolution solve(double zeta) {
    const Samples1D& s = samples_for(zeta);
    const int n = s.grid.n;
    const double L = s.L;
    OperatorCoefficients oc;
    Eigen::VectorXd s2 = s.sigma.cwiseAbs2();
    Eigen::VectorXd base = gamma_ * s.b + s.c;
    oc.drift = {(s2 * zeta + base) / L};
    oc.diffusion = {0.5 * gamma_ * s2 / (L * L)};
    oc.potential = s2 * (zeta * zeta / (2 * gamma_)) + base * (zeta / gamma_);
    SparseMatrix A = assemble_operator(s.grid, oc, 2);
    // warm start from the nearest twist already solved on this grid
    const Eigen::VectorXd* start = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [z, u] : warm_) {
      if (u.size() == n && std::fabs(z - zeta) < best) {
        best = std::fabs(z - zeta);
        start = &u;
      }
    }
    LogEigenResult eig = principal_log_eigenpair(A, start);
    if (warm_.size() >= 8) warm_.erase(warm_.begin());
    warm_.emplace_back(zeta, eig.log_vector);

    BellmanSolution sol;
    sol.zeta = zeta;
    sol.gamma = gamma_;
    sol.grid = s.grid;
    sol.log_psi = eig.log_vector;
    sol.psi = eig.log_vector.array().exp();
    sol.Ltilde = -gamma_ * eig.eigenvalue;
    sol.H = -sol.Ltilde;
    sol.eigen_residual = eig.residual;
    sol.hjb_residual = gamma_ * eig.residual;
    sol.Wbar = -gamma_ * eig.log_vector;
    sol.Wbar.array() -= sol.Wbar[0];
    // psi'/psi from central differences, evaluated through log-ratios
    sol.control.resize(n);
    const double h = s.grid.h();
    for (int j = 0; j < n; ++j) {
      const double up = std::exp(eig.log_vector[(j + 1) % n] - eig.log_vector[j]);
      const double down = std::exp(eig.log_vector[(j + n - 1) % n] - eig.log_vector[j]);
      sol.control[j] = s.sigma[j] * (zeta + gamma_ * (up - down) / (2 * h * L));
    }
    return sol;
  }

  double H(double zeta) { return solve(zeta).H; }

  double dH(double zeta) {
    const double h = options_.fd_step * (1.0 + std::fabs(zeta));
    return (H(zeta + h) - H(zeta - h)) / (2 * h);
  }

  const Samples1D& samples_for(double zeta) {
    // smallest grid (from options.n upward) whose cell Peclet number is at most peclet_max; this keeps the
    // off-diagonals of the twisted operator nonnegative and the artificial diffusion of the stencil small
    int n = options_.n;
    while (true) {
      const Samples1D& s = cached(n);
      const double h = s.grid.h();
      bool metzler = true;
      for (int j = 0; j < n && metzler; ++j) {
        const double s2 = s.sigma[j] * s.sigma[j];
        const double a = (s2 * zeta + gamma_ * s.b[j] + s.c[j]) / s.L;
        const double D = 0.5 * gamma_ * s2 / (s.L * s.L);
        metzler = std::fabs(a) * h <= 2.0 * D * std::min(options_.peclet_max, 1.0 - 1e-12);
      }
      if (metzler) return s;
      if (2 * n > options_.n_max) {
        std::ostringstream os;
        os << "Regime 2: twisted operator at zeta = " << zeta << " needs more than " << options_.n_max
           << " grid points (cell Peclet number too large)";
        throw NumericalError(os.str());
      }
      n *= 2;
    }
  }

  double gamma() const { return gamma_; }
  const MultiscaleModel& model() const { return model_; }
  const std::vector<double>& x() const { return x_; }

 private:
  const Samples1D& cached(int n) {
    for (const auto& s : cache_) {
      if (s.grid.n == n) return s;
    }
    cache_.push_back(sample_1d(model_, x_, n));
    return cache_.back();
  }

  const MultiscaleModel& model_;
  std::vector<double> x_;
  double gamma_;
  Regime2Options options_;
  std::vector<Samples1D> cache_;
  std::vector<std::pair<double, Eigen::VectorXd>> warm_;
};

// Stationary density of (gamma b + c + sigma u) d/dy + (gamma/2) sigma^2 d^2/dy^2 on the grid of `s`.
Eigen::VectorXd controlled_density(const Samples1D& s, double gamma, const Eigen::VectorXd& u) {
  OperatorCoefficients oc;
  oc.drift = {(gamma * s.b + s.c + s.sigma.cwiseProduct(u)) / s.L};
  oc.diffusion = {0.5 * gamma * s.sigma.cwiseAbs2() / (s.L * s.L)};
  return stationary_density(s.grid, assemble_operator(s.grid, oc, 2)).density;
}

}  // namespace

LocalRateResult local_rate_r1(const Eigen::VectorXd& r, const Eigen::MatrixXd& q, const std::vector<double>& beta) {
  const int d = static_cast<int>(r.size());
  if (static_cast<int>(beta.size()) != d) throw std::invalid_argument("local_rate_r1: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw NumericalError("local_rate_r1: q is not positive definite");
  Eigen::VectorXd diff = Eigen::Map<const Eigen::VectorXd>(beta.data(), d) - r;
  LocalRateResult res;
  res.regime = Regime::One;
  res.beta = beta;
  res.control.gain = llt.solve(diff);
  res.value = 0.5 * diff.dot(res.control.gain);
  if (res.value < 0.0) res.value = 0.0;
  return res;
}

LocalRateResult local_rate_r1(const HomogenizedModel& hom, const std::vector<double>& x,
                              const std::vector<double>& beta) {
  const int d = hom.dim();
  Eigen::VectorXd r(d);
  std::vector<double> q(d * d);
  hom.effective(x.data(), r.data(), q.data());
  Eigen::MatrixXd qm = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      q.data(), d, d);
  LocalRateResult res = local_rate_r1(r, qm, beta);
  res.x = x;
  return res;
}

BellmanSolution dual_r2(const MultiscaleModel& model, const std::vector<double>& x, double zeta, double gamma,
                        const Regime2Options& options) {
  require_1d(model, "dual_r2");
  TwistedProblem problem(model, x, gamma, options);
  return problem.solve(zeta);
}

double zero_cost_velocity_r2(const MultiscaleModel& model, const std::vector<double>& x, double gamma,
                             const Regime2Options& options) {
  require_1d(model, "zero_cost_velocity_r2");
  TwistedProblem problem(model, x, gamma, options);
  const Samples1D& s = problem.samples_for(0.0);
  Eigen::VectorXd m = controlled_density(s, gamma, Eigen::VectorXd::Zero(s.grid.n));
  return quadrature(s.grid, (gamma * s.b + s.c).cwiseProduct(m));
}

LocalRateResult local_rate_r2(const MultiscaleModel& model, const std::vector<double>& x, double beta, double gamma,
                              const Regime2Options& options) {
  require_1d(model, "local_rate_r2");
  TwistedProblem problem(model, x, gamma, options);
  auto g = [&](double z) { return z * beta - problem.H(z); };

  const double beta0 = problem.dH(0.0);
  double zeta = 0.0;
  double golden_value = 0.0;
  if (std::fabs(beta - beta0) > 1e-12 * (1.0 + std::fabs(beta))) {
    // bracket the stationary point of the concave g by doubling away from zero
    const double dir = beta > beta0 ? 1.0 : -1.0;
    const Samples1D& s0 = problem.samples_for(0.0);
    const double s2 = quadrature(s0.grid, s0.sigma.cwiseAbs2());
    double step = std::max(std::fabs(beta - beta0) / s2, 1e-3);
    double inner = 0.0;
    double outer = dir * step;
    double f_inner = beta0 - beta;
    double f_outer = problem.dH(outer) - beta;
    while (dir * f_outer < 0.0) {
      inner = outer;
      f_inner = f_outer;
      step *= 2.0;
      outer = dir * step;
      if (step > options.zeta_max) {
        std::ostringstream os;
        os << "Regime 2: maximizer bracket not found within |zeta| <= Z_max = " << options.zeta_max;
        throw NumericalError(os.str());
      }
      f_outer = problem.dH(outer) - beta;
    }
    // golden-section search on the concave objective
    double a = std::min(inner, outer);
    double b = std::max(inner, outer);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double gc = g(c), gd = g(d);
    while (b - a > 1e-4 * (1.0 + std::fabs(a) + std::fabs(b))) {
      if (gc > gd) {
        b = d;
        d = c;
        gd = gc;
        c = b - invphi * (b - a);
        gc = g(c);
      } else {
        a = c;
        c = d;
        gc = gd;
        d = a + invphi * (b - a);
        gd = g(d);
      }
    }
    golden_value = std::max(gc, gd);
    zeta = gc > gd ? c : d;
    // derivative refinement: root of H'(zeta) = beta on the doubling bracket, where the sign change is known
    if (f_inner * f_outer < 0.0) {
      boost::uintmax_t max_iter = 60;
      auto tol = boost::math::tools::eps_tolerance<double>(40);
      const bool lower_is_inner = inner < outer;
      auto root = boost::math::tools::toms748_solve([&](double z) { return problem.dH(z) - beta; },
                                                    lower_is_inner ? inner : outer, lower_is_inner ? outer : inner,
                                                    lower_is_inner ? f_inner : f_outer,
                                                    lower_is_inner ? f_outer : f_inner, tol, max_iter);
      zeta = 0.5 * (root.first + root.second);
    }
  }
  BellmanSolution sol = problem.solve(zeta);
  LocalRateResult res;
  res.regime = Regime::Two;
  res.x = x;
  res.beta = {beta};
  res.dual = zeta;
  res.value = std::max(0.0, zeta * beta - sol.H);
  res.duality_residual = zeta == 0.0 ? 0.0 : std::max(0.0, golden_value - res.value);
  res.hjb_residual = sol.hjb_residual;
  res.control.grid = sol.grid;
  res.control.values = sol.control;

  const Samples1D& s = problem.samples_for(zeta);
  if (s.grid.n == sol.grid.n) {
    Eigen::VectorXd m = controlled_density(s, gamma, sol.control);
    res.primal_value = 0.5 * quadrature(s.grid, sol.control.cwiseAbs2().cwiseProduct(m));
    res.primal_velocity = quadrature(s.grid, (gamma * s.b + s.c + s.sigma.cwiseProduct(sol.control)).cwiseProduct(m));
  }
  return res;
}

LocalRateResult local_rate_r3(const MultiscaleModel& model, const std::vector<double>& x, double beta,
                              const Regime3Options& options) {
  require_1d(model, "local_rate_r3");
  if (beta == 0.0 || !std::isfinite(beta)) {
    throw std::invalid_argument("Regime 3 local rate is undefined at beta = 0 (controls must give nonzero velocity)");
  }
  int n = 4;
  while (n < options.n) n *= 2;
  Samples1D s = sample_1d(model, x, n);
  // reflection (beta, c) -> (-beta, -c) for negative velocities
  const double sign = beta > 0.0 ? 1.0 : -1.0;
  const double b = std::fabs(beta);
  const Eigen::ArrayXd c = sign * s.c.array();
  const Eigen::ArrayXd s2 = s.sigma.array().square();
  const double w = s.grid.weight();

  auto wstar = [&](double theta) { return (c.square() + 2.0 * s2 * theta).sqrt(); };
  auto F = [&](double theta) { return w * (b / wstar(theta)).sum() - 1.0; };
  auto dF = [&](double theta) { return -w * (b * s2 / wstar(theta).cube()).sum(); };

  double theta_lo = -(c.square() / (2.0 * s2)).minCoeff();
  double theta_hi = std::max(1.0, 2.0 * std::fabs(theta_lo));
  while (F(theta_hi) > 0.0) {
    theta_hi *= 2.0;
    if (theta_hi > 1e300) throw NumericalError("Regime 3: multiplier bracket not found");
  }
  // step the lower end just inside the admissible set, where every w* > 0
  double lo = theta_lo;
  double gap = theta_hi - theta_lo;
  double probe = theta_lo + gap * 1e-16;
  for (int k = 0; k < 200 && !(F(probe) > 0.0 && std::isfinite(F(probe))); ++k) {
    gap *= 0.5;
    probe = theta_lo + gap;
    if (probe >= theta_hi) break;
  }
  lo = probe;
  if (!(F(lo) > 0.0)) throw NumericalError("Regime 3: multiplier bracket not found (grid too coarse?)");
  double hi = theta_hi;
  // bisection to a modest bracket, then safeguarded Newton
  for (int k = 0; k < 200 && hi - lo > 1e-3 * (1.0 + std::fabs(hi)); ++k) {
    const double mid = 0.5 * (lo + hi);
    (F(mid) > 0.0 ? lo : hi) = mid;
  }
  double theta = 0.5 * (lo + hi);
  for (int k = 0; k < 100; ++k) {
    const double f = F(theta);
    if (f > 0.0) lo = theta;
    else hi = theta;
    double next = theta - f / dF(theta);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - theta) <= 1e-15 * (1.0 + std::fabs(theta))) {
      theta = next;
      break;
    }
    theta = next;
  }
  const Eigen::ArrayXd ws = wstar(theta);
  const Eigen::ArrayXd v = (ws - c) / s.sigma.array();
  LocalRateResult res;
  res.regime = Regime::Three;
  res.x = x;
  res.beta = {beta};
  res.dual = theta;
  res.value = 0.5 * w * (v.square() * b / ws).sum();
  res.control.grid = s.grid;
  res.control.values = (sign * v).matrix();
  return res;
}

RateEvaluator rate_evaluator(const HomogenizedModel& hom) {
  return [&hom](const std::vector<double>& x, const std::vector<double>& beta) {
    return local_rate_r1(hom, x, beta).value;
  };
}

RateEvaluator rate_evaluator_r2(const MultiscaleModel& model, double gamma, const Regime2Options& options) {
  return [model, gamma, options](const std::vector<double>& x, const std::vector<double>& beta) {
    return local_rate_r2(model, x, beta.at(0), gamma, options).value;
  };
}

RateEvaluator rate_evaluator_r3(const MultiscaleModel& model, const Regime3Options& options) {
  return [model, options](const std::vector<double>& x, const std::vector<double>& beta) {
    return local_rate_r3(model, x, beta.at(0), options).value;
  };
}

double action(const DiscretePath& path, const RateEvaluator& rate) {
  const int d = path.dim;
  std::vector<double> mid(d), vel(d);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    auto a = path.state(k);
    auto b = path.state(k + 1);
    for (int i = 0; i < d; ++i) {
      mid[i] = 0.5 * (a[i] + b[i]);
      vel[i] = (b[i] - a[i]) / dt;
    }
    try {
      const double l = rate(mid, vel);
      if (!std::isfinite(l)) return std::numeric_limits<double>::infinity();
      total += dt * l;
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return total;
}

}  // namespace msldp
