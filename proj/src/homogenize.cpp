#include "msldp/homogenize.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace msldp {

namespace {

int default_n(int d) { return d == 1 ? 512 : 64; }

TorusGrid make_grid(const MultiscaleModel& model, const HomogenizationOptions& options) {
  const int d = model.dim();
  if (d > 2) throw std::invalid_argument("grid homogenization supports d <= 2; use the separable closed form");
  return TorusGrid(d, options.n > 0 ? options.n : default_n(d));
}

// b, sigma sigma^T and c sampled at the grid nodes (user units).
struct NodeSamples {
  std::vector<Eigen::VectorXd> b, c, a;  // a is d*d
};

NodeSamples sample(const MultiscaleModel& model, const std::vector<double>& x, const TorusGrid& grid) {
  const int d = grid.d;
  const int N = grid.size();
  const auto& f = model.coefficients();
  const auto& L = f.period();
  NodeSamples s;
  s.b.assign(d, Eigen::VectorXd(N));
  s.c.assign(d, Eigen::VectorXd(N));
  s.a.assign(d * d, Eigen::VectorXd(N));
  double y[2], bv[2], cv[2], sv[4];
  for (int idx = 0; idx < N; ++idx) {
    for (int k = 0; k < d; ++k) y[k] = L[k] * grid.node(idx, k);
    f.b(x.data(), y, bv);
    f.c(x.data(), y, cv);
    f.sigma(x.data(), y, sv);
    for (int i = 0; i < d; ++i) {
      s.b[i][idx] = bv[i];
      s.c[i][idx] = cv[i];
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += sv[i * d + k] * sv[j * d + k];
        s.a[i * d + j][idx] = acc;
      }
    }
  }
  return s;
}

SparseMatrix generator_from(const NodeSamples& s, const std::vector<double>& L, const TorusGrid& grid, int order) {
  const int d = grid.d;
  OperatorCoefficients oc;
  for (int k = 0; k < d; ++k) oc.drift.push_back(s.b[k] / L[k]);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) oc.diffusion.push_back(0.5 * s.a[i * d + j] / (L[i] * L[j]));
  return assemble_operator(grid, oc, order);
}

CenteringCheck centering_of(const NodeSamples& s, const TorusGrid& grid, const Eigen::VectorXd& mu) {
  CenteringCheck check;
  double bmax = 0.0;
  double sq = 0.0;
  for (const auto& bk : s.b) {
    const double v = quadrature(grid, bk.cwiseProduct(mu));
    sq += v * v;
    bmax = std::max(bmax, bk.lpNorm<Eigen::Infinity>());
  }
  check.residual = std::sqrt(sq);
  check.tolerance = 1e-7 * (1.0 + bmax);
  check.pass = check.residual <= check.tolerance;
  return check;
}

}  // namespace

SparseMatrix fast_generator(const MultiscaleModel& model, const std::vector<double>& x, const TorusGrid& grid,
                            int order) {
  return generator_from(sample(model, x, grid), model.coefficients().period(), grid, order);
}

CenteringCheck check_centering(const MultiscaleModel& model, const std::vector<double>& x,
                               const HomogenizationOptions& options) {
  const TorusGrid grid = make_grid(model, options);
  const NodeSamples s = sample(model, x, grid);
  const auto st = stationary_density(grid, generator_from(s, model.coefficients().period(), grid, options.order));
  return centering_of(s, grid, st.density);
}

CellSolution solve_cell_problem(const MultiscaleModel& model, const std::vector<double>& x,
                                const HomogenizationOptions& options) {
  const TorusGrid grid = make_grid(model, options);
  const int d = grid.d;
  const int N = grid.size();
  const auto& L = model.coefficients().period();
  const NodeSamples s = sample(model, x, grid);
  const SparseMatrix gen = generator_from(s, L, grid, options.order);

  CellSolution cell;
  cell.grid = grid;
  cell.x = x;
  const auto st = stationary_density(grid, gen);
  cell.mu = st.density;
  cell.stationary_residual = st.residual;
  const CenteringCheck centering = centering_of(s, grid, cell.mu);
  cell.centering_residual = centering.residual;
  if (options.require_centering && !centering.pass) {
    std::ostringstream os;
    os.precision(6);
    os << "centering condition fails: |int b dmu| = " << centering.residual << " > " << centering.tolerance;
    throw NumericalError(os.str());
  }

  for (int l = 0; l < d; ++l) {
    Eigen::VectorXd chi = solve_bordered(grid, gen, cell.mu, -s.b[l]);
    cell.cell_residual = std::max(cell.cell_residual, (gen * chi + s.b[l]).lpNorm<Eigen::Infinity>());
    cell.chi_mean_residual = std::max(cell.chi_mean_residual, std::fabs(quadrature(grid, chi.cwiseProduct(cell.mu))));
    cell.chi.push_back(std::move(chi));
  }
  cell.dchi.resize(d * d);
  for (int l = 0; l < d; ++l)
    for (int k = 0; k < d; ++k) cell.dchi[l * d + k] = derivative(grid, cell.chi[l], k, options.order) / L[k];

  cell.r = Eigen::VectorXd::Zero(d);
  cell.q = Eigen::MatrixXd::Zero(d, d);
  cell.drift_gain = Eigen::MatrixXd::Zero(d, d);
  const double w = grid.weight();
  Eigen::MatrixXd J(d, d), A(d, d);
  Eigen::VectorXd c(d);
  for (int idx = 0; idx < N; ++idx) {
    for (int i = 0; i < d; ++i) {
      c[i] = s.c[i][idx];
      for (int j = 0; j < d; ++j) {
        J(i, j) = (i == j ? 1.0 : 0.0) + cell.dchi[i * d + j][idx];
        A(i, j) = s.a[i * d + j][idx];
      }
    }
    const double wm = w * cell.mu[idx];
    cell.drift_gain += wm * J;
    cell.r += wm * (J * c);
    cell.q += wm * (J * A * J.transpose());
  }
  cell.q = 0.5 * (cell.q + cell.q.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(cell.q);
  if (llt.info() != Eigen::Success) throw NumericalError("effective diffusivity is not positive definite; refine the grid");
  return cell;
}

SeparableResult separable_effective_diffusivity(const std::vector<expr::Expression>& Q, double D,
                                                const std::vector<double>& period, const expr::Expression* V, int n) {
  if (!(D > 0.0)) throw std::invalid_argument("D must be positive");
  const int d = static_cast<int>(Q.size());
  SeparableResult res;
  res.theta.resize(d);
  for (int i = 0; i < d; ++i) {
    const double L = period.empty() ? 1.0 : period[i];
    const std::vector<std::string> slots = {"y", "y_" + std::to_string(i + 1)};
    expr::Compiled q(Q[i], slots);
    double z = 0.0, zh = 0.0;
    for (int j = 0; j < n; ++j) {
      const double y = L * j / n;
      const double args[2] = {y, y};
      const double v = q(args);
      z += std::exp(-v / D);
      zh += std::exp(v / D);
    }
    z /= n;
    zh /= n;
    res.Z.push_back(z);
    res.Zhat.push_back(zh);
    res.theta[i] = 1.0 / (z * zh);
  }
  res.q = 2.0 * D * Eigen::MatrixXd(res.theta.asDiagonal());
  if (V) {
    std::vector<expr::Compiled> grad;
    std::vector<std::string> slots;
    for (int k = 1; k <= d; ++k) slots.push_back("x_" + std::to_string(k));
    if (d == 1) slots.push_back("x");
    for (int k = 0; k < d; ++k) {
      expr::Expression g = V->differentiate(slots[k]);
      if (d == 1) {
        // V may be written in x or x_1
        g = expr::parse("a+b").substitute({{"a", g}, {"b", V->differentiate("x")}});
      }
      grad.emplace_back(g, slots);
    }
    Eigen::VectorXd theta = res.theta;
    res.r = [grad, theta, d](const Eigen::VectorXd& x) {
      std::vector<double> args(x.data(), x.data() + d);
      if (d == 1) args.push_back(x[0]);
      Eigen::VectorXd out(d);
      for (int k = 0; k < d; ++k) out[k] = -theta[k] * grad[k](args);
      return out;
    };
  }
  return res;
}

HomogenizedModel::HomogenizedModel(MultiscaleModel model, HomogenizationOptions options,
                                   std::vector<LatticeAxis> lattice)
    : model_(std::move(model)), options_(options), lattice_(std::move(lattice)) {
  const auto& f = model_.coefficients();
  shared_ = !f.b_depends_on_x() && !f.sigma_depends_on_x();
  exact_r_ = shared_ && !f.c_depends_on_y();
  if (shared_) {
    single_ = std::make_shared<const CellSolution>(solve_cell_problem(model_, model_.x0(), options_));
    return;
  }
  const int d = model_.dim();
  if (lattice_.empty()) {
    for (int k = 0; k < d; ++k) lattice_.push_back({model_.x0()[k] - 2.0, model_.x0()[k] + 2.0, 41});
  }
  if (static_cast<int>(lattice_.size()) != d) throw std::invalid_argument("x-lattice must have one axis per dimension");
  for (const auto& ax : lattice_) {
    if (ax.count < 2 || !(ax.hi > ax.lo)) throw std::invalid_argument("x-lattice axes need count >= 2 and hi > lo");
  }
}

const CellSolution& HomogenizedModel::node(const std::vector<int>& index) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = memo_.find(index);
    if (it != memo_.end()) return *it->second;
  }
  std::vector<double> x(index.size());
  for (std::size_t k = 0; k < index.size(); ++k) {
    const auto& ax = lattice_[k];
    x[k] = ax.lo + (ax.hi - ax.lo) * index[k] / (ax.count - 1);
  }
  auto sol = std::make_shared<const CellSolution>(solve_cell_problem(model_, x, options_));
  std::lock_guard<std::mutex> lock(mutex_);
  memo_[index] = sol;
  return *memo_[index];
}

void HomogenizedModel::locate(const double* x, std::vector<int>& base, std::vector<double>& frac) const {
  const int d = model_.dim();
  base.resize(d);
  frac.resize(d);
  for (int k = 0; k < d; ++k) {
    const auto& ax = lattice_[k];
    if (x[k] < ax.lo || x[k] > ax.hi || !std::isfinite(x[k])) {
      std::ostringstream os;
      os.precision(17);
      os << "x_" << k + 1 << " = " << x[k] << " outside the homogenization lattice [" << ax.lo << ", " << ax.hi << "]";
      throw std::out_of_range(os.str());
    }
    const double s = (x[k] - ax.lo) / (ax.hi - ax.lo) * (ax.count - 1);
    int i = static_cast<int>(std::floor(s));
    if (i >= ax.count - 1) i = ax.count - 2;
    base[k] = i;
    frac[k] = s - i;
  }
}

void HomogenizedModel::effective(const double* x, double* r, double* q) const {
  const int d = model_.dim();
  if (shared_) {
    const CellSolution& cell = *single_;
    if (exact_r_) {
      double y[2] = {0.0, 0.0};
      double c[2];
      model_.coefficients().c(x, y, c);
      for (int i = 0; i < d; ++i) {
        r[i] = 0.0;
        for (int j = 0; j < d; ++j) r[i] += cell.drift_gain(i, j) * c[j];
      }
    } else {
      const TorusGrid& g = cell.grid;
      const auto& L = model_.coefficients().period();
      for (int i = 0; i < d; ++i) r[i] = 0.0;
      double y[2], c[2];
      for (int idx = 0; idx < g.size(); ++idx) {
        for (int k = 0; k < d; ++k) y[k] = L[k] * g.node(idx, k);
        model_.coefficients().c(x, y, c);
        const double wm = g.weight() * cell.mu[idx];
        for (int i = 0; i < d; ++i) {
          double v = c[i];
          for (int j = 0; j < d; ++j) v += cell.dchi[i * d + j][idx] * c[j];
          r[i] += wm * v;
        }
      }
    }
    for (int i = 0; i < d * d; ++i) q[i] = cell.q(i / d, i % d);
    return;
  }
  std::vector<int> base;
  std::vector<double> frac;
  locate(x, base, frac);
  for (int i = 0; i < d; ++i) r[i] = 0.0;
  for (int i = 0; i < d * d; ++i) q[i] = 0.0;
  const int corners = 1 << d;
  std::vector<int> idx(d);
  for (int corner = 0; corner < corners; ++corner) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      const int bit = (corner >> k) & 1;
      idx[k] = base[k] + bit;
      w *= bit ? frac[k] : 1.0 - frac[k];
    }
    if (w == 0.0) continue;
    const CellSolution& cell = node(idx);
    for (int i = 0; i < d; ++i) r[i] += w * cell.r[i];
    for (int i = 0; i < d * d; ++i) q[i] += w * cell.q(i / d, i % d);
  }
}

Eigen::VectorXd HomogenizedModel::r(const std::vector<double>& x) const {
  const int d = model_.dim();
  Eigen::VectorXd out(d);
  std::vector<double> q(d * d);
  effective(x.data(), out.data(), q.data());
  return out;
}

Eigen::MatrixXd HomogenizedModel::q(const std::vector<double>& x) const {
  const int d = model_.dim();
  std::vector<double> r(d), q(d * d);
  effective(x.data(), r.data(), q.data());
  Eigen::MatrixXd out(d, d);
  for (int i = 0; i < d * d; ++i) out(i / d, i % d) = q[i];
  return out;
}

void HomogenizedModel::dchi(const double* x, const double* y, double* out) const {
  const int d = model_.dim();
  const auto& L = model_.coefficients().period();
  double yu[2];
  for (int k = 0; k < d; ++k) yu[k] = y[k] / L[k];
  if (shared_) {
    for (int i = 0; i < d * d; ++i) out[i] = interpolate(single_->grid, single_->dchi[i], yu);
    return;
  }
  std::vector<int> base;
  std::vector<double> frac;
  locate(x, base, frac);
  for (int i = 0; i < d * d; ++i) out[i] = 0.0;
  std::vector<int> idx(d);
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      const int bit = (corner >> k) & 1;
      idx[k] = base[k] + bit;
      w *= bit ? frac[k] : 1.0 - frac[k];
    }
    if (w == 0.0) continue;
    const CellSolution& cell = node(idx);
    for (int i = 0; i < d * d; ++i) out[i] += w * interpolate(cell.grid, cell.dchi[i], yu);
  }
}

const CellSolution& HomogenizedModel::cell(const std::vector<double>& x) const {
  if (shared_) return *single_;
  std::vector<int> base;
  std::vector<double> frac;
  locate(x.data(), base, frac);
  for (std::size_t k = 0; k < base.size(); ++k) {
    if (frac[k] >= 0.5) ++base[k];
  }
  return node(base);
}

}  // namespace msldp
