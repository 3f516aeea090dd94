#include "msldp/control.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace msldp {

std::size_t VelocitySchedule::interval(double t) const {
  if (intervals() == 0) throw std::logic_error("velocity schedule is empty");
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  const std::ptrdiff_t k = std::distance(knots.begin(), it) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(intervals()) - 1));
}

VelocitySchedule schedule_from_path(const DiscretePath& path) {
  if (path.size() < 2) throw std::invalid_argument("schedule_from_path: path needs at least two knots");
  VelocitySchedule s;
  s.dim = path.dim;
  s.knots = path.times;
  s.velocities.resize((path.size() - 1) * path.dim);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    for (int i = 0; i < path.dim; ++i) {
      s.velocities[k * path.dim + i] = (path.state(k + 1)[i] - path.state(k)[i]) / dt;
    }
  }
  return s;
}

VelocitySchedule constant_schedule(const std::vector<double>& velocity, double T) {
  VelocitySchedule s;
  s.dim = static_cast<int>(velocity.size());
  s.knots = {0.0, T};
  s.velocities = velocity;
  return s;
}

ControlField::ControlField(Regime regime, int dim, std::vector<double> period, Evaluator eval,
                           std::map<std::string, double> diagnostics)
    : regime_(regime), dim_(dim), period_(std::move(period)), eval_(std::move(eval)),
      diagnostics_(std::move(diagnostics)) {
  if (period_.empty()) period_.assign(dim_, 1.0);
}

void ControlField::operator()(double t, const double* x, const double* y, double* u) const {
  if (!eval_) {
    std::fill(u, u + dim_, 0.0);
    return;
  }
  eval_(t, x, y, u);
}

ControlField zero_control(int dim, std::vector<double> period) {
  return ControlField(Regime::One, dim, std::move(period), nullptr);
}

ControlField regime1_control(std::shared_ptr<const HomogenizedModel> hom, VelocitySchedule schedule) {
  if (!hom) throw std::invalid_argument("regime1_control: null homogenized model");
  const int d = hom->dim();
  if (schedule.dim != d) throw std::invalid_argument("regime1_control: schedule dimension mismatch");
  auto eval = [hom, schedule = std::move(schedule), d](double t, const double* x, const double* y, double* u) {
    std::array<double, 4> r{};
    std::array<double, 16> q{}, dchi{}, sigma{};
    hom->effective(x, r.data(), q.data());
    hom->dchi(x, y, dchi.data());
    hom->model().coefficients().sigma(x, y, sigma.data());
    const auto beta = schedule.velocity(schedule.interval(t));
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Q(q.data(), d, d);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> S(sigma.data(), d, d);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> J(dchi.data(), d, d);
    Eigen::VectorXd diff(d);
    for (int i = 0; i < d; ++i) diff[i] = beta[i] - r[i];
    const Eigen::VectorXd g = Q.llt().solve(diff);
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d) + J;
    Eigen::Map<Eigen::VectorXd>(u, d) = S.transpose() * (M.transpose() * g);
  };
  return ControlField(Regime::One, d, hom->model().coefficients().period(), std::move(eval));
}

namespace {

struct R2Node {
  TorusGrid grid;
  Eigen::VectorXd values;
};

}  // namespace

ControlField regime2_control(const MultiscaleModel& model, const VelocitySchedule& schedule, double gamma,
                             const Regime2ControlOptions& options) {
  if (model.dim() != 1 || schedule.dim != 1) throw std::invalid_argument("regime2_control supports d = 1 only");
  const auto& f = model.coefficients();
  const bool x_dependent = f.b_depends_on_x() || f.c_depends_on_x() || f.sigma_depends_on_x();
  std::vector<double> xs;
  if (x_dependent) {
    LatticeAxis ax = options.lattice;
    if (ax.count <= 0) ax = {model.x0()[0] - 2.0, model.x0()[0] + 2.0, 21};
    if (ax.count < 2 || !(ax.hi > ax.lo)) throw std::invalid_argument("regime2_control: invalid x-lattice");
    for (int i = 0; i < ax.count; ++i) xs.push_back(ax.lo + (ax.hi - ax.lo) * i / (ax.count - 1));
  } else {
    xs.push_back(model.x0()[0]);
  }

  // one Bellman solve per distinct (velocity, lattice node)
  const std::size_t M = schedule.intervals();
  std::map<double, std::vector<R2Node>> by_velocity;
  double worst_hjb = 0.0;
  int solves = 0;
  for (std::size_t k = 0; k < M; ++k) {
    const double beta = schedule.velocity(k)[0];
    if (by_velocity.count(beta)) continue;
    std::vector<R2Node> nodes;
    for (double x : xs) {
      LocalRateResult res = local_rate_r2(model, {x}, beta, gamma, options.rate);
      worst_hjb = std::max(worst_hjb, res.hjb_residual);
      nodes.push_back({res.control.grid, res.control.values});
      ++solves;
    }
    by_velocity.emplace(beta, std::move(nodes));
  }
  std::vector<const std::vector<R2Node>*> per_interval(M);
  for (std::size_t k = 0; k < M; ++k) per_interval[k] = &by_velocity.at(schedule.velocity(k)[0]);

  const double L = f.period()[0];
  auto shared = std::make_shared<std::map<double, std::vector<R2Node>>>(std::move(by_velocity));
  auto eval = [shared, per_interval, schedule, xs, L](double t, const double* x, const double* y, double* u) {
    const auto& nodes = *per_interval[schedule.interval(t)];
    const double yu = y[0] / L;
    if (nodes.size() == 1) {
      u[0] = interpolate(nodes[0].grid, nodes[0].values, &yu);
      return;
    }
    const double lo = xs.front(), hi = xs.back();
    if (x[0] < lo || x[0] > hi) throw std::out_of_range("regime2_control: x outside the control lattice");
    const double pos = (x[0] - lo) / (hi - lo) * (xs.size() - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(pos), xs.size() - 2);
    const double w = pos - i;
    u[0] = (1 - w) * interpolate(nodes[i].grid, nodes[i].values, &yu) +
           w * interpolate(nodes[i + 1].grid, nodes[i + 1].values, &yu);
  };
  return ControlField(Regime::Two, 1, f.period(), std::move(eval),
                      {{"hjb_residual_max", worst_hjb}, {"bellman_solves", solves}});
}

FeedbackControl::FeedbackControl(ControlField field, double eps, double delta)
    : field_(std::move(field)), eps_(eps), delta_(delta) {
  if (!(eps > 0.0) || !(delta > 0.0)) throw std::invalid_argument("feedback control needs eps > 0 and delta > 0");
}

void FeedbackControl::fast_variable(const double* x, double* y) const {
  const auto& L = field_.period();
  for (int i = 0; i < field_.dim(); ++i) {
    double v = std::fmod(x[i] / delta_, L[i]);
    if (v < 0.0) v += L[i];
    y[i] = v;
  }
}

void FeedbackControl::operator()(double t, const double* x, double* u) const {
  if (field_.is_zero()) {
    std::fill(u, u + field_.dim(), 0.0);
    return;
  }
  std::array<double, 4> y{};
  fast_variable(x, y.data());
  field_(t, x, y.data(), u);
}

FeedbackControl bind_feedback(ControlField field, double eps, double delta) {
  return FeedbackControl(std::move(field), eps, delta);
}

ControlBounds sample_bounds(const ControlField& field, double t0, double t1, const std::vector<double>& x_lo,
                            const std::vector<double>& x_hi, int nt, int nx, int ny) {
  const int d = field.dim();
  if (static_cast<int>(x_lo.size()) != d || static_cast<int>(x_hi.size()) != d) {
    throw std::invalid_argument("sample_bounds: box dimension mismatch");
  }
  ControlBounds out;
  const auto& L = field.period();
  std::vector<double> x(d), y(d), yn(d), u(d), un(d);
  int nx_total = 1, ny_total = 1;
  for (int i = 0; i < d; ++i) {
    nx_total *= nx;
    ny_total *= ny;
  }
  for (int it = 0; it < nt; ++it) {
    const double t = nt == 1 ? t0 : t0 + (t1 - t0) * it / (nt - 1);
    for (int ix = 0; ix < nx_total; ++ix) {
      for (int i = 0, rem = ix; i < d; ++i, rem /= nx) {
        const int k = rem % nx;
        x[i] = nx == 1 ? x_lo[i] : x_lo[i] + (x_hi[i] - x_lo[i]) * k / (nx - 1);
      }
      for (int iy = 0; iy < ny_total; ++iy) {
        for (int i = 0, rem = iy; i < d; ++i, rem /= ny) y[i] = L[i] * (rem % ny) / ny;
        field(t, x.data(), y.data(), u.data());
        double norm = 0.0;
        for (double v : u) norm += v * v;
        out.sup_norm = std::max(out.sup_norm, std::sqrt(norm));
        for (int i = 0; i < d; ++i) {
          yn = y;
          yn[i] += L[i] / ny;
          field(t, x.data(), yn.data(), un.data());
          double diff = 0.0;
          for (int j = 0; j < d; ++j) diff += (un[j] - u[j]) * (un[j] - u[j]);
          out.lipschitz_y = std::max(out.lipschitz_y, std::sqrt(diff) / (L[i] / ny));
        }
      }
    }
  }
  return out;
}

void write_control_csv(std::ostream& os, const ControlField& field, const std::vector<double>& times,
                       const std::vector<std::vector<double>>& xs, int ny) {
  const int d = field.dim();
  auto num = [&os](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    os.write(buf, res.ptr - buf);
  };
  os << 't';
  for (int i = 1; i <= d; ++i) os << ",x_" << i;
  for (int i = 1; i <= d; ++i) os << ",y_" << i;
  for (int i = 1; i <= d; ++i) os << ",u_" << i;
  os << '\n';
  int ny_total = 1;
  for (int i = 0; i < d; ++i) ny_total *= ny;
  std::vector<double> y(d), u(d);
  for (double t : times) {
    for (const auto& x : xs) {
      if (static_cast<int>(x.size()) != d) throw std::invalid_argument("write_control_csv: x dimension mismatch");
      for (int iy = 0; iy < ny_total; ++iy) {
        for (int i = 0, rem = iy; i < d; ++i, rem /= ny) y[i] = field.period()[i] * (rem % ny) / ny;
        field(t, x.data(), y.data(), u.data());
        num(t);
        for (double v : x) os << ',', num(v);
        for (double v : y) os << ',', num(v);
        for (double v : u) os << ',', num(v);
        os << '\n';
      }
    }
  }
}

}  // namespace msldp
