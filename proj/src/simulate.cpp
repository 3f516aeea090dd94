#include "msldp/simulate.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace msldp {

std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x6d736c64u};
  return std::mt19937_64(seq);
}

std::pair<long, double> time_grid(const MultiscaleModel& model, const SimulationOptions& options) {
  if (!(options.eps > 0.0)) throw SimulationError("simulate: eps must be positive");
  if (!(options.T > 0.0)) throw SimulationError("simulate: T must be positive");
  const double delta = model.scaling().delta(options.eps);
  if (!(options.dt_divisor >= 10.0)) throw SimulationError("simulate: dt_divisor must be at least 10");
  const double dt_cap = delta * delta / 10.0;
  if (options.dt > 0.0) {
    if (options.dt > dt_cap * (1.0 + 1e-12)) {
      throw SimulationError("simulate: dt = " + std::to_string(options.dt) + " exceeds delta^2/10 = " +
                            std::to_string(dt_cap) + " and would not resolve the fast scale");
    }
    const long steps = std::lround(options.T / options.dt);
    if (steps < 1 || std::fabs(steps * options.dt - options.T) > 1e-9 * options.T) {
      throw SimulationError("simulate: T must be an integer multiple of dt");
    }
    return {steps, options.T / steps};
  }
  const double m = std::ceil(options.T / (delta * delta / options.dt_divisor) * (1.0 - 1e-12));
  if (m > 1e12) throw SimulationError("simulate: more than 1e12 steps needed (delta too small for this T)");
  const long steps = std::max(1L, static_cast<long>(m));
  return {steps, options.T / steps};
}

namespace {

// Shared Euler-Maruyama loop; `noise(k, dW)` fills the d increments of step k.
template <typename Noise>
DiscretePath run(const MultiscaleModel& model, const SimulationOptions& options, const FeedbackControl* control,
                 const StepObserver& observer, Noise&& noise) {
  const int d = model.dim();
  const auto [steps, dt] = time_grid(model, options);
  const double eps = options.eps;
  const double delta = model.scaling().delta(eps);
  const double ratio = eps / delta;
  const double sqrt_eps = std::sqrt(eps);
  const auto& f = model.coefficients();
  const auto& L = f.period();
  if (options.record_every < 1) throw SimulationError("simulate: record_every must be >= 1");
  if (control && !control->is_zero() && control->dim() != d) throw SimulationError("simulate: control dimension");
  const bool controlled = control && !control->is_zero();

  std::array<double, 4> x{}, y{}, b{}, c{}, u{}, dW{};
  std::array<double, 16> sigma{};
  const std::vector<double>& start = options.x0.empty() ? model.x0() : options.x0;
  if (static_cast<int>(start.size()) != d) throw SimulationError("simulate: x0 has the wrong dimension");
  std::copy(start.begin(), start.end(), x.begin());

  DiscretePath path;
  path.dim = d;
  const std::size_t stored = static_cast<std::size_t>((steps + options.record_every - 1) / options.record_every) + 1;
  path.times.reserve(stored);
  path.states.reserve(stored * d);
  path.logweights.reserve(stored);
  auto record = [&](double t, double lw) {
    path.times.push_back(t);
    path.states.insert(path.states.end(), x.begin(), x.begin() + d);
    path.logweights.push_back(lw);
  };
  double logweight = 0.0;
  record(0.0, 0.0);
  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    for (int i = 0; i < d; ++i) {
      double v = std::fmod(x[i] / delta, L[i]);
      y[i] = v < 0.0 ? v + L[i] : v;
    }
    f.b(x.data(), y.data(), b.data());
    f.c(x.data(), y.data(), c.data());
    f.sigma(x.data(), y.data(), sigma.data());
    if (controlled) (*control)(t, x.data(), u.data());
    noise(k, dW.data(), dt);
    if (observer) observer(t, dt, x.data(), y.data(), controlled ? u.data() : nullptr);
    for (int i = 0; i < d; ++i) {
      double drift = ratio * b[i] + c[i];
      double diffusion = 0.0;
      for (int j = 0; j < d; ++j) {
        if (controlled) drift += sigma[i * d + j] * u[j];
        diffusion += sigma[i * d + j] * dW[j];
      }
      x[i] += drift * dt + sqrt_eps * diffusion;
    }
    if (controlled) {
      double udw = 0.0, uu = 0.0;
      for (int j = 0; j < d; ++j) {
        udw += u[j] * dW[j];
        uu += u[j] * u[j];
      }
      logweight += -udw / sqrt_eps - uu * dt / (2.0 * eps);
    }
    for (int i = 0; i < d; ++i) {
      if (!std::isfinite(x[i])) {
        throw SimulationError("simulate: non-finite state at step " + std::to_string(k + 1) + " (t = " +
                                  std::to_string((k + 1) * dt) + ")",
                              k + 1);
      }
    }
    if ((k + 1) % options.record_every == 0 || k + 1 == steps) record(k + 1 == steps ? options.T : (k + 1) * dt, logweight);
  }
  path.logweight = logweight;
  return path;
}

}  // namespace

DiscretePath simulate(const MultiscaleModel& model, const SimulationOptions& options, const FeedbackControl* control,
                      const StepObserver& observer) {
  auto rng = trajectory_rng(options.seed, options.stream);
  std::normal_distribution<double> normal;
  const int d = model.dim();
  return run(model, options, control, observer, [&](long, double* dW, double dt) {
    const double s = std::sqrt(dt);
    for (int j = 0; j < d; ++j) dW[j] = s * normal(rng);
  });
}

DiscretePath simulate_with_increments(const MultiscaleModel& model, const SimulationOptions& options,
                                      const std::vector<double>& dW, const FeedbackControl* control) {
  const int d = model.dim();
  const long steps = time_grid(model, options).first;
  if (static_cast<long>(dW.size()) != steps * d) throw SimulationError("simulate: wrong number of increments");
  return run(model, options, control, {}, [&](long k, double* out, double) {
    for (int j = 0; j < d; ++j) out[j] = dW[k * d + j];
  });
}

int OccupationMeasure::z_cells() const {
  int n = 1;
  for (int i = 0; i < dim; ++i) n *= z_bins;
  return n;
}

int OccupationMeasure::y_cells() const {
  int n = 1;
  for (int i = 0; i < dim; ++i) n *= y_bins;
  return n;
}

double OccupationMeasure::total() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }

double OccupationMeasure::mass_until(double t) const {
  const std::size_t per_t = static_cast<std::size_t>(z_cells()) * y_cells();
  double acc = 0.0;
  for (int k = 0; k < t_bins; ++k) {
    const double lo = k * t_bin;
    if (lo >= t) break;
    const double frac = std::min(1.0, (t - lo) / t_bin);
    double bin = 0.0;
    for (std::size_t i = 0; i < per_t; ++i) bin += mass[k * per_t + i];
    acc += frac * bin;
  }
  return acc;
}

std::vector<double> OccupationMeasure::y_marginal() const {
  const int Y = y_cells();
  std::vector<double> out(Y, 0.0);
  for (std::size_t i = 0; i < mass.size(); ++i) out[i % Y] += mass[i];
  const double tot = std::accumulate(out.begin(), out.end(), 0.0);
  if (tot > 0.0) {
    for (double& v : out) v /= tot;
  }
  return out;
}

std::vector<double> OccupationMeasure::z_marginal() const {
  const int Y = y_cells(), Z = z_cells();
  std::vector<double> out(Z, 0.0);
  for (std::size_t i = 0; i < mass.size(); ++i) out[(i / Y) % Z] += mass[i];
  const double tot = std::accumulate(out.begin(), out.end(), 0.0);
  if (tot > 0.0) {
    for (double& v : out) v /= tot;
  }
  return out;
}

OccupationAccumulator::OccupationAccumulator(int dim, double T, double eps, std::vector<double> period,
                                             const OccupationOptions& options)
    : period_(std::move(period)) {
  if (dim < 1 || dim > 4) throw std::invalid_argument("occupation measure: dimension must be 1..4");
  if (!(T > 0.0)) throw std::invalid_argument("occupation measure: T must be positive");
  if (options.y_bins < 1 || options.z_bins < 1 || !(options.z_hi > options.z_lo)) {
    throw std::invalid_argument("occupation measure: invalid binning");
  }
  if (period_.empty()) period_.assign(dim, 1.0);
  auto& m = measure_;
  m.dim = dim;
  m.T = T;
  m.window = options.window > 0.0 ? options.window : std::sqrt(eps);
  m.y_bins = options.y_bins;
  m.z_bins = options.z_bins;
  m.z_lo = options.z_lo;
  m.z_hi = options.z_hi;
  m.t_bin = options.t_bin > 0.0 ? options.t_bin : m.window;
  m.t_bins = std::max(1, static_cast<int>(std::ceil(T / m.t_bin - 1e-12)));
  m.mass.assign(static_cast<std::size_t>(m.t_bins) * m.z_cells() * m.y_cells(), 0.0);
}

void OccupationAccumulator::add(double s, double dt, const double* y, const double* u) {
  auto& m = measure_;
  int yi = 0, zi = 0, ystride = 1, zstride = 1;
  bool clipped = false;
  for (int i = 0; i < m.dim; ++i) {
    double yu = y[i] / period_[i];
    yu -= std::floor(yu);
    const int by = std::min(m.y_bins - 1, static_cast<int>(yu * m.y_bins));
    yi += by * ystride;
    ystride *= m.y_bins;
    const double z = u ? u[i] : 0.0;
    double pos = (z - m.z_lo) / (m.z_hi - m.z_lo) * m.z_bins;
    if (pos < 0.0 || pos >= m.z_bins) clipped = true;
    const int bz = std::clamp(static_cast<int>(std::floor(pos)), 0, m.z_bins - 1);
    zi += bz * zstride;
    zstride *= m.z_bins;
  }
  // the step [s, s+dt) counts for outer times t in [mid - Delta, mid] (mid = step midpoint) with density dt/Delta
  const double mid = s + 0.5 * dt;
  const double lo = std::max(0.0, mid - m.window);
  const double hi = std::min(m.T, mid);
  if (hi <= lo) return;
  const std::size_t per_t = static_cast<std::size_t>(m.z_cells()) * m.y_cells();
  const std::size_t offset = static_cast<std::size_t>(zi) * m.y_cells() + yi;
  const int k0 = static_cast<int>(lo / m.t_bin);
  const int k1 = std::min(m.t_bins - 1, static_cast<int>(hi / m.t_bin));
  for (int k = k0; k <= k1; ++k) {
    const double overlap = std::min(hi, (k + 1) * m.t_bin) - std::max(lo, k * m.t_bin);
    if (overlap <= 0.0) continue;
    const double w = dt * overlap / m.window;
    m.mass[k * per_t + offset] += w;
    if (clipped) m.clipped += w;
  }
}

StepObserver OccupationAccumulator::observer() {
  return [this](double t, double dt, const double*, const double* y, const double* u) { add(t, dt, y, u); };
}

void OccupationAccumulator::merge(const OccupationAccumulator& other) {
  if (other.measure_.mass.size() != measure_.mass.size()) throw std::invalid_argument("occupation merge: layout");
  for (std::size_t i = 0; i < measure_.mass.size(); ++i) measure_.mass[i] += other.measure_.mass[i];
  measure_.clipped += other.measure_.clipped;
}

OccupationMeasure occupation_measure(const MultiscaleModel& model, const DiscretePath& path,
                                     const std::vector<double>& controls, double eps,
                                     const OccupationOptions& options) {
  const int d = path.dim;
  if (path.size() < 2) throw std::invalid_argument("occupation measure: path too short");
  const std::size_t steps = path.size() - 1;
  if (!controls.empty() && controls.size() != steps * d) {
    throw std::invalid_argument("occupation measure: expected one control per step");
  }
  const double T = path.times.back() - path.times.front();
  OccupationAccumulator acc(d, T, eps, model.coefficients().period(), options);
  const double delta = model.scaling().delta(eps);
  std::vector<double> y(d);
  for (std::size_t k = 0; k < steps; ++k) {
    for (int i = 0; i < d; ++i) y[i] = path.state(k)[i] / delta;
    acc.add(path.times[k] - path.times.front(), path.times[k + 1] - path.times[k], y.data(),
            controls.empty() ? nullptr : controls.data() + k * d);
  }
  return acc.result();
}

double wasserstein1_circle(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size() || p.empty()) throw std::invalid_argument("wasserstein1_circle: size mismatch");
  const std::size_t n = p.size();
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  // W1 on the circle = min_c int |F - G - c|, attained at a median of F - G
  std::vector<double> diff(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += p[i] / sp - q[i] / sq;
    diff[i] = acc;
  }
  std::vector<double> sorted = diff;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double median = sorted[n / 2];
  double w = 0.0;
  for (double v : diff) w += std::fabs(v - median);
  return w / n;
}

void write_path_csv(std::ostream& os, const DiscretePath& path) {
  auto num = [&os](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    os.write(buf, res.ptr - buf);
  };
  os << 't';
  for (int i = 1; i <= path.dim; ++i) os << ",x_" << i;
  os << ",logweight\n";
  for (std::size_t k = 0; k < path.size(); ++k) {
    num(path.times[k]);
    for (double v : path.state(k)) os << ',', num(v);
    os << ',';
    num(k < path.logweights.size() ? path.logweights[k] : path.logweight);
    os << '\n';
  }
}

}  // namespace msldp
