#include "msldp/mc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <climits>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <mutex>
#include <thread>

#include "msldp/simulate.hpp"

namespace msldp {

void RunningMoments::add(double x) {
  ++n;
  const double d = x - mean;
  mean += d / static_cast<double>(n);
  m2 += d * (x - mean);
}

void RunningMoments::merge(const RunningMoments& other) {
  if (other.n == 0) return;
  if (n == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n), nb = static_cast<double>(other.n);
  const double total = na + nb;
  const double d = other.mean - mean;
  mean += d * nb / total;
  m2 += other.m2 + d * d * na * nb / total;
  n += other.n;
}

std::string scheme_name(Scheme s) { return s == Scheme::Standard ? "standard" : "IS"; }

void finalize_report(EstimatorReport& r) {
  r.N = r.moments.n;
  r.mean = r.moments.mean;
  r.variance = r.moments.variance();
  const double se = r.N > 0 ? std::sqrt(r.variance / static_cast<double>(r.N)) : 0.0;
  r.rel_err = r.mean != 0.0 ? se / std::fabs(r.mean) : std::numeric_limits<double>::infinity();
  r.ci_lo = r.mean - 1.959963984540054 * se;
  r.ci_hi = r.mean + 1.959963984540054 * se;
  r.minus_eps_log_mean = r.mean > 0.0 ? -r.eps * std::log(r.mean) : std::numeric_limits<double>::quiet_NaN();
}

namespace {

// Each zero stands for a value below the smallest subnormal.
void check_underflow(const EstimatorReport& r) {
  if (r.underflows == 0) return;
  const double bound = static_cast<double>(r.underflows) * std::numeric_limits<double>::denorm_min() /
                       static_cast<double>(r.N);
  if (!(r.mean * 1e-12 > bound)) {
    throw McError("estimate: sample " + std::to_string(r.first_underflow) + " is zero (underflow), " +
                      std::to_string(r.underflows) + " of " + std::to_string(r.N) + " samples underflowed",
                  r.first_underflow);
  }
}

}  // namespace

EstimatorReport merge_reports(const EstimatorReport& a, const EstimatorReport& b) {
  if (a.scheme != b.scheme || a.eps != b.eps || a.seed != b.seed || a.steps != b.steps) {
    throw McError("merge_reports: reports describe different problems", -1);
  }
  EstimatorReport out = a;
  out.moments.merge(b.moments);
  out.first_stream = std::min(a.first_stream, b.first_stream);
  out.underflows = a.underflows + b.underflows;
  out.first_underflow = a.first_underflow < 0 ? b.first_underflow
                        : b.first_underflow < 0 ? a.first_underflow
                                                : std::min(a.first_underflow, b.first_underflow);
  out.wall_seconds = a.wall_seconds + b.wall_seconds;
  finalize_report(out);
  return out;
}

EstimatorReport estimate(const MultiscaleModel& model, const PathFunctional& h, const McOptions& options,
                         const ControlField* control) {
  if (options.N < 1) throw McError("estimate: N must be positive", -1);
  if (h.dim() != model.dim()) throw McError("estimate: functional dimension does not match the model", -1);
  if (options.scheme == Scheme::Importance && !control) {
    throw McError("estimate: importance sampling needs a control", -1);
  }
  const auto start = std::chrono::steady_clock::now();
  std::optional<FeedbackControl> feedback;
  if (options.scheme == Scheme::Importance) {
    feedback.emplace(*control, options.eps, model.scaling().delta(options.eps));
  }

  SimulationOptions base;
  base.eps = options.eps;
  base.T = options.T;
  base.dt = options.dt;
  base.dt_divisor = options.dt_divisor;
  base.seed = options.seed;
  base.record_every = INT_MAX;
  const auto [steps, dt] = time_grid(model, base);

  constexpr long block = 64;
  const long blocks = (options.N + block - 1) / block;
  struct Underflows {
    long count = 0;
    long first = -1;
  };
  std::vector<RunningMoments> partial(blocks);
  std::vector<Underflows> zeros(blocks);
  std::atomic<long> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  long failure_index = LONG_MAX;

  auto worker = [&] {
    for (long b = next++; b < blocks; b = next++) {
      RunningMoments m;
      Underflows tally;
      const long end = std::min(options.N, (b + 1) * block);
      for (long k = b * block; k < end; ++k) {
        try {
          SimulationOptions so = base;
          so.stream = options.first_stream + static_cast<std::uint64_t>(k);
          double running = 0.0;
          StepObserver obs;
          if (h.has_running()) {
            obs = [&](double, double step, const double* x, const double*, const double*) {
              running += h.running(x) * step;
            };
          }
          DiscretePath p = simulate(model, so, feedback ? &*feedback : nullptr, obs);
          const double hv = running + h.terminal(p.state(p.size() - 1).data());
          const double sample = std::exp(-hv / options.eps + p.logweight);
          if (!std::isfinite(sample)) {
            throw McError("estimate: sample " + std::to_string(k) + " is " + (std::isnan(sample) ? "NaN" : "infinite") +
                              " (h = " + std::to_string(hv) + ", logweight = " + std::to_string(p.logweight) + ")",
                          k);
          }
          if (sample == 0.0) {
            if (tally.count++ == 0) tally.first = k;
          }
          m.add(sample);
        } catch (...) {
          std::exception_ptr err = std::current_exception();
          try {
            throw;
          } catch (const McError&) {
          } catch (const std::exception& e) {
            err = std::make_exception_ptr(McError("estimate: sample " + std::to_string(k) + ": " + e.what(), k));
          }
          std::lock_guard lock(failure_mutex);
          if (k < failure_index) {
            failure_index = k;
            failure = err;
          }
          next = blocks;
          return;
        }
      }
      partial[b] = m;
      zeros[b] = tally;
    }
  };

  int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = static_cast<int>(std::clamp<long>(threads, 1, blocks));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  EstimatorReport r;
  r.scheme = options.scheme;
  r.eps = options.eps;
  r.seed = options.seed;
  r.first_stream = options.first_stream;
  r.steps = steps;
  r.dt = dt;
  for (long b = 0; b < blocks; ++b) {
    r.moments.merge(partial[b]);
    if (zeros[b].count > 0 && r.first_underflow < 0) r.first_underflow = zeros[b].first;
    r.underflows += zeros[b].count;
  }
  finalize_report(r);
  check_underflow(r);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

double slope_half_width(const EstimatorReport& r) { return 1.959963984540054 * r.eps * r.rel_err; }

int LadderReport::trend_direction() const {
  if (rows.size() < 2) return 0;
  const double diff = rows.back().minus_eps_log_mean - rows.front().minus_eps_log_mean;
  return diff > 0 ? 1 : diff < 0 ? -1 : 0;
}

double LadderReport::worst_reversal() const {
  const int dir = trend_direction();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    const double step = rows[k + 1].minus_eps_log_mean - rows[k].minus_eps_log_mean;
    const double against = dir >= 0 ? -step : step;
    worst = std::max(worst, against - slope_half_width(rows[k]) - slope_half_width(rows[k + 1]));
  }
  return worst;
}

LadderReport ldp_slope(const MultiscaleModel& model, const PathFunctional& h, const std::vector<double>& ladder,
                       const McOptions& options, const ControlField* control, std::optional<double> reference) {
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (!(ladder[k] > 0.0)) throw McError("ldp_slope: eps values must be positive", -1);
    if (k > 0 && !(ladder[k] < ladder[k - 1])) throw McError("ldp_slope: eps ladder must be descending", -1);
  }
  LadderReport out;
  out.reference = reference;
  for (double eps : ladder) {
    McOptions o = options;
    o.eps = eps;
    out.rows.push_back(estimate(model, h, o, control));
  }
  return out;
}

}  // namespace msldp
