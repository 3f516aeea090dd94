#include "msldp/pathopt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

namespace msldp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const PathProblem& p) {
  if (!(p.T > 0.0)) throw PathOptError("path problem: T must be positive");
  if (p.M < 2) throw PathOptError("path problem: M must be at least 2");
  if (p.x0.empty()) throw PathOptError("path problem: x0 is empty");
  if (p.x1 && p.x1->size() != p.x0.size()) throw PathOptError("path problem: x1 dimension differs from x0");
  if (p.h && p.h->dim() != static_cast<int>(p.x0.size())) {
    throw PathOptError("path problem: functional dimension differs from x0");
  }
}

// Rate of interval k times dt plus the running cost at its left knot.
double interval_cost(const PathProblem& p, const RateEvaluator& rate, const DiscretePath& path, std::size_t k,
                     std::vector<double>& mid, std::vector<double>& vel) {
  const int d = path.dim;
  const double dt = path.times[k + 1] - path.times[k];
  auto a = path.state(k);
  auto b = path.state(k + 1);
  for (int i = 0; i < d; ++i) {
    mid[i] = 0.5 * (a[i] + b[i]);
    vel[i] = (b[i] - a[i]) / dt;
  }
  double l;
  try {
    l = rate(mid, vel);
  } catch (const std::exception&) {
    return kInf;
  }
  if (!std::isfinite(l)) return kInf;
  double cost = dt * l;
  if (p.h) cost += dt * p.h->running(a.data());
  return cost;
}

double terminal_cost(const PathProblem& p, const DiscretePath& path) {
  return p.h ? p.h->terminal(path.state(path.size() - 1).data()) : 0.0;
}

// Objective terms that depend on knot j.
double local_cost(const PathProblem& p, const RateEvaluator& rate, const DiscretePath& path, std::size_t j,
                  std::vector<double>& mid, std::vector<double>& vel) {
  double c = 0.0;
  if (j > 0) c += interval_cost(p, rate, path, j - 1, mid, vel);
  if (j + 1 < path.size()) c += interval_cost(p, rate, path, j, mid, vel);
  else c += terminal_cost(p, path);
  return c;
}

std::size_t last_free(const PathProblem& p, std::size_t knots) { return p.x1 ? knots - 2 : knots - 1; }

}  // namespace

double path_objective(const PathProblem& problem, const RateEvaluator& rate, const DiscretePath& path) {
  std::vector<double> mid(path.dim), vel(path.dim);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    total += interval_cost(problem, rate, path, k, mid, vel);
    if (!std::isfinite(total)) return kInf;
  }
  return total + terminal_cost(problem, path);
}

std::vector<double> path_gradient(const PathProblem& problem, const RateEvaluator& rate, const DiscretePath& path,
                                  double fd_step, int threads) {
  const int d = path.dim;
  const std::size_t knots = path.size();
  std::vector<double> g(path.states.size(), 0.0);
  const std::size_t first = 1, last = last_free(problem, knots);
  auto work = [&](std::size_t j0, std::size_t j1) {
    DiscretePath local = path;
    std::vector<double> mid(d), vel(d);
    for (std::size_t j = j0; j < j1; ++j) {
      for (int i = 0; i < d; ++i) {
        double& x = local.states[j * d + i];
        const double x_orig = x;
        const double h = fd_step * (1.0 + std::fabs(x_orig));
        x = x_orig + h;
        const double up = local_cost(problem, rate, local, j, mid, vel);
        x = x_orig - h;
        const double down = local_cost(problem, rate, local, j, mid, vel);
        x = x_orig;
        g[j * d + i] = (up - down) / (2.0 * h);
      }
    }
  };
  if (last < first) return g;
  const std::size_t count = last - first + 1;
  const int workers = std::clamp<int>(threads, 1, static_cast<int>(count));
  if (workers == 1) {
    work(first, last + 1);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(work, first + count * w / workers, first + count * (w + 1) / workers);
    }
  }
  return g;
}

PathOptResult minimize_action(const PathProblem& problem, const RateEvaluator& rate, const PathOptOptions& options,
                              const DiscretePath* init) {
  validate(problem);
  const int d = static_cast<int>(problem.x0.size());
  DiscretePath x;
  if (init) {
    if (init->dim != d || init->size() != static_cast<std::size_t>(problem.M) + 1) {
      throw PathOptError("minimize_action: initial path does not match the problem grid");
    }
    x = *init;
    std::copy(problem.x0.begin(), problem.x0.end(), x.state(0).begin());
    if (problem.x1) std::copy(problem.x1->begin(), problem.x1->end(), x.state(x.size() - 1).begin());
  } else {
    x = straight_path(problem.x0, problem.x1 ? *problem.x1 : problem.x0, problem.T, problem.M);
  }

  PathOptResult out;
  double value = path_objective(problem, rate, x);
  if (!std::isfinite(value)) throw PathOptError("minimize_action: objective is not finite on the initial path");
  out.history.push_back(value);
  std::vector<double> g = path_gradient(problem, rate, x, options.fd_step, options.threads);
  auto inf_norm = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::fabs(e));
    return m;
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };

  double gnorm = inf_norm(g);
  double step = gnorm > 0.0 ? std::min(1.0, 1e-2 / gnorm) : 1.0;
  int it = 0;
  DiscretePath trial = x;
  for (; it < options.max_iterations; ++it) {
    if (gnorm <= options.gradient_tol * (1.0 + std::fabs(value))) {
      out.converged = true;
      break;
    }
    const double g2 = dot(g, g);
    double t = step, trial_value = kInf;
    bool accepted = false;
    for (int bt = 0; bt <= options.max_backtracks; ++bt, t *= 0.5) {
      for (std::size_t i = 0; i < x.states.size(); ++i) trial.states[i] = x.states[i] - t * g[i];
      trial_value = path_objective(problem, rate, trial);
      if (trial_value <= value - options.armijo * t * g2) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no descent possible at this gradient accuracy
    std::vector<double> g_new = path_gradient(problem, rate, trial, options.fd_step, options.threads);
    // Barzilai-Borwein: s.s / s.y with s = -t g, y = g_new - g
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = -t * g[i];
      ss += s * s;
      sy += s * (g_new[i] - g[i]);
    }
    step = sy > 0.0 ? ss / sy : 2.0 * t;
    std::swap(x.states, trial.states);
    value = trial_value;
    g = std::move(g_new);
    gnorm = inf_norm(g);
    out.history.push_back(value);
  }
  if (!out.converged && gnorm <= options.gradient_tol * (1.0 + std::fabs(value))) out.converged = true;

  out.path = x;
  out.schedule = schedule_from_path(x);
  out.value = value;
  out.action = action(x, rate);
  out.gradient_norm = gnorm;
  out.iterations = it;
  return out;
}

void write_path_velocity_csv(std::ostream& os, const PathOptResult& result) {
  const auto& p = result.path;
  auto num = [&os](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    os.write(buf, res.ptr - buf);
  };
  os << 't';
  for (int i = 1; i <= p.dim; ++i) os << ",x_" << i;
  for (int i = 1; i <= p.dim; ++i) os << ",v_" << i;
  os << '\n';
  for (std::size_t k = 0; k < p.size(); ++k) {
    num(p.times[k]);
    for (double v : p.state(k)) os << ',', num(v);
    for (int i = 0; i < p.dim; ++i) {
      os << ',';
      if (k + 1 < p.size()) num(result.schedule.velocity(k)[i]);
    }
    os << '\n';
  }
}

}  // namespace msldp
