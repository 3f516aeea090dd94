#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "model_fixtures.hpp"
#include "msldp/simulate.hpp"

using namespace msldp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MultiscaleModel with_scaling(ModelSpec spec, double a, double kappa, std::vector<double> x0) {
  spec.a = a;
  spec.kappa = kappa;
  spec.x0 = std::move(x0);
  return build_model(spec);
}

struct Moments {
  double mean = 0, var = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= v.size();
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= (v.size() - 1);
  return m;
}

}  // namespace

TEST_CASE("time grid respects the fast-scale rule") {
  auto m = with_scaling(fixtures::one_dim("0", "0", "1"), 2.0, 1.0, {0.0});
  SimulationOptions o;
  o.eps = 0.1;  // delta = 0.01, delta^2/10 = 1e-5
  o.T = 0.01;
  auto [steps, dt] = time_grid(m, o);
  CHECK(steps == 1000);
  CHECK_THAT(dt, WithinRel(1e-5, 1e-12));
  o.dt = 2e-5;
  CHECK_THROWS_AS(time_grid(m, o), SimulationError);
  o.dt = 3e-6;
  CHECK_THROWS_AS(time_grid(m, o), SimulationError);  // not a divisor of T
}

TEST_CASE("degenerate and zero-control runs") {
  ModelSpec still = fixtures::one_dim("0", "0", "0");
  still.nu = 0.0;
  auto m = with_scaling(still, 1.0, 1.0, {0.7});
  SimulationOptions o;
  o.eps = 0.5;
  o.T = 1.0;
  auto p = simulate(m, o);
  for (std::size_t k = 0; k < p.size(); ++k) CHECK(p.state(k)[0] == 0.7);
  CHECK(p.logweight == 0.0);

  auto ou = with_scaling(fixtures::one_dim("sin(2*pi*y)", "-x", "1"), 1.0, 1.0, {0.3});
  FeedbackControl zero = bind_feedback(zero_control(1), 0.5, 0.5);
  auto z = simulate(ou, o, &zero);
  CHECK(z.logweight == 0.0);
  auto plain = simulate(ou, o);
  CHECK(z.states == plain.states);  // the zero control leaves the noise stream untouched
}

TEST_CASE("determinism and stream independence") {
  auto m = with_scaling(fixtures::one_dim("sin(2*pi*y)", "-x", "1"), 1.0, 1.0, {0.3});
  SimulationOptions o;
  o.eps = 0.5;
  o.T = 0.5;
  o.seed = 42;
  o.stream = 3;
  auto a = simulate(m, o);
  auto b = simulate(m, o);
  CHECK(a.states == b.states);
  o.stream = 4;
  auto c = simulate(m, o);
  CHECK(a.states != c.states);
  o.record_every = 7;
  o.stream = 3;
  auto thin = simulate(m, o);
  CHECK(thin.states.back() == a.states.back());
  CHECK(thin.times.back() == 0.5);
}

TEST_CASE("Ornstein-Uhlenbeck moments") {
  // b = 0, c = -x, sigma = sqrt 2, eps = 1: X_1 ~ N(e^{-1} x0, 1 - e^{-2})
  auto m = with_scaling(fixtures::one_dim("0", "-x", "sqrt(2)"), 1.0, 1.0, {1.0});
  SimulationOptions o;
  o.eps = 1.0;
  o.T = 1.0;
  o.dt = 0.002;
  o.seed = 7;
  o.record_every = 500;
  const int N = 100000;
  std::vector<double> xs(N);
  for (int k = 0; k < N; ++k) {
    o.stream = k;
    xs[k] = simulate(m, o).states.back();
  }
  auto mo = moments(xs);
  const double mean = std::exp(-1.0), var = 1 - std::exp(-2.0);
  const double se_mean = std::sqrt(var / N);
  const double se_var = var * std::sqrt(2.0 / (N - 1));
  INFO("mean " << mo.mean << " var " << mo.var);
  CHECK(std::fabs(mo.mean - mean) <= 3 * se_mean);
  CHECK(std::fabs(mo.var - var) <= 3 * se_var);
}

TEST_CASE("Girsanov reweighting is unbiased") {
  auto m = with_scaling(fixtures::langevin("cos(2*pi*y)", "0.5*x^2"), 1.0, 1.0, {-0.5});
  SimulationOptions o;
  o.eps = 0.5;
  o.T = 1.0;
  o.dt = 0.005;
  o.record_every = 200;
  ControlField push(Regime::One, 1, {}, [](double t, const double* x, const double*, double* u) {
    u[0] = 0.8 - 0.3 * x[0] + 0.2 * t;
  });
  FeedbackControl ctl = bind_feedback(push, 0.5, 0.5);
  const int N = 10000;
  std::vector<double> plain(N), weighted(N);
  auto F = [](double x) { return 1.0 / (1.0 + std::exp(-4 * (x - 0.5))); };
  for (int k = 0; k < N; ++k) {
    o.stream = k;
    o.seed = 11;
    plain[k] = F(simulate(m, o).states.back());
    o.seed = 12;
    auto p = simulate(m, o, &ctl);
    weighted[k] = F(p.states.back()) * std::exp(p.logweight);
    CHECK(std::isfinite(p.logweight));
  }
  auto a = moments(plain), b = moments(weighted);
  const double se = std::sqrt(a.var / N + b.var / N);
  INFO("plain " << a.mean << " weighted " << b.mean << " se " << se);
  CHECK(std::fabs(a.mean - b.mean) <= 3 * se);
}

TEST_CASE("strong convergence under dt halving") {
  // multiplicative noise: order 1/2 band
  auto m = with_scaling(fixtures::one_dim("0", "-x", "1+0.5*sin(x)"), 0.5, 1.0, {0.5});
  const double eps = 1.0, T = 1.0;
  const int fine = 2048;
  std::vector<double> errs(2, 0.0);
  const int paths = 200;
  for (int p = 0; p < paths; ++p) {
    auto rng = trajectory_rng(5, p);
    std::normal_distribution<double> nd;
    std::vector<double> dW(fine);
    for (double& w : dW) w = std::sqrt(T / fine) * nd(rng);
    SimulationOptions o;
    o.eps = eps;
    o.T = T;
    o.dt = T / fine;
    const double ref = simulate_with_increments(m, o, dW).states.back();
    for (int level = 0; level < 2; ++level) {
      const int steps = 16 << level;
      const int agg = fine / steps;
      std::vector<double> coarse(steps, 0.0);
      for (int k = 0; k < fine; ++k) coarse[k / agg] += dW[k];
      o.dt = T / steps;
      errs[level] += std::fabs(simulate_with_increments(m, o, coarse).states.back() - ref) / paths;
    }
  }
  const double ratio = errs[0] / errs[1];
  INFO("strong errors " << errs[0] << " " << errs[1] << " ratio " << ratio);
  CHECK(ratio > 1.2);
  CHECK(ratio < 2.5);
}

TEST_CASE("non-finite states are reported with the step") {
  auto m = with_scaling(fixtures::one_dim("0", "x^3", "1"), 0.01, 1.0, {2.0});
  SimulationOptions o;
  o.eps = 1e-6;
  o.T = 10.0;
  o.dt = 0.05;  // delta = eps^0.01 ~ 0.87, so dt stays under delta^2/10
  try {
    simulate(m, o);
    FAIL("expected SimulationError");
  } catch (const SimulationError& e) {
    CHECK(e.step() > 0);
    CHECK(e.step() < 20);
  }
}

TEST_CASE("occupation measure: mass, constant control, circle distance") {
  auto m = with_scaling(fixtures::langevin("cos(2*pi*y)"), 2.0, 1.0, {0.0});
  const double eps = 0.25;  // delta = 1/16
  ControlField constant(Regime::One, 1, {}, [](double, const double*, const double*, double* u) { u[0] = 1.3; });
  FeedbackControl ctl = bind_feedback(constant, eps, m.scaling().delta(eps));
  SimulationOptions o;
  o.eps = eps;
  o.T = 2.0;
  o.seed = 3;
  OccupationAccumulator acc(1, o.T, eps, {1.0}, {});
  auto path = simulate(m, o, &ctl, acc.observer());
  const auto& occ = acc.result();
  const double window = std::sqrt(eps);
  for (double t : {0.5, 1.0, 1.5, 2.0}) CHECK(std::fabs(occ.mass_until(t) - t) <= 2 * window);
  CHECK_THAT(occ.mass_until(1.0), WithinAbs(1.0, 1e-6));
  auto z = occ.z_marginal();
  const int bin = static_cast<int>((1.3 + 4.0) / 8.0 * 33);
  CHECK_THAT(z[bin], WithinAbs(1.0, 1e-12));

  // recomputation from the recorded path agrees with the streaming accumulator
  std::vector<double> controls(path.size() - 1, 1.3);
  auto again = occupation_measure(m, path, controls, eps);
  CHECK(wasserstein1_circle(again.y_marginal(), occ.y_marginal()) <= 1e-12);

  std::vector<double> p(32, 0.0), q(32, 0.0), r(32, 0.0);
  p[0] = q[8] = r[24] = 1.0;
  CHECK_THAT(wasserstein1_circle(p, q), WithinAbs(0.25, 1e-14));
  CHECK_THAT(wasserstein1_circle(p, r), WithinAbs(0.25, 1e-14));
  CHECK(wasserstein1_circle(p, p) == 0.0);
}

TEST_CASE("path CSV") {
  DiscretePath p = straight_path({0.0, 1.0}, {1.0, 1.0}, 1.0, 2);
  std::ostringstream os;
  write_path_csv(os, p);
  CHECK(os.str() == "t,x_1,x_2,logweight\n0,0,1,0\n0.5,0.5,1,0\n1,1,1,0\n");
}
