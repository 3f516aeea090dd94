#include <catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <random>

#include "model_fixtures.hpp"
#include "msldp/homogenize.hpp"
#include "oracles/quadrature.hpp"

using namespace msldp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double Q2(double y) { return std::cos(2 * M_PI * y) + std::sin(2 * M_PI * y); }

}  // namespace

TEST_CASE("centering: gradient drift, constant drift, zero drift") {
  auto grad = build_model(fixtures::langevin("cos(2*pi*y)+sin(2*pi*y)"));
  CHECK(check_centering(grad, {0.0}).residual <= 1e-9);
  auto constant = build_model(fixtures::one_dim("1", "0", "1"));
  auto bad = check_centering(constant, {0.0});
  CHECK_THAT(bad.residual, WithinAbs(1.0, 1e-12));
  CHECK_FALSE(bad.pass);
  CHECK_THROWS_AS(solve_cell_problem(constant, {0.0}), NumericalError);
  auto zero = build_model(fixtures::one_dim("0", "0", "1"));
  auto ok = check_centering(zero, {0.0});
  CHECK(ok.residual == 0.0);
  CHECK(ok.pass);
}

TEST_CASE("zero drift gives zero corrector") {
  auto m = build_model(fixtures::one_dim("0", "0", "1.3"));
  auto cell = solve_cell_problem(m, {0.0});
  CHECK(cell.chi[0].lpNorm<Eigen::Infinity>() == 0.0);
  CHECK_THAT(cell.q(0, 0), WithinRel(1.69, 1e-14));
}

TEST_CASE("1-D Langevin corrector matches exp(Q/D)/Zhat") {
  auto m = build_model(fixtures::langevin("cos(2*pi*y)+sin(2*pi*y)"));
  auto t0 = std::chrono::steady_clock::now();
  auto cell = solve_cell_problem(m, {0.0}, {.n = 512});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double zhat = oracle::integrate([](double y) { return std::exp(Q2(y)); }, 0, 1);
  double worst = 0.0;
  for (int i = 0; i < cell.grid.size(); ++i) {
    const double exact = std::exp(Q2(cell.grid.node(i, 0))) / zhat;
    worst = std::max(worst, std::fabs((1 + cell.dchi[0][i]) / exact - 1));
  }
  INFO("max relative error " << worst << ", " << secs << " s");
  CHECK(worst <= 1e-6);
  CHECK(secs < 1.0);
  CHECK(std::fabs(quadrature(cell.grid, cell.mu) - 1) <= 1e-10);
  CHECK(cell.mu.minCoeff() > 0);
  CHECK(cell.chi_mean_residual <= 1e-9);
}

TEST_CASE("effective diffusivity against Bessel and quadrature oracles") {
  {
    auto m = build_model(fixtures::langevin("cos(2*pi*y)"));
    auto cell = solve_cell_problem(m, {0.0});
    const double i0 = oracle::bessel_i0(1.0);
    CHECK_THAT(cell.q(0, 0), WithinAbs(2 / (i0 * i0), 1e-6));
    CHECK_THAT(cell.q(0, 0), WithinAbs(1.2477, 1e-4));
  }
  {
    auto m = build_model(fixtures::langevin("cos(2*pi*y)+sin(2*pi*y)"));
    auto cell = solve_cell_problem(m, {0.0});
    const double Z = oracle::integrate([](double y) { return std::exp(-Q2(y)); }, 0, 1);
    const double Zh = oracle::integrate([](double y) { return std::exp(Q2(y)); }, 0, 1);
    CHECK_THAT(cell.q(0, 0), WithinAbs(2 / (Z * Zh), 1e-8));
    CHECK_THAT(cell.q(0, 0), WithinAbs(0.8155, 1e-4));
  }
  {
    // Q = 0: r = -V', q = 2D
    auto m = build_model(fixtures::langevin("0", "1.5*(x^2-1)^2", 0.7));
    auto cell = solve_cell_problem(m, {0.4});
    CHECK_THAT(cell.r[0], WithinAbs(-6 * 0.4 * (0.16 - 1), 1e-12));
    CHECK_THAT(cell.q(0, 0), WithinAbs(1.4, 1e-12));
  }
}

TEST_CASE("D scaling and user periods") {
  auto spec = fixtures::langevin("cos(y)", "0", 0.5);
  spec.period = {2 * M_PI};
  auto cell = solve_cell_problem(build_model(spec), {0.0});
  const double i0 = oracle::bessel_i0(2.0);
  CHECK_THAT(cell.q(0, 0), WithinAbs(2 * 0.5 / (i0 * i0), 1e-8));
}

TEST_CASE("separable closed form") {
  auto zero = separable_effective_diffusivity({expr::parse("0"), expr::parse("0")}, 1.5);
  CHECK(zero.theta.isApprox(Eigen::VectorXd::Ones(2)));
  CHECK(zero.q.isApprox(3.0 * Eigen::MatrixXd::Identity(2, 2)));
  auto one = separable_effective_diffusivity({expr::parse("cos(2*pi*y)")}, 1.0);
  CHECK_THAT(one.theta[0], WithinAbs(1 / std::pow(oracle::bessel_i0(1.0), 2), 1e-12));
  CHECK_THAT(one.theta[0], WithinAbs(0.62386, 1e-5));

  const expr::Expression V = expr::parse("1.5*(x^2-1)^2");
  auto withV = separable_effective_diffusivity({expr::parse("cos(2*pi*y)")}, 1.0, {}, &V);
  Eigen::VectorXd x(1);
  x << 0.3;
  CHECK_THAT(withV.r(x)[0], WithinRel(-one.theta[0] * 6 * 0.3 * (0.09 - 1), 1e-14));

  // diagonal of q never exceeds 2D
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 50; ++k) {
    std::string q = std::to_string(u(rng)) + "*cos(2*pi*y)+" + std::to_string(u(rng)) + "*sin(4*pi*y)+" +
                    std::to_string(u(rng)) + "*cos(6*pi*y)";
    const double D = 0.3 + std::fabs(u(rng));
    auto res = separable_effective_diffusivity({expr::parse(q)}, D);
    CHECK(res.q(0, 0) <= 2 * D * (1 + 1e-14));
    CHECK(res.theta[0] > 0);
    CHECK(res.theta[0] <= 1 + 1e-14);
  }
}

TEST_CASE("grid solve agrees with the separable closed form in 2-D") {
  ModelSpec spec;
  spec.dim = 2;
  spec.definitions = {{"Q", "cos(2*pi*y_1)+0.5*sin(2*pi*y_2)"}};
  spec.b = {"-diff(Q, y_1)", "-diff(Q, y_2)"};
  spec.c = {"0", "0"};
  spec.sigma = {"sqrt(2)", "0", "0", "sqrt(2)"};
  spec.x0 = {0.0, 0.0};
  auto m = build_model(spec);
  auto t0 = std::chrono::steady_clock::now();
  auto cell = solve_cell_problem(m, {0.0, 0.0}, {.n = 64, .order = 8});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto sep = separable_effective_diffusivity({expr::parse("cos(2*pi*y)"), expr::parse("0.5*sin(2*pi*y)")}, 1.0);
  INFO("theta " << sep.theta.transpose() << " grid q/2 " << cell.q.diagonal().transpose() / 2 << " in " << secs
                << " s");
  CHECK(std::fabs(cell.q(0, 0) / 2 - sep.theta[0]) <= 1e-8);
  CHECK(std::fabs(cell.q(1, 1) / 2 - sep.theta[1]) <= 1e-8);
  CHECK(std::fabs(cell.q(0, 1)) <= 1e-10);

  // corrector separates: chi_1 depends on y_1 only and matches the 1-D solve
  auto m1 = build_model(fixtures::langevin("cos(2*pi*y)"));
  auto cell1 = solve_cell_problem(m1, {0.0}, {.n = 64, .order = 8});
  double worst = 0.0;
  for (int i = 0; i < cell.grid.size(); ++i) {
    worst = std::max(worst, std::fabs(cell.chi[0][i] - cell1.chi[0][cell.grid.multi_index(i)[0]]));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("cell residual and discrete invariants") {
  auto m = build_model(fixtures::langevin("cos(2*pi*y)+0.3*sin(6*pi*y)"));
  auto cell = solve_cell_problem(m, {0.0}, {.n = 256, .order = 2});
  CHECK(cell.cell_residual <= 1e-8);
  CHECK(cell.chi_mean_residual <= 1e-9);
  CHECK((cell.q - cell.q.transpose()).norm() <= 1e-12);
  // continuous cell residual of the discrete solution decays at second order
  std::vector<double> errs;
  for (int n : {64, 128, 256}) {
    auto c = solve_cell_problem(m, {0.0}, {.n = n, .order = 2});
    auto exact = solve_cell_problem(m, {0.0}, {.n = n, .order = 8});
    errs.push_back((c.dchi[0] - exact.dchi[0]).lpNorm<Eigen::Infinity>());
  }
  CHECK_THAT(errs[0] / errs[1], WithinAbs(4.0, 0.4));
  CHECK_THAT(errs[1] / errs[2], WithinAbs(4.0, 0.4));
}

TEST_CASE("homogenized model: shared cell and x-lattice interpolation") {
  auto shared = HomogenizedModel(build_model(fixtures::langevin("cos(2*pi*y)", "1.5*(x^2-1)^2")));
  CHECK(shared.shared_cell());
  const double theta = 1 / std::pow(oracle::bessel_i0(1.0), 2);
  for (double x : {-1.3, -0.2, 0.0, 0.77}) {
    CHECK_THAT(shared.r({x})[0], WithinAbs(-theta * 6 * x * (x * x - 1), 1e-8));
  }

  // x-dependent diffusion: q(x) = 2 D(x) / (Z Zhat) with D(x) = 1 + x^2/4 entering both b and sigma
  ModelSpec spec = fixtures::langevin("cos(2*pi*y)", "0");
  spec.constants.clear();
  spec.definitions["D"] = "1+x^2/4";
  spec.b = {"-diff(Q, y)"};
  spec.sigma = {"sqrt(2*D)"};
  spec.definitions["Q"] = "D*cos(2*pi*y)";
  auto lat = HomogenizedModel(build_model(spec), {.n = 256}, {{-1.0, 1.0, 21}});
  CHECK_FALSE(lat.shared_cell());
  for (double x : {-0.95, -0.3, 0.0, 0.51}) {
    const double D = 1 + x * x / 4;
    const double exact = 2 * D / std::pow(oracle::bessel_i0(1.0), 2);
    CHECK_THAT(lat.q({x})(0, 0), WithinAbs(exact, 2e-3));
  }
  CHECK_THROWS_AS(lat.q({1.5}), std::out_of_range);
  double dchi = 0.0;
  const double x = 0.0, y = 0.25;
  lat.dchi(&x, &y, &dchi);
  CHECK_THAT(1 + dchi, WithinAbs(std::exp(std::cos(2 * M_PI * y)) / oracle::bessel_i0(1.0), 1e-4));
}
