#include "selftest.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "msldp/homogenize.hpp"
#include "msldp/mc.hpp"
#include "msldp/pathopt.hpp"
#include "msldp/ratefn.hpp"

namespace msldp::cli {

namespace {

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14);
}

ModelSpec langevin(const std::string& Q, const std::string& V) {
  ModelSpec s;
  s.definitions = {{"Q", Q}, {"V", V}};
  s.b = {"-diff(Q, y)"};
  s.c = {"-diff(V, x)"};
  s.sigma = {"sqrt(2)"};
  s.x0 = {-1.0};
  return s;
}

ModelSpec one_dim(const std::string& b, const std::string& c, const std::string& sigma, double a) {
  ModelSpec s;
  s.b = {b};
  s.c = {c};
  s.sigma = {sigma};
  s.x0 = {0.0};
  s.a = a;
  return s;
}

struct Check {
  const char* name;
  std::function<std::pair<bool, std::string>()> run;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

int run_selftest(std::ostream& out) {
  const std::vector<Check> checks = {
      {"cell problem 1+chi' = e^Q / Zhat",
       [] {
         HomogenizedModel hom(build_model(langevin("cos(2*pi*y)+sin(2*pi*y)", "0")));
         auto Q = [](double y) { return std::cos(2 * M_PI * y) + std::sin(2 * M_PI * y); };
         const double zhat = integrate([&](double y) { return std::exp(Q(y)); }, 0, 1);
         const auto& cell = hom.cell({0.0});
         double worst = 0.0;
         for (int j = 0; j < cell.grid.size(); ++j) {
           const double y = cell.grid.node(j, 0);
           const double expect = std::exp(Q(y)) / zhat;
           worst = std::max(worst, std::fabs(1 + cell.dchi[0][j] - expect) / expect);
         }
         return std::pair{worst <= 1e-6, "max rel err " + fmt(worst)};
       }},
      {"effective diffusivity q = 2 / I0(1)^2",
       [] {
         HomogenizedModel hom(build_model(langevin("cos(2*pi*y)", "0")));
         const double i0 = std::cyl_bessel_i(0.0, 1.0);
         const double q = hom.q({0.0})(0, 0);
         const double err = std::fabs(q - 2 / (i0 * i0));
         return std::pair{err <= 1e-6, "q " + fmt(q) + " err " + fmt(err)};
       }},
      {"Regime 2 constant coefficients L = beta^2 / (2 sigma^2)",
       [] {
         auto m = build_model(one_dim("0", "0", "1.4", 1.0));
         const double l = local_rate_r2(m, {0.0}, 0.9, 1.0).value;
         const double err = std::fabs(l - 0.81 / (2 * 1.96));
         return std::pair{err <= 1e-8, "L " + fmt(l) + " err " + fmt(err)};
       }},
      {"Regime 3 c = 0 closed form",
       [] {
         auto m = build_model(one_dim("sin(2*pi*y)", "0", "1+0.5*cos(2*pi*y)", 0.5));
         const double inv = integrate([](double y) { return 1 / (1 + 0.5 * std::cos(2 * M_PI * y)); }, 0, 1);
         const double l = local_rate_r3(m, {0.0}, 1.3).value;
         const double err = std::fabs(l - 0.5 * 1.69 * inv * inv);
         return std::pair{err <= 1e-8, "L " + fmt(l) + " err " + fmt(err)};
       }},
      {"double-well quasipotential >= 1.5 within 5%",
       [] {
         HomogenizedModel hom(build_model(langevin("0", "1.5*(x^2-1)^2")));
         PathProblem p;
         p.T = 8.0;
         p.M = 64;
         p.x0 = {-1.0};
         p.x1 = std::vector<double>{0.0};
         auto res = minimize_action(p, rate_evaluator(hom));
         const bool ok = res.converged && res.value >= 1.5 && res.value <= 1.575;
         return std::pair{ok, "value " + fmt(res.value)};
       }},
      {"Brownian Laplace functional",
       [] {
         auto spec = langevin("0", "0");
         spec.a = 0.5;
         auto m = build_model(spec);
         FunctionalSpec fs;
         fs.kind = FunctionalSpec::Kind::Terminal;
         fs.expression = "(x-1)^2";
         McOptions o;
         o.eps = 0.25;
         o.N = 4000;
         o.threads = 1;
         auto r = estimate(m, PathFunctional(1, fs), o);
         const double exact = std::exp(-4.0 / (o.eps * 5.0)) / std::sqrt(5.0);
         const double z = std::fabs(r.mean - exact) / (r.rel_err * r.mean);
         return std::pair{z <= 3.0, "mean " + fmt(r.mean) + " exact " + fmt(exact) + " z " + fmt(z)};
       }},
  };
  int failures = 0;
  for (const auto& c : checks) {
    bool ok = false;
    std::string detail;
    try {
      std::tie(ok, detail) = c.run();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    out << (ok ? "PASS  " : "FAIL  ") << c.name << "  (" << detail << ")\n";
    failures += ok ? 0 : 1;
  }
  return failures;
}

}  // namespace msldp::cli
