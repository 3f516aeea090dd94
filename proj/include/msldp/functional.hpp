#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "msldp/expr.hpp"
#include "msldp/path.hpp"

namespace msldp {

class FunctionalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Built-in path functionals h(phi) = int_0^T g(phi_t) dt + F(phi_T).
struct FunctionalSpec {
  enum class Kind { Constant, Terminal, Running, Indicator };
  Kind kind = Kind::Constant;
  double value = 0.0;          // Constant: h = value
  std::string expression;      // Terminal: F(x); Running: g(x). Variables x (d = 1) or x_1..x_d
  expr::Bindings constants;
  // Indicator: h = height * (1 - prod_i s_i(x_i(T))), s_i a C-infinity plateau equal to 1 on
  // [lo_i, hi_i] and to 0 outside [lo_i - width, hi_i + width].
  std::vector<double> lo, hi;
  double width = 0.1;
  double height = 1.0;
};

class PathFunctional {
 public:
  PathFunctional(int dim, const FunctionalSpec& spec);

  int dim() const { return dim_; }
  const FunctionalSpec& spec() const { return spec_; }
  bool has_running() const { return spec_.kind == FunctionalSpec::Kind::Running; }

  /// Running-cost density g(x) (zero unless Running).
  double running(const double* x) const;
  /// Terminal part F(x) (the constant for Constant, zero for Running).
  double terminal(const double* x) const;
  /// Left-point rule for the running part over the stored knots, plus the terminal part.
  double operator()(const DiscretePath& path) const;

 private:
  int dim_;
  FunctionalSpec spec_;
  expr::Compiled compiled_;
};

/// C-infinity transition: 0 for z <= 0, 1 for z >= 1.
double smooth_step(double z);

}  // namespace msldp
