#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msldp/expr.hpp"

namespace msldp {

class ModelError : public std::runtime_error {
 public:
  enum class Code { Parse, Dimension, NotFinite, Nondegeneracy, NotPeriodic, Scaling, UnknownIdentifier };

  ModelError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Textual model description, as read from a config file.
struct ModelSpec {
  int dim = 1;
  std::vector<std::string> b;      // dim entries
  std::vector<std::string> c;      // dim entries
  std::vector<std::string> sigma;  // dim*dim entries, row-major
  std::vector<double> period;      // per y-direction, empty means all 1
  std::map<std::string, double, std::less<>> constants;
  std::map<std::string, std::string, std::less<>> definitions;  // named expressions, inlined before use

  double a = 2.0;
  double kappa = 1.0;
  std::optional<double> gamma;
  std::vector<double> x0;

  // sample checks
  double nu = 1e-8;
  int sample_n = 32;
  std::vector<double> x_lo;  // empty: x0 - 1
  std::vector<double> x_hi;  // empty: x0 + 1
};

/// Coefficients b, c, sigma as compiled expressions in user coordinates.
/// Evaluation slots are (x_1..x_d, y_1..y_d); y is in user units with period L_k.
class CoefficientField {
 public:
  CoefficientField() = default;
  CoefficientField(int dim, std::vector<expr::Expression> b, std::vector<expr::Expression> c,
                   std::vector<expr::Expression> sigma, std::vector<double> period, expr::Bindings constants);

  int dim() const { return dim_; }
  const std::vector<double>& period() const { return period_; }

  void b(const double* x, const double* y, double* out) const;
  void c(const double* x, const double* y, double* out) const;
  void sigma(const double* x, const double* y, double* out) const;  // dim*dim, row-major

  double b(int k, const double* xy) const { return b_[k](std::span<const double>(xy, 2 * dim_)); }
  double c(int k, const double* xy) const { return c_[k](std::span<const double>(xy, 2 * dim_)); }
  double sigma(int i, int j, const double* xy) const {
    return sigma_[i * dim_ + j](std::span<const double>(xy, 2 * dim_));
  }

  const expr::Expression& b_expr(int k) const { return b_src_[k]; }
  const expr::Expression& c_expr(int k) const { return c_src_[k]; }
  const expr::Expression& sigma_expr(int i, int j) const { return sigma_src_[i * dim_ + j]; }
  const expr::Bindings& constants() const { return constants_; }

  bool b_depends_on_x() const;
  bool sigma_depends_on_x() const;
  bool c_depends_on_x() const;
  bool c_depends_on_y() const;
  bool sigma_constant() const;

  /// Slot names in evaluation order.
  const std::vector<std::string>& slots() const { return slots_; }

 private:
  int dim_ = 0;
  std::vector<double> period_;
  std::vector<std::string> slots_;
  expr::Bindings constants_;
  std::vector<expr::Expression> b_src_, c_src_, sigma_src_;
  std::vector<expr::Compiled> b_, c_, sigma_;
};

enum class Regime { One = 1, Two = 2, Three = 3 };

struct RegimeTag {
  Regime regime = Regime::One;
  double gamma = 0.0;  // set for Regime 2
};

/// delta(eps) = kappa * eps^a
struct Scaling {
  double a = 2.0;
  double kappa = 1.0;
  double delta(double eps) const;
};

class MultiscaleModel {
 public:
  MultiscaleModel(CoefficientField coeffs, Scaling scaling, std::optional<double> gamma, std::vector<double> x0);

  const CoefficientField& coefficients() const { return coeffs_; }
  int dim() const { return coeffs_.dim(); }
  const Scaling& scaling() const { return scaling_; }
  const std::vector<double>& x0() const { return x0_; }

  /// Explicit gamma if configured, otherwise 1/kappa.
  double gamma() const { return gamma_ ? *gamma_ : 1.0 / scaling_.kappa; }

 private:
  CoefficientField coeffs_;
  Scaling scaling_;
  std::optional<double> gamma_;
  std::vector<double> x0_;
};

MultiscaleModel build_model(const ModelSpec& spec);

RegimeTag classify_regime(const MultiscaleModel& model);
RegimeTag classify_regime(double a, double kappa);

/// lambda_1 = (I + dchi)(c + sigma z), lambda_2 = gamma b + c + sigma z, lambda_3 = c + sigma z.
/// y is in user coordinates. dchi (row-major d x d, derivative w.r.t. user y) is required for Regime 1.
std::vector<double> velocity_kernel(const RegimeTag& tag, const MultiscaleModel& model, std::span<const double> x,
                                    std::span<const double> y, std::span<const double> z,
                                    std::span<const double> dchi = {});

}  // namespace msldp
