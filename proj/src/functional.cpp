#include "msldp/functional.hpp"

#include <cmath>

namespace msldp {

namespace {

expr::Expression prepare(int dim, const std::string& source, const expr::Bindings& constants) {
  expr::Expression e;
  try {
    e = expr::parse(source);
  } catch (const expr::ParseError& err) {
    throw FunctionalError(std::string("functional expression: ") + err.what());
  }
  if (dim == 1) e = e.substitute({{"x", expr::Expression::identifier("x_1")}});
  e = e.expand_derivatives();
  for (const auto& id : e.identifiers()) {
    bool ok = constants.count(id) > 0;
    for (int k = 1; k <= dim && !ok; ++k) ok = id == "x_" + std::to_string(k);
    if (!ok) throw FunctionalError("functional expression: unknown identifier '" + id + "'");
  }
  return e;
}

}  // namespace

double smooth_step(double z) {
  if (z <= 0.0) return 0.0;
  if (z >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / z);
  const double b = std::exp(-1.0 / (1.0 - z));
  return a / (a + b);
}

PathFunctional::PathFunctional(int dim, const FunctionalSpec& spec) : dim_(dim), spec_(spec) {
  if (dim < 1) throw FunctionalError("functional dimension must be positive");
  using Kind = FunctionalSpec::Kind;
  if (spec.kind == Kind::Terminal || spec.kind == Kind::Running) {
    std::vector<std::string> slots;
    for (int k = 1; k <= dim; ++k) slots.push_back("x_" + std::to_string(k));
    compiled_ = expr::Compiled(prepare(dim, spec.expression, spec.constants), slots, spec.constants);
  }
  if (spec.kind == Kind::Indicator) {
    if (static_cast<int>(spec.lo.size()) != dim || static_cast<int>(spec.hi.size()) != dim) {
      throw FunctionalError("indicator box needs lo and hi with one entry per dimension");
    }
    for (int i = 0; i < dim; ++i) {
      if (!(spec.hi[i] >= spec.lo[i])) throw FunctionalError("indicator box has hi < lo");
    }
    if (!(spec.width > 0.0)) throw FunctionalError("indicator width must be positive");
    if (!std::isfinite(spec.height)) throw FunctionalError("indicator height must be finite");
  }
  if (spec.kind == Kind::Constant && !std::isfinite(spec.value)) throw FunctionalError("constant must be finite");
}

double PathFunctional::running(const double* x) const {
  if (spec_.kind != FunctionalSpec::Kind::Running) return 0.0;
  return compiled_({x, static_cast<std::size_t>(dim_)});
}

double PathFunctional::terminal(const double* x) const {
  switch (spec_.kind) {
    case FunctionalSpec::Kind::Constant:
      return spec_.value;
    case FunctionalSpec::Kind::Running:
      return 0.0;
    case FunctionalSpec::Kind::Terminal:
      return compiled_({x, static_cast<std::size_t>(dim_)});
    case FunctionalSpec::Kind::Indicator: {
      double inside = 1.0;
      for (int i = 0; i < dim_; ++i) {
        const double w = spec_.width;
        inside *= smooth_step((x[i] - spec_.lo[i] + w) / w) * smooth_step((spec_.hi[i] + w - x[i]) / w);
      }
      return spec_.height * (1.0 - inside);
    }
  }
  return 0.0;
}

double PathFunctional::operator()(const DiscretePath& path) const {
  if (path.dim != dim_) throw FunctionalError("path dimension does not match the functional");
  if (path.size() == 0) throw FunctionalError("empty path");
  double total = 0.0;
  if (has_running()) {
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      total += running(path.state(k).data()) * (path.times[k + 1] - path.times[k]);
    }
  }
  return total + terminal(path.state(path.size() - 1).data());
}

}  // namespace msldp
