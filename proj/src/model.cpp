#include "msldp/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

namespace msldp {

namespace {

std::string describe_point(const std::vector<double>& xy, int dim) {
  std::ostringstream os;
  os.precision(17);
  os << "(x=";
  for (int k = 0; k < dim; ++k) os << (k ? "," : "") << xy[k];
  os << "; y=";
  for (int k = 0; k < dim; ++k) os << (k ? "," : "") << xy[dim + k];
  os << ")";
  return os.str();
}

expr::Expression parse_field(const std::string& key, const std::string& src) {
  try {
    return expr::parse(src);
  } catch (const expr::ParseError& err) {
    throw ModelError(ModelError::Code::Parse, key + ": " + err.what());
  }
}

// Inlines named definitions until none remain; rejects cycles.
expr::Expression inline_definitions(expr::Expression e, const expr::Substitutions& defs, const std::string& key) {
  for (std::size_t round = 0; round <= defs.size() + 1; ++round) {
    bool any = false;
    for (const auto& id : e.identifiers()) {
      if (defs.count(id)) any = true;
    }
    if (!any) return e;
    e = e.substitute(defs);
  }
  throw ModelError(ModelError::Code::Parse, key + ": cyclic named definitions");
}

}  // namespace

CoefficientField::CoefficientField(int dim, std::vector<expr::Expression> b, std::vector<expr::Expression> c,
                                   std::vector<expr::Expression> sigma, std::vector<double> period,
                                   expr::Bindings constants)
    : dim_(dim),
      period_(std::move(period)),
      constants_(std::move(constants)),
      b_src_(std::move(b)),
      c_src_(std::move(c)),
      sigma_src_(std::move(sigma)) {
  for (int k = 1; k <= dim_; ++k) slots_.push_back("x_" + std::to_string(k));
  for (int k = 1; k <= dim_; ++k) slots_.push_back("y_" + std::to_string(k));
  if (period_.empty()) period_.assign(dim_, 1.0);
  for (const auto& e : b_src_) b_.emplace_back(e, slots_, constants_);
  for (const auto& e : c_src_) c_.emplace_back(e, slots_, constants_);
  for (const auto& e : sigma_src_) sigma_.emplace_back(e, slots_, constants_);
}

void CoefficientField::b(const double* x, const double* y, double* out) const {
  double xy[8];
  std::copy(x, x + dim_, xy);
  std::copy(y, y + dim_, xy + dim_);
  for (int k = 0; k < dim_; ++k) out[k] = b_[k](std::span<const double>(xy, 2 * dim_));
}

void CoefficientField::c(const double* x, const double* y, double* out) const {
  double xy[8];
  std::copy(x, x + dim_, xy);
  std::copy(y, y + dim_, xy + dim_);
  for (int k = 0; k < dim_; ++k) out[k] = c_[k](std::span<const double>(xy, 2 * dim_));
}

void CoefficientField::sigma(const double* x, const double* y, double* out) const {
  double xy[8];
  std::copy(x, x + dim_, xy);
  std::copy(y, y + dim_, xy + dim_);
  for (int k = 0; k < dim_ * dim_; ++k) out[k] = sigma_[k](std::span<const double>(xy, 2 * dim_));
}

namespace {
bool any_depends(const std::vector<expr::Expression>& es, const std::vector<std::string>& names) {
  for (const auto& e : es) {
    for (const auto& n : names) {
      if (e.depends_on(n)) return true;
    }
  }
  return false;
}
}  // namespace

bool CoefficientField::b_depends_on_x() const {
  return any_depends(b_src_, std::vector<std::string>(slots_.begin(), slots_.begin() + dim_));
}

bool CoefficientField::sigma_depends_on_x() const {
  return any_depends(sigma_src_, std::vector<std::string>(slots_.begin(), slots_.begin() + dim_));
}

bool CoefficientField::c_depends_on_x() const {
  return any_depends(c_src_, std::vector<std::string>(slots_.begin(), slots_.begin() + dim_));
}

bool CoefficientField::c_depends_on_y() const {
  return any_depends(c_src_, std::vector<std::string>(slots_.begin() + dim_, slots_.end()));
}

bool CoefficientField::sigma_constant() const {
  return std::all_of(sigma_.begin(), sigma_.end(), [](const expr::Compiled& c) { return c.is_constant(); });
}

double Scaling::delta(double eps) const { return kappa * std::pow(eps, a); }

MultiscaleModel::MultiscaleModel(CoefficientField coeffs, Scaling scaling, std::optional<double> gamma,
                                 std::vector<double> x0)
    : coeffs_(std::move(coeffs)), scaling_(scaling), gamma_(gamma), x0_(std::move(x0)) {}

RegimeTag classify_regime(double a, double kappa) {
  if (a > 1.0) return {Regime::One, 0.0};
  if (a == 1.0) return {Regime::Two, 1.0 / kappa};
  return {Regime::Three, 0.0};
}

RegimeTag classify_regime(const MultiscaleModel& model) {
  return classify_regime(model.scaling().a, model.scaling().kappa);
}

MultiscaleModel build_model(const ModelSpec& spec) {
  const int d = spec.dim;
  if (d < 1 || d > 4) throw ModelError(ModelError::Code::Dimension, "dimension must be between 1 and 4");
  if (static_cast<int>(spec.b.size()) != d || static_cast<int>(spec.c.size()) != d ||
      static_cast<int>(spec.sigma.size()) != d * d) {
    std::ostringstream os;
    os << "dimension mismatch: d=" << d << " but b has " << spec.b.size() << ", c has " << spec.c.size()
       << " and sigma has " << spec.sigma.size() << " components";
    throw ModelError(ModelError::Code::Dimension, os.str());
  }
  if (!spec.period.empty() && static_cast<int>(spec.period.size()) != d) {
    throw ModelError(ModelError::Code::Dimension, "period must have one entry per dimension");
  }
  for (double L : spec.period) {
    if (!(L > 0.0)) throw ModelError(ModelError::Code::Dimension, "period must be positive");
  }
  std::vector<double> x0 = spec.x0.empty() ? std::vector<double>(d, 0.0) : spec.x0;
  if (static_cast<int>(x0.size()) != d) throw ModelError(ModelError::Code::Dimension, "x0 has wrong dimension");
  if (!(spec.a > 0.0) || !(spec.kappa > 0.0)) {
    throw ModelError(ModelError::Code::Scaling, "scaling exponent a and prefactor kappa must be positive");
  }
  if (spec.gamma && !(*spec.gamma > 0.0)) throw ModelError(ModelError::Code::Scaling, "gamma must be positive");

  // aliases x, y for d = 1; named definitions inlined
  expr::Substitutions subs;
  if (d == 1) {
    subs.emplace("x", expr::Expression::identifier("x_1"));
    subs.emplace("y", expr::Expression::identifier("y_1"));
  }
  expr::Substitutions defs;
  for (const auto& [name, src] : spec.definitions) {
    defs.emplace(name, parse_field(name, src).substitute(subs));
  }

  std::vector<std::string> allowed;
  for (int k = 1; k <= d; ++k) {
    allowed.push_back("x_" + std::to_string(k));
    allowed.push_back("y_" + std::to_string(k));
  }
  auto prepare = [&](const std::string& key, const std::string& src) {
    expr::Expression e = inline_definitions(parse_field(key, src).substitute(subs), defs, key);
    e = e.expand_derivatives();
    for (const auto& id : e.identifiers()) {
      if (std::find(allowed.begin(), allowed.end(), id) == allowed.end() && !spec.constants.count(id)) {
        throw ModelError(ModelError::Code::UnknownIdentifier, key + ": unknown identifier '" + id + "'");
      }
    }
    return e;
  };
  std::vector<expr::Expression> b, c, sigma;
  for (int k = 0; k < d; ++k) {
    const std::string suffix = d == 1 ? "" : "_" + std::to_string(k + 1);
    b.push_back(prepare("b" + suffix, spec.b[k]));
    c.push_back(prepare("c" + suffix, spec.c[k]));
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const std::string key = d == 1 ? "sigma" : "sigma_" + std::to_string(i + 1) + std::to_string(j + 1);
      sigma.push_back(prepare(key, spec.sigma[i * d + j]));
    }
  }
  CoefficientField field(d, std::move(b), std::move(c), std::move(sigma), spec.period, spec.constants);

  // sampled invariant checks over an x box times the y lattice
  std::vector<double> lo = spec.x_lo, hi = spec.x_hi;
  if (lo.empty()) {
    lo = x0;
    for (double& v : lo) v -= 1.0;
  }
  if (hi.empty()) {
    hi = x0;
    for (double& v : hi) v += 1.0;
  }
  const int nx = 3;
  const int ny = spec.sample_n;
  long x_count = 1, y_count = 1;
  for (int k = 0; k < d; ++k) {
    x_count *= nx;
    y_count *= ny;
  }
  const auto& L = field.period();
  std::vector<double> xy(2 * d), shifted(2 * d);
  std::vector<double> vals(d * d + 2 * d), other(d * d + 2 * d);
  auto eval_all = [&](const std::vector<double>& p, std::vector<double>& out) {
    try {
      field.b(p.data(), p.data() + d, out.data());
      field.c(p.data(), p.data() + d, out.data() + d);
      field.sigma(p.data(), p.data() + d, out.data() + 2 * d);
    } catch (const expr::EvalError& err) {
      throw ModelError(ModelError::Code::NotFinite, std::string(err.what()) + " at " + describe_point(p, d));
    }
  };
  auto for_each_sample = [&](const auto& visit) {
    for (long ix = 0; ix < x_count; ++ix) {
      long r = ix;
      for (int k = 0; k < d; ++k) {
        const int i = r % nx;
        r /= nx;
        xy[k] = lo[k] + (hi[k] - lo[k]) * i / (nx - 1);
      }
      for (long iy = 0; iy < y_count; ++iy) {
        long s = iy;
        for (int k = 0; k < d; ++k) {
          const int j = s % ny;
          s /= ny;
          xy[d + k] = L[k] * j / ny;
        }
        eval_all(xy, vals);
        visit();
      }
    }
  };
  // finiteness and nondegeneracy first, so that a vanishing sigma is reported as such
  for_each_sample([&] {
    for (double v : vals) {
      if (!std::isfinite(v)) {
        throw ModelError(ModelError::Code::NotFinite, "non-finite coefficient at " + describe_point(xy, d));
      }
    }
    double min_eig = 0.0;
    const double* sv = vals.data() + 2 * d;
    if (d == 1) {
      min_eig = sv[0] * sv[0];
    } else {
      using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      Eigen::MatrixXd sm = Eigen::Map<const RowMajor>(sv, d, d);
      Eigen::MatrixXd a = sm * sm.transpose();
      min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues()(0);
    }
    if (min_eig < spec.nu) {
      std::ostringstream os;
      os.precision(17);
      os << "sigma sigma^T is degenerate (min eigenvalue " << min_eig << " < " << spec.nu << ") at "
         << describe_point(xy, d);
      throw ModelError(ModelError::Code::Nondegeneracy, os.str());
    }
  });
  for_each_sample([&] {
    for (int k = 0; k < d; ++k) {
      shifted = xy;
      shifted[d + k] += L[k];
      eval_all(shifted, other);
      for (std::size_t m = 0; m < vals.size(); ++m) {
        if (std::fabs(vals[m] - other[m]) > 1e-10 * std::max(1.0, std::fabs(vals[m]))) {
          throw ModelError(ModelError::Code::NotPeriodic, "coefficients are not periodic in y_" +
                                                              std::to_string(k + 1) + " at " + describe_point(xy, d));
        }
      }
    }
  });
  return MultiscaleModel(std::move(field), Scaling{spec.a, spec.kappa}, spec.gamma, std::move(x0));
}

std::vector<double> velocity_kernel(const RegimeTag& tag, const MultiscaleModel& model, std::span<const double> x,
                                    std::span<const double> y, std::span<const double> z,
                                    std::span<const double> dchi) {
  const int d = model.dim();
  if (static_cast<int>(x.size()) != d || static_cast<int>(y.size()) != d || static_cast<int>(z.size()) != d) {
    throw ModelError(ModelError::Code::Dimension, "velocity_kernel: dimension mismatch");
  }
  const auto& f = model.coefficients();
  std::vector<double> c(d), s(d * d), v(d);
  f.c(x.data(), y.data(), c.data());
  f.sigma(x.data(), y.data(), s.data());
  for (int i = 0; i < d; ++i) {
    v[i] = c[i];
    for (int j = 0; j < d; ++j) v[i] += s[i * d + j] * z[j];
  }
  switch (tag.regime) {
    case Regime::One: {
      if (static_cast<int>(dchi.size()) != d * d) {
        throw std::invalid_argument("velocity_kernel: Regime 1 requires the cell-solution derivative");
      }
      std::vector<double> out(v);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out[i] += dchi[i * d + j] * v[j];
      return out;
    }
    case Regime::Two: {
      std::vector<double> b(d);
      f.b(x.data(), y.data(), b.data());
      for (int i = 0; i < d; ++i) v[i] += tag.gamma * b[i];
      return v;
    }
    case Regime::Three: return v;
  }
  return v;
}

}  // namespace msldp
