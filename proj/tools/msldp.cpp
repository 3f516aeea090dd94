#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "msldp/config.hpp"
#include "msldp/control.hpp"
#include "msldp/homogenize.hpp"
#include "msldp/mc.hpp"
#include "msldp/pathopt.hpp"
#include "msldp/ratefn.hpp"
#include "msldp/simulate.hpp"
#include "selftest.hpp"

using json = nlohmann::ordered_json;
using namespace msldp;

namespace {

constexpr int kSchemaVersion = 1;

enum Exit { Ok = 0, ConfigFailure = 1, NumericalFailure = 2, SelftestFailure = 3 };

std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
  return s;
}

struct Common {
  std::string config;
  std::vector<std::string> set;
  std::string out;
  int threads = 0;
  bool timing = false;
  std::vector<std::pair<std::string, std::string>> flag_overrides;

  RunConfig load() const {
    std::vector<std::pair<std::string, std::string>> all;
    for (const auto& s : set) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
      all.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    all.insert(all.end(), flag_overrides.begin(), flag_overrides.end());
    return load_config(config, all);
  }
};

// Primary output: a file when --out is given, standard output otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw ConfigError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

// --threads wins over [mc] threads
int threads_for(const Common& c, const RunConfig& cfg) { return c.threads ? c.threads : cfg.mc.threads; }

json provenance(const RunConfig& cfg, const std::string& command) {
  json overrides = json::object();
  for (const auto& [k, v] : cfg.overrides) overrides[k] = v;
  return {{"tool", "msldp"}, {"version", MSLDP_VERSION}, {"command", command}, {"config", cfg.source},
          {"overrides", overrides}};
}

json report_json(const EstimatorReport& r, bool timing) {
  json j = {{"scheme", scheme_name(r.scheme)},
            {"N", r.N},
            {"eps", r.eps},
            {"mean", r.mean},
            {"variance", r.variance},
            {"rel_err", r.rel_err},
            {"ci95", {r.ci_lo, r.ci_hi}},
            {"minus_eps_log_mean", r.minus_eps_log_mean},
            {"seed", r.seed},
            {"first_stream", r.first_stream},
            {"steps", r.steps},
            {"dt", r.dt},
            {"underflows", r.underflows}};
  if (timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

// Rate function and (Regime 1) homogenized data for the configured regime.
struct RateSetup {
  Regime regime = Regime::One;
  double gamma = 0.0;
  std::shared_ptr<const HomogenizedModel> hom;
  RateEvaluator rate;
};

RateSetup rate_setup(const RunConfig& cfg, const MultiscaleModel& model, std::optional<Regime> forced = {}) {
  RateSetup s;
  s.regime = forced ? *forced : cfg.effective_regime();
  s.gamma = model.gamma();
  switch (s.regime) {
    case Regime::One:
      s.hom = std::make_shared<const HomogenizedModel>(model, cfg.homogenization, cfg.lattice);
      s.rate = [hom = s.hom](const std::vector<double>& x, const std::vector<double>& b) {
        return local_rate_r1(*hom, x, b).value;
      };
      break;
    case Regime::Two:
      s.rate = rate_evaluator_r2(model, s.gamma, cfg.regime2);
      break;
    case Regime::Three:
      s.rate = rate_evaluator_r3(model, cfg.regime3);
      break;
  }
  return s;
}

PathOptResult optimize(const RunConfig& cfg, const RateSetup& setup, const MultiscaleModel& model, double T,
                       const PathFunctional* h, int threads) {
  PathProblem p;
  p.T = T;
  p.M = cfg.path.M;
  p.x0 = model.x0();
  p.x1 = cfg.path.x1;
  p.h = h;
  PathOptOptions o;
  o.max_iterations = cfg.path.max_iterations;
  o.gradient_tol = cfg.path.tol;
  o.threads = std::max(1, threads);
  return minimize_action(p, setup.rate, o);
}

int cmd_homogenize(const Common& c, const std::vector<double>& xs) {
  RunConfig cfg = c.load();
  cfg.require({"model"});
  auto model = build_model(cfg.model);
  const int d = model.dim();
  if (xs.empty() || xs.size() % d != 0) throw ConfigError("--x needs a multiple of dim values");
  HomogenizedModel hom(model, cfg.homogenization, cfg.lattice);
  Sink sink(c.out);
  auto& os = sink.stream();
  for (int i = 1; i <= d; ++i) os << (i > 1 ? "," : "") << "x_" << i;
  for (int i = 1; i <= d; ++i) os << ",r_" << i;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) os << ",q_" << i << j;
  os << '\n';
  for (std::size_t k = 0; k < xs.size(); k += d) {
    std::vector<double> x(xs.begin() + k, xs.begin() + k + d);
    auto r = hom.r(x);
    auto q = hom.q(x);
    os << join(x);
    for (int i = 0; i < d; ++i) os << ',' << num(r[i]);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) os << ',' << num(q(i, j));
    os << '\n';
  }
  return Ok;
}

int cmd_rate(const Common& c, int regime, const std::vector<double>& betas, std::vector<double> xs) {
  RunConfig cfg = c.load();
  cfg.require({"model"});
  auto model = build_model(cfg.model);
  const int d = model.dim();
  if (xs.empty()) xs = model.x0();
  if (xs.size() % d != 0 || betas.size() % d != 0 || betas.empty()) {
    throw ConfigError("--x and --beta need multiples of dim values");
  }
  const Regime r = regime ? static_cast<Regime>(regime) : cfg.effective_regime();
  if (r != Regime::One && d != 1) throw ConfigError("Regimes 2 and 3 are available for dim = 1 only");
  std::shared_ptr<HomogenizedModel> hom;
  if (r == Regime::One) hom = std::make_shared<HomogenizedModel>(model, cfg.homogenization, cfg.lattice);
  Sink sink(c.out);
  auto& os = sink.stream();
  for (int i = 1; i <= d; ++i) os << (i > 1 ? "," : "") << "x_" << i;
  for (int i = 1; i <= d; ++i) os << ",beta_" << i;
  os << ",L,dual\n";
  for (std::size_t k = 0; k < xs.size(); k += d) {
    std::vector<double> x(xs.begin() + k, xs.begin() + k + d);
    for (std::size_t m = 0; m < betas.size(); m += d) {
      std::vector<double> beta(betas.begin() + m, betas.begin() + m + d);
      LocalRateResult res = r == Regime::One   ? local_rate_r1(*hom, x, beta)
                            : r == Regime::Two ? local_rate_r2(model, x, beta[0], model.gamma(), cfg.regime2)
                                               : local_rate_r3(model, x, beta[0], cfg.regime3);
      os << join(x) << ',' << join(beta) << ',' << num(res.value) << ',';
      if (res.dual) os << num(*res.dual);
      os << '\n';
    }
  }
  return Ok;
}

int cmd_path(const Common& c, const std::string& json_path) {
  RunConfig cfg = c.load();
  cfg.require({"model", "path"});
  auto model = build_model(cfg.model);
  auto setup = rate_setup(cfg, model);
  std::optional<PathFunctional> h;
  if (cfg.functional) h.emplace(model.dim(), *cfg.functional);
  auto res = optimize(cfg, setup, model, cfg.path.T, h ? &*h : nullptr, threads_for(c, cfg));
  Sink sink(c.out);
  write_path_velocity_csv(sink.stream(), res);
  json j = {{"schema_version", kSchemaVersion},
            {"provenance", provenance(cfg, "path")},
            {"regime", static_cast<int>(setup.regime)},
            {"value", res.value},
            {"action", res.action},
            {"gradient_norm", res.gradient_norm},
            {"iterations", res.iterations},
            {"converged", res.converged}};
  if (!json_path.empty()) {
    std::ofstream f(json_path);
    if (!f) throw ConfigError("cannot write '" + json_path + "'");
    f << j.dump(2) << '\n';
  }
  if (!res.converged) std::cerr << "msldp path: iteration limit reached; best iterate returned\n";
  return Ok;
}

// Control field for importance sampling, built along the optimizer path for the functional.
std::optional<ControlField> is_control(const RunConfig& cfg, const RateSetup& setup, const MultiscaleModel& model,
                                       const PathOptResult& ref) {
  switch (setup.regime) {
    case Regime::One:
      return regime1_control(setup.hom, ref.schedule);
    case Regime::Two: {
      Regime2ControlOptions o;
      o.rate = cfg.regime2;
      if (!cfg.lattice.empty()) o.lattice = cfg.lattice.front();
      return regime2_control(model, ref.schedule, setup.gamma, o);
    }
    case Regime::Three:
      break;
  }
  throw ConfigError("importance sampling controls are not available in Regime 3");
}

int cmd_mc(const Common& c, const std::string& csv_path) {
  RunConfig cfg = c.load();
  cfg.require({"model", "mc", "functional"});
  auto model = build_model(cfg.model);
  PathFunctional h(model.dim(), *cfg.functional);
  const auto& mc = cfg.mc;
  for (std::size_t k = 1; k < mc.eps.size(); ++k) {
    if (!(mc.eps[k] < mc.eps[k - 1])) throw ConfigError("[mc] eps: a ladder must be descending");
  }
  auto setup = rate_setup(cfg, model);
  auto ref = optimize(cfg, setup, model, mc.T, &h, threads_for(c, cfg));
  std::optional<ControlField> control;
  std::vector<Scheme> schemes;
  if (mc.scheme != "IS") schemes.push_back(Scheme::Standard);
  if (mc.scheme != "standard") {
    schemes.push_back(Scheme::Importance);
    control = is_control(cfg, setup, model, ref);
  }
  McOptions o;
  o.T = mc.T;
  o.dt = mc.dt;
  o.dt_divisor = mc.dt_divisor;
  o.N = mc.N;
  o.seed = mc.seed;
  o.threads = threads_for(c, cfg);

  json reports = json::array();
  std::vector<LadderReport> ladders;
  for (Scheme s : schemes) {
    o.scheme = s;
    ladders.push_back(ldp_slope(model, h, mc.eps, o, control ? &*control : nullptr, ref.value));
    for (const auto& r : ladders.back().rows) {
      reports.push_back(report_json(r, c.timing));
      std::cerr << "msldp mc: " << scheme_name(s) << " eps " << r.eps << " done in " << r.wall_seconds << " s\n";
    }
  }
  json j = {{"schema_version", kSchemaVersion},
            {"provenance", provenance(cfg, "mc")},
            {"regime", static_cast<int>(setup.regime)},
            {"reference", {{"value", ref.value}, {"action", ref.action}, {"converged", ref.converged},
                           {"iterations", ref.iterations}}},
            {"reports", reports}};
  if (mc.eps.size() > 1) {
    json lj = json::array();
    for (const auto& l : ladders) {
      lj.push_back({{"scheme", scheme_name(l.rows.front().scheme)},
                    {"trend_direction", l.trend_direction()},
                    {"worst_reversal", l.worst_reversal()}});
    }
    j["ladders"] = lj;
  }
  Sink sink(c.out);
  sink.stream() << j.dump(2) << '\n';
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    if (!f) throw ConfigError("cannot write '" + csv_path + "'");
    f << "scheme,eps,N,mean,rel_err,minus_eps_log_mean,half_width,reference\n";
    for (const auto& l : ladders) {
      for (const auto& r : l.rows) {
        f << scheme_name(r.scheme) << ',' << num(r.eps) << ',' << r.N << ',' << num(r.mean) << ',' << num(r.rel_err)
          << ',' << num(r.minus_eps_log_mean) << ',' << num(slope_half_width(r)) << ',' << num(ref.value) << '\n';
      }
    }
  }
  return Ok;
}

int cmd_simulate(const Common& c, bool controlled) {
  RunConfig cfg = c.load();
  cfg.require({"model", "mc"});
  auto model = build_model(cfg.model);
  const double eps = cfg.mc.eps.front();
  std::optional<FeedbackControl> feedback;
  RateSetup setup;
  if (controlled) {
    std::optional<PathFunctional> h;
    if (cfg.functional) h.emplace(model.dim(), *cfg.functional);
    setup = rate_setup(cfg, model);
    auto ref = optimize(cfg, setup, model, cfg.mc.T, h ? &*h : nullptr, threads_for(c, cfg));
    feedback.emplace(*is_control(cfg, setup, model, ref), eps, model.scaling().delta(eps));
  }
  OccupationOptions occ;
  occ.window = cfg.mc.window;
  OccupationAccumulator total(model.dim(), cfg.mc.T, eps, model.coefficients().period(), occ);
  std::filesystem::create_directories(cfg.output.dir);
  json paths = json::array();
  for (int k = 0; k < cfg.mc.N; ++k) {
    SimulationOptions so;
    so.eps = eps;
    so.T = cfg.mc.T;
    so.dt = cfg.mc.dt;
    so.dt_divisor = cfg.mc.dt_divisor;
    so.seed = cfg.mc.seed;
    so.stream = static_cast<std::uint64_t>(k);
    const auto [steps, dt] = time_grid(model, so);
    so.record_every = static_cast<int>(std::max<long>(1, steps / 1000));
    auto path = simulate(model, so, feedback ? &*feedback : nullptr, total.observer());
    if (k < cfg.mc.paths) {
      const std::string file = cfg.output.dir + "/" + cfg.output.prefix + "_path_" + std::to_string(k) + ".csv";
      std::ofstream f(file);
      if (!f) throw ConfigError("cannot write '" + file + "'");
      write_path_csv(f, path);
      paths.push_back({{"stream", k}, {"file", file}, {"logweight", path.logweight},
                       {"x_T", std::vector<double>(path.state(path.size() - 1).begin(), path.state(path.size() - 1).end())}});
    }
  }
  const auto& m = total.result();
  json diag = {{"window", m.window}, {"mass_per_path", m.total() / cfg.mc.N}, {"clipped", m.clipped / cfg.mc.N},
               {"y_marginal", m.y_marginal()}, {"z_marginal", m.z_marginal()}};
  if (model.dim() == 1 && !controlled) {
    // compare with the invariant density of the fast process at x0
    HomogenizedModel hom(model, cfg.homogenization, cfg.lattice);
    const auto& cell = hom.cell(model.x0());
    std::vector<double> gibbs(m.y_bins, 0.0);
    for (int j = 0; j < cell.grid.size(); ++j) {
      const int bin = std::min(m.y_bins - 1, static_cast<int>(cell.grid.node(j, 0) * m.y_bins));
      gibbs[bin] += cell.grid.weight() * cell.mu[j];
    }
    diag["w1_invariant_density_at_x0"] = wasserstein1_circle(m.y_marginal(), gibbs);
  }
  json j = {{"schema_version", kSchemaVersion},
            {"provenance", provenance(cfg, "simulate")},
            {"eps", eps},
            {"delta", model.scaling().delta(eps)},
            {"N", cfg.mc.N},
            {"controlled", controlled},
            {"paths", paths},
            {"occupation", diag}};
  Sink sink(c.out);
  sink.stream() << j.dump(2) << '\n';
  return Ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale large deviations: homogenization, rate functions, controls and importance sampling"};
  app.set_version_flag("--version", std::string("msldp ") + MSLDP_VERSION);
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool config_required = true) {
    auto* opt = sub->add_option("--config", common.config, "run configuration file");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--set", common.set, "override a config key: section.key=value (repeatable)");
    sub->add_option("--out", common.out, "write the primary output here instead of standard output");
    sub->add_option("--threads", common.threads, "worker cap (0: hardware concurrency)")->check(CLI::NonNegativeNumber);
  };

  std::vector<double> xs, betas;
  int regime = 0;
  std::string json_path, csv_path;
  bool controlled = false;

  auto* hom = app.add_subcommand("homogenize", "effective drift r(x) and diffusivity q(x) as CSV");
  add_common(hom);
  hom->add_option("--x", xs, "evaluation points, flattened (dim values each)")->delimiter(',')->required();

  auto* rate = app.add_subcommand("rate", "local rate L(x, beta) and dual variable as CSV");
  add_common(rate);
  rate->add_option("--regime", regime, "1, 2 or 3 (default: from the scaling)")->check(CLI::Range(1, 3));
  rate->add_option("--beta", betas, "velocities, flattened")->delimiter(',')->required();
  rate->add_option("--x", xs, "points, flattened (default: x0)")->delimiter(',');

  auto* path = app.add_subcommand("path", "minimize S + h; CSV of t, x, velocity");
  add_common(path);
  path->add_option("--json", json_path, "write the optimizer summary as JSON");

  auto* sim = app.add_subcommand("simulate", "Euler-Maruyama paths and occupation diagnostics");
  add_common(sim);
  sim->add_flag("--controlled", controlled, "drive the paths with the optimizer-path control");

  auto* mc = app.add_subcommand("mc", "Monte Carlo estimates of E exp(-h/eps); JSON reports");
  add_common(mc);
  mc->add_option("--ladder-csv", csv_path, "write the eps ladder table as CSV");

  auto* self = app.add_subcommand("selftest", "analytic-oracle checks");

  // flags that map onto config keys and are echoed as overrides
  struct FlagKey {
    std::string value;
    const char* key;
  };
  std::vector<std::unique_ptr<FlagKey>> flag_keys;
  auto key_flag = [&](CLI::App* sub, const char* name, const char* key, const char* help) {
    flag_keys.push_back(std::make_unique<FlagKey>(FlagKey{{}, key}));
    sub->add_option(name, flag_keys.back()->value, help);
  };
  for (auto* sub : {mc, sim}) {
    key_flag(sub, "--eps", "mc.eps", "eps value or descending ladder (overrides [mc] eps)");
    key_flag(sub, "--n", "mc.N", "number of trajectories (overrides [mc] N)");
    key_flag(sub, "--seed", "mc.seed", "base seed (overrides [mc] seed)");
  }
  key_flag(mc, "--scheme", "mc.scheme", "standard, IS or both (overrides [mc] scheme)");
  bool timing = false;
  mc->add_flag("--timing", timing, "include wall-clock seconds in the JSON reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : ConfigFailure;
  }
  for (const auto& f : flag_keys) {
    if (!f->value.empty()) common.flag_overrides.emplace_back(f->key, f->value);
  }
  common.timing = timing;

  try {
    if (*hom) return cmd_homogenize(common, xs);
    if (*rate) return cmd_rate(common, regime, betas, xs);
    if (*path) return cmd_path(common, json_path);
    if (*sim) return cmd_simulate(common, controlled);
    if (*mc) return cmd_mc(common, csv_path);
    if (*self) {
      const int failures = cli::run_selftest(std::cout);
      return failures == 0 ? Ok : SelftestFailure;
    }
  } catch (const ConfigError& e) {
    std::cerr << "msldp: config error: " << e.what() << '\n';
    return ConfigFailure;
  } catch (const ModelError& e) {
    std::cerr << "msldp: model error: " << e.what() << '\n';
    return ConfigFailure;
  } catch (const FunctionalError& e) {
    std::cerr << "msldp: functional error: " << e.what() << '\n';
    return ConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "msldp: numerical failure: " << e.what() << '\n';
    return NumericalFailure;
  }
  return Ok;
}
