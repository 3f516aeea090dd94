#include "msldp/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace msldp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(what + ": expected a number, got '" + text + "'");
  }
  return v;
}

long parse_long(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    // allow integral values written as 1e4
    const double d = parse_double(t, what);
    if (d != std::floor(d) || std::fabs(d) > 9e15) throw ConfigError(what + ": expected an integer, got '" + text + "'");
    return static_cast<long>(d);
  }
  return v;
}

bool parse_bool(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(what + ": expected true or false, got '" + text + "'");
}

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

// Consumes keys from one section, so whatever is left over is unknown.
class Section {
 public:
  Section(std::string name, std::map<std::string, std::string> entries)
      : name_(std::move(name)), entries_(std::move(entries)) {}

  std::optional<std::string> take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    std::string v = it->second;
    entries_.erase(it);
    return v;
  }
  std::string what(const std::string& key) const { return "[" + name_ + "] " + key; }

  template <typename T, typename Parse>
  void get(const std::string& key, T& out, Parse parse) {
    if (auto v = take(key)) out = static_cast<T>(parse(*v, what(key)));
  }
  void number(const std::string& key, double& out) { get(key, out, parse_double); }
  void integer(const std::string& key, int& out) { get(key, out, parse_long); }
  void integer(const std::string& key, long& out) { get(key, out, parse_long); }
  void list(const std::string& key, std::vector<double>& out) { get(key, out, parse_list); }

  void finish() const {
    if (!entries_.empty()) throw ConfigError("[" + name_ + "]: unknown key '" + entries_.begin()->first + "'");
  }
  const std::map<std::string, std::string>& remaining() const { return entries_; }
  void clear() { entries_.clear(); }

 private:
  std::string name_;
  std::map<std::string, std::string> entries_;
};

const std::vector<std::string> kSections = {"model", "definitions", "params", "grid",
                                            "mc",    "functional",  "path",   "output"};

}  // namespace

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, what));
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

bool RunConfig::has(const std::string& section) const {
  return std::find(sections.begin(), sections.end(), section) != sections.end();
}

void RunConfig::require(std::initializer_list<const char*> names) const {
  for (const char* n : names) {
    if (!has(n)) throw ConfigError(source + ": missing section [" + std::string(n) + "]");
  }
}

Regime RunConfig::effective_regime() const {
  if (regime) return *regime;
  return classify_regime(model.a, model.kappa).regime;
}

ConfigTable read_config_table(std::istream& in, const std::string& origin) {
  // '#' comment lines are accepted as well as ';'
  std::stringstream cleaned;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    cleaned << (t.starts_with('#') ? std::string() : line) << '\n';
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(cleaned, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ConfigTable table;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(origin + ": key '" + section + "' outside of a section");
    auto& entries = table[section];
    for (const auto& [key, value] : body) entries[key] = trim(value.data());
  }
  return table;
}

RunConfig interpret_config(const ConfigTable& input, const std::string& origin,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  ConfigTable table = input;
  for (const auto& [path, value] : overrides) {
    const auto dot = path.find('.');
    if (dot == std::string::npos) throw ConfigError("override '" + path + "' must have the form section.key");
    table[path.substr(0, dot)][path.substr(dot + 1)] = value;
  }
  RunConfig cfg;
  cfg.source = origin;
  cfg.overrides = overrides;
  for (const auto& [name, entries] : table) {
    if (std::find(kSections.begin(), kSections.end(), name) == kSections.end()) {
      throw ConfigError(origin + ": unknown section [" + name + "]");
    }
    cfg.sections.push_back(name);
  }
  auto section = [&](const std::string& name) {
    auto it = table.find(name);
    return Section(name, it == table.end() ? std::map<std::string, std::string>{} : it->second);
  };

  // [params]: numeric constants shared by the model and the functional
  {
    Section s = section("params");
    for (const auto& [key, value] : s.remaining()) {
      if (!is_identifier(key)) throw ConfigError("[params]: '" + key + "' is not an identifier");
      cfg.model.constants[key] = parse_double(value, s.what(key));
    }
    s.clear();
  }
  {
    Section s = section("definitions");
    for (const auto& [key, value] : s.remaining()) {
      if (!is_identifier(key)) throw ConfigError("[definitions]: '" + key + "' is not an identifier");
      cfg.model.definitions[key] = value;
    }
    s.clear();
  }
  {
    Section s = section("model");
    ModelSpec& m = cfg.model;
    s.integer("dim", m.dim);
    if (m.dim < 1 || m.dim > 4) throw ConfigError("[model] dim: must be between 1 and 4");
    const int d = m.dim;
    m.b.assign(d, "0");
    m.c.assign(d, "0");
    m.sigma.assign(d * d, "0");
    if (d == 1) {
      if (auto v = s.take("b")) m.b[0] = *v;
      if (auto v = s.take("c")) m.c[0] = *v;
      if (auto v = s.take("sigma")) m.sigma[0] = *v;
      else throw ConfigError("[model] sigma: required");
    } else {
      for (int i = 0; i < d; ++i) {
        const std::string k = std::to_string(i + 1);
        if (auto v = s.take("b_" + k)) m.b[i] = *v;
        if (auto v = s.take("c_" + k)) m.c[i] = *v;
        for (int j = 0; j < d; ++j) {
          if (auto v = s.take("sigma_" + k + std::to_string(j + 1))) m.sigma[i * d + j] = *v;
        }
      }
    }
    s.list("period", m.period);
    s.number("a", m.a);
    s.number("kappa", m.kappa);
    if (auto v = s.take("gamma")) m.gamma = parse_double(*v, s.what("gamma"));
    s.list("x0", m.x0);
    s.number("nu", m.nu);
    s.integer("sample_n", m.sample_n);
    s.list("x_lo", m.x_lo);
    s.list("x_hi", m.x_hi);
    if (auto v = s.take("regime")) {
      const long r = parse_long(*v, s.what("regime"));
      if (r < 1 || r > 3) throw ConfigError("[model] regime: must be 1, 2 or 3");
      cfg.regime = static_cast<Regime>(r);
    }
    s.finish();
  }
  {
    Section s = section("grid");
    s.integer("n", cfg.homogenization.n);
    s.integer("order", cfg.homogenization.order);
    s.get("centering", cfg.homogenization.require_centering, parse_bool);
    std::vector<double> lo, hi, count;
    s.list("lattice_lo", lo);
    s.list("lattice_hi", hi);
    s.list("lattice_count", count);
    if (lo.size() != hi.size() || lo.size() != count.size()) {
      throw ConfigError("[grid] lattice_lo, lattice_hi and lattice_count need the same length");
    }
    for (std::size_t i = 0; i < lo.size(); ++i) cfg.lattice.push_back({lo[i], hi[i], static_cast<int>(count[i])});
    s.integer("r2_n", cfg.regime2.n);
    s.integer("r2_n_max", cfg.regime2.n_max);
    s.number("peclet_max", cfg.regime2.peclet_max);
    s.number("zeta_max", cfg.regime2.zeta_max);
    s.number("fd_step", cfg.regime2.fd_step);
    s.integer("r3_n", cfg.regime3.n);
    s.finish();
  }
  {
    Section s = section("mc");
    McConfig& mc = cfg.mc;
    s.list("eps", mc.eps);
    s.integer("N", mc.N);
    s.number("T", mc.T);
    s.number("dt", mc.dt);
    s.number("dt_divisor", mc.dt_divisor);
    s.get("seed", mc.seed, parse_long);
    if (auto v = s.take("scheme")) mc.scheme = *v;
    if (mc.scheme != "standard" && mc.scheme != "IS" && mc.scheme != "both") {
      throw ConfigError("[mc] scheme: expected standard, IS or both");
    }
    s.number("window", mc.window);
    s.integer("paths", mc.paths);
    s.integer("threads", mc.threads);
    s.finish();
    for (double e : mc.eps) {
      if (!(e > 0.0)) throw ConfigError("[mc] eps: values must be positive");
    }
    if (mc.N < 1) throw ConfigError("[mc] N: must be positive");
    if (!(mc.T > 0.0)) throw ConfigError("[mc] T: must be positive");
  }
  if (cfg.has("functional")) {
    Section s = section("functional");
    FunctionalSpec f;
    const std::string kind = s.take("kind").value_or("constant");
    using Kind = FunctionalSpec::Kind;
    if (kind == "constant") f.kind = Kind::Constant;
    else if (kind == "terminal") f.kind = Kind::Terminal;
    else if (kind == "running") f.kind = Kind::Running;
    else if (kind == "indicator") f.kind = Kind::Indicator;
    else throw ConfigError("[functional] kind: expected constant, terminal, running or indicator");
    s.number("value", f.value);
    if (auto v = s.take("expression")) f.expression = *v;
    if ((f.kind == Kind::Terminal || f.kind == Kind::Running) && f.expression.empty()) {
      throw ConfigError("[functional] expression: required for kind " + kind);
    }
    s.list("lo", f.lo);
    s.list("hi", f.hi);
    s.number("width", f.width);
    s.number("height", f.height);
    s.finish();
    f.constants = cfg.model.constants;
    cfg.functional = f;
  }
  {
    Section s = section("path");
    s.number("T", cfg.path.T);
    s.integer("M", cfg.path.M);
    if (auto v = s.take("x1")) cfg.path.x1 = parse_list(*v, s.what("x1"));
    s.integer("max_iterations", cfg.path.max_iterations);
    s.number("tol", cfg.path.tol);
    s.finish();
  }
  {
    Section s = section("output");
    if (auto v = s.take("dir")) cfg.output.dir = *v;
    if (auto v = s.take("prefix")) cfg.output.prefix = *v;
    s.finish();
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return interpret_config(read_config_table(in, path), path, overrides);
}

}  // namespace msldp
