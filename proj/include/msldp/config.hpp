#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "msldp/functional.hpp"
#include "msldp/homogenize.hpp"
#include "msldp/mc.hpp"
#include "msldp/model.hpp"
#include "msldp/ratefn.hpp"

namespace msldp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct McConfig {
  std::vector<double> eps{0.25};  // a single value or a descending ladder
  long N = 1000;
  double T = 1.0;
  double dt = 0.0;
  double dt_divisor = 10.0;
  std::uint64_t seed = 1;
  std::string scheme = "standard";  // standard | IS | both
  double window = 0.0;              // occupation window; 0 means sqrt(eps)
  int paths = 1;                    // trajectories dumped by `simulate`
  int threads = 0;
};

struct PathConfig {
  double T = 1.0;
  int M = 32;
  std::optional<std::vector<double>> x1;
  int max_iterations = 20000;
  double tol = 1e-6;
};

struct OutputConfig {
  std::string dir = ".";
  std::string prefix = "msldp";
};

/// Parsed run configuration. Sections: [model] [definitions] [params] [grid] [mc] [functional]
/// [path] [output]; see docs/msldp.1 for the keys.
struct RunConfig {
  std::string source;  // file name, for provenance
  ModelSpec model;
  std::optional<Regime> regime;  // [model] regime; empty: classified from the scaling exponent
  HomogenizationOptions homogenization;
  std::vector<LatticeAxis> lattice;
  Regime2Options regime2;
  Regime3Options regime3;
  McConfig mc;
  std::optional<FunctionalSpec> functional;
  PathConfig path;
  OutputConfig output;
  std::vector<std::string> sections;                          // present in the file
  std::vector<std::pair<std::string, std::string>> overrides;  // applied section.key = value

  bool has(const std::string& section) const;
  /// Throws ConfigError naming the first missing section.
  void require(std::initializer_list<const char*> sections) const;
  Regime effective_regime() const;
};

/// Raw section -> key -> value table, with overrides applied on top.
using ConfigTable = std::map<std::string, std::map<std::string, std::string>>;

ConfigTable read_config_table(std::istream& in, const std::string& origin);

/// Parses the table into a RunConfig. Unknown sections or keys are rejected.
RunConfig interpret_config(const ConfigTable& table, const std::string& origin,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Reads `path`, applies `section.key=value` overrides and interprets the result.
RunConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Comma-separated list of doubles.
std::vector<double> parse_list(const std::string& text, const std::string& what);

}  // namespace msldp
