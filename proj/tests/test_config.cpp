#include <catch_amalgamated.hpp>

#include <sstream>

#include "msldp/config.hpp"

using namespace msldp;

namespace {

RunConfig parse(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  std::istringstream in(text);
  return interpret_config(read_config_table(in, "inline"), "inline", overrides);
}

}  // namespace

TEST_CASE("shipped configs parse and build") {
  const std::string dir = MSLDP_SOURCE_DIR "/configs/";
  for (const char* name : {"langevin.cfg", "quasipotential.cfg", "const-sigma.cfg", "regime2.cfg",
                           "homogenization-limit.cfg"}) {
    INFO(name);
    RunConfig cfg = load_config(dir + name);
    CHECK_NOTHROW(build_model(cfg.model));
  }
  RunConfig cfg = load_config(dir + "langevin.cfg");
  CHECK(cfg.model.constants.at("D") == 1.0);
  CHECK(cfg.model.definitions.at("V") == "1.5*(x^2 - 1)^2");
  CHECK(cfg.mc.dt_divisor == 40.0);
  CHECK(cfg.mc.N == 10000);
  CHECK(cfg.mc.scheme == "both");
  REQUIRE(cfg.functional);
  CHECK(cfg.functional->kind == FunctionalSpec::Kind::Terminal);
  CHECK(cfg.functional->constants.at("A") == 1.0);
  CHECK(cfg.effective_regime() == Regime::One);
  CHECK(load_config(dir + "const-sigma.cfg").effective_regime() == Regime::Three);
  CHECK(load_config(dir + "regime2.cfg").effective_regime() == Regime::Two);
  CHECK(load_config(dir + "quasipotential.cfg").path.x1 == std::vector<double>{0.0});
}

TEST_CASE("grammar details") {
  auto cfg = parse("; comment\n# another\n[model]\nsigma = 1\nx0 = 0.5\n[mc]\neps = 0.5, 0.25,0.125\nN = 1e4\n");
  CHECK(cfg.mc.eps == std::vector<double>{0.5, 0.25, 0.125});
  CHECK(cfg.mc.N == 10000);
  CHECK(cfg.model.x0 == std::vector<double>{0.5});
  CHECK(cfg.has("mc"));
  CHECK_FALSE(cfg.has("path"));
  CHECK_THROWS_AS(cfg.require({"model", "path"}), ConfigError);

  auto two = parse("[model]\ndim = 2\nsigma_11 = 1\nsigma_22 = 2\nb_1 = sin(2*pi*y_2)\n");
  CHECK(two.model.sigma == std::vector<std::string>{"1", "0", "0", "2"});
  CHECK(two.model.b == std::vector<std::string>{"sin(2*pi*y_2)", "0"});
}

TEST_CASE("rejections") {
  CHECK_THROWS_WITH(parse("[model]\nsigma = 1\nsigmaa = 2\n"), Catch::Matchers::ContainsSubstring("unknown key 'sigmaa'"));
  CHECK_THROWS_WITH(parse("[model]\nsigma = 1\n[extra]\nk = 1\n"), Catch::Matchers::ContainsSubstring("unknown section"));
  CHECK_THROWS_WITH(parse("[model]\nsigma = 1\na = two\n"), Catch::Matchers::ContainsSubstring("[model] a"));
  CHECK_THROWS_AS(parse("[model]\nb = 0\n"), ConfigError);                       // sigma required
  CHECK_THROWS_AS(parse("[model]\nsigma = 1\n[mc]\nscheme = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nsigma = 1\n[mc]\nN = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nsigma = 1\nsigma = 2\n"), ConfigError);        // duplicate key
  CHECK_THROWS_AS(parse("[model]\nsigma = 1\n[functional]\nkind = terminal\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nsigma = 1\n[params]\n2x = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("overrides") {
  auto cfg = parse("[model]\nsigma = 1\n[mc]\nN = 10\n", {{"mc.N", "20"}, {"mc.seed", "5"}, {"model.x0", "2"}});
  CHECK(cfg.mc.N == 20);
  CHECK(cfg.mc.seed == 5);
  CHECK(cfg.model.x0 == std::vector<double>{2.0});
  CHECK(cfg.overrides.size() == 3);
  CHECK_THROWS_AS(parse("[model]\nsigma = 1\n", {{"mc.bogus", "1"}}), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nsigma = 1\n", {{"nodot", "1"}}), ConfigError);
}
