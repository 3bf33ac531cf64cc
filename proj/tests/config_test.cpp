#include <gtest/gtest.h>

#include "breglab/config.hpp"

using namespace breglab;

TEST(ParseConfig, KeysCommentsAndSections) {
  const ExperimentConfig cfg = parse_config_string(
      "# leading comment\n"
      "experiment = rof-ball   # trailing comment\n"
      "\n"
      "[instance]\n"
      "R = 2.5\n"
      "[grid]\n"
      "  alpha_points=7\n");
  EXPECT_EQ(cfg.experiment, "rof-ball");
  EXPECT_DOUBLE_EQ(cfg.real("R", 1.0), 2.5);
  EXPECT_EQ(cfg.count("alpha_points", 12), 7u);
  EXPECT_EQ(cfg.count("delta_points", 12), 12u);
  EXPECT_FALSE(cfg.has("experiment"));
  EXPECT_EQ(cfg.text("out", "x.csv"), "x.csv");
}

TEST(ParseConfig, EveryExperimentNameAccepted) {
  for (auto name : kExperiments) {
    EXPECT_EQ(parse_config_string("experiment = " + std::string(name)).experiment, name);
  }
}

TEST(ParseConfig, Rejections) {
  EXPECT_THROW(parse_config_string("R = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_string("experiment = heat\n"), ConfigError);
  EXPECT_THROW(parse_config_string("experiment = quadratic\ncolour = blue\n"), ConfigError);
  EXPECT_THROW(parse_config_string("experiment = quadratic\nn = 3\nn = 4\n"), ConfigError);
  EXPECT_THROW(parse_config_string("experiment = quadratic\nexperiment = rof-ball\n"), ConfigError);
  EXPECT_THROW(parse_config_string("experiment = quadratic\nn =\n"), ConfigError);
  EXPECT_THROW(parse_config_string("experiment = quadratic\njust words\n"), ConfigError);
  EXPECT_THROW(parse_config_string("experiment = quadratic\n[grid\n"), ConfigError);
  EXPECT_THROW(parse_config_string("experiment = quadratic\n[]\n"), ConfigError);
}

TEST(ParseConfig, ErrorsCarryLineNumber) {
  try {
    parse_config_string("experiment = quadratic\n\ncolour = blue\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
}

TEST(Values, NumericValidation) {
  const ExperimentConfig cfg = parse_config_string(
      "experiment = quadratic\nR = abc\nR_star = -1\nn = 2.5\nseed = 0\nreplicates = 0\ntol = 1e400\n");
  EXPECT_THROW(cfg.real("R", 1.0), ConfigError);
  EXPECT_THROW(cfg.positive("R_star", 1.0), ConfigError);
  EXPECT_THROW(cfg.count("n", 1), ConfigError);
  EXPECT_EQ(cfg.count("seed", 1, true), 0u);
  EXPECT_THROW(cfg.count("replicates", 1), ConfigError);
  EXPECT_THROW(cfg.real("tol", 1.0), ConfigError);
}

TEST(Overrides, ReplaceAndValidate) {
  ExperimentConfig cfg = parse_config_string("experiment = quadratic\nn = 10\n");
  cfg.apply_override("n=20");
  EXPECT_EQ(cfg.count("n", 1), 20u);
  cfg.apply_override(" alpha_max = 0.5 ");
  EXPECT_DOUBLE_EQ(cfg.real("alpha_max", 1.0), 0.5);
  cfg.apply_override("experiment=rof-ball");
  EXPECT_EQ(cfg.experiment, "rof-ball");
  EXPECT_THROW(cfg.apply_override("colour=blue"), ConfigError);
  EXPECT_THROW(cfg.apply_override("n"), ConfigError);
  EXPECT_THROW(cfg.apply_override("experiment=heat"), ConfigError);
}

TEST(LoadConfig, MissingFile) {
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
}
