#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "qvtv/config.hpp"

using namespace qvtv;

namespace {

Config parse(const std::string& text) {
    std::istringstream in(text);
    return Config::parse(in, "c.ini");
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, DefaultsCoverEverySchemaKey) {
    const Config c;
    for (const auto& k : config_schema()) {
        EXPECT_EQ(c.str(k.key), k.default_value) << k.key;
        EXPECT_EQ(c.origin(k.key), "default");
    }
    EXPECT_EQ(c.u64("run.seed"), 20240101u);
    EXPECT_EQ(c.list("model.models").size(), 3u);
}

TEST(Config, ParsesSectionsCommentsAndTypes) {
    const auto c = parse(
        "# header\n"
        "[run]\n"
        "seed = 99   # trailing\n"
        "; other comment\n"
        "\n"
        "[mcmc]\n"
        "burnin=12\n"
        "parallel_h = Yes\n"
        "[backtest]\n"
        "horizons = 1, 3,5\n");
    EXPECT_EQ(c.u64("run.seed"), 99u);
    EXPECT_EQ(c.integer("mcmc.burnin"), 12);
    EXPECT_TRUE(c.boolean("mcmc.parallel_h"));
    EXPECT_EQ(c.num_list("backtest.horizons"), (std::vector<double>{1, 3, 5}));
    EXPECT_EQ(c.origin("mcmc.burnin"), "c.ini:7");
}

TEST(Config, ErrorsCarryLineNumbers) {
    EXPECT_NE(error_of("[run]\nseed = 1\n[bogus]\nx = 2\n").find("c.ini:4"), std::string::npos);
    EXPECT_NE(error_of("[run]\nseed = 1\n[bogus]\nx = 2\n").find("unknown key 'bogus.x'"), std::string::npos);
    EXPECT_NE(error_of("[run\n").find("c.ini:1: unterminated"), std::string::npos);
    EXPECT_NE(error_of("[run]\n\njust words\n").find("c.ini:3"), std::string::npos);
    EXPECT_NE(error_of("seed = 1\n").find("before any [section]"), std::string::npos);
    const auto dup = error_of("[run]\nseed = 1\nseed = 2\n");
    EXPECT_NE(dup.find("c.ini:3"), std::string::npos) << dup;
    EXPECT_NE(dup.find("line 2"), std::string::npos) << dup;
    EXPECT_THROW(Config::load("/nonexistent.ini"), ConfigError);
}

TEST(Config, BadValuesNameKeyAndOrigin) {
    const auto c = parse("[mcmc]\nburnin = 1.5\nthin = abc\nparallel_h = maybe\n");
    try {
        c.integer("mcmc.burnin");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("c.ini:2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("mcmc.burnin"), std::string::npos);
    }
    EXPECT_THROW(c.num("mcmc.thin"), ConfigError);
    EXPECT_THROW(c.boolean("mcmc.parallel_h"), ConfigError);
    EXPECT_THROW(c.str("mcmc.nope"), ConfigError);
}

TEST(Config, OverridePrecedence) {
    auto c = parse("[mcmc]\nburnin = 10\ndraws = 20\n");
    ::setenv("QVTV_MCMC_BURNIN", "30", 1);
    c.apply_env();
    ::unsetenv("QVTV_MCMC_BURNIN");
    EXPECT_EQ(c.integer("mcmc.burnin"), 30);
    EXPECT_EQ(c.origin("mcmc.burnin"), "env QVTV_MCMC_BURNIN");
    EXPECT_EQ(c.integer("mcmc.draws"), 20);
    c.set("mcmc.burnin", "40");
    EXPECT_EQ(c.integer("mcmc.burnin"), 40);
    EXPECT_EQ(c.origin("mcmc.burnin"), "command line");
    EXPECT_THROW(c.set("mcmc.bogus", "1"), ConfigError);
    EXPECT_EQ(Config::env_name("model.lag_order"), "QVTV_MODEL_LAG_ORDER");
}

TEST(Config, ModelSpecsFromConfig) {
    const auto c = parse("[model]\nmodels = qvar, qvar-sv ,qvar-garch\nlag_order = 2\n[mcmc]\nburnin = 7\nsweep_order = vol,w,a,beta\n");
    const auto ms = models_from_config(c);
    ASSERT_EQ(ms.size(), 3u);
    EXPECT_EQ(ms[1].id, "qvar-sv");
    EXPECT_EQ(ms[0].spec.regime, Regime::Const);
    EXPECT_EQ(ms[1].spec.regime, Regime::SV);
    EXPECT_EQ(ms[2].spec.regime, Regime::Garch);
    EXPECT_EQ(ms[2].spec.lag_order, 2);
    EXPECT_EQ(ms[0].spec.mcmc.burnin, 7);
    EXPECT_EQ(ms[0].spec.mcmc.sweep_order.front(), Block::Vol);
    EXPECT_THROW(models_from_config(parse("[model]\nmodels = qvar-xyz\n")), ConfigError);
    EXPECT_THROW(models_from_config(parse("[mcmc]\nsweep_order = beta,zeta\n")), ConfigError);
    EXPECT_THROW(models_from_config(parse("[mcmc]\ndraws = 0\n")), ConfigError);
}

TEST(Config, GridPlanDgpAndPeriods) {
    const Config d;
    const auto g = quantile_grid_from_config(d);
    ASSERT_EQ(g.size(), 17u);
    EXPECT_NEAR(g.front(), 0.1, 1e-15);
    EXPECT_NEAR(g[8], 0.5, 1e-15);
    EXPECT_NEAR(g.back(), 0.9, 1e-15);
    EXPECT_EQ(quantile_grid_from_config(parse("[backtest]\nquantiles = 0.25,0.75\n")), (std::vector<double>{0.25, 0.75}));
    EXPECT_THROW(quantile_grid_from_config(parse("[backtest]\nquantiles = 0.5,1.0\n")), ConfigError);

    const auto p = plan_from_config(d);
    EXPECT_EQ(p.window_length, 261);
    EXPECT_EQ(p.horizons, (std::vector<int>{1, 5}));
    EXPECT_EQ(p.master_seed, 20240101u);

    const auto dg = dgp_from_config(d);
    EXPECT_EQ(dg.n, 4);
    EXPECT_EQ(dg.T, 200);
    EXPECT_THROW(dgp_from_config(parse("[simulate]\nsv_phi = 1\n")), ConfigError);

    const auto per = periods_from_config(parse("[report]\nperiods = full::; pre:2000-01-01:2007-12-31 ;post:2008-01-01:\n"));
    ASSERT_EQ(per.size(), 3u);
    EXPECT_EQ(per[0].first, "");
    EXPECT_EQ(per[1].last, "2007-12-31");
    EXPECT_EQ(per[2].first, "2008-01-01");
    EXPECT_EQ(per[2].last, "");
    EXPECT_THROW(periods_from_config(parse("[report]\nperiods = a:b:c:d\n")), ConfigError);
}

TEST(Config, SampleConfigLoads) {
    const auto c = Config::load(std::string(QVTV_SOURCE_DIR) + "/configs/toy.ini");
    EXPECT_EQ(c.u64("run.seed"), 7u);
    EXPECT_NO_THROW(plan_from_config(c));
    EXPECT_NO_THROW(dgp_from_config(c));
    EXPECT_EQ(c.origin("backtest.window"), std::string(QVTV_SOURCE_DIR) + "/configs/toy.ini:32");
}
