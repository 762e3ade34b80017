#pragma once

// INI-style configuration.
//
//   # comment            (also ';'; '#' ends a line anywhere)
//   [section]
//   key = value
//
// Keys are addressed as "section.key". Every known key is declared in
// config_schema() with its default; unknown keys are rejected with the line
// number. An environment variable QVTV_<SECTION>_<KEY> (upper case, '-' and
// '.' mapped to '_') overrides the file value.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qvtv/core.hpp"
#include "qvtv/data_io.hpp"
#include "qvtv/errors.hpp"
#include "qvtv/evaluate.hpp"
#include "qvtv/forecast.hpp"
#include "qvtv/model_spec.hpp"
#include "qvtv/sim_study.hpp"

namespace qvtv {

struct ConfigKey {
    std::string key;
    std::string default_value;
    std::string help;
};

inline const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> keys = {
        {"run.seed", "20240101", "master seed; every fit derives its own stream from it"},
        {"run.threads", "1", "worker threads for origins / replications"},
        {"run.out", "out", "output directory"},

        {"data.path", "", "input CSV (date column + numeric columns)"},
        {"data.transform", "none", "none | growth_rates"},

        {"model.models", "qvar,qvar-sv,qvar-garch", "model ids: qvar, qvar-sv, qvar-garch"},
        {"model.lag_order", "1", "VAR lag order p"},
        {"model.intercept", "true", "include an intercept"},
        {"model.tau", "0.5", "quantile level for estimate (one value or one per series)"},

        {"mcmc.burnin", "5000", "burn-in sweeps"},
        {"mcmc.draws", "5000", "kept draws"},
        {"mcmc.thin", "1", "thinning"},
        {"mcmc.freeze_adaptation", "true", "stop scale adaptation after burn-in"},
        {"mcmc.decay", "0.6", "Robbins-Monro gain exponent"},
        {"mcmc.target_path", "0.27", "target acceptance of h-path moves"},
        {"mcmc.target_static", "0.30", "target acceptance of other MH blocks"},
        {"mcmc.sweep_order", "beta,a,w,vol", "Gibbs block order"},
        {"mcmc.parallel_h", "false", "condition all h-paths on the previous sweep (approximate)"},
        {"mcmc.sv_level", "true", "sample a log-variance level; false pins it to 0"},
        {"mcmc.h_proposal", "ar1", "h-path proposal shape: ar1 | diagonal"},
        {"mcmc.h_steps", "5", "h-path MH moves per sweep"},

        {"prior.beta_mean", "0", ""},
        {"prior.beta_var", "100", ""},
        {"prior.a_mean", "0", ""},
        {"prior.a_var", "100", ""},
        {"prior.phi_a", "20", "Beta prior on (1 + phi) / 2"},
        {"prior.phi_b", "1.5", ""},
        {"prior.sigma_a", "3", "inverse-gamma prior on sigma2_h"},
        {"prior.sigma_b", "0.1", ""},
        {"prior.mu_mean", "0", "normal prior on the log-variance level"},
        {"prior.mu_var", "100", ""},
        {"prior.delta_a", "1", "inverse-gamma prior on constant variances"},
        {"prior.delta_b", "0.01", ""},
        {"prior.garch_mu_omega", "-3", "log-normal GARCH prior"},
        {"prior.garch_var_omega", "4", ""},
        {"prior.garch_mu_alpha", "-2.302585092994046", ""},
        {"prior.garch_var_alpha", "1", ""},
        {"prior.garch_mu_gamma", "-0.2231435513142097", ""},
        {"prior.garch_var_gamma", "0.5", ""},

        {"backtest.window", "261", "rolling window length"},
        {"backtest.horizons", "1,5", "forecast horizons"},
        {"backtest.step", "1", "origin step"},
        {"backtest.quantiles", "", "explicit grid; empty = grid_levels from grid_min to grid_max"},
        {"backtest.grid_levels", "17", ""},
        {"backtest.grid_min", "0.1", ""},
        {"backtest.grid_max", "0.9", ""},
        {"backtest.n_paths", "100", "simulated paths per draw for h > 1"},
        {"backtest.rearrange", "false", "sort crossing quantiles"},
        {"backtest.checkpoint", "true", "per-origin checkpoints under <out>/checkpoints"},
        {"backtest.first_origin", "-1", "row index of the first origin (-1 = window - 1)"},
        {"backtest.last_origin", "-1", "row index of the last origin (-1 = automatic)"},

        {"evaluate.benchmark", "qvar", "benchmark model id"},
        {"evaluate.records", "", "forecast CSV (default <out>/forecasts.csv)"},
        {"evaluate.realized", "", "realized panel CSV (default data.path after transform)"},
        {"evaluate.combine", "true", "add COMB-TV and COMB-AVG"},

        {"simulate.kind", "dgp", "dgp (VAR + SV + skew-t) | qvar (quantile VAR with SV)"},
        {"simulate.n", "4", ""},
        {"simulate.T", "200", ""},
        {"simulate.burnin", "100", ""},
        {"simulate.diag_low", "0.2", ""},
        {"simulate.diag_high", "0.5", ""},
        {"simulate.offdiag_sd", "0.1", ""},
        {"simulate.max_radius", "0.95", ""},
        {"simulate.sv_mu", "0", ""},
        {"simulate.sv_phi", "0.95", ""},
        {"simulate.sv_sigma2", "0.1", ""},
        {"simulate.dof", "5", ""},
        {"simulate.skew", "1", ""},
        {"simulate.innovation_scale", "1", ""},
        {"simulate.tau", "0.5", "qvar kind: quantile level"},

        {"simstudy.replications", "5", ""},
        {"simstudy.taus", "0.1,0.5,0.9", ""},

        {"report.kind", "summary", "summary | simulation"},
        {"report.periods", "full::", "label:first:last;... (empty bounds are open)"},
    };
    return keys;
}

class Config {
public:
    Config() {
        for (const auto& k : config_schema()) values_[k.key] = {k.default_value, 0, "default"};
    }

    static Config parse(std::istream& in, const std::string& source) {
        Config c;
        std::string line, section;
        int lineno = 0;
        auto fail = [&](const std::string& msg) {
            return ConfigError(source + ":" + std::to_string(lineno) + ": " + msg);
        };
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            std::string s(trim(line));
            if (s.empty() || s[0] == ';') continue;
            if (s.front() == '[') {
                if (s.back() != ']') throw fail("unterminated section header");
                section = std::string(trim(std::string_view(s).substr(1, s.size() - 2)));
                if (section.empty() || !valid_name(section)) throw fail("invalid section name '" + section + "'");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw fail("expected 'key = value'");
            const std::string key(trim(std::string_view(s).substr(0, eq)));
            const std::string value(trim(std::string_view(s).substr(eq + 1)));
            if (key.empty() || !valid_name(key)) throw fail("invalid key '" + key + "'");
            if (section.empty()) throw fail("key '" + key + "' appears before any [section]");
            const std::string full = section + "." + key;
            auto it = c.values_.find(full);
            if (it == c.values_.end()) throw fail("unknown key '" + full + "'");
            if (it->second.line > 0 && it->second.source == source)
                throw fail("duplicate key '" + full + "' (first set on line " + std::to_string(it->second.line) + ")");
            it->second = {value, lineno, source};
        }
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file '" + path + "'");
        return parse(f, path);
    }

    static std::string env_name(const std::string& key) {
        std::string e = "QVTV_";
        for (char ch : key) e += (ch == '.' || ch == '-') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        return e;
    }

    /// Applies QVTV_* environment overrides for every known key.
    void apply_env() {
        for (auto& [key, v] : values_)
            if (const char* e = std::getenv(env_name(key).c_str())) v = {e, 0, "env " + env_name(key)};
    }

    void set(const std::string& key, const std::string& value) {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second = {value, 0, "command line"};
    }

    const std::string& str(const std::string& key) const { return entry(key).value; }

    double num(const std::string& key) const {
        double x = 0;
        if (!parse_double(str(key), x)) throw bad(key, "a number");
        return x;
    }

    long integer(const std::string& key) const {
        const double x = num(key);
        if (x != std::floor(x)) throw bad(key, "an integer");
        return static_cast<long>(x);
    }

    std::uint64_t u64(const std::string& key) const {
        const std::string& s = str(key);
        std::uint64_t v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw bad(key, "an unsigned 64-bit integer");
        return v;
    }

    bool boolean(const std::string& key) const {
        std::string s = str(key);
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw bad(key, "a boolean");
    }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        for (auto& item : split_csv_line(str(key)))
            if (!item.empty()) out.push_back(item);
        return out;
    }

    std::vector<double> num_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : list(key)) {
            double x = 0;
            if (!parse_double(item, x)) throw bad(key, "a comma-separated list of numbers");
            out.push_back(x);
        }
        return out;
    }

    /// Where a key's value came from, for diagnostics.
    std::string origin(const std::string& key) const {
        const auto& e = entry(key);
        return e.line > 0 ? e.source + ":" + std::to_string(e.line) : e.source;
    }

    /// Canonical dump of every key, used for metadata sidecars.
    std::string dump() const {
        std::ostringstream os;
        for (const auto& [k, v] : values_) os << k << " = " << v.value << '\n';
        return os.str();
    }

private:
    struct Entry {
        std::string value;
        int line = 0;
        std::string source;
    };
    std::map<std::string, Entry> values_;

    static bool valid_name(const std::string& s) {
        return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '-'; });
    }

    const Entry& entry(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
        return it->second;
    }

    ConfigError bad(const std::string& key, const std::string& what) const {
        return ConfigError(origin(key) + ": value '" + str(key) + "' of " + key + " is not " + what);
    }
};

// ---------------------------------------------------------------- conversions

inline ModelSpec model_spec_from_config(const Config& c, const std::string& model_id) {
    ModelSpec s;
    try {
        s.regime = parse_regime(model_id);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(c.origin("model.models") + ": " + e.what() + " in model.models");
    }
    s.lag_order = static_cast<int>(c.integer("model.lag_order"));
    s.intercept = c.boolean("model.intercept");
    auto& m = s.mcmc;
    m.burnin = static_cast<int>(c.integer("mcmc.burnin"));
    m.draws = static_cast<int>(c.integer("mcmc.draws"));
    m.thin = static_cast<int>(c.integer("mcmc.thin"));
    m.freeze_adaptation = c.boolean("mcmc.freeze_adaptation");
    m.decay = c.num("mcmc.decay");
    m.target_path = c.num("mcmc.target_path");
    m.target_static = c.num("mcmc.target_static");
    m.sweep_order.clear();
    try {
        for (const auto& b : c.list("mcmc.sweep_order")) m.sweep_order.push_back(parse_block(b));
        m.h_proposal = parse_path_proposal(c.str("mcmc.h_proposal"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(e.what()));
    }
    m.parallel_h = c.boolean("mcmc.parallel_h");
    m.sv_level = c.boolean("mcmc.sv_level");
    m.h_steps = static_cast<int>(c.integer("mcmc.h_steps"));
    auto& p = s.priors;
    p.beta_mean = c.num("prior.beta_mean");
    p.beta_var = c.num("prior.beta_var");
    p.a_mean = c.num("prior.a_mean");
    p.a_var = c.num("prior.a_var");
    p.phi_a = c.num("prior.phi_a");
    p.phi_b = c.num("prior.phi_b");
    p.sigma_a = c.num("prior.sigma_a");
    p.sigma_b = c.num("prior.sigma_b");
    p.mu_mean = c.num("prior.mu_mean");
    p.mu_var = c.num("prior.mu_var");
    p.delta_a = c.num("prior.delta_a");
    p.delta_b = c.num("prior.delta_b");
    p.garch.mu_omega = c.num("prior.garch_mu_omega");
    p.garch.var_omega = c.num("prior.garch_var_omega");
    p.garch.mu_alpha = c.num("prior.garch_mu_alpha");
    p.garch.var_alpha = c.num("prior.garch_var_alpha");
    p.garch.mu_gamma = c.num("prior.garch_mu_gamma");
    p.garch.var_gamma = c.num("prior.garch_var_gamma");
    try {
        m.validate();
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (s.lag_order < 0) throw ConfigError("model.lag_order must be >= 0");
    return s;
}

inline std::vector<ModelEntry> models_from_config(const Config& c) {
    std::vector<ModelEntry> out;
    for (const auto& id : c.list("model.models")) out.push_back({id, model_spec_from_config(c, id)});
    if (out.empty()) throw ConfigError("model.models is empty");
    return out;
}

inline std::vector<double> quantile_grid_from_config(const Config& c) {
    auto q = c.num_list("backtest.quantiles");
    if (q.empty()) {
        const long L = c.integer("backtest.grid_levels");
        const double lo = c.num("backtest.grid_min"), hi = c.num("backtest.grid_max");
        if (L < 1) throw ConfigError("backtest.grid_levels must be >= 1");
        for (long i = 0; i < L; ++i) q.push_back(L == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(L - 1));
    }
    for (double t : q)
        if (!(t > 0 && t < 1)) throw ConfigError("quantile level " + format_double(t) + " outside (0, 1)");
    return q;
}

inline BacktestPlan plan_from_config(const Config& c) {
    BacktestPlan p;
    p.window_length = static_cast<int>(c.integer("backtest.window"));
    p.horizons.clear();
    for (double h : c.num_list("backtest.horizons")) p.horizons.push_back(static_cast<int>(h));
    p.step = static_cast<int>(c.integer("backtest.step"));
    p.quantile_grid = quantile_grid_from_config(c);
    p.models = models_from_config(c);
    p.n_paths = static_cast<int>(c.integer("backtest.n_paths"));
    p.rearrange = c.boolean("backtest.rearrange");
    p.master_seed = c.u64("run.seed");
    p.threads = static_cast<int>(c.integer("run.threads"));
    p.first_origin = static_cast<int>(c.integer("backtest.first_origin"));
    p.last_origin = static_cast<int>(c.integer("backtest.last_origin"));
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return p;
}

inline DgpConfig dgp_from_config(const Config& c) {
    DgpConfig d;
    d.n = static_cast<int>(c.integer("simulate.n"));
    d.T = static_cast<int>(c.integer("simulate.T"));
    d.burnin = static_cast<int>(c.integer("simulate.burnin"));
    d.diag_low = c.num("simulate.diag_low");
    d.diag_high = c.num("simulate.diag_high");
    d.offdiag_sd = c.num("simulate.offdiag_sd");
    d.max_radius = c.num("simulate.max_radius");
    d.sv_mu = c.num("simulate.sv_mu");
    d.sv_phi = c.num("simulate.sv_phi");
    d.sv_sigma2 = c.num("simulate.sv_sigma2");
    d.dof = c.num("simulate.dof");
    d.skew = c.num("simulate.skew");
    d.innovation_scale = c.num("simulate.innovation_scale");
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return d;
}

inline std::vector<SubPeriod> periods_from_config(const Config& c) {
    std::vector<SubPeriod> out;
    std::stringstream ss(c.str("report.periods"));
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (trim(item).empty()) continue;
        std::vector<std::string> parts;
        std::stringstream is{std::string(trim(item))};
        std::string part;
        while (std::getline(is, part, ':')) parts.emplace_back(trim(part));
        while (parts.size() < 3) parts.emplace_back();
        if (parts.size() != 3 || parts[0].empty()) throw ConfigError("report.periods entry '" + item + "' is not label:first:last");
        out.push_back({parts[0], parts[1], parts[2]});
    }
    if (out.empty()) throw ConfigError("report.periods is empty");
    return out;
}

}  // namespace qvtv
