#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qvtv/qvtv.hpp"

namespace fs = std::filesystem;
using namespace qvtv;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kIo = 4 };

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

class Output {
public:
    explicit Output(std::string dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_ + "': " + ec.message());
    }

    const std::string& dir() const { return dir_; }
    std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

    void write(const std::string& name, const std::string& content) {
        write_file_atomic(path(name), content);
        std::cerr << "  wrote " << path(name) << '\n';
    }

    /// Lists every regular file under the directory with its SHA-256.
    void manifest() const {
        std::vector<std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(dir_))
            if (e.is_regular_file()) {
                auto rel = fs::relative(e.path(), dir_).generic_string();
                if (rel != "manifest.sha256" && rel.find(".tmp") == std::string::npos) files.push_back(rel);
            }
        std::sort(files.begin(), files.end());
        std::ostringstream os;
        for (const auto& f : files) os << sha256_hex(read_file(path(f))) << "  " << f << '\n';
        write_file_atomic(path("manifest.sha256"), os.str());
    }

private:
    std::string dir_;
};

std::string metadata_json(const std::string& command, const Config& cfg) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["seed"] = cfg.u64("run.seed");
    nlohmann::ordered_json keys;
    std::istringstream is(cfg.dump());
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find(" = ");
        const auto key = line.substr(0, eq);
        if (key == "run.out" || key == "run.threads") continue;
        keys[key] = line.substr(eq + 3);
    }
    j["config_sha256"] = sha256_hex(keys.dump());
    j["config"] = keys;
    return j.dump(2) + "\n";
}

TimeSeriesPanel load_data(const Config& cfg) {
    const std::string& path = cfg.str("data.path");
    if (path.empty()) throw ConfigError("data.path is not set");
    auto panel = load_csv(path);
    const std::string& tr = cfg.str("data.transform");
    if (tr == "growth_rates") return growth_rates(panel);
    if (tr != "none") throw ConfigError(cfg.origin("data.transform") + ": unknown transform '" + tr + "'");
    return panel;
}

QuantileLevels tau_from_config(const Config& cfg, int n) {
    const auto v = cfg.num_list("model.tau");
    try {
        if (v.size() == 1) return QuantileLevels::uniform(n, v[0]);
        if (static_cast<int>(v.size()) == n) return QuantileLevels(v);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(cfg.origin("model.tau") + ": " + e.what());
    }
    throw ConfigError(cfg.origin("model.tau") + ": model.tau needs 1 or " + std::to_string(n) + " values");
}

std::string matrix_to_csv(const Mat& m, const std::vector<std::string>& row_names,
                          const std::vector<std::string>& col_names) {
    std::ostringstream os;
    os << "row";
    for (const auto& c : col_names) os << ',' << c;
    os << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << row_names[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << format_double(m(i, j));
        os << '\n';
    }
    return os.str();
}

std::vector<std::string> regressor_names(const std::vector<std::string>& names, int lag_order, bool intercept) {
    std::vector<std::string> out;
    if (intercept) out.push_back("const");
    for (int l = 1; l <= lag_order; ++l)
        for (const auto& n : names) out.push_back(n + "_L" + std::to_string(l));
    return out;
}

// ------------------------------------------------------------------ commands

int cmd_simulate(const Config& cfg, Output& out) {
    const auto seed = cfg.u64("run.seed");
    const auto dgp = dgp_from_config(cfg);
    const std::string& kind = cfg.str("simulate.kind");
    SimulatedData sim;
    int lag_order = 1;
    if (kind == "dgp") {
        sim = simulate_dgp(dgp, seed);
    } else if (kind == "qvar") {
        Rng rng(derive_seed(seed, 0x51, 0, 0));
        QvarDgp g;
        g.tau = QuantileLevels::uniform(dgp.n, cfg.num("simulate.tau"));
        g.B = Mat::Zero(dgp.n, dgp.n + 1);
        g.B.rightCols(dgp.n) = draw_stable_var(dgp, rng);
        g.A = Mat::Identity(dgp.n, dgp.n);
        for (int i = 1; i < dgp.n; ++i)
            for (int j = 0; j < i; ++j) g.A(i, j) = 0.3 * rng.normal();
        g.sv_mu = Vec::Constant(dgp.n, dgp.sv_mu);
        g.sv_phi = Vec::Constant(dgp.n, dgp.sv_phi);
        g.sv_sigma2 = Vec::Constant(dgp.n, dgp.sv_sigma2);
        g.T = dgp.T;
        g.burnin = dgp.burnin;
        sim = simulate_qvar(g, seed);
    } else {
        throw ConfigError(cfg.origin("simulate.kind") + ": unknown simulate.kind '" + kind + "'");
    }
    const auto& names = sim.panel.names;
    out.write("panel.csv", panel_to_csv(sim.panel));
    out.write("truth_coefficients.csv", matrix_to_csv(sim.B, names, regressor_names(names, lag_order, kind == "qvar")));
    TimeSeriesPanel hp;
    hp.names = names;
    hp.values = sim.h;
    hp.dates.assign(sim.panel.dates.end() - sim.h.rows(), sim.panel.dates.end());
    out.write("truth_log_variance.csv", panel_to_csv(hp));
    out.write("metadata_simulate.json", metadata_json("simulate", cfg));
    return kOk;
}

int cmd_estimate(const Config& cfg, Output& out) {
    const auto panel = load_data(cfg);
    auto [std_panel, stdz] = standardize(panel);
    const auto models = models_from_config(cfg);
    const auto seed = cfg.u64("run.seed");
    std::ostringstream sd;
    sd << "variable,mean,sd\n";
    for (int j = 0; j < panel.n(); ++j)
        sd << panel.names[static_cast<std::size_t>(j)] << ',' << format_double(stdz.mean[j]) << ','
           << format_double(stdz.sd[j]) << '\n';
    out.write("standardization.csv", sd.str());

    std::ostringstream acc_all;
    acc_all << "model_id,block,rate_burnin,rate_kept\n";
    for (auto m : models) {
        m.spec.tau = tau_from_config(cfg, panel.n());
        const auto design = build_var_design(std_panel.values, m.spec.lag_order, m.spec.intercept);
        Rng rng(fit_seed(seed, panel.T() - 1, m.id, m.spec.tau[0]));
        const auto t0 = std::chrono::steady_clock::now();
        const auto dr = run_chain(m.spec, design, rng);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.write("draws_" + m.id + ".csv", draws_to_csv(dr, panel.names));
        out.write("vol_path_" + m.id + ".csv", vol_path_to_csv(dr, panel.dates, panel.names));
        const auto acc = acceptance_to_csv(m.id, dr);
        acc_all << acc.substr(acc.find('\n') + 1);
        std::cout << "model " << m.id << ": " << dr.size() << " draws in " << std::fixed << std::setprecision(2) << secs
                  << " s (" << std::setprecision(3) << 1e3 * secs / (m.spec.mcmc.burnin + m.spec.mcmc.draws * m.spec.mcmc.thin)
                  << " ms/sweep)\n";
        std::cout << "  acceptance (burn-in / kept):\n";
        for (const auto& [block, t] : dr.acceptance)
            std::cout << "    " << std::left << std::setw(14) << block << std::right << std::setprecision(3)
                      << t.rate_burnin() << " / " << t.rate_kept() << '\n';
        std::cout.unsetf(std::ios::floatfield);
    }
    out.write("acceptance.csv", acc_all.str());
    out.write("metadata_estimate.json", metadata_json("estimate", cfg));
    return kOk;
}

int cmd_backtest(const Config& cfg, Output& out) {
    const auto panel = load_data(cfg);
    auto plan = plan_from_config(cfg);
    if (cfg.boolean("backtest.checkpoint")) plan.checkpoint_dir = out.path("checkpoints");
    const auto res = run_backtest(panel, plan, [](const std::string& msg) { std::cerr << msg << '\n'; });
    out.write("forecasts.csv", records_to_csv(res.records));
    std::ostringstream f;
    f << "origin_date,model_id,tau,message\n";
    for (const auto& x : res.failures) {
        std::string msg = x.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        f << x.origin_date << ',' << x.model_id << ',' << format_double(x.tau) << ',' << msg << '\n';
    }
    out.write("failures.csv", f.str());
    std::ostringstream s;
    s << "origins,origins_resumed,records,failures,crossings,paths,trimmed_paths\n"
      << res.origins_total << ',' << res.origins_resumed << ',' << res.records.size() << ',' << res.failures.size() << ','
      << res.crossings << ',' << res.paths << ',' << res.trimmed_paths << '\n';
    out.write("backtest_summary.csv", s.str());
    out.write("metadata_backtest.json", metadata_json("backtest", cfg));
    std::cout << res.origins_total << " origins, " << res.records.size() << " records, " << res.failures.size()
              << " failed fits, " << res.crossings << " quantile crossings\n";
    return kOk;
}

int cmd_evaluate(const Config& cfg, Output& out) {
    std::string records_path = cfg.str("evaluate.records");
    if (records_path.empty()) records_path = out.path("forecasts.csv");
    const auto records = load_records(records_path);
    TimeSeriesPanel realized;
    if (const auto& r = cfg.str("evaluate.realized"); !r.empty()) realized = load_csv(r);
    else realized = load_data(cfg);
    EvaluationOptions opt;
    opt.benchmark = cfg.str("evaluate.benchmark");
    opt.combine = cfg.boolean("evaluate.combine");
    const auto res = evaluate(records, realized, opt);
    out.write("scores.csv", score_table_to_csv(res.table));
    out.write("scores.txt", score_table_to_text(res.table, opt.benchmark));
    out.write("weights_tv.csv", weights_to_csv(res.tv_weights, true));
    out.write("weights_avg.csv", weights_to_csv(res.avg_weights, false));
    auto all = records;
    all.insert(all.end(), res.combined.begin(), res.combined.end());
    out.write("forecasts_combined.csv", records_to_csv(all));
    out.write("metadata_evaluate.json", metadata_json("evaluate", cfg));
    std::cout << score_table_to_text(res.table, opt.benchmark);
    return kOk;
}

int cmd_report(const Config& cfg, Output& out) {
    const std::string& kind = cfg.str("report.kind");
    if (kind == "summary") {
        const auto panel = load_data(cfg);
        out.write("summary.csv", summary_to_csv(summary_stats(panel, periods_from_config(cfg))));
    } else if (kind == "simulation") {
        SimStudyConfig sc;
        sc.dgp = dgp_from_config(cfg);
        sc.taus = cfg.num_list("simstudy.taus");
        sc.replications = static_cast<int>(cfg.integer("simstudy.replications"));
        sc.models = models_from_config(cfg);
        sc.benchmark = cfg.str("evaluate.benchmark");
        sc.master_seed = cfg.u64("run.seed");
        sc.threads = static_cast<int>(cfg.integer("run.threads"));
        const auto rep = run_simulation_study(sc);
        out.write("simulation_summary.csv", sim_summary_to_csv(rep, sc.benchmark));
        out.write("simulation_replications.csv", sim_replications_to_csv(rep));
        std::cout << sim_summary_to_csv(rep, sc.benchmark);
    } else {
        throw ConfigError(cfg.origin("report.kind") + ": unknown report.kind '" + kind + "'");
    }
    out.write("metadata_report.json", metadata_json("report", cfg));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian quantile VAR with constant, SV and GARCH scale dynamics"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed (overrides run.seed)");
    app.add_option("--threads", threads, "worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output directory (overrides run.out)");
    app.add_option("--set", sets, "override a config key, section.key=value (repeatable)");

    std::string records, realized, kind;
    auto* sim = app.add_subcommand("simulate", "simulate a panel and write it with its true parameters");
    auto* est = app.add_subcommand("estimate", "run the MCMC for every configured model on data.path");
    auto* bt = app.add_subcommand("backtest", "rolling-window quantile forecasts");
    auto* ev = app.add_subcommand("evaluate", "quantile scores, DM tests and combination weights");
    ev->add_option("--records", records, "forecast CSV (overrides evaluate.records)");
    ev->add_option("--realized", realized, "realized panel CSV (overrides evaluate.realized)");
    auto* rp = app.add_subcommand("report", "summary statistics or the simulation study");
    rp->add_option("--kind", kind, "summary | simulation (overrides report.kind)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        Config cfg = config_path.empty() ? Config{} : Config::load(config_path);
        cfg.apply_env();
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
            cfg.set(std::string(trim(std::string_view(s).substr(0, eq))), std::string(trim(std::string_view(s).substr(eq + 1))));
        }
        if (seed) cfg.set("run.seed", std::to_string(*seed));
        if (threads) cfg.set("run.threads", std::to_string(*threads));
        if (!out_dir.empty()) cfg.set("run.out", out_dir);
        if (!records.empty()) cfg.set("evaluate.records", records);
        if (!realized.empty()) cfg.set("evaluate.realized", realized);
        if (!kind.empty()) cfg.set("report.kind", kind);

        Output out(cfg.str("run.out"));
        int rc = kOk;
        if (*sim) rc = cmd_simulate(cfg, out);
        else if (*est) rc = cmd_estimate(cfg, out);
        else if (*bt) rc = cmd_backtest(cfg, out);
        else if (*ev) rc = cmd_evaluate(cfg, out);
        else if (*rp) rc = cmd_report(cfg, out);
        out.manifest();
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
