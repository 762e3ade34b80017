#pragma once

// Quantile forecasts from posterior draws and the rolling-window backtest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "qvtv/core.hpp"
#include "qvtv/data_io.hpp"
#include "qvtv/errors.hpp"
#include "qvtv/model_spec.hpp"
#include "qvtv/parallel.hpp"
#include "qvtv/rng.hpp"
#include "qvtv/sampler.hpp"

namespace qvtv {

/// Posterior mean of X_{t+1} beta: the MAL location is the conditional quantile.
inline Vec forecast_one_step(const PosteriorDraws& dr, const Vec& x_next) {
    if (x_next.size() != dr.k)
        throw std::invalid_argument("forecast_one_step: regressor has " + std::to_string(x_next.size()) +
                                    " entries, model expects " + std::to_string(dr.k));
    const Vec bbar = dr.beta_mean();
    return Eigen::Map<const Mat>(bbar.data(), dr.k, dr.n).transpose() * x_next;
}

struct MultiStepDiagnostics {
    long paths = 0;
    long trimmed = 0;
};

inline constexpr double kPathClamp = 1e6;

/// Iterated h-step forecast: for every draw, `n_paths` future paths are
/// simulated from the fitted law up to t+h-1 (fresh w ~ Exp(1) and volatility
/// propagated by the regime's dynamics); the location at t+h is averaged over
/// draws and paths. `history` holds the most recent observations, last row last.
inline Vec forecast_multi_step(const PosteriorDraws& dr, const Mat& history, int h, int n_paths, Rng& rng,
                               MultiStepDiagnostics* diag = nullptr) {
    const int n = dr.n, k = dr.k, p = dr.lag_order;
    if (h < 1) throw std::invalid_argument("forecast_multi_step: horizon must be >= 1");
    if (history.cols() != n || history.rows() < p)
        throw std::invalid_argument("forecast_multi_step: history does not match the model dimensions");
    const Vec x0 = var_regressors(history, p, dr.intercept);
    if (h == 1) return forecast_one_step(dr, x0);
    if (n_paths < 1) throw std::invalid_argument("forecast_multi_step: n_paths must be >= 1");
    const ThetaParams th = theta_params(dr.tau);
    Vec acc = Vec::Zero(n);
    long used = 0, trimmed = 0;
    const int keep = std::max(p, 1);
    Mat hist(keep + h, n);
    for (int d = 0; d < dr.size(); ++d) {
        const Vec bd = dr.beta_draw(d);
        const Mat B = Eigen::Map<const Mat>(bd.data(), k, n).transpose();
        const Mat A = dr.A(d);
        for (int path = 0; path < n_paths; ++path) {
            hist.topRows(keep) = history.bottomRows(keep);
            Vec var(n), logv(n);
            switch (dr.regime) {
                case Regime::Const: var = dr.delta2.row(d).transpose(); break;
                case Regime::SV:
                    for (int j = 0; j < n; ++j) {
                        const double mu = dr.mu(d, j), phi = dr.phi(d, j);
                        logv[j] = mu + phi * (dr.h_last(d, j) - mu) + std::sqrt(dr.sigma2_h(d, j)) * rng.normal();
                    }
                    var = logv.array().exp();
                    break;
                case Regime::Garch: var = dr.sigma2_next.row(d).transpose(); break;
            }
            bool ok = true;
            for (int s = 1; s < h; ++s) {
                const Vec x = var_regressors(hist.topRows(keep + s - 1), p, dr.intercept);
                const Vec loc = B * x;
                const double w = rng.exponential();
                const Vec sd = var.array().sqrt();
                Vec z(n);
                for (int j = 0; j < n; ++j) z[j] = rng.normal();
                const Vec shock = w * sd.cwiseProduct(th.theta1) +
                                  std::sqrt(w) * th.theta2.cwiseProduct(A * sd.cwiseProduct(z));
                const Vec y = loc + shock;
                if (!y.allFinite() || y.cwiseAbs().maxCoeff() > kPathClamp) {
                    ok = false;
                    break;
                }
                hist.row(keep + s - 1) = y.transpose();
                switch (dr.regime) {
                    case Regime::Const: break;
                    case Regime::SV:
                        for (int j = 0; j < n; ++j) {
                            const double mu = dr.mu(d, j), phi = dr.phi(d, j);
                            logv[j] = mu + phi * (logv[j] - mu) + std::sqrt(dr.sigma2_h(d, j)) * rng.normal();
                        }
                        var = logv.array().exp();
                        break;
                    case Regime::Garch:
                        for (int j = 0; j < n; ++j) {
                            const double e = shock[j] - w * th.theta1[j] * sd[j];
                            var[j] = dr.omega(d, j) + dr.alpha(d, j) * e * e + dr.gamma(d, j) * var[j];
                        }
                        break;
                }
            }
            if (!ok) {
                ++trimmed;
                continue;
            }
            acc += B * var_regressors(hist.topRows(keep + h - 1), p, dr.intercept);
            ++used;
        }
    }
    if (diag) {
        diag->paths += used + trimmed;
        diag->trimmed += trimmed;
    }
    if (used == 0) throw NumericalError("forecast_multi_step: every simulated path exceeded the clamp");
    return acc / static_cast<double>(used);
}

// ---------------------------------------------------------------- backtest

struct ModelEntry {
    std::string id;
    ModelSpec spec;  // tau is overwritten per grid level
};

inline std::vector<double> default_quantile_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 16; ++i) g.push_back(0.1 + 0.05 * i);
    return g;
}

struct BacktestPlan {
    int window_length = 261;
    std::vector<int> horizons{1, 5};
    int step = 1;
    std::vector<double> quantile_grid = default_quantile_grid();
    std::vector<ModelEntry> models;
    int n_paths = 100;
    bool rearrange = false;
    std::string checkpoint_dir;  // empty disables checkpointing
    std::uint64_t master_seed = 20240101;
    int threads = 1;
    int first_origin = -1;  // row index; -1 = window_length - 1
    int last_origin = -1;   // row index; -1 = last row with every horizon observed

    int max_horizon() const { return *std::max_element(horizons.begin(), horizons.end()); }

    void validate() const {
        if (models.empty()) throw std::invalid_argument("BacktestPlan: no models");
        if (horizons.empty()) throw std::invalid_argument("BacktestPlan: no horizons");
        for (int h : horizons)
            if (h < 1) throw std::invalid_argument("BacktestPlan: horizons must be >= 1");
        if (step < 1) throw std::invalid_argument("BacktestPlan: step must be >= 1");
        if (quantile_grid.empty()) throw std::invalid_argument("BacktestPlan: empty quantile grid");
        for (const auto& m : models)
            if (window_length < m.spec.lag_order + 10)
                throw std::invalid_argument("BacktestPlan: window_length must be >= lag_order + 10");
    }

    /// Origin rows: the last in-sample row of each window.
    std::vector<int> origins(int T) const {
        const int first = first_origin >= 0 ? first_origin : window_length - 1;
        const int last = last_origin >= 0 ? std::min(last_origin, T - 1 - max_horizon()) : T - 1 - max_horizon();
        if (first < window_length - 1) throw std::invalid_argument("BacktestPlan: first origin precedes a full window");
        std::vector<int> out;
        for (int o = first; o <= last; o += step) out.push_back(o);
        return out;
    }
};

struct ForecastRecord {
    std::string origin_date;
    int horizon = 1;
    double tau = 0.5;
    int variable = 0;
    std::string model_id;
    double q_std = 0.0;
    double q_raw = 0.0;
};

inline constexpr const char* kForecastHeader = "origin_date,horizon,tau,variable,model_id,q_hat_std,q_hat_raw";

inline std::string records_to_csv(const std::vector<ForecastRecord>& recs) {
    std::ostringstream os;
    os << kForecastHeader << '\n';
    for (const auto& r : recs)
        os << r.origin_date << ',' << r.horizon << ',' << format_double(r.tau) << ',' << r.variable << ','
           << r.model_id << ',' << format_double(r.q_std) << ',' << format_double(r.q_raw) << '\n';
    return os.str();
}

inline std::vector<ForecastRecord> parse_records_csv(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line) || trim(line) != kForecastHeader)
        throw IoError(source + ":1: expected header '" + std::string(kForecastHeader) + "'");
    std::vector<ForecastRecord> out;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto c = split_csv_line(line);
        auto bad = [&](const std::string& what) {
            return IoError(source + ":" + std::to_string(lineno) + ": " + what);
        };
        if (c.size() != 7) throw bad("expected 7 fields");
        ForecastRecord r;
        r.origin_date = c[0];
        if (!is_iso_date(r.origin_date)) throw bad("invalid origin_date '" + c[0] + "'");
        double hv = 0, vv = 0;
        if (!parse_double(c[1], hv) || hv < 1 || hv != std::floor(hv)) throw bad("invalid horizon '" + c[1] + "'");
        if (!parse_double(c[3], vv) || vv < 0 || vv != std::floor(vv)) throw bad("invalid variable '" + c[3] + "'");
        r.horizon = static_cast<int>(hv);
        r.variable = static_cast<int>(vv);
        if (!parse_double(c[2], r.tau) || !(r.tau > 0 && r.tau < 1)) throw bad("invalid tau '" + c[2] + "'");
        r.model_id = c[4];
        if (r.model_id.empty()) throw bad("empty model_id");
        if (!parse_double(c[5], r.q_std)) throw bad("invalid q_hat_std '" + c[5] + "'");
        if (!parse_double(c[6], r.q_raw)) throw bad("invalid q_hat_raw '" + c[6] + "'");
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<ForecastRecord> load_records(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    return parse_records_csv(f, path);
}

struct OriginFailure {
    std::string origin_date;
    std::string model_id;
    double tau = 0.0;
    std::string message;
};

struct BacktestResult {
    std::vector<ForecastRecord> records;
    std::vector<OriginFailure> failures;
    long crossings = 0;  // adjacent tau pairs with decreasing forecasts (before any repair)
    long paths = 0;
    long trimmed_paths = 0;
    int origins_total = 0;
    int origins_resumed = 0;
};

/// Counts crossings per (origin, horizon, variable, model) group and, if
/// `repair`, sorts each group's forecasts to be non-decreasing in tau.
inline long rearrange_quantiles(std::vector<ForecastRecord>& recs, bool repair) {
    using Key = std::tuple<std::string, int, int, std::string>;
    std::map<Key, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < recs.size(); ++i)
        groups[{recs[i].origin_date, recs[i].horizon, recs[i].variable, recs[i].model_id}].push_back(i);
    long crossings = 0;
    for (auto& [key, idx] : groups) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return recs[a].tau < recs[b].tau; });
        for (std::size_t i = 1; i < idx.size(); ++i)
            if (recs[idx[i]].q_raw < recs[idx[i - 1]].q_raw) ++crossings;
        if (!repair) continue;
        std::vector<double> qs, qr;
        for (auto i : idx) {
            qs.push_back(recs[i].q_std);
            qr.push_back(recs[i].q_raw);
        }
        std::sort(qs.begin(), qs.end());
        std::sort(qr.begin(), qr.end());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            recs[idx[i]].q_std = qs[i];
            recs[idx[i]].q_raw = qr[i];
        }
    }
    return crossings;
}

/// Seed of one (origin, model, tau) fit; independent of the plan's ordering.
inline std::uint64_t fit_seed(std::uint64_t master, int origin, const std::string& model_id, double tau) {
    std::uint64_t hsh = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : model_id) hsh = (hsh ^ c) * 0x100000001b3ULL;
    return derive_seed(master, static_cast<std::uint64_t>(origin), hsh,
                       static_cast<std::uint64_t>(std::llround(tau * 1e9)));
}

namespace detail {

inline std::string checkpoint_path(const std::string& dir, int origin) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "origin_%06d.csv", origin);
    return (std::filesystem::path(dir) / buf).string();
}

}  // namespace detail

/// Fits every (model, tau) at every origin on the re-standardized window and
/// emits forecasts for all horizons and variables. Deterministic given the
/// plan's master seed; origins whose checkpoint exists are loaded instead.
inline BacktestResult run_backtest(const TimeSeriesPanel& panel, const BacktestPlan& plan,
                                   const std::function<void(const std::string&)>& log = {}) {
    plan.validate();
    const int n = panel.n();
    const auto origins = plan.origins(panel.T());
    if (origins.empty())
        throw std::invalid_argument("run_backtest: panel of length " + std::to_string(panel.T()) +
                                    " leaves no forecast origin for window " + std::to_string(plan.window_length));
    if (!plan.checkpoint_dir.empty()) std::filesystem::create_directories(plan.checkpoint_dir);

    struct Slot {
        std::vector<ForecastRecord> recs;
        std::vector<OriginFailure> failures;
        MultiStepDiagnostics diag;
        bool resumed = false;
    };
    std::vector<Slot> slots(origins.size());

    parallel_for(static_cast<int>(origins.size()), plan.threads, [&](int oi) {
        const int o = origins[static_cast<std::size_t>(oi)];
        Slot& slot = slots[static_cast<std::size_t>(oi)];
        const std::string date = panel.dates[static_cast<std::size_t>(o)];
        const std::string ck = plan.checkpoint_dir.empty() ? "" : detail::checkpoint_path(plan.checkpoint_dir, o);
        if (!ck.empty() && std::filesystem::exists(ck)) {
            std::ifstream f(ck);
            slot.recs = parse_records_csv(f, ck);
            slot.resumed = true;
            return;
        }
        const Mat raw = panel.values.middleRows(o - plan.window_length + 1, plan.window_length);
        const Standardization st = standardization_of(raw);
        const Mat z = st.apply(raw);
        for (std::size_t m = 0; m < plan.models.size(); ++m) {
            const auto& entry = plan.models[m];
            const RegressionDesign d = build_var_design(z, entry.spec.lag_order, entry.spec.intercept);
            const Vec x_next = var_regressors(z, entry.spec.lag_order, entry.spec.intercept);
            for (std::size_t q = 0; q < plan.quantile_grid.size(); ++q) {
                const double tau = plan.quantile_grid[q];
                ModelSpec spec = entry.spec;
                spec.tau = QuantileLevels::uniform(n, tau);
                Rng rng(fit_seed(plan.master_seed, o, entry.id, tau));
                try {
                    const PosteriorDraws dr = run_chain(spec, d, rng);
                    for (int h : plan.horizons) {
                        const Vec qs = h == 1 ? forecast_one_step(dr, x_next)
                                              : forecast_multi_step(dr, z, h, plan.n_paths, rng, &slot.diag);
                        for (int j = 0; j < n; ++j)
                            slot.recs.push_back({date, h, tau, j, entry.id, qs[j], st.invert(qs[j], j)});
                    }
                } catch (const NumericalError& e) {
                    slot.failures.push_back({date, entry.id, tau, e.what()});
                }
            }
        }
        if (!slot.failures.empty()) {
            slot.recs.clear();  // the whole origin is skipped
            return;
        }
        std::stable_sort(slot.recs.begin(), slot.recs.end(), [&](const ForecastRecord& a, const ForecastRecord& b) {
            return a.horizon < b.horizon;
        });
        if (!ck.empty()) write_file_atomic(ck, records_to_csv(slot.recs));
        if (log) log("origin " + date + " done");
    });

    BacktestResult res;
    res.origins_total = static_cast<int>(origins.size());
    for (auto& s : slots) {
        res.records.insert(res.records.end(), s.recs.begin(), s.recs.end());
        res.failures.insert(res.failures.end(), s.failures.begin(), s.failures.end());
        res.paths += s.diag.paths;
        res.trimmed_paths += s.diag.trimmed;
        res.origins_resumed += s.resumed ? 1 : 0;
    }
    if (res.trimmed_paths > 0)
        std::cerr << "warning: " << res.trimmed_paths << " of " << res.paths
                  << " simulated paths exceeded the clamp and were trimmed\n";
    res.crossings = rearrange_quantiles(res.records, plan.rearrange);
    return res;
}

}  // namespace qvtv
