#pragma once

// Quantile scores, Diebold-Mariano tests, inverse-score combination weights
// and the score tables built from backtest records.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "qvtv/core.hpp"
#include "qvtv/data_io.hpp"
#include "qvtv/errors.hpp"
#include "qvtv/forecast.hpp"

namespace qvtv {

inline double quantile_score(double y, double q, double tau) {
    if (std::isnan(y) || std::isnan(q) || std::isnan(tau)) throw std::invalid_argument("quantile_score: NaN input");
    return (y - q) * (tau - (y <= q ? 1.0 : 0.0));
}

inline Vec quantile_score(const Vec& y, const Vec& q, double tau) {
    if (y.size() != q.size()) throw std::invalid_argument("quantile_score: length mismatch");
    Vec out(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = quantile_score(y[i], q[i], tau);
    return out;
}

inline constexpr double kScoreFloor = 1e-12;

/// Inverse-score weights from a (periods x models) block of past scores:
/// w_k = sum_t QS_{k,t}^{-1} / sum_j sum_t QS_{j,t}^{-1}. Scores are floored
/// at kScoreFloor before inversion.
inline Vec tv_weights(const Mat& qs_window) {
    if (qs_window.rows() == 0 || qs_window.cols() == 0) throw std::invalid_argument("tv_weights: empty window");
    Vec inv = Vec::Zero(qs_window.cols());
    for (Eigen::Index k = 0; k < qs_window.cols(); ++k)
        for (Eigen::Index t = 0; t < qs_window.rows(); ++t) {
            const double q = qs_window(t, k);
            if (std::isnan(q) || q < 0.0) throw std::invalid_argument("tv_weights: scores must be non-negative");
            inv[k] += 1.0 / std::max(q, kScoreFloor);
        }
    return inv / inv.sum();
}

/// Temporal average of a (times x models) series of weights.
inline Vec avg_weights(const Mat& tv) {
    if (tv.rows() == 0) throw std::invalid_argument("avg_weights: empty weight series");
    return tv.colwise().mean().transpose();
}

inline double combine_forecasts(const Vec& weights, const Vec& forecasts) {
    if (weights.size() != forecasts.size())
        throw std::invalid_argument("combine_forecasts: " + std::to_string(weights.size()) + " weights for " +
                                    std::to_string(forecasts.size()) + " models");
    return weights.dot(forecasts);
}

struct DmResult {
    double statistic = kNaN;
    double p_value = kNaN;
    bool degenerate = false;
};

/// d_t = loss_benchmark - loss_alt; statistic d_bar / sqrt(LRV / T) with a
/// Bartlett HAC variance truncated at lag h - 1; upper-tail normal p-value.
inline DmResult diebold_mariano(const Vec& loss_benchmark, const Vec& loss_alt, int h) {
    if (loss_benchmark.size() != loss_alt.size())
        throw std::invalid_argument("diebold_mariano: loss series differ in length");
    if (loss_benchmark.size() < 10) throw std::invalid_argument("diebold_mariano: need at least 10 observations");
    if (h < 1) throw std::invalid_argument("diebold_mariano: horizon must be >= 1");
    const Vec d = loss_benchmark - loss_alt;
    const auto T = d.size();
    const double dbar = d.mean();
    const Vec c = d.array() - dbar;
    double lrv = c.squaredNorm() / static_cast<double>(T);
    const int L = h - 1;
    for (int l = 1; l <= L && l < T; ++l) {
        const double g = c.head(T - l).dot(c.tail(T - l)) / static_cast<double>(T);
        lrv += 2.0 * (1.0 - static_cast<double>(l) / (L + 1)) * g;
    }
    DmResult r;
    if (!(lrv > 0.0)) {
        r.degenerate = true;
        return r;
    }
    r.statistic = dbar / std::sqrt(lrv / static_cast<double>(T));
    r.p_value = 0.5 * std::erfc(r.statistic / std::sqrt(2.0));
    return r;
}

inline int significance_stars(double p) {
    if (std::isnan(p)) return 0;
    if (p < 0.01) return 3;
    if (p < 0.05) return 2;
    if (p < 0.10) return 1;
    return 0;
}

inline constexpr const char* kCombTv = "COMB-TV";
inline constexpr const char* kCombAvg = "COMB-AVG";

struct ScoreRow {
    int variable = 0;
    double tau = 0.0;
    int horizon = 1;
    std::string model_id;
    int count = 0;
    double mean_qs = 0.0;
    double ratio = 1.0;
    double dm_stat = kNaN;
    double dm_pvalue = kNaN;
    int stars = 0;
    std::optional<bool> mcs_member;  // reserved, never filled
};

struct WeightRow {
    std::string origin_date;
    int horizon = 1;
    double tau = 0.0;
    int variable = 0;
    std::string model_id;
    double weight = 0.0;
};

struct EvaluationResult {
    std::vector<ScoreRow> table;
    std::vector<WeightRow> tv_weights;
    std::vector<WeightRow> avg_weights;
    std::vector<ForecastRecord> combined;
};

struct EvaluationOptions {
    std::string benchmark = "qvar";
    bool combine = true;
};

/// Scores every record against the realized panel (raw units), builds the
/// TV/AVG combinations when at least two models are present and assembles the
/// per (variable, tau, horizon) table of mean scores, ratios and DM tests.
inline EvaluationResult evaluate(const std::vector<ForecastRecord>& records, const TimeSeriesPanel& realized,
                                 const EvaluationOptions& opt) {
    std::vector<std::string> models;
    for (const auto& r : records)
        if (std::find(models.begin(), models.end(), r.model_id) == models.end()) models.push_back(r.model_id);
    if (std::find(models.begin(), models.end(), opt.benchmark) == models.end())
        throw ConfigError("benchmark model '" + opt.benchmark +
                          "' not found in the forecast records (config key evaluate.benchmark)");
    std::stable_partition(models.begin(), models.end(), [&](const std::string& m) { return m == opt.benchmark; });

    struct Entry {
        double q_std, q_raw, y, qs;
        std::string date;
    };
    using Cell = std::tuple<int, double, int>;  // variable, tau, horizon
    std::map<Cell, std::map<std::string, std::map<int, Entry>>> cells;
    for (const auto& r : records) {
        const int row = realized.row_of(r.origin_date);
        if (row < 0) throw IoError("origin date " + r.origin_date + " (model " + r.model_id + ") is not in the realized panel");
        if (row + r.horizon >= realized.T())
            throw IoError("origin date " + r.origin_date + " + horizon " + std::to_string(r.horizon) +
                          " runs past the end of the realized panel");
        if (r.variable >= realized.n())
            throw IoError("record variable index " + std::to_string(r.variable) + " exceeds the realized panel width");
        const double y = realized.values(row + r.horizon, r.variable);
        auto& slot = cells[{r.variable, r.tau, r.horizon}][r.model_id];
        if (slot.count(row)) throw IoError("duplicate forecast record at " + r.origin_date + " for " + r.model_id);
        slot[row] = {r.q_std, r.q_raw, y, quantile_score(y, r.q_raw, r.tau), r.origin_date};
    }

    EvaluationResult res;
    for (auto& [cell, per_model] : cells) {
        const auto [var, tau, h] = cell;
        const auto& bench = per_model.at(opt.benchmark);
        std::vector<int> rows;
        for (const auto& [row, e] : bench) rows.push_back(row);
        for (const auto& m : models) {
            auto it = per_model.find(m);
            if (it == per_model.end())
                throw IoError("model " + m + " has no records for variable " + std::to_string(var) + ", tau " +
                              format_double(tau) + ", horizon " + std::to_string(h));
            std::vector<int> mr;
            for (const auto& [row, e] : it->second) mr.push_back(row);
            if (mr != rows) {
                std::size_t i = 0;
                while (i < mr.size() && i < rows.size() && mr[i] == rows[i]) ++i;
                const int bad = i < rows.size() ? rows[i] : mr[i];
                throw IoError("origin dates of model " + m + " and benchmark " + opt.benchmark +
                              " are misaligned; first mismatch at " + realized.dates[static_cast<std::size_t>(bad)]);
            }
        }
        const auto K = static_cast<Eigen::Index>(models.size());
        const auto N = static_cast<Eigen::Index>(rows.size());
        Mat Q(N, K), Qs(N, K), S(N, K);
        Vec y(N);
        for (Eigen::Index t = 0; t < N; ++t) {
            y[t] = bench.at(rows[static_cast<std::size_t>(t)]).y;
            for (Eigen::Index k = 0; k < K; ++k) {
                const auto& e = per_model.at(models[static_cast<std::size_t>(k)]).at(rows[static_cast<std::size_t>(t)]);
                Q(t, k) = e.q_raw;
                Qs(t, k) = e.q_std;
                S(t, k) = e.qs;
            }
        }
        std::vector<std::pair<std::string, Vec>> losses;
        for (Eigen::Index k = 0; k < K; ++k) losses.push_back({models[static_cast<std::size_t>(k)], S.col(k)});

        if (opt.combine && K >= 2) {
            Mat W(N, K);
            for (Eigen::Index e = 0; e < N; ++e) {
                std::vector<Eigen::Index> past;
                for (Eigen::Index s = 0; s < N; ++s)
                    if (rows[static_cast<std::size_t>(s)] + h <= rows[static_cast<std::size_t>(e)]) past.push_back(s);
                if (past.empty()) {
                    W.row(e).setConstant(1.0 / static_cast<double>(K));
                } else {
                    Mat win(static_cast<Eigen::Index>(past.size()), K);
                    for (std::size_t i = 0; i < past.size(); ++i) win.row(static_cast<Eigen::Index>(i)) = S.row(past[i]);
                    W.row(e) = tv_weights(win).transpose();
                }
            }
            const Vec wavg = avg_weights(W);
            Vec s_tv(N), s_avg(N);
            for (Eigen::Index e = 0; e < N; ++e) {
                const std::string& date = bench.at(rows[static_cast<std::size_t>(e)]).date;
                const Vec we = W.row(e).transpose();
                const double q_tv = combine_forecasts(we, Q.row(e).transpose());
                const double q_avg = combine_forecasts(wavg, Q.row(e).transpose());
                res.combined.push_back({date, h, tau, var, kCombTv, combine_forecasts(we, Qs.row(e).transpose()), q_tv});
                res.combined.push_back({date, h, tau, var, kCombAvg, combine_forecasts(wavg, Qs.row(e).transpose()), q_avg});
                s_tv[e] = quantile_score(y[e], q_tv, tau);
                s_avg[e] = quantile_score(y[e], q_avg, tau);
                for (Eigen::Index k = 0; k < K; ++k)
                    res.tv_weights.push_back({date, h, tau, var, models[static_cast<std::size_t>(k)], W(e, k)});
            }
            for (Eigen::Index k = 0; k < K; ++k)
                res.avg_weights.push_back({"", h, tau, var, models[static_cast<std::size_t>(k)], wavg[k]});
            losses.push_back({kCombTv, s_tv});
            losses.push_back({kCombAvg, s_avg});
        }

        const Vec& lb = losses.front().second;
        const double bench_mean = lb.mean();
        for (const auto& [id, l] : losses) {
            ScoreRow row;
            row.variable = var;
            row.tau = tau;
            row.horizon = h;
            row.model_id = id;
            row.count = static_cast<int>(N);
            row.mean_qs = l.mean();
            row.ratio = id == opt.benchmark ? 1.0 : row.mean_qs / bench_mean;
            if (id != opt.benchmark && N >= 10) {
                const DmResult dm = diebold_mariano(lb, l, h);
                if (!dm.degenerate) {
                    row.dm_stat = dm.statistic;
                    row.dm_pvalue = dm.p_value;
                    row.stars = significance_stars(dm.p_value);
                }
            }
            res.table.push_back(row);
        }
    }
    return res;
}

inline std::string render_stars(int s) { return std::string(static_cast<std::size_t>(s), '*'); }

inline std::string score_table_to_csv(const std::vector<ScoreRow>& rows) {
    std::ostringstream os;
    os << "variable,tau,horizon,model_id,count,mean_qs,ratio,dm_stat,dm_pvalue,stars,stars_rendered,mcs_member\n";
    for (const auto& r : rows)
        os << r.variable << ',' << format_double(r.tau) << ',' << r.horizon << ',' << r.model_id << ',' << r.count
           << ',' << format_double(r.mean_qs) << ',' << format_double(r.ratio) << ',' << fmt_double_opt(r.dm_stat) << ','
           << fmt_double_opt(r.dm_pvalue) << ',' << r.stars << ',' << render_stars(r.stars) << ','
           << (r.mcs_member ? (*r.mcs_member ? "1" : "0") : "") << '\n';
    return os.str();
}

/// Aligned plain-text table: the benchmark shows its mean score, other models
/// their ratio with stars.
inline std::string score_table_to_text(const std::vector<ScoreRow>& rows, const std::string& benchmark) {
    std::ostringstream os;
    os << std::left << std::setw(9) << "variable" << std::setw(7) << "tau" << std::setw(8) << "horizon"
       << std::setw(14) << "model" << std::right << std::setw(12) << "value" << '\n';
    for (const auto& r : rows) {
        std::ostringstream v;
        v << std::fixed << std::setprecision(3) << (r.model_id == benchmark ? r.mean_qs : r.ratio);
        os << std::left << std::setw(9) << r.variable << std::setw(7) << format_double(r.tau) << std::setw(8)
           << r.horizon << std::setw(14) << r.model_id << std::right << std::setw(12)
           << (v.str() + render_stars(r.stars)) << '\n';
    }
    return os.str();
}

inline std::string weights_to_csv(const std::vector<WeightRow>& rows, bool with_date) {
    std::ostringstream os;
    os << (with_date ? "origin_date," : "") << "horizon,tau,variable,model_id,weight\n";
    for (const auto& r : rows) {
        if (with_date) os << r.origin_date << ',';
        os << r.horizon << ',' << format_double(r.tau) << ',' << r.variable << ',' << r.model_id << ','
           << format_double(r.weight) << '\n';
    }
    return os.str();
}

}  // namespace qvtv
