#pragma once

// Monte Carlo study: a stable VAR(1) with stochastic volatility and skew-t
// innovations, fitted by each model over a quantile grid, scored by the MMAD
// of the fitted quantile lines and the coefficient error norm.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qvtv/core.hpp"
#include "qvtv/data_io.hpp"
#include "qvtv/distributions.hpp"
#include "qvtv/errors.hpp"
#include "qvtv/forecast.hpp"
#include "qvtv/parallel.hpp"
#include "qvtv/rng.hpp"
#include "qvtv/sampler.hpp"

namespace qvtv {

/// ISO date `days` after 1970-01-01.
inline std::string iso_date_from_days(long days) {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

/// Consecutive calendar dates starting 2000-01-01.
inline std::vector<std::string> synthetic_dates(int T) {
    std::vector<std::string> out;
    for (int t = 0; t < T; ++t) out.push_back(iso_date_from_days(10957 + t));
    return out;
}

struct DgpConfig {
    int n = 4;
    int T = 200;
    int burnin = 100;
    double diag_low = 0.2;
    double diag_high = 0.5;
    double offdiag_sd = 0.1;
    double max_radius = 0.95;
    int max_tries = 1000;
    double sv_mu = 0.0;
    double sv_phi = 0.95;
    double sv_sigma2 = 0.1;
    double dof = 5.0;
    double skew = 1.0;
    double innovation_scale = 1.0;

    void validate() const {
        if (n < 1 || T < 20) throw std::invalid_argument("DgpConfig: need n >= 1 and T >= 20");
        if (!(std::abs(sv_phi) < 1.0) || !(sv_sigma2 >= 0.0)) throw std::invalid_argument("DgpConfig: invalid SV parameters");
        if (!(diag_low <= diag_high)) throw std::invalid_argument("DgpConfig: diag_low > diag_high");
        if (burnin < 0) throw std::invalid_argument("DgpConfig: negative burn-in");
    }
};

struct SimulatedData {
    TimeSeriesPanel panel;  // T x n
    Mat B;                  // n x n VAR matrix (DGP) or n x k quantile coefficients (QVAR)
    Vec beta;               // equation-major coefficient vector with intercept
    Mat h;                  // T x n true log-variances
};

inline double spectral_radius(const Mat& B) {
    Eigen::EigenSolver<Mat> es(B, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Stable B: diagonal U(diag_low, diag_high), off-diagonal N(0, offdiag_sd^2),
/// redrawn until the spectral radius is below max_radius.
inline Mat draw_stable_var(const DgpConfig& c, Rng& rng) {
    for (int tries = 0; tries < c.max_tries; ++tries) {
        Mat B(c.n, c.n);
        for (int i = 0; i < c.n; ++i)
            for (int j = 0; j < c.n; ++j)
                B(i, j) = i == j ? c.diag_low + (c.diag_high - c.diag_low) * rng.uniform() : c.offdiag_sd * rng.normal();
        if (spectral_radius(B) < c.max_radius) return B;
    }
    throw NumericalError("simulate_dgp: no stable VAR matrix after " + std::to_string(c.max_tries) + " draws");
}

/// y_t = B y_{t-1} + diag(e^{h_t/2}) eps_t with eps_t skew-t and h AR(1).
inline SimulatedData simulate_dgp(const DgpConfig& c, std::uint64_t seed) {
    c.validate();
    Rng rng(seed);
    SimulatedData out;
    out.B = draw_stable_var(c, rng);
    const SkewTSampler eps({c.dof, Vec::Constant(c.n, c.skew), Mat::Identity(c.n, c.n)});
    const int total = c.burnin + c.T;
    Vec y = Vec::Zero(c.n);
    Vec h(c.n);
    const double sd0 = std::sqrt(c.sv_sigma2 / (1.0 - c.sv_phi * c.sv_phi));
    for (int j = 0; j < c.n; ++j) h[j] = c.sv_mu + sd0 * rng.normal();
    out.panel.values.resize(c.T, c.n);
    out.h.resize(c.T, c.n);
    for (int t = 0; t < total; ++t) {
        if (t > 0)
            for (int j = 0; j < c.n; ++j)
                h[j] = c.sv_mu + c.sv_phi * (h[j] - c.sv_mu) + std::sqrt(c.sv_sigma2) * rng.normal();
        const Vec e = eps(rng);
        y = out.B * y + c.innovation_scale * (0.5 * h.array()).exp().matrix().cwiseProduct(e);
        if (t >= c.burnin) {
            out.panel.values.row(t - c.burnin) = y.transpose();
            out.h.row(t - c.burnin) = h.transpose();
        }
    }
    out.beta.resize(c.n * (c.n + 1));
    for (int j = 0; j < c.n; ++j) {
        out.beta[j * (c.n + 1)] = 0.0;
        out.beta.segment(j * (c.n + 1) + 1, c.n) = out.B.row(j).transpose();
    }
    out.panel.dates = synthetic_dates(c.T);
    for (int j = 0; j < c.n; ++j) out.panel.names.push_back("y" + std::to_string(j + 1));
    return out;
}

/// Data drawn from the quantile VAR itself: MAL innovations with SV variances.
struct QvarDgp {
    QuantileLevels tau;
    Mat B;  // n x k, columns [intercept, lag 1, ...] matching build_var_design
    Mat A;  // unit lower triangular
    Vec sv_mu, sv_phi, sv_sigma2;
    int lag_order = 1;
    int T = 300;
    int burnin = 100;
};

inline SimulatedData simulate_qvar(const QvarDgp& g, std::uint64_t seed) {
    const int n = static_cast<int>(g.B.rows());
    const int p = g.lag_order;
    if (g.B.cols() != n * p + 1) throw std::invalid_argument("simulate_qvar: B must be n x (1 + n p)");
    if (g.tau.size() != n) throw std::invalid_argument("simulate_qvar: tau size mismatch");
    Rng rng(seed);
    const ThetaParams th = theta_params(g.tau);
    const int total = g.burnin + g.T + p;
    Mat y = Mat::Zero(total, n);
    Mat hs(total, n);
    Vec h(n);
    for (int j = 0; j < n; ++j)
        h[j] = g.sv_mu[j] + std::sqrt(g.sv_sigma2[j] / (1.0 - g.sv_phi[j] * g.sv_phi[j])) * rng.normal();
    for (int t = 0; t < total; ++t) {
        if (t > 0)
            for (int j = 0; j < n; ++j)
                h[j] = g.sv_mu[j] + g.sv_phi[j] * (h[j] - g.sv_mu[j]) + std::sqrt(g.sv_sigma2[j]) * rng.normal();
        hs.row(t) = h.transpose();
        if (t < p) continue;
        const Vec x = var_regressors(y.topRows(t), p, true);
        y.row(t) = mal_sample(g.B * x, th, g.A, h.array().exp(), rng).transpose();
    }
    SimulatedData out;
    out.B = g.B;
    out.beta.resize(g.B.size());
    for (int j = 0; j < n; ++j) out.beta.segment(j * g.B.cols(), g.B.cols()) = g.B.row(j).transpose();
    out.panel.values = y.bottomRows(g.T + p);
    out.h = hs.bottomRows(g.T + p);
    out.panel.dates = synthetic_dates(g.T + p);
    for (int j = 0; j < n; ++j) out.panel.names.push_back("y" + std::to_string(j + 1));
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty input");
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Mean over t and equations of |x_t' (b_hat_j - b_j)| restricted to the slope
/// coefficients (the intercept is excluded).
inline double mad_slopes(const Vec& beta_hat, const Vec& beta_true, const RegressionDesign& d) {
    if (beta_hat.size() != d.nk() || beta_true.size() != d.nk())
        throw std::invalid_argument("mad_slopes: coefficient length mismatch");
    const int k = d.k(), n = d.n();
    const int first = d.includes_intercept ? 1 : 0;
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
        const Vec diff = beta_hat.segment(j * k + first, k - first) - beta_true.segment(j * k + first, k - first);
        s += (d.x.rightCols(k - first) * diff).cwiseAbs().sum();
    }
    return s / (static_cast<double>(d.T()) * n);
}

/// Median over replications of the per-replication MAD.
inline double mmad(const std::vector<double>& mads) { return median(mads); }

inline double frobenius_error(const Vec& beta_hat, const Vec& beta_true) {
    if (beta_hat.size() != beta_true.size()) throw std::invalid_argument("frobenius_error: shape mismatch");
    return (beta_hat - beta_true).norm();
}

/// Slope entries (intercepts dropped) of an equation-major coefficient vector.
inline Vec slope_part(const Vec& beta, int n, int k, bool intercept) {
    if (!intercept) return beta;
    Vec out(n * (k - 1));
    for (int j = 0; j < n; ++j) out.segment(j * (k - 1), k - 1) = beta.segment(j * k + 1, k - 1);
    return out;
}

/// tau-quantiles of each skew-t margin with identity scale, by simulation.
inline Vec skewt_marginal_quantile(const DgpConfig& c, double tau, int draws = 200000, std::uint64_t seed = 7) {
    Rng rng(seed);
    const SkewTSampler eps({c.dof, Vec::Constant(c.n, c.skew), Mat::Identity(c.n, c.n)});
    Mat x(draws, c.n);
    for (int i = 0; i < draws; ++i) x.row(i) = eps(rng).transpose();
    Vec q(c.n);
    for (int j = 0; j < c.n; ++j) {
        std::vector<double> v(x.col(j).data(), x.col(j).data() + draws);
        const auto pos = static_cast<std::size_t>(std::floor(tau * (draws - 1)));
        std::nth_element(v.begin(), v.begin() + static_cast<long>(pos), v.end());
        q[j] = v[pos];
    }
    return q;
}

struct SimStudyConfig {
    DgpConfig dgp;
    std::vector<double> taus{0.1, 0.5, 0.9};
    int replications = 5;
    std::vector<ModelEntry> models;
    std::string benchmark = "qvar";
    std::uint64_t master_seed = 20240101;
    int threads = 1;
};

struct SimReplicationRow {
    int replication = 0;
    double tau = 0.0;
    std::string model_id;
    double mad = kNaN;
    double fn = kNaN;
    double intercept_mean = kNaN;     // mean fitted intercept across equations
    double intercept_reference = kNaN;  // mean over t and equations of e^{h/2} q_tau(eps)
    bool failed = false;
    std::string message;
};

struct SimSummaryRow {
    double tau = 0.0;
    std::string model_id;
    int replications = 0;
    double mmad = kNaN;
    double fn = kNaN;  // median over replications
    double mmad_ratio = kNaN;
    double fn_ratio = kNaN;
    double share_better = kNaN;  // fraction of replications with MAD below the benchmark's
};

struct SimReport {
    std::vector<SimReplicationRow> replications;
    std::vector<SimSummaryRow> summary;
};

inline SimReport run_simulation_study(const SimStudyConfig& cfg) {
    if (cfg.replications < 3) throw std::invalid_argument("run_simulation_study: need at least 3 replications");
    if (cfg.models.empty()) throw std::invalid_argument("run_simulation_study: no models");
    const auto bench_it = std::find_if(cfg.models.begin(), cfg.models.end(),
                                       [&](const ModelEntry& m) { return m.id == cfg.benchmark; });
    if (bench_it == cfg.models.end())
        throw ConfigError("benchmark model '" + cfg.benchmark + "' is not among the simulation models");
    const int R = cfg.replications;
    const auto M = cfg.models.size();
    const auto Q = cfg.taus.size();
    std::vector<Vec> qeps;
    for (double tau : cfg.taus) qeps.push_back(skewt_marginal_quantile(cfg.dgp, tau));
    std::vector<SimReplicationRow> rows(static_cast<std::size_t>(R) * Q * M);
    parallel_for(R, cfg.threads, [&](int r) {
        const SimulatedData sim = simulate_dgp(cfg.dgp, derive_seed(cfg.master_seed, 0x5157, static_cast<std::uint64_t>(r)));
        const int n = cfg.dgp.n;
        for (std::size_t q = 0; q < Q; ++q) {
            for (std::size_t m = 0; m < M; ++m) {
                auto& row = rows[(static_cast<std::size_t>(r) * Q + q) * M + m];
                row.replication = r;
                row.tau = cfg.taus[q];
                row.model_id = cfg.models[m].id;
                ModelSpec spec = cfg.models[m].spec;
                spec.tau = QuantileLevels::uniform(n, cfg.taus[q]);
                const RegressionDesign d = build_var_design(sim.panel.values, spec.lag_order, spec.intercept);
                Vec truth = Vec::Zero(d.nk());
                for (int j = 0; j < n; ++j) {
                    const int off = spec.intercept ? 1 : 0;
                    truth.segment(j * d.k() + off, n) = sim.B.row(j).transpose();
                }
                Rng rng(fit_seed(cfg.master_seed, r, cfg.models[m].id, cfg.taus[q]));
                try {
                    const PosteriorDraws dr = run_chain(spec, d, rng);
                    const Vec bh = dr.beta_mean();
                    row.mad = mad_slopes(bh, truth, d);
                    row.fn = frobenius_error(slope_part(bh, n, d.k(), spec.intercept),
                                             slope_part(truth, n, d.k(), spec.intercept));
                    if (spec.intercept) {
                        double im = 0.0;
                        for (int j = 0; j < n; ++j) im += bh[j * d.k()];
                        row.intercept_mean = im / n;
                        const Mat hs = sim.h.bottomRows(d.T());
                        row.intercept_reference =
                            ((0.5 * hs.array()).exp().matrix() * qeps[q].asDiagonal()).mean();
                    }
                } catch (const NumericalError& e) {
                    row.failed = true;
                    row.message = e.what();
                    std::cerr << "warning: replication " << r << " model " << row.model_id << " tau "
                              << row.tau << " failed: " << e.what() << "\n";
                }
            }
        }
    });

    SimReport rep;
    rep.replications = rows;
    for (std::size_t q = 0; q < Q; ++q) {
        for (std::size_t m = 0; m < M; ++m) {
            SimSummaryRow s;
            s.tau = cfg.taus[q];
            s.model_id = cfg.models[m].id;
            std::vector<double> mads, fns;
            int better = 0, compared = 0;
            for (int r = 0; r < R; ++r) {
                const auto& row = rows[(static_cast<std::size_t>(r) * Q + q) * M + m];
                const auto& b = rows[(static_cast<std::size_t>(r) * Q + q) * M +
                                     static_cast<std::size_t>(bench_it - cfg.models.begin())];
                if (row.failed) continue;
                mads.push_back(row.mad);
                fns.push_back(row.fn);
                if (!b.failed) {
                    ++compared;
                    better += row.mad < b.mad ? 1 : 0;
                }
            }
            s.replications = static_cast<int>(mads.size());
            if (!mads.empty()) {
                s.mmad = mmad(mads);
                s.fn = median(fns);
            }
            if (compared > 0) s.share_better = static_cast<double>(better) / compared;
            rep.summary.push_back(s);
        }
        // ratios against the benchmark row of the same tau
        const std::size_t base = rep.summary.size() - M;
        const auto& b = rep.summary[base + static_cast<std::size_t>(bench_it - cfg.models.begin())];
        for (std::size_t m = 0; m < M; ++m) {
            auto& s = rep.summary[base + m];
            s.mmad_ratio = s.mmad / b.mmad;
            s.fn_ratio = s.fn / b.fn;
        }
    }
    return rep;
}

inline std::string sim_summary_to_csv(const SimReport& r, const std::string& benchmark) {
    std::ostringstream os;
    os << "tau,model_id,replications,mmad,fn,mmad_ratio,fn_ratio,share_better\n";
    for (const auto& s : r.summary) {
        const bool is_b = s.model_id == benchmark;
        os << format_double(s.tau) << ',' << s.model_id << ',' << s.replications << ',' << fmt_double_opt(s.mmad)
           << ',' << fmt_double_opt(s.fn) << ',' << (is_b ? "" : fmt_double_opt(s.mmad_ratio)) << ','
           << (is_b ? "" : fmt_double_opt(s.fn_ratio)) << ',' << (is_b ? "" : fmt_double_opt(s.share_better)) << '\n';
    }
    return os.str();
}

inline std::string sim_replications_to_csv(const SimReport& r) {
    std::ostringstream os;
    os << "replication,tau,model_id,mad,fn,intercept_mean,intercept_reference,failed\n";
    for (const auto& x : r.replications)
        os << x.replication << ',' << format_double(x.tau) << ',' << x.model_id << ',' << fmt_double_opt(x.mad) << ','
           << fmt_double_opt(x.fn) << ',' << fmt_double_opt(x.intercept_mean) << ','
           << fmt_double_opt(x.intercept_reference) << ',' << (x.failed ? 1 : 0) << '\n';
    return os.str();
}

}  // namespace qvtv
