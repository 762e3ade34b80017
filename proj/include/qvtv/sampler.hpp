#pragma once

// Metropolis-within-Gibbs driver: initialization, the sweep loop, adaptation
// freezing and the stored posterior draws.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qvtv/adapt_mh.hpp"
#include "qvtv/core.hpp"
#include "qvtv/errors.hpp"
#include "qvtv/mcmc_common.hpp"
#include "qvtv/model_const.hpp"
#include "qvtv/model_garch.hpp"
#include "qvtv/model_spec.hpp"
#include "qvtv/model_sv.hpp"
#include "qvtv/rng.hpp"

namespace qvtv {

/// Acceptance counts for one MH block, split into burn-in and kept phases.
/// `trace` (optional) holds the per-sweep acceptance fraction.
struct AcceptanceTally {
    double accepted_burnin = 0.0;
    double proposed_burnin = 0.0;
    double accepted_kept = 0.0;
    double proposed_kept = 0.0;
    std::vector<double> trace;

    double rate_kept() const { return proposed_kept > 0 ? accepted_kept / proposed_kept : kNaN; }
    double rate_burnin() const { return proposed_burnin > 0 ? accepted_burnin / proposed_burnin : kNaN; }

    /// Mean acceptance over the last `fraction` of recorded sweeps.
    double rate_tail(double fraction) const {
        if (trace.empty()) return kNaN;
        const auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(trace.size())));
        double s = 0.0;
        for (std::size_t i = trace.size() - m; i < trace.size(); ++i) s += trace[i];
        return s / static_cast<double>(m);
    }
};

struct PosteriorDraws {
    Regime regime = Regime::Const;
    QuantileLevels tau;
    int n = 0;
    int k = 0;
    int lag_order = 1;
    bool intercept = true;
    bool approximate = false;  // parallel h-path conditioning was used

    Mat beta;    // draws x nk
    Mat a_free;  // draws x n(n-1)/2, strict lower part of A^{-1}, row by row
    // Per-draw volatility quantities (draws x n); only the regime's fields are filled.
    Mat delta2;
    Mat phi, sigma2_h, mu, h_last;
    Mat omega, alpha, gamma, sigma2_next;

    Mat vol_path_mean;  // T x n posterior mean of H_t (variance scale)
    Mat log_vol_path_mean;  // T x n posterior mean of log H_t
    Vec w_mean;

    std::map<std::string, AcceptanceTally> acceptance;

    int size() const { return static_cast<int>(beta.rows()); }

    Mat a_bar(int d) const {
        Mat ab = Mat::Identity(n, n);
        Eigen::Index c = 0;
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j) ab(i, j) = a_free(d, c++);
        return ab;
    }
    Mat A(int d) const { return unit_lower_inverse(a_bar(d)); }
    Vec beta_draw(int d) const { return beta.row(d).transpose(); }
    Vec beta_mean() const { return beta.colwise().mean().transpose(); }
};

/// OLS-based starting values. Intercepts are shifted by -theta1 delta so that
/// the starting location targets the tau-quantile rather than the mean.
inline McmcState initial_state(const ModelSpec& spec, const RegressionDesign& d) {
    const int n = d.n(), k = d.k(), T = d.T();
    if (spec.tau.size() != n) throw std::invalid_argument("initial_state: tau must have one level per series");
    const ThetaParams th = theta_params(spec.tau);
    McmcState s;
    const Mat XtX = d.x.transpose() * d.x + 1e-8 * Mat::Identity(k, k);
    const Mat Bt = XtX.ldlt().solve(d.x.transpose() * d.y);  // k x n
    const Mat resid = d.y - d.x * Bt;
    const double dof = std::max(1, T - k);
    Vec delta2(n);
    s.beta.resize(n * k);
    for (int j = 0; j < n; ++j) {
        const double rv = std::max(resid.col(j).squaredNorm() / dof, 1e-8);
        delta2[j] = rv / (th.theta1[j] * th.theta1[j] + th.theta2[j] * th.theta2[j]);
        s.beta.segment(j * k, k) = Bt.col(j);
        if (d.includes_intercept) s.beta[j * k] -= std::sqrt(delta2[j]) * th.theta1[j];
    }
    s.a_bar = Mat::Identity(n, n);
    s.w = Vec::Ones(T);
    const auto& mc = spec.mcmc;
    switch (spec.regime) {
        case Regime::Const: {
            s.vol = ConstState{delta2};
            break;
        }
        case Regime::SV: {
            SvState v;
            const Vec ld = delta2.array().log();
            v.mu = mc.sv_level ? ld : Vec::Zero(n);
            v.h = ld.transpose().replicate(T, 1);
            v.phi = Vec::Constant(n, 0.9);
            v.sigma2_h = Vec::Constant(n, 0.05);
            s.vol = v;
            break;
        }
        case Regime::Garch: {
            GarchState g;
            g.alpha = Vec::Constant(n, 0.05);
            g.gamma = Vec::Constant(n, 0.85);
            g.omega = 0.1 * delta2;
            g.sigma2 = garch_recursion(g, d.residuals(s.beta), s.w, th);
            s.vol = g;
            break;
        }
    }
    const double ts = mc.target_static, tp = mc.target_path;
    s.adapt.beta = AdaptiveScale::make(2.38 * 2.38 / (n * k), ts, mc.decay);
    s.adapt.w.assign(spec.regime == Regime::Garch ? T : 0, AdaptiveScale::make(0.5, ts, mc.decay));
    s.adapt.path.assign(spec.regime == Regime::SV ? n : 0, AdaptiveScale::make(1.0 / T, tp, mc.decay));
    const double k0 = spec.regime == Regime::Garch ? 0.05 : (spec.regime == Regime::SV ? 0.5 : 0.1);
    s.adapt.statics.assign(n, AdaptiveScale::make(k0, ts, mc.decay));
    return s;
}

namespace detail {

inline void freeze_all(BlockScales& b) {
    b.beta.frozen = true;
    for (auto& s : b.w) s.frozen = true;
    for (auto& s : b.path) s.frozen = true;
    for (auto& s : b.statics) s.frozen = true;
}

inline void tally(std::map<std::string, AcceptanceTally>& m, const std::string& name, double acc,
                  double prop, bool kept, bool trace) {
    auto& t = m[name];
    if (kept) {
        t.accepted_kept += acc;
        t.proposed_kept += prop;
    } else {
        t.accepted_burnin += acc;
        t.proposed_burnin += prop;
    }
    if (trace) t.trace.push_back(prop > 0 ? acc / prop : kNaN);
}

}  // namespace detail

/// Sigma2 at T+1 given the state at the end of the sample.
inline Vec garch_next_variance(const GarchState& g, const Mat& ybar, const Vec& w, const ThetaParams& th) {
    const auto T = ybar.rows();
    Vec out(ybar.cols());
    for (Eigen::Index j = 0; j < ybar.cols(); ++j) {
        const double s = g.sigma2(T - 1, j);
        const double e = ybar(T - 1, j) - w[T - 1] * th.theta1[j] * std::sqrt(s);
        out[j] = g.omega[j] + g.alpha[j] * e * e + g.gamma[j] * s;
    }
    return out;
}

/// Runs one chain. `init` overrides the OLS starting state (blocks flagged as
/// fixed in the settings stay at their starting values).
inline PosteriorDraws run_chain(const ModelSpec& spec, const RegressionDesign& d, Rng& rng,
                                std::optional<McmcState> init = std::nullopt) {
    const auto& mc = spec.mcmc;
    mc.validate();
    spec.priors.validate();
    const int n = d.n(), k = d.k(), T = d.T();
    const ThetaParams th = theta_params(spec.tau);
    McmcState s = init ? std::move(*init) : initial_state(spec, d);
    if (s.regime() != spec.regime) throw std::invalid_argument("run_chain: initial state regime mismatch");
    if (auto bad = check_invariants(s)) throw std::invalid_argument("run_chain: invalid initial state: " + *bad);
    const GaussianPrior beta_prior = spec.priors.beta_prior(n * k);

    std::optional<ProposalShape> garch_beta_shape;
    if (spec.regime == Regime::Garch)
        garch_beta_shape = ProposalShape::full(
            beta_conditional(d, th, s.a_bar, s.w, s.variances(T), beta_prior).covariance());

    const int total = mc.burnin + mc.draws * mc.thin;
    PosteriorDraws out;
    out.regime = spec.regime;
    out.tau = spec.tau;
    out.n = n;
    out.k = k;
    out.lag_order = d.lag_order;
    out.intercept = d.includes_intercept;
    out.approximate = spec.regime == Regime::SV && mc.parallel_h;
    const int D = mc.draws;
    out.beta.resize(D, n * k);
    out.a_free.resize(D, n * (n - 1) / 2);
    switch (spec.regime) {
        case Regime::Const: out.delta2.resize(D, n); break;
        case Regime::SV:
            out.phi.resize(D, n);
            out.sigma2_h.resize(D, n);
            out.mu.resize(D, n);
            out.h_last.resize(D, n);
            break;
        case Regime::Garch:
            out.omega.resize(D, n);
            out.alpha.resize(D, n);
            out.gamma.resize(D, n);
            out.sigma2_next.resize(D, n);
            break;
    }
    out.vol_path_mean = Mat::Zero(T, n);
    out.log_vol_path_mean = Mat::Zero(T, n);
    out.w_mean = Vec::Zero(T);
    const bool trace = mc.record_acceptance_trace;

    int kept = 0;
    for (int it = 0; it < total; ++it) {
        if (it == mc.burnin && mc.freeze_adaptation) detail::freeze_all(s.adapt);
        const bool in_kept = it >= mc.burnin;
        for (Block b : mc.sweep_order) {
            switch (b) {
                case Block::Beta: {
                    if (mc.fix_beta) break;
                    if (spec.regime == Regime::Garch) {
                        auto& g = std::get<GarchState>(s.vol);
                        double ll = joint_loglik(d.residuals(s.beta), s.w, g.sigma2, s.a_bar, th);
                        const bool a = sample_beta_garch(s.beta, g, d, s.w, s.a_bar, th, beta_prior,
                                                         *garch_beta_shape, s.adapt.beta, ll, rng);
                        detail::tally(out.acceptance, "beta", a, 1, in_kept, trace);
                    } else {
                        s.beta = sample_beta_gaussian(s, d, th, beta_prior, rng);
                    }
                    break;
                }
                case Block::A: {
                    if (mc.fix_a || n < 2) break;
                    s.a_bar = sample_a_rows(d.residuals(s.beta), s.w, s.variances(T), th, spec.priors,
                                            s.a_bar, rng);
                    break;
                }
                case Block::W: {
                    if (mc.fix_w) break;
                    const Mat ybar = d.residuals(s.beta);
                    if (spec.regime == Regime::Garch) {
                        auto& g = std::get<GarchState>(s.vol);
                        Vec terms = loglik_terms(ybar, s.w, g.sigma2, s.a_bar, th);
                        int acc = 0;
                        for (int t = 0; t < T; ++t)
                            acc += sample_w_garch(g, s.w, t, ybar, s.a_bar, th,
                                                  s.adapt.w[static_cast<std::size_t>(t)], terms, rng);
                        detail::tally(out.acceptance, "w", acc, T, in_kept, trace);
                    } else {
                        s.w = sample_w_all(ybar, s.variances(T), s.a_bar, th, rng);
                    }
                    break;
                }
                case Block::Vol: {
                    const Mat ybar = d.residuals(s.beta);
                    if (auto* c = std::get_if<ConstState>(&s.vol)) {
                        if (mc.fix_vol_statics) break;
                        double ll = joint_loglik(ybar, s.w, s.variances(T), s.a_bar, th);
                        int acc = 0;
                        for (int j = 0; j < n; ++j)
                            acc += sample_delta2(*c, j, ybar, s.w, s.a_bar, th, spec.priors,
                                                 s.adapt.statics[static_cast<std::size_t>(j)], ll, rng);
                        detail::tally(out.acceptance, "delta2", acc, n, in_kept, trace);
                    } else if (auto* v = std::get_if<SvState>(&s.vol)) {
                        if (!mc.fix_vol_path) {
                            const int acc = sample_h_all(*v, ybar, s.w, s.a_bar, th, s.adapt.path,
                                                         mc.parallel_h, rng,
                                                         mc.h_proposal, mc.h_steps);
                            detail::tally(out.acceptance, "h_path", acc, n * mc.h_steps, in_kept, trace);
                        }
                        if (!mc.fix_vol_statics) {
                            int acc = 0;
                            for (int j = 0; j < n; ++j) {
                                acc += sample_phi(*v, j, spec.priors,
                                                  s.adapt.statics[static_cast<std::size_t>(j)], rng);
                                v->sigma2_h[j] = sample_sigma2_h(v->h.col(j), v->phi[j], v->mu[j],
                                                                 spec.priors, rng);
                                if (mc.sv_level)
                                    v->mu[j] = sample_mu(v->h.col(j), v->phi[j], v->sigma2_h[j],
                                                         spec.priors, rng);
                            }
                            detail::tally(out.acceptance, "phi", acc, n, in_kept, trace);
                        }
                    } else {
                        auto& g = std::get<GarchState>(s.vol);
                        if (mc.fix_vol_statics) break;
                        double ll = joint_loglik(ybar, s.w, g.sigma2, s.a_bar, th);
                        int acc = 0;
                        for (int j = 0; j < n; ++j)
                            acc += sample_garch_statics(g, j, ybar, s.w, s.a_bar, th, spec.priors.garch,
                                                        s.adapt.statics[static_cast<std::size_t>(j)], ll,
                                                        rng);
                        detail::tally(out.acceptance, "garch_statics", acc, n, in_kept, trace);
                    }
                    break;
                }
            }
        }
        if (auto bad = check_invariants(s))
            throw NumericalError("MCMC invariant violated at iteration " + std::to_string(it) + ": " + *bad);
        if (!in_kept || (it - mc.burnin) % mc.thin != 0) continue;

        out.beta.row(kept) = s.beta.transpose();
        out.a_free.row(kept) = s.a_rows().transpose();
        const Mat H = s.variances(T);
        out.vol_path_mean += H;
        out.log_vol_path_mean += H.array().log().matrix();
        out.w_mean += s.w;
        if (const auto* c = std::get_if<ConstState>(&s.vol)) {
            out.delta2.row(kept) = c->delta2.transpose();
        } else if (const auto* v = std::get_if<SvState>(&s.vol)) {
            out.phi.row(kept) = v->phi.transpose();
            out.sigma2_h.row(kept) = v->sigma2_h.transpose();
            out.mu.row(kept) = v->mu.transpose();
            out.h_last.row(kept) = v->h.row(T - 1);
        } else {
            const auto& g = std::get<GarchState>(s.vol);
            out.omega.row(kept) = g.omega.transpose();
            out.alpha.row(kept) = g.alpha.transpose();
            out.gamma.row(kept) = g.gamma.transpose();
            out.sigma2_next.row(kept) = garch_next_variance(g, d.residuals(s.beta), s.w, th).transpose();
        }
        ++kept;
    }
    out.vol_path_mean /= D;
    out.log_vol_path_mean /= D;
    out.w_mean /= D;
    return out;
}

}  // namespace qvtv
