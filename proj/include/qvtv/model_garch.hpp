#pragma once

// GARCH(1,1) regime. Variances follow
//   sigma2_{j,1} = omega_j / (1 - alpha_j - gamma_j)
//   sigma2_{j,t} = omega_j + alpha_j eps_{j,t-1}^2 + gamma_j sigma2_{j,t-1}
// with eps_{j,t} = ybar_{j,t} - w_t theta1_j sigma_{j,t}. Because the paths
// depend on beta and w, those blocks are updated by MH as well.

#include <cmath>
#include <sstream>
#include <vector>

#include "qvtv/adapt_mh.hpp"
#include "qvtv/core.hpp"
#include "qvtv/distributions.hpp"
#include "qvtv/errors.hpp"
#include "qvtv/mcmc_common.hpp"
#include "qvtv/model_spec.hpp"

namespace qvtv {

inline double garch_unconditional(double omega, double alpha, double gamma) {
    return omega / (1.0 - alpha - gamma);
}

/// Recomputes rows `from`..T-1 of one series' variance path in place; row
/// `from` must be > 0 or the path starts at `sigma2_init`.
inline void garch_series_path(double omega, double alpha, double gamma, double sigma2_init,
                              const Eigen::Ref<const Vec>& ybar_j, const Vec& w, double theta1_j,
                              Eigen::Ref<Vec> sigma2_j, Eigen::Index from = 0) {
    const auto T = ybar_j.size();
    if (from == 0) {
        sigma2_j[0] = sigma2_init;
        from = 1;
    }
    for (Eigen::Index t = from; t < T; ++t) {
        const double e = ybar_j[t - 1] - w[t - 1] * theta1_j * std::sqrt(sigma2_j[t - 1]);
        const double v = omega + alpha * e * e + gamma * sigma2_j[t - 1];
        if (!std::isfinite(v) || !(v > 0.0)) {
            std::ostringstream os;
            os << "GARCH variance recursion overflowed at t=" << t;
            throw NumericalError(os.str());
        }
        sigma2_j[t] = v;
    }
}

/// T x n variance paths; each series starts at its unconditional variance.
inline Mat garch_recursion(const Vec& omega, const Vec& alpha, const Vec& gamma, const Mat& ybar,
                           const Vec& w, const ThetaParams& theta) {
    Mat s2(ybar.rows(), ybar.cols());
    for (Eigen::Index j = 0; j < ybar.cols(); ++j) {
        Vec col(ybar.rows());
        garch_series_path(omega[j], alpha[j], gamma[j], garch_unconditional(omega[j], alpha[j], gamma[j]),
                          ybar.col(j), w, theta.theta1[j], col);
        s2.col(j) = col;
    }
    return s2;
}

inline Mat garch_recursion(const GarchState& g, const Mat& ybar, const Vec& w, const ThetaParams& theta) {
    return garch_recursion(g.omega, g.alpha, g.gamma, ybar, w, theta);
}

/// Joint log-normal random walk on (omega_j, alpha_j, gamma_j). The joint
/// log-likelihood is recomputed with the proposed path; `ll_current` is kept
/// in sync on acceptance.
inline bool sample_garch_statics(GarchState& g, int j, const Mat& ybar, const Vec& w, const Mat& a_bar,
                                 const ThetaParams& theta, const GarchPrior& prior, AdaptiveScale& scale,
                                 double& ll_current, Rng& rng) {
    Vec cur(3);
    cur << g.omega[j], g.alpha[j], g.gamma[j];
    Mat s2 = g.sigma2;
    double ll_prop = ll_current;
    auto target = [&](const Vec& p) {
        const double lp = prior.log_density(p[0], p[1], p[2]);
        if (!std::isfinite(lp)) return -kInf;
        Vec col(ybar.rows());
        try {
            garch_series_path(p[0], p[1], p[2], garch_unconditional(p[0], p[1], p[2]), ybar.col(j), w,
                              theta.theta1[j], col);
        } catch (const NumericalError&) {
            return -kInf;
        }
        s2.col(j) = col;
        ll_prop = joint_loglik(ybar, w, s2, a_bar, theta);
        return lp + ll_prop;
    };
    const double lp_cur = prior.log_density(cur[0], cur[1], cur[2]) + ll_current;
    const StepResult r = rwmh_lognormal_step(cur, lp_cur, target, ProposalShape::identity(3), scale, rng);
    scale = adapt(scale, r.accepted);
    if (r.accepted) {
        g.omega[j] = r.state[0];
        g.alpha[j] = r.state[1];
        g.gamma[j] = r.state[2];
        g.sigma2 = s2;  // s2 holds the last evaluated (accepted) proposal
        ll_current = ll_prop;
    }
    return r.accepted;
}

/// Log-normal MH update of w_t. The target is Exp(1) times the likelihood of
/// observations t..T, with variance paths recomputed downstream of t; when
/// every alpha_j is zero the paths ignore w and only term t remains.
/// `terms` holds the per-time log-likelihood at the current state.
inline bool sample_w_garch(GarchState& g, Vec& w, int t, const Mat& ybar, const Mat& a_bar,
                           const ThetaParams& theta, AdaptiveScale& scale, Vec& terms, Rng& rng) {
    const auto T = ybar.rows();
    const auto n = ybar.cols();
    const bool coupled = (g.alpha.array() != 0.0).any() && t + 1 < T;
    const Mat G = whitening_factor(a_bar, theta);
    const Eigen::Index len = coupled ? T - t : 1;
    Vec w_prop = w;
    Mat s2_tail;
    Vec terms_prop(len);
    auto target = [&](double x) {
        w_prop[t] = x;
        if (coupled) {
            s2_tail = g.sigma2.bottomRows(len);
            for (Eigen::Index j = 0; j < n; ++j) {
                // local recursion over rows t..T-1 of series j
                for (Eigen::Index l = 1; l < len; ++l) {
                    const Eigen::Index s = t + l;
                    const double e = ybar(s - 1, j) - w_prop[s - 1] * theta.theta1[j] * std::sqrt(s2_tail(l - 1, j));
                    const double v = g.omega[j] + g.alpha[j] * e * e + g.gamma[j] * s2_tail(l - 1, j);
                    if (!std::isfinite(v)) return -kInf;
                    s2_tail(l, j) = v;
                }
            }
        }
        double ll = 0.0;
        for (Eigen::Index l = 0; l < len; ++l) {
            const Eigen::Index s = t + l;
            terms_prop[l] = coupled ? loglik_point(&ybar(s, 0), T, w_prop[s], &s2_tail(l, 0), len, G, theta)
                                    : loglik_point(&ybar(s, 0), T, w_prop[s], &g.sigma2(s, 0), T, G, theta);
            ll += terms_prop[l];
        }
        return -x + ll;
    };
    double lp = -w[t] + terms.segment(t, len).sum();
    const auto [x, acc] = rwmh_lognormal_scalar(w[t], lp, target, scale.kappa(), rng);
    scale = adapt(scale, acc);
    if (acc) {
        w[t] = x;
        terms.segment(t, len) = terms_prop;
        if (coupled) g.sigma2.bottomRows(len) = s2_tail;
    }
    return acc;
}

/// Random-walk MH on beta with proposal shape `shape`; variance paths follow
/// beta through the residuals.
inline bool sample_beta_garch(Vec& beta, GarchState& g, const RegressionDesign& d, const Vec& w,
                              const Mat& a_bar, const ThetaParams& theta, const GaussianPrior& prior,
                              const ProposalShape& shape, AdaptiveScale& scale, double& ll_current,
                              Rng& rng) {
    auto prior_lp = [&](const Vec& b) {
        const Vec r = b - prior.mean;
        return -0.5 * r.dot(prior.precision * r);
    };
    Mat s2_prop;
    double ll_prop = ll_current;
    auto target = [&](const Vec& b) {
        const Mat ybar = d.residuals(b);
        try {
            s2_prop = garch_recursion(g, ybar, w, theta);
        } catch (const NumericalError&) {
            return -kInf;
        }
        ll_prop = joint_loglik(ybar, w, s2_prop, a_bar, theta);
        return prior_lp(b) + ll_prop;
    };
    const StepResult r = rwmh_step(beta, prior_lp(beta) + ll_current, target, shape, scale, rng);
    scale = adapt(scale, r.accepted);
    if (r.accepted) {
        beta = r.state;
        g.sigma2 = s2_prop;
        ll_current = ll_prop;
    }
    return r.accepted;
}

}  // namespace qvtv
