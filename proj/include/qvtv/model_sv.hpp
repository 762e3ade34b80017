#pragma once

// Stochastic-volatility regime: log-variances h_{j,t} follow a stationary AR(1)
// around a level mu_j. Each path h_j is drawn as one block by adaptive RWMH
// on the transformed likelihood; phi_j by MH on its logit scale; sigma2_h and
// mu by conjugate draws.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qvtv/adapt_mh.hpp"
#include "qvtv/core.hpp"
#include "qvtv/mcmc_common.hpp"
#include "qvtv/model_spec.hpp"
#include "qvtv/rng.hpp"

namespace qvtv {

/// ytilde_t^j = A_t^{-1} ybar_t - sum_{i != j} Atilde_{t,:i} e^{h_{i,t}/2}, with
/// A_t = sqrt(w_t) Theta2 A and Atilde_t = sqrt(w_t) G diag(theta1).
inline Vec sv_transformed_response(const Eigen::Ref<const Vec>& ybar_t, double w_t,
                                   const Eigen::Ref<const Vec>& h_t, const Mat& a_bar,
                                   const ThetaParams& theta, int j) {
    const Mat G = whitening_factor(a_bar, theta);
    const double rw = std::sqrt(w_t);
    Vec out = (G * ybar_t) / rw;
    for (Eigen::Index i = 0; i < h_t.size(); ++i) {
        if (i == j) continue;
        out -= rw * theta.theta1[i] * std::exp(0.5 * h_t[i]) * G.col(i);
    }
    return out;
}

/// Log density of an AR(1) path around `mu` with stationary start.
inline double ar1_log_prior(const Eigen::Ref<const Vec>& h, double phi, double sigma2, double mu) {
    const double c = std::log(2.0 * std::numbers::pi);
    const double v1 = sigma2 / (1.0 - phi * phi);
    double lp = -0.5 * (c + std::log(v1) + (h[0] - mu) * (h[0] - mu) / v1);
    for (Eigen::Index t = 1; t < h.size(); ++t) {
        const double e = h[t] - mu - phi * (h[t - 1] - mu);
        lp += -0.5 * (c + std::log(sigma2) + e * e / sigma2);
    }
    return lp;
}

/// Log-likelihood terms of h_j given everything else. Only the rows i >= j of
/// the transformed system depend on h_j: row j through both its mean and
/// variance, rows below through their means.
class SvPathLikelihood {
public:
    SvPathLikelihood(const Mat& ybar, const Vec& w, const Mat& h, const Mat& a_bar,
                     const ThetaParams& theta, int j)
        : j_(j), n_(static_cast<int>(ybar.cols())), rows_(n_ - j) {
        const auto T = ybar.rows();
        const Mat G = whitening_factor(a_bar, theta);
        base_.resize(T, rows_);
        coef_.resize(T, rows_);
        other_var_.resize(T, rows_);
        for (Eigen::Index t = 0; t < T; ++t) {
            const double rw = std::sqrt(w[t]);
            const Vec yt = sv_transformed_response(ybar.row(t).transpose(), w[t], h.row(t).transpose(),
                                                   a_bar, theta, j);
            for (int r = 0; r < rows_; ++r) {
                const int i = j + r;
                base_(t, r) = yt[i];
                coef_(t, r) = rw * G(i, j) * theta.theta1[j];
                other_var_(t, r) = std::exp(h(t, i));
            }
        }
    }

    double operator()(const Eigen::Ref<const Vec>& hj) const {
        double ll = 0.0;
        for (Eigen::Index t = 0; t < base_.rows(); ++t) {
            const double s = std::exp(0.5 * hj[t]);
            const double z0 = base_(t, 0) - coef_(t, 0) * s;
            ll += -0.5 * (hj[t] + z0 * z0 / (s * s));
            for (int r = 1; r < rows_; ++r) {
                const double z = base_(t, r) - coef_(t, r) * s;
                ll += -0.5 * z * z / other_var_(t, r);
            }
        }
        return ll;
    }

private:
    int j_;
    int n_;
    int rows_;
    Mat base_;
    Mat coef_;
    Mat other_var_;
};

/// Whole-path proposal h_j* = h_j + delta. `Diagonal`: delta ~ N(0, kappa S_j)
/// with S_j diagonal holding the stationary AR(1) variance. `Ar1`: delta has
/// kappa times the AR(1) prior covariance (a random walk on the path's
/// innovations). `steps` repeats the move within one sweep.
inline int sample_h_path(SvState& sv, int j, const Mat& ybar, const Vec& w, const Mat& h_cond,
                         const Mat& a_bar, const ThetaParams& theta, AdaptiveScale& scale, Rng& rng,
                         PathProposal kind = PathProposal::Ar1, int steps = 1) {
    const SvPathLikelihood lik(ybar, w, h_cond, a_bar, theta, j);
    const double phi = sv.phi[j], s2 = sv.sigma2_h[j], mu = sv.mu[j];
    const double v1 = s2 / (1.0 - phi * phi);
    auto target = [&](const Vec& hj) {
        const double v = lik(hj) + ar1_log_prior(hj, phi, s2, mu);
        return std::isfinite(v) ? v : -kInf;
    };
    Vec cur = sv.h.col(j);
    const auto T = cur.size();
    double lp = target(cur);
    if (std::isnan(lp)) throw NumericalError("sample_h_path: log target is NaN at the current state");
    int accepted = 0;
    Vec prop(T);
    for (int s = 0; s < steps; ++s) {
        const double root = std::sqrt(scale.kappa());
        if (kind == PathProposal::Diagonal) {
            const double sd = root * std::sqrt(v1);
            for (Eigen::Index t = 0; t < T; ++t) prop[t] = cur[t] + sd * rng.normal();
        } else {
            double delta = std::sqrt(v1) * rng.normal();
            prop[0] = cur[0] + root * delta;
            for (Eigen::Index t = 1; t < T; ++t) {
                delta = phi * delta + std::sqrt(s2) * rng.normal();
                prop[t] = cur[t] + root * delta;
            }
        }
        const double lq = target(prop);
        const bool acc = std::isfinite(lq) && std::log(rng.uniform()) < lq - lp;
        if (acc) {
            cur.swap(prop);
            lp = lq;
            ++accepted;
        }
        scale = adapt(scale, acc);
    }
    sv.h.col(j) = cur;
    return accepted;
}

/// Redraws every h_j. Sequential mode conditions series j on the already
/// updated paths of series < j; parallel mode conditions all series on the
/// paths at entry.
inline int sample_h_all(SvState& sv, const Mat& ybar, const Vec& w, const Mat& a_bar,
                        const ThetaParams& theta, std::vector<AdaptiveScale>& scales, bool parallel,
                        Rng& rng, PathProposal kind = PathProposal::Ar1, int steps = 1) {
    const Mat snapshot = sv.h;
    int accepted = 0;
    for (int j = 0; j < static_cast<int>(sv.h.cols()); ++j) {
        const Mat& cond = parallel ? snapshot : sv.h;
        accepted += sample_h_path(sv, j, ybar, w, cond, a_bar, theta, scales[static_cast<std::size_t>(j)], rng,
                                  kind, steps);
    }
    return accepted;
}

/// log p(phi | h) up to a constant, in u = logit((1 + phi) / 2) coordinates
/// (the Beta prior density times the Jacobian du/dz).
inline double phi_log_target(double z, const Eigen::Ref<const Vec>& h, double sigma2, double mu,
                             const Priors& pr) {
    const double u = 1.0 / (1.0 + std::exp(-z));
    const double phi = 2.0 * u - 1.0;
    if (!(std::abs(phi) < 1.0)) return -kInf;
    const double log_u = -std::log1p(std::exp(-z));
    const double log_1mu = -std::log1p(std::exp(z));
    return ar1_log_prior(h, phi, sigma2, mu) + pr.phi_a * log_u + pr.phi_b * log_1mu;
}

inline bool sample_phi(SvState& sv, int j, const Priors& pr, AdaptiveScale& scale, Rng& rng) {
    const Vec hj = sv.h.col(j);
    const double s2 = sv.sigma2_h[j], mu = sv.mu[j];
    const double u0 = 0.5 * (1.0 + sv.phi[j]);
    Vec z(1);
    z[0] = std::log(u0) - std::log1p(-u0);
    auto target = [&](const Vec& x) { return phi_log_target(x[0], hj, s2, mu, pr); };
    const StepResult r = rwmh_step(z, target(z), target, ProposalShape::identity(1), scale, rng);
    scale = adapt(scale, r.accepted);
    if (r.accepted) {
        const double phi = std::tanh(0.5 * r.state[0]);  // 2 logistic(z) - 1
        if (std::abs(phi) < 1.0) sv.phi[j] = phi;
    }
    return r.accepted;
}

/// Conjugate IG(a + T/2, b + SS/2) draw with SS the AR(1) residual sum of squares.
inline double sample_sigma2_h(const Eigen::Ref<const Vec>& h, double phi, double mu, const Priors& pr,
                              Rng& rng) {
    const auto T = h.size();
    double ss = (1.0 - phi * phi) * (h[0] - mu) * (h[0] - mu);
    for (Eigen::Index t = 1; t < T; ++t) {
        const double e = h[t] - mu - phi * (h[t - 1] - mu);
        ss += e * e;
    }
    return rng.inverse_gamma(pr.sigma_a + 0.5 * static_cast<double>(T), pr.sigma_b + 0.5 * ss);
}

/// Conjugate normal draw of the log-variance level.
inline double sample_mu(const Eigen::Ref<const Vec>& h, double phi, double sigma2, const Priors& pr,
                        Rng& rng) {
    const auto T = h.size();
    double prec = 1.0 / pr.mu_var + (1.0 - phi * phi) / sigma2;
    double lin = pr.mu_mean / pr.mu_var + (1.0 - phi * phi) * h[0] / sigma2;
    const double c = 1.0 - phi;
    for (Eigen::Index t = 1; t < T; ++t) {
        prec += c * c / sigma2;
        lin += c * (h[t] - phi * h[t - 1]) / sigma2;
    }
    return lin / prec + rng.normal() / std::sqrt(prec);
}

}  // namespace qvtv
