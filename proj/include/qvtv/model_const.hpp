#pragma once

// Constant-variance benchmark: H_t = diag(delta2) for all t, with each
// delta2_j updated by a log-normal random walk under an inverse-gamma prior.

#include <cmath>

#include "qvtv/adapt_mh.hpp"
#include "qvtv/core.hpp"
#include "qvtv/mcmc_common.hpp"
#include "qvtv/model_spec.hpp"

namespace qvtv {

inline double inverse_gamma_log_kernel(double x, double shape, double rate) {
    if (!(x > 0.0)) return -kInf;
    return -(shape + 1.0) * std::log(x) - rate / x;
}

/// One MH update of delta2_j. `ll_current` is the joint log-likelihood at the
/// current state and is updated on acceptance.
inline bool sample_delta2(ConstState& c, int j, const Mat& ybar, const Vec& w, const Mat& a_bar,
                          const ThetaParams& theta, const Priors& priors, AdaptiveScale& scale,
                          double& ll_current, Rng& rng) {
    const auto T = ybar.rows();
    auto H_of = [&](const Vec& d) { return Mat(d.transpose().replicate(T, 1)); };
    double lp = inverse_gamma_log_kernel(c.delta2[j], priors.delta_a, priors.delta_b) + ll_current;
    double ll_prop = ll_current;
    auto target = [&](double x) {
        Vec d = c.delta2;
        d[j] = x;
        ll_prop = joint_loglik(ybar, w, H_of(d), a_bar, theta);
        return inverse_gamma_log_kernel(x, priors.delta_a, priors.delta_b) + ll_prop;
    };
    const auto [x, acc] = rwmh_lognormal_scalar(c.delta2[j], lp, target, scale.kappa(), rng);
    scale = adapt(scale, acc);
    if (acc) {
        c.delta2[j] = x;
        ll_current = ll_prop;
    }
    return acc;
}

}  // namespace qvtv
