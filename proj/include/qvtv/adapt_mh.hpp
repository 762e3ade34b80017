#pragma once

// Adaptive random-walk Metropolis-Hastings with Robbins-Monro tuning of a
// scalar proposal scale toward a target acceptance rate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "qvtv/errors.hpp"
#include "qvtv/rng.hpp"

namespace qvtv {

inline constexpr double kTargetPathRate = 0.27;    // whole-path h proposals
inline constexpr double kTargetStaticRate = 0.30;  // all other aRWMH blocks

struct AdaptiveScale {
    double log_kappa = 0.0;
    double target_rate = kTargetStaticRate;
    std::int64_t iteration = 0;
    double decay_exponent = 0.6;
    double log_kappa_min = std::log(1e-6);
    double log_kappa_max = std::log(1e6);
    bool frozen = false;

    static AdaptiveScale make(double kappa, double target, double decay = 0.6) {
        if (!(kappa > 0.0)) throw std::invalid_argument("AdaptiveScale: kappa must be positive");
        if (!(target > 0.0 && target < 1.0))
            throw std::invalid_argument("AdaptiveScale: target rate must lie in (0,1)");
        if (!(decay > 0.5 && decay <= 1.0))
            throw std::invalid_argument("AdaptiveScale: decay exponent must lie in (0.5,1]");
        AdaptiveScale s;
        s.target_rate = target;
        s.decay_exponent = decay;
        s.log_kappa = std::clamp(std::log(kappa), s.log_kappa_min, s.log_kappa_max);
        return s;
    }

    double kappa() const { return std::exp(log_kappa); }
};

/// One Robbins-Monro update: log kappa += m^(-decay) * (1{accepted} - target).
/// Frozen scales still count iterations but never move.
inline AdaptiveScale adapt(AdaptiveScale scale, bool accepted) {
    scale.iteration += 1;
    if (scale.frozen) return scale;
    const double gain = std::pow(static_cast<double>(scale.iteration), -scale.decay_exponent);
    const double signal = (accepted ? 1.0 : 0.0) - scale.target_rate;
    scale.log_kappa = std::clamp(scale.log_kappa + gain * signal, scale.log_kappa_min,
                                 scale.log_kappa_max);
    return scale;
}

/// Fixed proposal shape S (diagonal or full); the step covariance is kappa * S.
class ProposalShape {
public:
    static ProposalShape diagonal(const Eigen::VectorXd& variances) {
        if ((variances.array() <= 0.0).any())
            throw std::invalid_argument("ProposalShape: variances must be positive");
        ProposalShape p;
        p.sd_ = variances.array().sqrt();
        return p;
    }

    static ProposalShape identity(Eigen::Index dim) {
        return diagonal(Eigen::VectorXd::Ones(dim));
    }

    static ProposalShape full(const Eigen::MatrixXd& cov) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("ProposalShape: covariance is not positive definite");
        ProposalShape p;
        p.chol_ = llt.matrixL();
        p.is_full_ = true;
        return p;
    }

    Eigen::Index dim() const { return is_full_ ? chol_.rows() : sd_.size(); }

    /// Draw delta ~ N(0, kappa * S).
    Eigen::VectorXd draw(double kappa, Rng& rng) const {
        Eigen::VectorXd z(dim());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        const double root = std::sqrt(kappa);
        if (is_full_) return root * (chol_ * z);
        return root * sd_.cwiseProduct(z);
    }

private:
    Eigen::VectorXd sd_;
    Eigen::MatrixXd chol_;
    bool is_full_ = false;
};

struct StepResult {
    Eigen::VectorXd state;
    bool accepted = false;
    double log_target = 0.0;
};

/// Gaussian random-walk MH step. `current_log_target` is the cached target at
/// `current`; proposals with a non-finite target are rejected.
template <class LogTarget>
StepResult rwmh_step(const Eigen::VectorXd& current, double current_log_target,
                     LogTarget&& log_target, const ProposalShape& shape,
                     const AdaptiveScale& scale, Rng& rng) {
    if (std::isnan(current_log_target))
        throw NumericalError("rwmh_step: log target is NaN at the current state");
    Eigen::VectorXd proposal = current + shape.draw(scale.kappa(), rng);
    const double lp = log_target(proposal);
    const double log_u = std::log(rng.uniform());
    if (std::isfinite(lp) && log_u < lp - current_log_target)
        return {std::move(proposal), true, lp};
    return {current, false, current_log_target};
}

/// Log-normal random walk on a strictly positive vector. `log_target` is the
/// density in the original coordinates; the Jacobian of the log map enters the
/// acceptance ratio.
template <class LogTarget>
StepResult rwmh_lognormal_step(const Eigen::VectorXd& current, double current_log_target,
                               LogTarget&& log_target, const ProposalShape& shape,
                               const AdaptiveScale& scale, Rng& rng) {
    if ((current.array() <= 0.0).any())
        throw std::invalid_argument("rwmh_lognormal_step: state must be strictly positive");
    if (std::isnan(current_log_target))
        throw NumericalError("rwmh_lognormal_step: log target is NaN at the current state");
    const Eigen::VectorXd log_cur = current.array().log();
    const Eigen::VectorXd log_prop = log_cur + shape.draw(scale.kappa(), rng);
    Eigen::VectorXd proposal = log_prop.array().exp();
    const double lp = log_target(proposal);
    const double log_ratio = lp + log_prop.sum() - current_log_target - log_cur.sum();
    const double log_u = std::log(rng.uniform());
    if (std::isfinite(lp) && log_u < log_ratio) return {std::move(proposal), true, lp};
    return {current, false, current_log_target};
}

/// Scalar convenience wrapper around the lognormal step.
template <class LogTarget>
std::pair<double, bool> rwmh_lognormal_scalar(double current, double& current_log_target,
                                              LogTarget&& log_target, double kappa, Rng& rng) {
    if (!(current > 0.0)) throw std::invalid_argument("rwmh_lognormal_scalar: state must be positive");
    if (std::isnan(current_log_target))
        throw NumericalError("rwmh_lognormal_scalar: log target is NaN at the current state");
    const double log_prop = std::log(current) + std::sqrt(kappa) * rng.normal();
    const double proposal = std::exp(log_prop);
    const double lp = log_target(proposal);
    const double log_ratio = lp + log_prop - current_log_target - std::log(current);
    if (std::isfinite(lp) && std::log(rng.uniform()) < log_ratio) {
        current_log_target = lp;
        return {proposal, true};
    }
    return {current, false};
}

}  // namespace qvtv
