#pragma once

// Samplers and reference densities: generalized inverse Gaussian, the
// multivariate asymmetric Laplace mixture, a skew-t for simulation, and the
// truncated log-normal GARCH prior.

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "qvtv/core.hpp"
#include "qvtv/errors.hpp"
#include "qvtv/rng.hpp"

namespace qvtv {

/// Density proportional to x^{p-1} exp(-(a x + b / x) / 2) on x > 0.
struct GigParams {
    double p = 1.0;
    double a = 1.0;
    double b = 1.0;

    bool valid() const {
        if (!(std::isfinite(p) && std::isfinite(a) && std::isfinite(b))) return false;
        if (a < 0.0 || b < 0.0) return false;
        return (a > 0.0 && b > 0.0) || (p > 0.0 && a > 0.0) || (p < 0.0 && b > 0.0);
    }

    void validate() const {
        if (!valid()) {
            std::ostringstream os;
            os << "GiG parameters outside the existence region: p=" << p << " a=" << a
               << " b=" << b;
            throw std::invalid_argument(os.str());
        }
    }
};

namespace detail {

inline double gig_mode_std(double lambda, double omega) {
    if (lambda >= 1.0)
        return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
    return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// The three generators below sample the standardized density
// x^{lambda-1} exp(-omega (x + 1/x) / 2), lambda >= 0.

// Ratio-of-uniforms without mode shift.
inline double gig_rou_noshift(double lambda, double omega, Rng& rng) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = gig_mode_std(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
    const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
    const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
    for (;;) {
        const double u = um * rng.uniform();
        const double v = rng.uniform();
        const double x = u / v;
        if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
    }
}

// Ratio-of-uniforms with the mode shifted to the origin.
inline double gig_rou_shift(double lambda, double omega, Rng& rng) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = gig_mode_std(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
    // Extremes of (x - xm) sqrt(f(x)) solve y^3 + a y^2 + b y + c = 0.
    const double a = -(2.0 * (lambda + 1.0) / omega + xm);
    const double b = (2.0 * (lambda - 1.0) * xm / omega - 1.0);
    const double c = xm;
    const double p = b - a * a / 3.0;
    const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
    const double fak = 2.0 * std::sqrt(-p / 3.0);
    const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
    const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
    const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
    const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);
    for (;;) {
        const double u = uminus + rng.uniform() * (uplus - uminus);
        const double v = rng.uniform();
        const double x = u / v + xm;
        if (x <= 0.0) continue;
        if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
    }
}

// Rejection from a piecewise hat for 0 <= lambda < 1 and small omega, where
// the density is not T_{-1/2}-concave.
inline double gig_concave_region(double lambda, double omega, Rng& rng) {
    const double xm = gig_mode_std(lambda, omega);
    const double x0 = omega / (1.0 - lambda);
    const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
    double area[3];
    double k1 = 0.0;
    double k2 = 0.0;
    area[0] = k0 * x0;
    if (x0 >= 2.0 / omega) {
        area[1] = 0.0;
        k2 = std::pow(x0, lambda - 1.0);
        area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
    } else {
        k1 = std::exp(-omega);
        area[1] = (lambda == 0.0) ? k1 * std::log(2.0 / (omega * omega))
                                  : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
        k2 = std::pow(2.0 / omega, lambda - 1.0);
        area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
    }
    const double total = area[0] + area[1] + area[2];
    for (;;) {
        double v = total * rng.uniform();
        double x = 0.0;
        double hx = 0.0;
        if (v <= area[0]) {
            x = x0 * v / area[0];
            hx = k0;
        } else if ((v -= area[0]) <= area[1]) {
            if (lambda == 0.0) {
                x = omega * std::exp(std::exp(omega) * v);
                hx = k1 / x;
            } else {
                x = std::pow(std::pow(x0, lambda) + (lambda / k1 * v), 1.0 / lambda);
                hx = k1 * std::pow(x, lambda - 1.0);
            }
        } else {
            v -= area[1];
            const double lo = (x0 > 2.0 / omega) ? x0 : 2.0 / omega;
            x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v);
            hx = k2 * std::exp(-omega / 2.0 * x);
        }
        const double u = rng.uniform() * hx;
        if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
    }
}

}  // namespace detail

inline double gig_sample(const GigParams& g, Rng& rng) {
    g.validate();
    if (g.b == 0.0) return rng.gamma(g.p, 2.0 / g.a);
    if (g.a == 0.0) return 0.5 * g.b / rng.gamma(-g.p, 1.0);
    const double lambda = std::abs(g.p);
    const double omega = std::sqrt(g.a * g.b);
    const double scale = std::sqrt(g.b / g.a);
    double x = 0.0;
    if (lambda > 2.0 || omega > 3.0)
        x = detail::gig_rou_shift(lambda, omega, rng);
    else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2)
        x = detail::gig_rou_noshift(lambda, omega, rng);
    else
        x = detail::gig_concave_region(lambda, omega, rng);
    return g.p < 0.0 ? scale / x : scale * x;
}

inline double gig_log_kernel(double x, const GigParams& g) {
    return (g.p - 1.0) * std::log(x) - 0.5 * (g.a * x + g.b / x);
}

namespace detail {

/// Integrate exp(log_f(x) - shift) over (0, inf), splitting at `split`.
template <class LogF>
double integrate_positive_line(LogF&& log_f, double split, double shift, double rel_tol) {
    using boost::math::quadrature::exp_sinh;
    using boost::math::quadrature::tanh_sinh;
    thread_local tanh_sinh<double> inner;
    thread_local exp_sinh<double> outer;
    auto f = [&](double x) {
        if (!(x > 0.0)) return 0.0;
        const double v = std::exp(log_f(x) - shift);
        return std::isfinite(v) ? v : 0.0;
    };
    double err_lo = 0.0, l1_lo = 0.0, err_hi = 0.0, l1_hi = 0.0;
    const double lo = inner.integrate(f, 0.0, split, rel_tol, &err_lo, &l1_lo);
    const double hi = outer.integrate(f, split, std::numeric_limits<double>::infinity(), rel_tol,
                                      &err_hi, &l1_hi);
    const double total = lo + hi;
    if (!(total > 0.0) || !std::isfinite(total) || (err_lo + err_hi) > 1e-6 * total)
        throw QuadratureError("adaptive quadrature over (0, inf) did not converge");
    return total;
}

inline double gig_split_point(const GigParams& g) {
    if (g.a > 0.0) {
        const double m = ((g.p - 1.0) + std::sqrt((g.p - 1.0) * (g.p - 1.0) + g.a * g.b)) / g.a;
        if (m > 0.0) return m;
        return std::max(g.p, 0.5) * 2.0 / g.a;
    }
    return g.b / (2.0 * (1.0 - g.p));
}

}  // namespace detail

/// Log of the GiG normalizing constant by adaptive quadrature of the kernel.
inline double gig_log_normalizer(const GigParams& g) {
    g.validate();
    const double split = detail::gig_split_point(g);
    const double shift = gig_log_kernel(split, g);
    auto lk = [&](double x) { return gig_log_kernel(x, g); };
    return shift + std::log(detail::integrate_positive_line(lk, split, shift, 1e-13));
}

inline double gig_logpdf(double x, const GigParams& g) {
    if (!(x > 0.0)) throw std::invalid_argument("gig_logpdf: x must be positive");
    return gig_log_kernel(x, g) - gig_log_normalizer(g);
}

/// Draw from the MAL mixture at one time point:
///   location + H^{1/2} theta1 w + sqrt(w) Theta2 A H^{1/2} z.
inline Vec mal_sample_given_w(const Vec& location, const ThetaParams& theta, const Mat& A,
                              const Vec& variances, double w, Rng& rng) {
    const auto n = location.size();
    if (theta.theta1.size() != n || A.rows() != n || variances.size() != n)
        throw std::invalid_argument("mal_sample: dimension mismatch");
    const Vec sd = variances.array().sqrt();
    Vec z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal() * sd[i];
    const Vec shock = theta.theta2.cwiseProduct(A * z);
    return location + w * sd.cwiseProduct(theta.theta1) + std::sqrt(w) * shock;
}

inline Vec mal_sample(const Vec& location, const ThetaParams& theta, const Mat& A,
                      const Vec& variances, Rng& rng) {
    const double w = rng.exponential();
    return mal_sample_given_w(location, theta, A, variances, w, rng);
}

/// Log density of the MAL law, obtained by integrating the Gaussian mixture
/// over w in (0, inf) numerically. Reference implementation for tests.
inline double mal_logpdf_oracle(const Vec& y, const Vec& location, const ThetaParams& theta,
                                const Mat& A, const Vec& variances) {
    const auto n = y.size();
    if (location.size() != n || theta.theta1.size() != n || A.rows() != n || variances.size() != n)
        throw std::invalid_argument("mal_logpdf_oracle: dimension mismatch");
    const Mat omega = theta.theta2.asDiagonal() * implied_sigma(A, variances) * theta.theta2.asDiagonal();
    Eigen::LLT<Mat> llt(omega);
    if (llt.info() != Eigen::Success) throw NumericalError("mal_logpdf_oracle: scale not positive definite");
    const Vec shift_dir = variances.array().sqrt().matrix().cwiseProduct(theta.theta1);
    const Vec r0 = y - location;
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const Vec oi_r0 = llt.solve(r0);
    const Vec oi_m = llt.solve(shift_dir);
    const double qrr = r0.dot(oi_r0);
    const double qrm = r0.dot(oi_m);
    const double qmm = shift_dir.dot(oi_m);
    const double dn = static_cast<double>(n);
    auto log_integrand = [&](double w) {
        const double quad = (qrr - 2.0 * w * qrm + w * w * qmm) / w;
        return -0.5 * dn * std::log(2.0 * std::numbers::pi * w) - 0.5 * log_det - 0.5 * quad - w;
    };
    // The integrand peaks at the GiG(1 - n/2, 2 + qmm, qrr) mode.
    const double p = 1.0 - 0.5 * dn;
    const double a = 2.0 + qmm;
    double split = ((p - 1.0) + std::sqrt((p - 1.0) * (p - 1.0) + a * qrr)) / a;
    if (!(split > 1e-8)) split = 1e-8;
    const double shift = log_integrand(split);
    return shift + std::log(detail::integrate_positive_line(log_integrand, split, shift, 1e-12));
}

/// Multivariate skew-t: scale mixture of an Azzalini skew-normal.
///   Z = delta |X0| + X1,  X0 ~ N(0,1),  X1 ~ N(0, Omega_bar - delta delta'),
///   delta = Omega_bar alpha / sqrt(1 + alpha' Omega_bar alpha),
///   Y = diag(omega) Z / sqrt(V / dof),  V ~ chi^2(dof),
/// where Omega = diag(omega) Omega_bar diag(omega) is the scale matrix and
/// alpha the slant vector.
struct SkewTParams {
    double dof = 5.0;
    Vec skew;
    Mat scale;
};

class SkewTSampler {
public:
    explicit SkewTSampler(const SkewTParams& p) : dof_(p.dof) {
        if (!(p.dof > 2.0)) throw std::invalid_argument("skew-t: dof must exceed 2");
        const auto n = p.scale.rows();
        if (p.scale.cols() != n || p.skew.size() != n)
            throw std::invalid_argument("skew-t: dimension mismatch");
        omega_ = p.scale.diagonal().array().sqrt();
        const Mat corr = omega_.cwiseInverse().asDiagonal() * p.scale * omega_.cwiseInverse().asDiagonal();
        delta_ = corr * p.skew / std::sqrt(1.0 + p.skew.dot(corr * p.skew));
        Eigen::LLT<Mat> llt(corr - delta_ * delta_.transpose());
        if (llt.info() != Eigen::Success) throw std::invalid_argument("skew-t: scale not positive definite");
        chol_ = llt.matrixL();
    }

    Vec operator()(Rng& rng) const {
        const auto n = omega_.size();
        Vec z(n);
        for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
        const double x0 = std::abs(rng.normal());
        const Vec sn = delta_ * x0 + chol_ * z;
        const double v = rng.chi_squared(dof_);
        return omega_.cwiseProduct(sn) / std::sqrt(v / dof_);
    }

private:
    double dof_;
    Vec omega_;
    Vec delta_;
    Mat chol_;
};

inline Vec skewt_sample(const SkewTParams& params, Rng& rng) { return SkewTSampler(params)(rng); }

/// Gaussian prior on (log omega, log alpha, log gamma), truncated to alpha + gamma < 1.
struct GarchPrior {
    double mu_omega = -3.0;
    double var_omega = 4.0;
    double mu_alpha = std::log(0.1);
    double var_alpha = 1.0;
    double mu_gamma = std::log(0.8);
    double var_gamma = 0.5;

    void validate() const {
        if (!(var_omega > 0.0 && var_alpha > 0.0 && var_gamma > 0.0))
            throw std::invalid_argument("GARCH prior variances must be positive");
    }

    /// Log density in (omega, alpha, gamma) coordinates, up to the truncation constant.
    double log_density(double omega, double alpha, double gamma) const {
        if (!(omega > 0.0 && alpha > 0.0 && gamma > 0.0) || alpha + gamma >= 1.0)
            return -std::numeric_limits<double>::infinity();
        const double lo = std::log(omega), la = std::log(alpha), lg = std::log(gamma);
        return -0.5 * (lo - mu_omega) * (lo - mu_omega) / var_omega -
               0.5 * (la - mu_alpha) * (la - mu_alpha) / var_alpha -
               0.5 * (lg - mu_gamma) * (lg - mu_gamma) / var_gamma - lo - la - lg;
    }
};

struct GarchParams {
    double omega;
    double alpha;
    double gamma;
};

inline constexpr int kGarchPriorRejectionCap = 1'000'000;

inline GarchParams truncated_garch_prior_sample(const GarchPrior& prior, Rng& rng) {
    prior.validate();
    const double omega = std::exp(prior.mu_omega + std::sqrt(prior.var_omega) * rng.normal());
    for (int i = 0; i < kGarchPriorRejectionCap; ++i) {
        const double alpha = std::exp(prior.mu_alpha + std::sqrt(prior.var_alpha) * rng.normal());
        const double gamma = std::exp(prior.mu_gamma + std::sqrt(prior.var_gamma) * rng.normal());
        if (alpha + gamma < 1.0) return {omega, alpha, gamma};
    }
    throw NumericalError("truncated GARCH prior: rejection cap reached; the prior puts "
                         "almost no mass on alpha + gamma < 1");
}

}  // namespace qvtv
