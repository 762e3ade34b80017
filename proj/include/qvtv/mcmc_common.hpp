#pragma once

// Conditional Gaussian likelihood of the mixture representation and the Gibbs
// blocks shared by all volatility regimes: beta (Gaussian), the free rows of
// A^{-1} (Gaussian) and the mixing variables w_t (GiG).

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "qvtv/core.hpp"
#include "qvtv/distributions.hpp"
#include "qvtv/errors.hpp"
#include "qvtv/model_spec.hpp"
#include "qvtv/rng.hpp"

namespace qvtv {

/// G = A^{-1} Theta2^{-1}; with it (Theta2 A H A' Theta2)^{-1} = G' H^{-1} G.
inline Mat whitening_factor(const Mat& a_bar, const ThetaParams& theta) {
    return a_bar * theta.theta2.cwiseInverse().asDiagonal();
}

inline constexpr int kMaxSeries = 64;

/// log N(ybar_t; w H^{1/2} theta1, w Theta2 A H A' Theta2) for one time point,
/// where ybar_t = y_t - X_t beta. Raw-pointer form; strides allow row access
/// into column-major matrices.
inline double loglik_point(const double* ybar_t, Eigen::Index ystride, double w, const double* var_t,
                           Eigen::Index vstride, const Mat& G, const ThetaParams& theta) {
    const auto n = G.rows();
    if (n > kMaxSeries) throw std::invalid_argument("loglik_point: too many series");
    double u[kMaxSeries];
    double quad = 0.0;
    double log_det = 0.0;
    double det = 1.0;  // running product, folded into log_det before it leaves a safe range
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = var_t[i * vstride];
        u[i] = ybar_t[i * ystride] - w * std::sqrt(v) * theta.theta1[i];
        double e = 0.0;
        for (Eigen::Index k = 0; k <= i; ++k) e += G(i, k) * u[k];
        const double wv = w * v;
        quad += e * e / wv;
        det *= wv * theta.theta2[i] * theta.theta2[i];
        if (det > 1e150 || det < 1e-150) {
            log_det += std::log(det);
            det = 1.0;
        }
    }
    log_det += std::log(det);
    return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det + quad);
}

inline double loglik_point(const Eigen::Ref<const Vec>& ybar_t, double w, const Eigen::Ref<const Vec>& var_t,
                           const Mat& G, const ThetaParams& theta) {
    return loglik_point(ybar_t.data(), 1, w, var_t.data(), 1, G, theta);
}

/// Per-time log-likelihood terms. `ybar` is T x n (y - X beta), `H` is T x n.
inline Vec loglik_terms(const Mat& ybar, const Vec& w, const Mat& H, const Mat& a_bar,
                        const ThetaParams& theta) {
    const Mat G = whitening_factor(a_bar, theta);
    Vec out(ybar.rows());
    for (Eigen::Index t = 0; t < ybar.rows(); ++t)
        out[t] = loglik_point(&ybar(t, 0), ybar.rows(), w[t], &H(t, 0), H.rows(), G, theta);
    return out;
}

inline double joint_loglik(const Mat& ybar, const Vec& w, const Mat& H, const Mat& a_bar,
                           const ThetaParams& theta) {
    return loglik_terms(ybar, w, H, a_bar, theta).sum();
}

/// Per-series transformed form: with A_t = sqrt(w_t) Theta2 A and
/// Atilde_t = sqrt(w_t) G diag(theta1), the vector
///   zbar_t = A_t^{-1} ybar_t - Atilde_t H_t^{1/2}
/// is N(0, H_t) with independent components. Returns T x n zbar.
inline Mat transformed_residuals(const Mat& ybar, const Vec& w, const Mat& H, const Mat& a_bar,
                                 const ThetaParams& theta) {
    const Mat G = whitening_factor(a_bar, theta);
    const Mat Gt = G * theta.theta1.asDiagonal();
    Mat z(ybar.rows(), ybar.cols());
    for (Eigen::Index t = 0; t < ybar.rows(); ++t) {
        const double rw = std::sqrt(w[t]);
        const Vec s = H.row(t).transpose().array().sqrt();
        z.row(t) = ((G * ybar.row(t).transpose()) / rw - rw * (Gt * s)).transpose();
    }
    return z;
}

/// Joint log-likelihood evaluated through the transformed residuals: a sum of
/// univariate Gaussian terms per series plus the Jacobian of y -> zbar.
inline double transformed_loglik(const Mat& ybar, const Vec& w, const Mat& H, const Mat& a_bar,
                                 const ThetaParams& theta) {
    const Mat z = transformed_residuals(ybar, w, H, a_bar, theta);
    const double c = std::log(2.0 * std::numbers::pi);
    double ll = 0.0;
    for (Eigen::Index t = 0; t < z.rows(); ++t)
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            ll += -0.5 * (c + std::log(H(t, j)) + z(t, j) * z(t, j) / H(t, j));
            ll -= std::log(std::sqrt(w[t]) * theta.theta2[j]);
        }
    return ll;
}

struct GaussianConditional {
    Vec mean;
    Mat precision;

    Mat covariance() const {
        return precision.llt().solve(Mat::Identity(precision.rows(), precision.cols()));
    }

    Vec draw(Rng& rng) const {
        Eigen::LLT<Mat> llt(precision);
        if (llt.info() != Eigen::Success) {
            Eigen::JacobiSVD<Mat> svd(precision);
            const auto& s = svd.singularValues();
            std::ostringstream os;
            os << "posterior precision is not positive definite (condition number "
               << s[0] / s[s.size() - 1] << ")";
            throw NumericalError(os.str());
        }
        Vec z(mean.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        return mean + llt.matrixU().solve(z);
    }
};

/// Exact Gaussian full conditional of beta given (A, w, H):
///   precision = Sigma_b^{-1} + sum_t X_t' (w_t Theta2 A H_t A' Theta2)^{-1} X_t
///   mean      = precision^{-1} (Sigma_b^{-1} mu_b + sum_t X_t' (...)^{-1} ytilde_t)
/// with ytilde_t = y_t - w_t H_t^{1/2} theta1. The Kronecker structure
/// X_t = I_n (x) x_t' reduces the precision to sum_i (g_i g_i') (x) S_i with
/// S_i = sum_t x_t x_t' / (w_t H_ti).
inline GaussianConditional beta_conditional(const RegressionDesign& d, const ThetaParams& theta,
                                            const Mat& a_bar, const Vec& w, const Mat& H,
                                            const GaussianPrior& prior) {
    const int n = d.n(), k = d.k(), T = d.T();
    const Mat G = whitening_factor(a_bar, theta);
    Mat prec = prior.precision;
    Vec lin = prior.precision * prior.mean;
    std::vector<Mat> S(static_cast<std::size_t>(n), Mat::Zero(k, k));
    Mat V = Mat::Zero(n, k);  // accumulates (G' D_t G ytilde_t) x_t' row by equation
    for (int t = 0; t < T; ++t) {
        const Vec sd = H.row(t).transpose().array().sqrt();
        const Vec ytil = d.y.row(t).transpose() - w[t] * sd.cwiseProduct(theta.theta1);
        Vec e = G.triangularView<Eigen::Lower>() * ytil;
        const auto xt = d.x.row(t);
        for (int i = 0; i < n; ++i) {
            const double dti = 1.0 / (w[t] * H(t, i));
            S[static_cast<std::size_t>(i)].noalias() += dti * xt.transpose() * xt;
            e[i] *= dti;
        }
        const Vec v = G.transpose().triangularView<Eigen::Upper>() * e;
        V.noalias() += v * xt;
    }
    for (int i = 0; i < n; ++i) {
        const Vec gi = G.row(i).transpose();
        for (int j = 0; j <= i; ++j)
            for (int jj = 0; jj <= i; ++jj) {
                const double c = gi[j] * gi[jj];
                if (c != 0.0) prec.block(j * k, jj * k, k, k) += c * S[static_cast<std::size_t>(i)];
            }
    }
    for (int j = 0; j < n; ++j) lin.segment(j * k, k) += V.row(j).transpose();
    GaussianConditional out;
    Eigen::LLT<Mat> llt(prec);
    if (llt.info() != Eigen::Success) throw NumericalError("beta_conditional: precision not positive definite");
    out.mean = llt.solve(lin);
    out.precision = std::move(prec);
    return out;
}

inline Vec sample_beta_gaussian(const McmcState& s, const RegressionDesign& d, const ThetaParams& theta,
                                const GaussianPrior& prior, Rng& rng) {
    return beta_conditional(d, theta, s.a_bar, s.w, s.variances(d.T()), prior).draw(rng);
}

/// Gaussian conditional of the free coefficients of row j (j >= 1) of A^{-1}:
/// regress uhat_{j,t} on -uhat_{1..j-1,t} with variances w_t H_{t,jj}, where
/// uhat_t = Theta2^{-1} (y_t - X_t beta - w_t H_t^{1/2} theta1).
inline GaussianConditional a_row_conditional(int j, const Mat& ybar, const Vec& w, const Mat& H,
                                             const ThetaParams& theta, const GaussianPrior& prior) {
    if (j < 1 || j >= ybar.cols()) throw std::invalid_argument("a_row_conditional: row index out of range");
    Mat prec = prior.precision;
    Vec lin = prior.precision * prior.mean;
    for (Eigen::Index t = 0; t < ybar.rows(); ++t) {
        Vec r(j);
        for (int i = 0; i < j; ++i)
            r[i] = -(ybar(t, i) - w[t] * std::sqrt(H(t, i)) * theta.theta1[i]) / theta.theta2[i];
        const double resp = (ybar(t, j) - w[t] * std::sqrt(H(t, j)) * theta.theta1[j]) / theta.theta2[j];
        const double wt = 1.0 / (w[t] * H(t, j));
        prec.noalias() += wt * r * r.transpose();
        lin.noalias() += wt * resp * r;
    }
    GaussianConditional out;
    Eigen::LLT<Mat> llt(prec);
    if (llt.info() != Eigen::Success) throw NumericalError("a_row_conditional: precision not positive definite");
    out.mean = llt.solve(lin);
    out.precision = std::move(prec);
    return out;
}

/// Redraws every free row of A^{-1}; returns the new A^{-1} (A = its inverse).
inline Mat sample_a_rows(const Mat& ybar, const Vec& w, const Mat& H, const ThetaParams& theta,
                         const Priors& priors, Mat a_bar, Rng& rng) {
    for (int j = 1; j < a_bar.rows(); ++j) {
        const Vec draw = a_row_conditional(j, ybar, w, H, theta, priors.a_row_prior(j)).draw(rng);
        a_bar.block(j, 0, 1, j) = draw.transpose();
    }
    return a_bar;
}

inline constexpr double kGigDegenerateEpsilon = 1e-12;

/// GiG(1 - n/2, 2 + m' Q m, ybar_t' Q ybar_t) with m = H_t^{1/2} theta1 and
/// Q = (Theta2 A H_t A' Theta2)^{-1}.
inline GigParams w_gig_params(const Eigen::Ref<const Vec>& ybar_t, const Eigen::Ref<const Vec>& var_t,
                              const Mat& G, const ThetaParams& theta) {
    const auto n = ybar_t.size();
    const Vec m = var_t.array().sqrt().matrix().cwiseProduct(theta.theta1);
    const Vec em = G.triangularView<Eigen::Lower>() * m;
    const Vec ey = G.triangularView<Eigen::Lower>() * ybar_t;
    double a = 2.0, b = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        a += em[i] * em[i] / var_t[i];
        b += ey[i] * ey[i] / var_t[i];
    }
    return {1.0 - 0.5 * static_cast<double>(n), a, b};
}

inline double sample_w_gig(const Eigen::Ref<const Vec>& ybar_t, const Eigen::Ref<const Vec>& var_t,
                           const Mat& G, const ThetaParams& theta, Rng& rng) {
    GigParams g = w_gig_params(ybar_t, var_t, G, theta);
    if (g.b <= 0.0 && g.p <= 0.0) {
        static std::atomic<bool> warned{false};
        if (!warned.exchange(true))
            std::cerr << "warning: zero residual in w_t update; perturbing b by "
                      << kGigDegenerateEpsilon << "\n";
        g.b = kGigDegenerateEpsilon;
    }
    return gig_sample(g, rng);
}

/// Draws all w_t (SV and CONST regimes).
inline Vec sample_w_all(const Mat& ybar, const Mat& H, const Mat& a_bar, const ThetaParams& theta, Rng& rng) {
    const Mat G = whitening_factor(a_bar, theta);
    Vec w(ybar.rows());
    for (Eigen::Index t = 0; t < ybar.rows(); ++t)
        w[t] = sample_w_gig(ybar.row(t).transpose(), H.row(t).transpose(), G, theta, rng);
    return w;
}

}  // namespace qvtv
