#pragma once

// Shared domain types: quantile levels and their (theta1, theta2) mixture
// parametrization, the VAR regression design, the Cholesky-type scale
// decomposition and the full MCMC state.

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qvtv/adapt_mh.hpp"

namespace qvtv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class QuantileLevels {
public:
    QuantileLevels() = default;
    explicit QuantileLevels(std::vector<double> tau) : tau_(std::move(tau)) {
        if (tau_.empty()) throw std::invalid_argument("QuantileLevels: empty level vector");
        for (std::size_t j = 0; j < tau_.size(); ++j) {
            if (!(tau_[j] > 0.0 && tau_[j] < 1.0)) {
                std::ostringstream os;
                os << "QuantileLevels: tau[" << j << "] = " << tau_[j]
                   << " is outside the open unit interval";
                throw std::invalid_argument(os.str());
            }
        }
    }

    /// Same level for all n series.
    static QuantileLevels uniform(int n, double tau) {
        return QuantileLevels(std::vector<double>(static_cast<std::size_t>(n), tau));
    }

    int size() const { return static_cast<int>(tau_.size()); }
    double operator[](int j) const { return tau_[static_cast<std::size_t>(j)]; }
    const std::vector<double>& values() const { return tau_; }

private:
    std::vector<double> tau_;
};

struct ThetaParams {
    Vec theta1;
    Vec theta2;
};

inline double theta1_of(double tau) { return (1.0 - 2.0 * tau) / (tau * (1.0 - tau)); }
inline double theta2_of(double tau) { return std::sqrt(2.0 / (tau * (1.0 - tau))); }

inline ThetaParams theta_params(const QuantileLevels& levels) {
    const int n = levels.size();
    ThetaParams p{Vec(n), Vec(n)};
    for (int j = 0; j < n; ++j) {
        p.theta1[j] = theta1_of(levels[j]);
        p.theta2[j] = theta2_of(levels[j]);
    }
    return p;
}

/// Root in (0,1) of theta1 * tau^2 - (theta1 + 2) tau + 1 = 0, written in the
/// cancellation-free form.
inline double tau_from_theta1(double theta1) {
    return 2.0 / (theta1 + 2.0 + std::sqrt(theta1 * theta1 + 4.0));
}

/// Aligned regression sample. Row t of `y` is y_t, row t of `x` is x_t; the
/// per-time design block is X_t = I_n (x) x_t' and beta = vec(B') stacks the
/// k coefficients of equation 1, then equation 2, and so on.
struct RegressionDesign {
    Mat y;
    Mat x;
    int lag_order = 0;
    bool includes_intercept = true;

    int n() const { return static_cast<int>(y.cols()); }
    int k() const { return static_cast<int>(x.cols()); }
    int T() const { return static_cast<int>(y.rows()); }
    int nk() const { return n() * k(); }

    Mat block(int t) const {
        Mat X = Mat::Zero(n(), nk());
        for (int j = 0; j < n(); ++j) X.block(j, j * k(), 1, k()) = x.row(t);
        return X;
    }

    /// n x k coefficient matrix B with beta = vec(B') (equation-major).
    Mat coefficient_matrix(const Vec& beta) const {
        return Eigen::Map<const Mat>(beta.data(), k(), n()).transpose();
    }

    /// T x n matrix of y_t - X_t beta.
    Mat residuals(const Vec& beta) const { return y - x * coefficient_matrix(beta).transpose(); }
};

/// Regressor vector [1, y_{t-1}', ..., y_{t-p}'] from the most recent rows of
/// `history` (last row = most recent observation).
inline Vec var_regressors(const Mat& history, int lag_order, bool intercept) {
    const int n = static_cast<int>(history.cols());
    if (history.rows() < lag_order)
        throw std::invalid_argument("var_regressors: not enough history rows for the lag order");
    Vec x(n * lag_order + (intercept ? 1 : 0));
    int c = 0;
    if (intercept) x[c++] = 1.0;
    const Eigen::Index last = history.rows() - 1;
    for (int l = 1; l <= lag_order; ++l)
        for (int j = 0; j < n; ++j) x[c++] = history(last - l + 1, j);
    return x;
}

inline RegressionDesign build_var_design(const Mat& values, int lag_order, bool intercept = true) {
    if (lag_order < 0) throw std::invalid_argument("build_var_design: negative lag order");
    if (values.rows() < lag_order + 2) {
        std::ostringstream os;
        os << "build_var_design: need at least " << lag_order + 2 << " rows, got "
           << values.rows();
        throw std::invalid_argument(os.str());
    }
    if (!values.allFinite()) throw std::invalid_argument("build_var_design: non-finite values in panel");
    const int T = static_cast<int>(values.rows()) - lag_order;
    const int n = static_cast<int>(values.cols());
    const int k = n * lag_order + (intercept ? 1 : 0);
    if (k == 0) throw std::invalid_argument("build_var_design: no regressors (p = 0 without intercept)");
    RegressionDesign d;
    d.lag_order = lag_order;
    d.includes_intercept = intercept;
    d.y = values.bottomRows(T);
    d.x.resize(T, k);
    for (int t = 0; t < T; ++t)
        d.x.row(t) = var_regressors(values.topRows(t + lag_order), lag_order, intercept).transpose();
    return d;
}

/// Sigma_t = A diag(H_t) A' with A unit lower triangular. `variances` holds
/// H_t in row t.
struct ScaleDecomposition {
    Mat A;
    Mat variances;

    void validate() const {
        const auto n = A.rows();
        if (A.cols() != n || variances.cols() != n)
            throw std::invalid_argument("ScaleDecomposition: dimension mismatch");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (A(i, i) != 1.0) throw std::invalid_argument("ScaleDecomposition: A needs a unit diagonal");
            for (Eigen::Index j = i + 1; j < n; ++j)
                if (A(i, j) != 0.0)
                    throw std::invalid_argument("ScaleDecomposition: A must be lower triangular");
        }
        if (!(variances.array() > 0.0).all())
            throw std::invalid_argument("ScaleDecomposition: variances must be positive");
    }
};

inline Mat implied_sigma(const Mat& A, const Vec& h_t) {
    return A * h_t.asDiagonal() * A.transpose();
}

inline Mat implied_sigma(const ScaleDecomposition& dec, int t) {
    return implied_sigma(dec.A, dec.variances.row(t).transpose());
}

/// Inverse of a unit lower-triangular matrix by exact triangular back-solve.
inline Mat unit_lower_inverse(const Mat& L) {
    return L.triangularView<Eigen::UnitLower>().solve(Mat::Identity(L.rows(), L.cols()));
}

enum class Regime { Const, SV, Garch };

inline std::string_view regime_name(Regime r) {
    switch (r) {
        case Regime::Const: return "const";
        case Regime::SV: return "sv";
        case Regime::Garch: return "garch";
    }
    return "?";
}

inline Regime parse_regime(std::string_view s) {
    if (s == "const" || s == "qvar") return Regime::Const;
    if (s == "sv" || s == "qvar-sv") return Regime::SV;
    if (s == "garch" || s == "qvar-garch") return Regime::Garch;
    throw std::invalid_argument("unknown volatility regime '" + std::string(s) + "'");
}

struct ConstState {
    Vec delta2;  // per-series constant variance
};

/// Log-variances h (T x n) with AR(1) dynamics around level mu.
struct SvState {
    Mat h;
    Vec phi;
    Vec sigma2_h;
    Vec mu;
};

struct GarchState {
    Vec omega;
    Vec alpha;
    Vec gamma;
    Mat sigma2;  // T x n variance paths
};

struct BlockScales {
    AdaptiveScale beta;
    std::vector<AdaptiveScale> w;        // GARCH w_t MH, one per time point
    std::vector<AdaptiveScale> path;     // SV h-path, one per series
    std::vector<AdaptiveScale> statics;  // per series: phi (SV), (omega,alpha,gamma) (GARCH), delta2 (CONST)
};

struct McmcState {
    Vec beta;
    Mat a_bar;  // A^{-1}, unit lower triangular; its strict lower part is sampled
    Vec w;
    std::variant<ConstState, SvState, GarchState> vol;
    BlockScales adapt;

    Regime regime() const { return static_cast<Regime>(vol.index()); }
    Mat A() const { return unit_lower_inverse(a_bar); }

    /// Free (strictly lower) entries of A^{-1}, row by row.
    Vec a_rows() const {
        const auto n = a_bar.rows();
        Vec out(n * (n - 1) / 2);
        Eigen::Index c = 0;
        for (Eigen::Index i = 1; i < n; ++i)
            for (Eigen::Index j = 0; j < i; ++j) out[c++] = a_bar(i, j);
        return out;
    }

    /// T x n matrix of H_t diagonals.
    Mat variances(int T) const {
        if (const auto* c = std::get_if<ConstState>(&vol))
            return c->delta2.transpose().replicate(T, 1);
        if (const auto* s = std::get_if<SvState>(&vol)) return s->h.array().exp();
        return std::get<GarchState>(vol).sigma2;
    }
};

/// Pure invariant predicate; returns a description of the first violation.
inline std::optional<std::string> check_invariants(const McmcState& s) {
    if (!s.beta.allFinite()) return "beta has non-finite entries";
    const auto n = s.a_bar.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (s.a_bar(i, i) != 1.0) return "A^{-1} lost its unit diagonal";
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (s.a_bar(i, j) != 0.0) return "A^{-1} is not lower triangular";
    }
    if (!s.a_bar.allFinite()) return "A^{-1} has non-finite entries";
    if (!(s.w.array() > 0.0).all() || !s.w.allFinite()) return "mixing variables must be positive";
    if (const auto* c = std::get_if<ConstState>(&s.vol)) {
        if (!(c->delta2.array() > 0.0).all()) return "constant variances must be positive";
    } else if (const auto* v = std::get_if<SvState>(&s.vol)) {
        if (!(v->phi.array().abs() < 1.0).all()) return "SV persistence must satisfy |phi| < 1";
        if (!(v->sigma2_h.array() > 0.0).all()) return "SV innovation variance must be positive";
        if (!v->h.allFinite()) return "log-variance path has non-finite entries";
    } else {
        const auto& g = std::get<GarchState>(s.vol);
        if (!(g.omega.array() > 0.0).all()) return "GARCH omega must be positive";
        if (!(g.alpha.array() >= 0.0).all() || !(g.gamma.array() >= 0.0).all())
            return "GARCH alpha, gamma must be non-negative";
        if (!((g.alpha + g.gamma).array() < 1.0).all()) return "GARCH alpha + gamma must be < 1";
        if (!(g.sigma2.array() > 0.0).all() || !g.sigma2.allFinite())
            return "GARCH variance path must be positive";
    }
    return std::nullopt;
}

}  // namespace qvtv
