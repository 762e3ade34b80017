#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qvtv/mcmc_common.hpp"
#include "qvtv/model_spec.hpp"

using namespace qvtv;

namespace {

struct RandomState {
    std::vector<double> tau;
    ThetaParams th;
    Mat a_bar, A, ybar, H;
    Vec w;
};

RandomState random_state(int n, int T, Rng& rng) {
    RandomState s;
    for (int j = 0; j < n; ++j) s.tau.push_back(0.05 + 0.9 * rng.uniform());
    s.th = theta_params(QuantileLevels(s.tau));
    s.a_bar = Mat::Identity(n, n);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) s.a_bar(i, j) = rng.normal();
    s.A = unit_lower_inverse(s.a_bar);
    s.ybar.resize(T, n);
    s.H.resize(T, n);
    s.w.resize(T);
    for (int t = 0; t < T; ++t) {
        s.w[t] = rng.exponential();
        for (int j = 0; j < n; ++j) {
            s.ybar(t, j) = 2.0 * rng.normal();
            s.H(t, j) = std::exp(rng.normal());
        }
    }
    return s;
}

double dense_loglik(const RandomState& s) {
    const Vec tv = Eigen::Map<const Vec>(s.tau.data(), static_cast<Eigen::Index>(s.tau.size()));
    double ll = 0;
    for (Eigen::Index t = 0; t < s.ybar.rows(); ++t)
        ll += oracle::mal_conditional_logpdf(s.ybar.row(t).transpose(), Vec::Zero(s.ybar.cols()), s.w[t],
                                             s.H.row(t).transpose(), s.A, tv);
    return ll;
}

RegressionDesign random_design(int n, int T, int k, Rng& rng) {
    RegressionDesign d;
    d.y.resize(T, n);
    d.x.resize(T, k);
    for (int t = 0; t < T; ++t) {
        d.x(t, 0) = 1.0;
        for (int c = 1; c < k; ++c) d.x(t, c) = rng.normal();
        for (int j = 0; j < n; ++j) d.y(t, j) = rng.normal();
    }
    return d;
}

}  // namespace

TEST(Likelihood, JointAndTransformedMatchDenseGaussian) {
    Rng rng(1);
    for (int n : {2, 4})
        for (int rep = 0; rep < 20; ++rep) {
            const auto s = random_state(n, 15, rng);
            const double ref = dense_loglik(s);
            EXPECT_NEAR(joint_loglik(s.ybar, s.w, s.H, s.a_bar, s.th), ref, 1e-8 * std::max(1.0, std::abs(ref)));
            EXPECT_NEAR(transformed_loglik(s.ybar, s.w, s.H, s.a_bar, s.th), ref, 1e-8 * std::max(1.0, std::abs(ref)));
        }
}

TEST(Likelihood, TransformedResidualsAreStandardGaussianScale) {
    // zbar_t recovers ybar_t: ybar_t = A_t (Atilde_t H^{1/2} + zbar_t)
    Rng rng(2);
    const auto s = random_state(3, 5, rng);
    const Mat z = transformed_residuals(s.ybar, s.w, s.H, s.a_bar, s.th);
    for (int t = 0; t < 5; ++t) {
        const double rw = std::sqrt(s.w[t]);
        const Mat At = rw * s.th.theta2.asDiagonal() * s.A;
        const Vec sd = s.H.row(t).transpose().array().sqrt();
        const Vec back = At * z.row(t).transpose() + s.w[t] * sd.cwiseProduct(s.th.theta1);
        EXPECT_LT((back - s.ybar.row(t).transpose()).norm(), 1e-10);
    }
}

TEST(BetaConditional, FlatPriorGivesGls) {
    Rng rng(3);
    const int n = 2, T = 40, k = 3;
    const auto d = random_design(n, T, k, rng);
    const auto th = theta_params(QuantileLevels::uniform(n, 0.5));
    GaussianPrior flat{Vec::Zero(n * k), Mat::Identity(n * k, n * k) * 1e-14};
    const auto g = beta_conditional(d, th, Mat::Identity(n, n), Vec::Ones(T), Mat::Ones(T, n), flat);
    // dense GLS with Omega = Theta2 Theta2' per time point
    const Mat Om = th.theta2.array().square().matrix().asDiagonal();
    Mat P = Mat::Zero(n * k, n * k);
    Vec r = Vec::Zero(n * k);
    for (int t = 0; t < T; ++t) {
        Mat X = Mat::Zero(n, n * k);
        for (int j = 0; j < n; ++j) X.block(j, j * k, 1, k) = d.x.row(t);
        P += X.transpose() * Om.inverse() * X;
        r += X.transpose() * Om.inverse() * d.y.row(t).transpose();
    }
    const Vec gls = P.inverse() * r;
    EXPECT_LT((g.mean - gls).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((g.covariance() - P.inverse()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BetaConditional, PriorDominates) {
    Rng rng(4);
    const auto d = random_design(2, 30, 2, rng);
    const auto th = theta_params(QuantileLevels::uniform(2, 0.2));
    const auto prior = GaussianPrior::isotropic(4, 0.7, 1e-10);
    const auto g = beta_conditional(d, th, Mat::Identity(2, 2), Vec::Ones(30), Mat::Ones(30, 2), prior);
    EXPECT_LT((g.mean - Vec::Constant(4, 0.7)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(BetaConditional, MatchesQuadratureInOneDimension) {
    Rng rng(5);
    const int T = 30;
    RegressionDesign d;
    d.y.resize(T, 1);
    d.x = Mat::Ones(T, 1);
    Vec w(T), H(T);
    for (int t = 0; t < T; ++t) {
        d.y(t, 0) = 0.5 + rng.normal();
        w[t] = rng.exponential();
        H[t] = std::exp(0.5 * rng.normal());
    }
    const double tau = 0.25;
    const auto th = theta_params(QuantileLevels::uniform(1, tau));
    const auto prior = GaussianPrior::isotropic(1, 0.0, 3.0);
    const auto g = beta_conditional(d, th, Mat::Identity(1, 1), w, H, prior);
    const double t1 = oracle::theta1(tau), t2 = oracle::theta2(tau);
    auto logp = [&](double b) {
        double lp = oracle::normal_logpdf(b, 0.0, 3.0);
        for (int t = 0; t < T; ++t)
            lp += oracle::normal_logpdf(d.y(t, 0) - b, w[t] * std::sqrt(H[t]) * t1, w[t] * t2 * t2 * H[t]);
        return lp;
    };
    const double shift = logp(g.mean[0]);
    auto f = [&](double b, int pw) { return std::pow(b, pw) * std::exp(logp(b) - shift); };
    const double lo = g.mean[0] - 10, hi = g.mean[0] + 10;
    const double Z = oracle::integrate([&](double b) { return f(b, 0); }, lo, hi, 1e-12);
    const double m = oracle::integrate([&](double b) { return f(b, 1); }, lo, hi, 1e-12) / Z;
    const double v = oracle::integrate([&](double b) { return f(b, 2); }, lo, hi, 1e-12) / Z - m * m;
    EXPECT_NEAR(g.mean[0], m, 1e-6);
    EXPECT_NEAR(g.covariance()(0, 0), v, 1e-6);
}

TEST(BetaConditional, BitReproducible) {
    Rng r0(6);
    const auto d = random_design(2, 20, 2, r0);
    McmcState s;
    s.beta = Vec::Zero(4);
    s.a_bar = Mat::Identity(2, 2);
    s.w = Vec::Ones(20);
    s.vol = ConstState{Vec::Ones(2)};
    const auto th = theta_params(QuantileLevels::uniform(2, 0.3));
    const auto prior = GaussianPrior::isotropic(4, 0.0, 10.0);
    Rng a(7), b(7);
    EXPECT_EQ(sample_beta_gaussian(s, d, th, prior, a), sample_beta_gaussian(s, d, th, prior, b));
}

TEST(ARows, ExactLinearRelation) {
    Rng rng(8);
    const int T = 50;
    const auto th = theta_params(QuantileLevels::uniform(2, 0.5));
    Mat ybar(T, 2);
    for (int t = 0; t < T; ++t) {
        ybar(t, 0) = rng.normal();
        ybar(t, 1) = 2.0 * ybar(t, 0);
    }
    GaussianPrior flat{Vec::Zero(1), Mat::Identity(1, 1) * 1e-14};
    const auto g = a_row_conditional(1, ybar, Vec::Ones(T), Mat::Ones(T, 2), th, flat);
    EXPECT_NEAR(g.mean[0], -2.0, 1e-8);
}

TEST(ARows, MatchesWeightedLeastSquares) {
    Rng rng(9);
    auto s = random_state(2, 40, rng);
    const GaussianPrior prior = GaussianPrior::isotropic(1, 0.3, 2.0);
    const auto g = a_row_conditional(1, s.ybar, s.w, s.H, s.th, prior);
    const double t1a = oracle::theta1(s.tau[0]), t2a = oracle::theta2(s.tau[0]);
    const double t1b = oracle::theta1(s.tau[1]), t2b = oracle::theta2(s.tau[1]);
    double P = 0.5, r = 0.5 * 0.3;
    for (int t = 0; t < 40; ++t) {
        const double u1 = (s.ybar(t, 0) - s.w[t] * std::sqrt(s.H(t, 0)) * t1a) / t2a;
        const double u2 = (s.ybar(t, 1) - s.w[t] * std::sqrt(s.H(t, 1)) * t1b) / t2b;
        const double om = s.w[t] * s.H(t, 1);
        P += u1 * u1 / om;
        r += -u1 * u2 / om;
    }
    EXPECT_NEAR(g.mean[0], r / P, 1e-8);
    EXPECT_NEAR(g.covariance()(0, 0), 1.0 / P, 1e-8);
}

TEST(ARows, PriorDominatesAndInverseIdentity) {
    Rng rng(10);
    auto s = random_state(4, 30, rng);
    Priors pr;
    pr.a_mean = -0.4;
    pr.a_var = 1e-12;
    const Mat ab = sample_a_rows(s.ybar, s.w, s.H, s.th, pr, Mat::Identity(4, 4), rng);
    for (int i = 1; i < 4; ++i)
        for (int j = 0; j < i; ++j) EXPECT_NEAR(ab(i, j), -0.4, 1e-4);
    const Mat A = unit_lower_inverse(ab);
    EXPECT_LT((ab * A - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(ab(i, i), 1.0);
        for (int j = i + 1; j < 4; ++j) EXPECT_EQ(ab(i, j), 0.0);
    }
}

TEST(WGig, Parameters) {
    const Mat G4 = whitening_factor(Mat::Identity(4, 4), theta_params(QuantileLevels::uniform(4, 0.3)));
    EXPECT_EQ(w_gig_params(Vec::Ones(4), Vec::Ones(4), G4, theta_params(QuantileLevels::uniform(4, 0.3))).p, -1.0);

    const auto th = theta_params(QuantileLevels::uniform(2, 0.5));
    const Mat G = whitening_factor(Mat::Identity(2, 2), th);
    EXPECT_DOUBLE_EQ(w_gig_params(Vec::Ones(2), Vec::Ones(2), G, th).a, 2.0);
    const Vec y = (Vec(2) << 2.828427, 0.0).finished();
    EXPECT_NEAR(w_gig_params(y, Vec::Ones(2), G, th).b, 1.0, 1e-6);
}

TEST(WGig, ParametersMatchDenseFormula) {
    Rng rng(11);
    const auto s = random_state(3, 1, rng);
    const Mat G = whitening_factor(s.a_bar, s.th);
    const auto g = w_gig_params(s.ybar.row(0).transpose(), s.H.row(0).transpose(), G, s.th);
    Vec t1(3), t2(3);
    for (int j = 0; j < 3; ++j) {
        t1[j] = oracle::theta1(s.tau[static_cast<std::size_t>(j)]);
        t2[j] = oracle::theta2(s.tau[static_cast<std::size_t>(j)]);
    }
    const Vec h = s.H.row(0).transpose();
    const Mat Q = (t2.asDiagonal() * s.A * h.asDiagonal() * s.A.transpose() * t2.asDiagonal()).inverse();
    const Vec m = h.array().sqrt().matrix().cwiseProduct(t1);
    const Vec y = s.ybar.row(0).transpose();
    EXPECT_NEAR(g.a, 2.0 + m.dot(Q * m), 1e-9);
    EXPECT_NEAR(g.b, y.dot(Q * y), 1e-9);
    EXPECT_EQ(g.p, -0.5);
}

TEST(WGig, DrawsMatchOracleCdf) {
    Rng rng(12);
    const auto th = theta_params(QuantileLevels::uniform(1, 0.2));
    const Mat G = whitening_factor(Mat::Identity(1, 1), th);
    const Vec y = Vec::Constant(1, 1.7), H = Vec::Constant(1, 0.8);
    const auto p = w_gig_params(y, H, G, th);
    std::vector<double> x(100'000);
    for (auto& v : x) v = sample_w_gig(y, H, G, th, rng);
    const double t1 = oracle::theta1(0.2), t2 = oracle::theta2(0.2);
    const oracle::GigCdf cdf(0.5, 2.0 + t1 * t1 / (t2 * t2), 1.7 * 1.7 / (t2 * t2 * 0.8));
    EXPECT_NEAR(p.a, 2.0 + t1 * t1 / (t2 * t2), 1e-12);
    EXPECT_LT(oracle::ks(x, cdf), 0.01);
}

TEST(WGig, ZeroResidualIsHandled) {
    Rng rng(13);
    const auto th = theta_params(QuantileLevels::uniform(3, 0.5));
    const Mat G = whitening_factor(Mat::Identity(3, 3), th);
    for (int i = 0; i < 100; ++i) {
        const double w = sample_w_gig(Vec::Zero(3), Vec::Ones(3), G, th, rng);
        EXPECT_TRUE(std::isfinite(w) && w > 0);
    }
}
