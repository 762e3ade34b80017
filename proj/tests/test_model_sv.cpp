#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qvtv/model_sv.hpp"

using namespace qvtv;

namespace {

Mat random_unit_lower(int n, Rng& rng) {
    Mat A = Mat::Identity(n, n);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) A(i, j) = 0.5 * rng.normal();
    return A;
}

Vec ar1_path(int T, double phi, double s2, double mu, Rng& rng) {
    Vec h(T);
    h[0] = mu + std::sqrt(s2 / (1 - phi * phi)) * rng.normal();
    for (int t = 1; t < T; ++t) h[t] = mu + phi * (h[t - 1] - mu) + std::sqrt(s2) * rng.normal();
    return h;
}

SvState single_series(const Vec& h, double phi, double s2, double mu) {
    SvState sv;
    sv.h = h;
    sv.phi = Vec::Constant(1, phi);
    sv.sigma2_h = Vec::Constant(1, s2);
    sv.mu = Vec::Constant(1, mu);
    return sv;
}

}  // namespace

TEST(SvTransformedResponse, ScalarCollapse) {
    const auto th = theta_params(QuantileLevels::uniform(1, 0.2));
    const Vec y = Vec::Constant(1, 1.7);
    const Vec h = Vec::Constant(1, 0.4);
    const Vec out = sv_transformed_response(y, 2.5, h, Mat::Identity(1, 1), th, 0);
    EXPECT_NEAR(out[0], 1.7 / (std::sqrt(2.5) * th.theta2[0]), 1e-14);
}

TEST(SvTransformedResponse, MedianIgnoresVolatility) {
    Rng rng(1);
    const auto th = theta_params(QuantileLevels::uniform(3, 0.5));
    const Mat a_bar = random_unit_lower(3, rng);
    Vec y(3);
    y << 0.3, -1.2, 2.0;
    const Vec h1 = (Vec(3) << 0.0, 1.0, -2.0).finished();
    const Vec h2 = (Vec(3) << 3.0, -1.0, 0.5).finished();
    for (int j = 0; j < 3; ++j) {
        const Vec a = sv_transformed_response(y, 0.8, h1, a_bar, th, j);
        const Vec b = sv_transformed_response(y, 0.8, h2, a_bar, th, j);
        EXPECT_LT((a - b).norm(), 1e-14);
        EXPECT_LT((a - whitening_factor(a_bar, th) * y / std::sqrt(0.8)).norm(), 1e-14);
    }
}

TEST(SvTransformedResponse, ReconstructionRoundTrip) {
    Rng rng(2);
    const auto th = theta_params(QuantileLevels(std::vector<double>{0.1, 0.6, 0.85}));
    for (int rep = 0; rep < 20; ++rep) {
        const Mat A = random_unit_lower(3, rng);
        const Mat a_bar = unit_lower_inverse(A);
        Vec h(3), z(3);
        for (int i = 0; i < 3; ++i) {
            h[i] = rng.normal();
            z[i] = rng.normal();
        }
        const double w = rng.exponential();
        const Vec sd = (0.5 * h.array()).exp();
        // ybar = w H^{1/2} theta1 + sqrt(w) Theta2 A H^{1/2} z
        const Vec ybar = w * sd.cwiseProduct(th.theta1) +
                         std::sqrt(w) * th.theta2.asDiagonal() * A * sd.cwiseProduct(z);
        const Mat G = whitening_factor(a_bar, th);
        for (int j = 0; j < 3; ++j) {
            const Vec r = sv_transformed_response(ybar, w, h, a_bar, th, j);
            const Vec zbar = r - std::sqrt(w) * th.theta1[j] * sd[j] * G.col(j);
            EXPECT_LT((zbar - sd.cwiseProduct(z)).norm(), 1e-10);
        }
    }
}

TEST(Ar1LogPrior, MatchesStationaryGaussian) {
    Rng rng(3);
    const int T = 6;
    const double phi = 0.7, s2 = 0.4, mu = -0.3;
    Mat S(T, T);
    for (int s = 0; s < T; ++s)
        for (int t = 0; t < T; ++t) S(s, t) = s2 / (1 - phi * phi) * std::pow(phi, std::abs(s - t));
    for (int rep = 0; rep < 10; ++rep) {
        const Vec h = ar1_path(T, phi, s2, mu, rng);
        EXPECT_NEAR(ar1_log_prior(h, phi, s2, mu), oracle::mvn_logpdf(h, Vec::Constant(T, mu), S), 1e-10);
    }
}

TEST(SvPathLikelihood, DifferencesMatchJointLikelihood) {
    Rng rng(4);
    const int T = 12, n = 3;
    const auto th = theta_params(QuantileLevels(std::vector<double>{0.2, 0.5, 0.9}));
    const Mat a_bar = unit_lower_inverse(random_unit_lower(n, rng));
    Mat ybar(T, n), h(T, n);
    Vec w(T);
    for (int t = 0; t < T; ++t) {
        w[t] = rng.exponential();
        for (int j = 0; j < n; ++j) {
            ybar(t, j) = rng.normal();
            h(t, j) = 0.5 * rng.normal();
        }
    }
    for (int j = 0; j < n; ++j) {
        const SvPathLikelihood lik(ybar, w, h, a_bar, th, j);
        Mat h2 = h;
        for (int t = 0; t < T; ++t) h2(t, j) += 0.3 * rng.normal();
        const double direct = joint_loglik(ybar, w, h2.array().exp(), a_bar, th) -
                              joint_loglik(ybar, w, h.array().exp(), a_bar, th);
        EXPECT_NEAR(lik(h2.col(j)) - lik(h.col(j)), direct, 1e-8) << j;
    }
}

TEST(SampleHPath, VanishingInnovationVariancePinsPath) {
    Rng rng(5);
    const int T = 20;
    const auto th = theta_params(QuantileLevels::uniform(1, 0.3));
    Mat ybar(T, 1);
    for (int t = 0; t < T; ++t) ybar(t, 0) = rng.normal();
    const Vec w = Vec::Ones(T);
    const double s2 = 1e-10;
    // any visibly non-zero path is ruled out by the prior
    const Vec bumped = Vec::Constant(T, 0.01);
    EXPECT_LT(ar1_log_prior(bumped, 0.5, s2, 0.0) - ar1_log_prior(Vec::Zero(T), 0.5, s2, 0.0), -1e5);
    for (auto kind : {PathProposal::Ar1, PathProposal::Diagonal}) {
        SvState sv = single_series(Vec::Zero(T), 0.5, s2, 0.0);
        auto scale = AdaptiveScale::make(1.0, kTargetPathRate);
        for (int i = 0; i < 2000; ++i) {
            const Mat hc = sv.h;
            sample_h_path(sv, 0, ybar, w, hc, Mat::Identity(1, 1), th, scale, rng, kind);
        }
        EXPECT_LT(sv.h.cwiseAbs().maxCoeff(), 1e-3);
    }
}

TEST(SampleHPath, AdaptedAcceptanceNearTarget) {
    Rng rng(6);
    const int T = 150;
    const auto th = theta_params(QuantileLevels::uniform(1, 0.5));
    const Vec htrue = ar1_path(T, 0.9, 0.1, 0.0, rng);
    Mat ybar(T, 1);
    for (int t = 0; t < T; ++t) ybar(t, 0) = th.theta2[0] * std::exp(0.5 * htrue[t]) * rng.normal();
    const Vec w = Vec::Ones(T);
    for (auto kind : {PathProposal::Ar1, PathProposal::Diagonal}) {
        SvState sv = single_series(Vec::Zero(T), 0.9, 0.1, 0.0);
        auto scale = AdaptiveScale::make(1.0 / T, kTargetPathRate);
        int acc = 0, tot = 0;
        for (int i = 0; i < 30'000; ++i) {
            const Mat hc = sv.h;
            const int a = sample_h_path(sv, 0, ybar, w, hc, Mat::Identity(1, 1), th, scale, rng, kind);
            if (i >= 24'000) {
                acc += a;
                ++tot;
            }
        }
        EXPECT_NEAR(static_cast<double>(acc) / tot, 0.27, 0.05);
    }
}

TEST(SamplePhi, RecoversPersistence) {
    Rng rng(7);
    const int T = 2000;
    const Vec h = ar1_path(T, 0.9, 0.2, 0.0, rng);
    double num = 0, den = 0;
    for (int t = 1; t < T; ++t) {
        num += h[t] * h[t - 1];
        den += h[t - 1] * h[t - 1];
    }
    const double yule_walker = num / den;
    Priors pr;
    pr.phi_a = 1.0;
    pr.phi_b = 1.0;
    SvState sv = single_series(h, 0.0, 0.2, 0.0);
    auto scale = AdaptiveScale::make(0.5, kTargetStaticRate);
    std::vector<double> draws;
    for (int i = 0; i < 20'000; ++i) {
        sample_phi(sv, 0, pr, scale, rng);
        if (i >= 2000) draws.push_back(sv.phi[0]);
    }
    const double m = oracle::sample_mean(draws);
    EXPECT_NEAR(m, 0.9, 0.05);
    EXPECT_NEAR(m, yule_walker, 0.02);
}

TEST(SamplePhi, IndependentPathGivesNearZero) {
    Rng rng(8);
    const Vec h = ar1_path(2000, 0.0, 1.0, 0.0, rng);
    Priors pr;
    pr.phi_a = 1.0;
    pr.phi_b = 1.0;
    SvState sv = single_series(h, 0.5, 1.0, 0.0);
    auto scale = AdaptiveScale::make(0.5, kTargetStaticRate);
    std::vector<double> draws;
    for (int i = 0; i < 10'000; ++i) {
        sample_phi(sv, 0, pr, scale, rng);
        if (i >= 1000) draws.push_back(sv.phi[0]);
    }
    EXPECT_LT(std::abs(oracle::sample_mean(draws)), 0.07);
}

TEST(SamplePhi, DominantPriorStaysInsideUnitInterval) {
    Rng rng(9);
    const Vec h = ar1_path(200, 0.3, 0.5, 0.0, rng);
    Priors pr;
    pr.phi_a = 1e6;
    pr.phi_b = 1.0;
    SvState sv = single_series(h, 0.5, 0.5, 0.0);
    auto scale = AdaptiveScale::make(0.5, kTargetStaticRate);
    for (int i = 0; i < 20'000; ++i) {
        sample_phi(sv, 0, pr, scale, rng);
        ASSERT_LT(std::abs(sv.phi[0]), 1.0);
    }
    EXPECT_GT(sv.phi[0], 0.99);
}

TEST(SamplePhi, PosteriorMatchesQuadrature) {
    Rng rng(10);
    const Vec h = ar1_path(40, 0.6, 0.3, 0.2, rng);
    Priors pr;
    pr.phi_a = 5.0;
    pr.phi_b = 2.0;
    // density of phi: Beta((1+phi)/2) x AR(1) likelihood
    auto dens = [&](double phi) {
        const double u = 0.5 * (1 + phi);
        return std::exp((pr.phi_a - 1) * std::log(u) + (pr.phi_b - 1) * std::log1p(-u) +
                        ar1_log_prior(h, phi, 0.3, 0.2) - ar1_log_prior(h, 0.6, 0.3, 0.2));
    };
    const double Z = oracle::integrate(dens, -1.0, 1.0);
    const double m = oracle::integrate([&](double p) { return p * dens(p); }, -1.0, 1.0) / Z;
    SvState sv = single_series(h, 0.0, 0.3, 0.2);
    auto scale = AdaptiveScale::make(0.5, kTargetStaticRate);
    std::vector<double> draws;
    for (int i = 0; i < 200'000; ++i) {
        sample_phi(sv, 0, pr, scale, rng);
        if (i == 5000) scale.frozen = true;
        if (i > 5000) draws.push_back(sv.phi[0]);
    }
    EXPECT_NEAR(oracle::sample_mean(draws), m, 0.01);
}

TEST(SampleSigma2H, ZeroSumOfSquaresGivesPriorShiftedShape) {
    Rng rng(11);
    Priors pr;
    pr.sigma_a = 3.0;
    pr.sigma_b = 0.5;
    const int T = 10;
    const Vec h = Vec::Constant(T, 0.7);
    std::vector<double> d;
    for (int i = 0; i < 200'000; ++i) {
        d.push_back(sample_sigma2_h(h, 0.4, 0.7, pr, rng));
        ASSERT_GT(d.back(), 0.0);
    }
    const double shape = pr.sigma_a + 0.5 * T;
    EXPECT_NEAR(oracle::sample_mean(d), pr.sigma_b / (shape - 1), 0.01 * pr.sigma_b / (shape - 1));
}

TEST(SampleSigma2H, RecoversInnovationVariance) {
    Rng rng(12);
    const Vec h = ar1_path(5000, 0.0, 2.0, 0.0, rng);
    Priors pr;
    pr.sigma_a = 0.01;
    pr.sigma_b = 0.01;
    std::vector<double> d;
    for (int i = 0; i < 5000; ++i) d.push_back(sample_sigma2_h(h, 0.0, 0.0, pr, rng));
    EXPECT_NEAR(oracle::sample_mean(d), 2.0, 0.1);
}

TEST(SampleMu, MatchesQuadraturePosterior) {
    Rng rng(13);
    const Vec h = ar1_path(30, 0.8, 0.2, -1.0, rng);
    Priors pr;
    pr.mu_mean = 0.5;
    pr.mu_var = 2.0;
    auto dens = [&](double mu) {
        return std::exp(oracle::normal_logpdf(mu, pr.mu_mean, pr.mu_var) + ar1_log_prior(h, 0.8, 0.2, mu) -
                        ar1_log_prior(h, 0.8, 0.2, -1.0));
    };
    const double Z = oracle::integrate(dens, -30, 30);
    const double m = oracle::integrate([&](double x) { return x * dens(x); }, -30, 30) / Z;
    const double v = oracle::integrate([&](double x) { return (x - m) * (x - m) * dens(x); }, -30, 30) / Z;
    std::vector<double> d;
    for (int i = 0; i < 200'000; ++i) d.push_back(sample_mu(h, 0.8, 0.2, pr, rng));
    EXPECT_NEAR(oracle::sample_mean(d), m, 4 * std::sqrt(v / 200'000.0));
    EXPECT_NEAR(oracle::sample_var(d) / v, 1.0, 0.02);
}
