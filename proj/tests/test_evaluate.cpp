#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qvtv/evaluate.hpp"
#include "qvtv/sim_study.hpp"

using namespace qvtv;

namespace {

TimeSeriesPanel realized_panel(int T, std::uint64_t seed) {
    Rng rng(seed);
    TimeSeriesPanel p;
    p.values.resize(T, 1);
    for (int t = 0; t < T; ++t) p.values(t, 0) = rng.normal();
    p.dates = synthetic_dates(T);
    p.names = {"y1"};
    return p;
}

// one-step records at every origin 0..T-2 for a model forecasting `q(t)`
template <class F>
std::vector<ForecastRecord> records_for(const TimeSeriesPanel& p, const std::string& id, double tau, F q) {
    std::vector<ForecastRecord> out;
    for (int t = 0; t + 1 < p.T(); ++t) {
        const double v = q(t);
        out.push_back({p.dates[static_cast<std::size_t>(t)], 1, tau, 0, id, v, v});
    }
    return out;
}

const ScoreRow& row_of(const EvaluationResult& r, const std::string& id) {
    for (const auto& row : r.table)
        if (row.model_id == id) return row;
    throw std::runtime_error("no row " + id);
}

}  // namespace

TEST(QuantileScore, Examples) {
    EXPECT_DOUBLE_EQ(quantile_score(1.0, 0.0, 0.1), 0.1);
    EXPECT_DOUBLE_EQ(quantile_score(0.0, 1.0, 0.1), 0.9);
    EXPECT_EQ(quantile_score(0.7, 0.7, 0.3), 0.0);
    EXPECT_THROW(quantile_score(std::nan(""), 0.0, 0.5), std::invalid_argument);
    const Vec s = quantile_score((Vec(2) << 1.0, 0.0).finished(), (Vec(2) << 0.0, 1.0).finished(), 0.1);
    EXPECT_DOUBLE_EQ(s[0], 0.1);
    EXPECT_DOUBLE_EQ(s[1], 0.9);
    EXPECT_THROW(quantile_score(Vec::Ones(2), Vec::Ones(3), 0.5), std::invalid_argument);
}

TEST(QuantileScore, NonNegativeAndZeroOnlyAtForecast) {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double y = rng.normal(), q = rng.normal(), tau = 0.01 + 0.98 * rng.uniform();
        const double s = quantile_score(y, q, tau);
        EXPECT_GE(s, 0.0);
        if (y != q) {
            EXPECT_GT(s, 0.0);
        }
    }
}

TEST(TvWeights, InverseScoreNormalization) {
    Mat qs(4, 2);
    qs.col(0).setConstant(1.0);
    qs.col(1).setConstant(3.0);
    const Vec w = tv_weights(qs);
    EXPECT_NEAR(w[0], 0.75, 1e-15);
    EXPECT_NEAR(w[1], 0.25, 1e-15);
    const Vec e = tv_weights(Mat::Constant(5, 4, 0.7));
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(e[k], 0.25, 1e-15);
}

TEST(TvWeights, HandBuiltTable) {
    Mat qs(4, 3);
    qs << 0.5, 1.0, 2.0,
          0.25, 1.0, 4.0,
          1.0, 0.5, 1.0,
          2.0, 2.0, 0.5;
    // inverse sums: 2+4+1+0.5 = 7.5, 1+1+2+0.5 = 4.5, 0.5+0.25+1+2 = 3.75; total 15.75
    const Vec w = tv_weights(qs);
    EXPECT_NEAR(w[0], 7.5 / 15.75, 1e-15);
    EXPECT_NEAR(w[1], 4.5 / 15.75, 1e-15);
    EXPECT_NEAR(w[2], 3.75 / 15.75, 1e-15);
}

TEST(TvWeights, ZeroScoresAreFloored) {
    Mat qs(2, 2);
    qs << 0.0, 1.0, 1.0, 1.0;
    const Vec w = tv_weights(qs);
    EXPECT_TRUE(w.allFinite());
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GT(w[0], 0.999);
    EXPECT_THROW(tv_weights(Mat(0, 2)), std::invalid_argument);
    qs(0, 1) = -1.0;
    EXPECT_THROW(tv_weights(qs), std::invalid_argument);
}

TEST(AvgWeights, Examples) {
    Mat tv(2, 2);
    tv << 1, 0, 0, 1;
    const Vec a = avg_weights(tv);
    EXPECT_DOUBLE_EQ(a[0], 0.5);
    EXPECT_DOUBLE_EQ(a[1], 0.5);
    Mat c(3, 3);
    c.rowwise() = (Eigen::RowVector3d() << 0.2, 0.3, 0.5).finished();
    EXPECT_LT((avg_weights(c) - (Vec(3) << 0.2, 0.3, 0.5).finished()).cwiseAbs().maxCoeff(), 1e-15);
    Rng rng(2);
    Mat r(50, 4);
    for (int t = 0; t < 50; ++t) {
        Vec x(4);
        for (int k = 0; k < 4; ++k) x[k] = rng.exponential();
        r.row(t) = (x / x.sum()).transpose();
    }
    const Vec m = avg_weights(r);
    EXPECT_NEAR(m.sum(), 1.0, 1e-12);
    EXPECT_TRUE((m.array() >= 0).all());
}

TEST(CombineForecasts, Examples) {
    EXPECT_DOUBLE_EQ(combine_forecasts((Vec(3) << 1, 0, 0).finished(), (Vec(3) << 4, 5, 6).finished()), 4.0);
    EXPECT_DOUBLE_EQ(combine_forecasts((Vec(2) << 0.5, 0.5).finished(), (Vec(2) << 1, 3).finished()), 2.0);
    EXPECT_THROW(combine_forecasts(Vec::Ones(2), Vec::Ones(3)), std::invalid_argument);
}

TEST(DieboldMariano, IdenticalLossesAreDegenerate) {
    Rng rng(3);
    Vec l(20);
    for (int i = 0; i < 20; ++i) l[i] = rng.exponential();
    EXPECT_TRUE(diebold_mariano(l, l, 1).degenerate);
    EXPECT_THROW(diebold_mariano(l.head(5), l.head(5), 1), std::invalid_argument);
}

TEST(DieboldMariano, LagZeroIsPlainTStatistic) {
    Vec a(12), b(12);
    a << 1.2, 0.7, 0.9, 1.5, 0.3, 0.8, 1.1, 0.6, 1.4, 0.2, 0.9, 1.0;
    b << 0.8, 0.9, 0.4, 1.0, 0.5, 0.2, 0.9, 0.7, 0.6, 0.3, 0.4, 0.5;
    const Vec d = a - b;
    const double m = d.mean();
    const double v = (d.array() - m).square().sum() / 12.0;
    const double t = m / std::sqrt(v / 12.0);
    const auto r = diebold_mariano(a, b, 1);
    EXPECT_NEAR(r.statistic, t, 1e-12);
    EXPECT_NEAR(r.p_value, 1.0 - oracle::normal_cdf(t, 0, 1), 1e-12);
}

TEST(DieboldMariano, BartlettLongRunVariance) {
    Rng rng(4);
    Vec a(40), b(40);
    for (int i = 0; i < 40; ++i) {
        a[i] = rng.exponential();
        b[i] = rng.exponential();
    }
    const Vec d = a - b;
    const double m = d.mean();
    const Vec c = d.array() - m;
    const int h = 3;
    double lrv = c.squaredNorm() / 40.0;
    for (int l = 1; l <= h - 1; ++l) {
        double g = 0;
        for (int t = l; t < 40; ++t) g += c[t] * c[t - l];
        lrv += 2.0 * (1.0 - l / static_cast<double>(h)) * g / 40.0;
    }
    EXPECT_NEAR(diebold_mariano(a, b, h).statistic, m / std::sqrt(lrv / 40.0), 1e-12);
}

TEST(DieboldMariano, AntisymmetricAndPowerful) {
    Rng rng(5);
    Vec a(30), b(30);
    for (int i = 0; i < 30; ++i) {
        a[i] = rng.exponential();
        b[i] = rng.exponential();
    }
    EXPECT_NEAR(diebold_mariano(a, b, 2).statistic, -diebold_mariano(b, a, 2).statistic, 1e-12);
    int rejections = 0;
    for (int rep = 0; rep < 200; ++rep) {
        Vec z(2000);
        for (int i = 0; i < 2000; ++i) z[i] = 0.2 + rng.normal();
        rejections += diebold_mariano(z, Vec::Zero(2000), 1).p_value < 0.05;
    }
    EXPECT_GE(rejections, 198);
}

TEST(SignificanceStars, Thresholds) {
    EXPECT_EQ(significance_stars(0.005), 3);
    EXPECT_EQ(significance_stars(0.03), 2);
    EXPECT_EQ(significance_stars(0.07), 1);
    EXPECT_EQ(significance_stars(0.2), 0);
    EXPECT_EQ(significance_stars(std::nan("")), 0);
}

TEST(Evaluate, BenchmarkAgainstItself) {
    const auto p = realized_panel(60, 6);
    auto recs = records_for(p, "qvar", 0.3, [](int) { return -0.5; });
    auto same = records_for(p, "copy", 0.3, [](int) { return -0.5; });
    recs.insert(recs.end(), same.begin(), same.end());
    const auto r = evaluate(recs, p, {});
    EXPECT_DOUBLE_EQ(row_of(r, "copy").ratio, 1.0);
    EXPECT_EQ(row_of(r, "copy").stars, 0);
    EXPECT_DOUBLE_EQ(row_of(r, "qvar").ratio, 1.0);
    EXPECT_NEAR(row_of(r, kCombTv).ratio, 1.0, 1e-12);
}

TEST(Evaluate, HalvedLossesGiveHalfRatio) {
    // the alternative sits halfway between the benchmark and the outcome, so every loss halves
    const auto p = realized_panel(400, 7);
    const double tau = 0.2;
    auto recs = records_for(p, "qvar", tau, [&](int t) { return p.values(t + 1, 0) + (t % 2 ? 1.0 : -1.0); });
    auto alt = records_for(p, "alt", tau, [&](int t) { return p.values(t + 1, 0) + (t % 2 ? 0.5 : -0.5); });
    recs.insert(recs.end(), alt.begin(), alt.end());
    const auto r = evaluate(recs, p, {"qvar", false});
    EXPECT_NEAR(row_of(r, "alt").ratio, 0.5, 1e-12);
    EXPECT_EQ(row_of(r, "alt").stars, 3);
    EXPECT_TRUE(r.combined.empty());
}

TEST(Evaluate, ScaleEquivariantRatios) {
    const auto p = realized_panel(120, 8);
    Rng rng(9);
    std::vector<double> qa, qb;
    for (int t = 0; t < 119; ++t) {
        qa.push_back(rng.normal());
        qb.push_back(rng.normal());
    }
    auto build = [&](const TimeSeriesPanel& panel, double c) {
        auto recs = records_for(panel, "qvar", 0.1, [&](int t) { return c * qa[static_cast<std::size_t>(t)]; });
        auto b = records_for(panel, "alt", 0.1, [&](int t) { return c * qb[static_cast<std::size_t>(t)]; });
        recs.insert(recs.end(), b.begin(), b.end());
        return evaluate(recs, panel, {});
    };
    auto scaled = p;
    scaled.values *= 4.0;
    const auto r1 = build(p, 1.0), r2 = build(scaled, 4.0);
    for (const std::string id : {"alt", kCombTv, kCombAvg}) {
        EXPECT_NEAR(row_of(r1, id).ratio, row_of(r2, id).ratio, 1e-12) << id;
        EXPECT_EQ(row_of(r1, id).stars, row_of(r2, id).stars) << id;
    }
}

TEST(Evaluate, CombinationWeightsAndConvexity) {
    const auto p = realized_panel(80, 10);
    Rng rng(11);
    std::vector<double> qa, qb;
    for (int t = 0; t < 79; ++t) {
        qa.push_back(0.5 * rng.normal());
        qb.push_back(0.5 * rng.normal() - 0.8);
    }
    auto recs = records_for(p, "qvar", 0.25, [&](int t) { return qa[static_cast<std::size_t>(t)]; });
    auto b = records_for(p, "alt", 0.25, [&](int t) { return qb[static_cast<std::size_t>(t)]; });
    recs.insert(recs.end(), b.begin(), b.end());
    const auto r = evaluate(recs, p, {});
    ASSERT_EQ(r.tv_weights.size(), 2u * 79u);
    // first origin has no past scores: equal weights
    EXPECT_DOUBLE_EQ(r.tv_weights[0].weight, 0.5);
    // second origin sees exactly the first period's scores
    const double sa = quantile_score(p.values(1, 0), qa[0], 0.25), sb = quantile_score(p.values(1, 0), qb[0], 0.25);
    EXPECT_NEAR(r.tv_weights[2].weight, (1 / sa) / (1 / sa + 1 / sb), 1e-12);
    for (std::size_t i = 0; i < r.tv_weights.size(); i += 2)
        EXPECT_NEAR(r.tv_weights[i].weight + r.tv_weights[i + 1].weight, 1.0, 1e-12);
    double avg0 = 0;
    for (std::size_t i = 0; i < r.tv_weights.size(); i += 2) avg0 += r.tv_weights[i].weight;
    EXPECT_NEAR(r.avg_weights[0].weight, avg0 / 79.0, 1e-12);
    // convexity: each combined score is at most the worse single-model score
    for (std::size_t i = 0; i < r.combined.size(); ++i) {
        const auto& c = r.combined[i];
        const int t = static_cast<int>(i / 2);
        const double y = p.values(t + 1, 0);
        const double worst = std::max(quantile_score(y, qa[static_cast<std::size_t>(t)], 0.25),
                                      quantile_score(y, qb[static_cast<std::size_t>(t)], 0.25));
        EXPECT_LE(quantile_score(y, c.q_raw, 0.25), worst + 1e-12);
    }
}

TEST(Evaluate, MissingBenchmarkNamesConfigKey) {
    const auto p = realized_panel(20, 12);
    const auto recs = records_for(p, "alt", 0.5, [](int) { return 0.0; });
    try {
        evaluate(recs, p, {"qvar", true});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("evaluate.benchmark"), std::string::npos);
    }
}

TEST(Evaluate, MisalignedOriginsAreReported) {
    const auto p = realized_panel(30, 13);
    auto recs = records_for(p, "qvar", 0.5, [](int) { return 0.0; });
    auto alt = records_for(p, "alt", 0.5, [](int) { return 0.0; });
    alt.pop_back();
    recs.insert(recs.end(), alt.begin(), alt.end());
    EXPECT_THROW(evaluate(recs, p, {}), IoError);
    auto past_end = records_for(p, "qvar", 0.5, [](int) { return 0.0; });
    past_end.back().horizon = 5;
    EXPECT_THROW(evaluate(past_end, p, {}), IoError);
}
