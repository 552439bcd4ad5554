#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "alphadesk/allocation.hpp"
#include "test_util.hpp"

namespace alphadesk {
namespace {

using testing::matrix_of;

// ---- independent per-field oracle ------------------------------------------

double o_mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double o_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = o_mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double o_ir(const std::vector<double>& v) {
    const double sd = o_std(v);
    const double m = o_mean(v);
    if (sd < 1e-12) return m > 0 ? 10.0 : m < 0 ? -10.0 : 0.0;
    return std::sqrt(252.0) * m / sd;
}

double o_corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = o_mean(a), mb = o_mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        sab += (a[k] - ma) * (b[k] - mb);
        saa += (a[k] - ma) * (a[k] - ma);
        sbb += (b[k] - mb) * (b[k] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> o_last(const std::vector<double>& v, std::size_t n) {
    return {v.end() - static_cast<std::ptrdiff_t>(std::min(n, v.size())), v.end()};
}

double o_rank(const std::vector<double>& v, std::size_t k) {
    double below = 0, ties = 0;
    for (double x : v) {
        below += x < v[k];
        ties += x == v[k];
    }
    return (below + 0.5 * (ties - 1)) / static_cast<double>(v.size() - 1);
}

struct OracleSeries {
    std::vector<double> pnl, lo, sh, turnover, long_fraction;
};

OracleSeries o_simulate(const Matrix& w, const Matrix& r, DateRange range) {
    OracleSeries s;
    for (std::size_t t = range.begin; t < range.end; ++t) {
        double p = 0, lo = 0, sh = 0, turn = 0, pos = 0, gross = 0;
        for (std::size_t j = 0; j < w.cols(); ++j) {
            const double prev = t == 0 ? 0.0 : w(t - 1, j);
            const double ret = is_missing(r(t, j)) ? 0.0 : r(t, j);
            p += prev * ret;
            (prev > 0 ? lo : sh) += prev * ret;
            turn += std::fabs(w(t, j) - prev);
            pos += std::max(w(t, j), 0.0);
            gross += std::fabs(w(t, j));
        }
        s.pnl.push_back(p);
        s.lo.push_back(lo);
        s.sh.push_back(sh);
        s.turnover.push_back(turn / 2);
        if (gross > 0) s.long_fraction.push_back(pos / gross);
    }
    return s;
}

TEST(AlphaStats, MatchIndependentOracleOnThreeBooks) {
    const PanelSet p = testing::random_panel(41, 150, 8, 0.05);
    std::vector<PositionMatrix> books;
    for (const char* f : {"x", "y", "z"}) books.push_back(signal_to_weights(p.field(f).values));
    const DateRange range{20, 150};
    const auto stats = compute_alpha_stats(books, p, range);
    ASSERT_EQ(stats.size(), 3U);

    std::vector<OracleSeries> os;
    for (const auto& b : books) os.push_back(o_simulate(b, p.field("returns").values, range));
    std::vector<double> irs, pnls, turns;
    for (const auto& s : os) {
        irs.push_back(o_ir(s.pnl));
        pnls.push_back(252 * o_mean(s.pnl));
        turns.push_back(-o_mean(s.turnover));
    }
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& s = os[k];
        const auto& a = stats[k];
        SCOPED_TRACE(k);
        double cum = 0, peak = 0, dd = 0;
        for (double v : s.pnl) {
            cum += v;
            peak = std::max(peak, cum);
            dd = std::max(dd, peak - cum);
        }
        const auto m63 = o_last(s.pnl, 63);
        const auto m21 = o_last(s.pnl, 21);
        double corr = 0;
        for (std::size_t o = 0; o < 3; ++o) {
            if (o != k) corr += o_corr(s.pnl, os[o].pnl) / 2;
        }
        EXPECT_NEAR(a.ir, irs[k], 1e-9);
        EXPECT_NEAR(a.volatility, std::sqrt(252.0) * o_std(s.pnl), 1e-9);
        EXPECT_NEAR(a.turnover, o_mean(s.turnover), 1e-9);
        EXPECT_NEAR(a.avg_corr, corr, 1e-9);
        EXPECT_NEAR(a.momentum, o_mean(m63) / o_std(m63), 1e-9);
        EXPECT_NEAR(a.drawdown, dd, 1e-9);
        EXPECT_NEAR(a.expected_pnl, pnls[k], 1e-9);
        EXPECT_NEAR(a.long_short_ratio, o_mean(s.long_fraction), 1e-9);
        EXPECT_NEAR(a.zscore, (o_mean(m21) - o_mean(s.pnl)) / (o_std(s.pnl) / std::sqrt(21.0)), 1e-9);
        EXPECT_NEAR(a.ir_long, o_ir(s.lo), 1e-9);
        EXPECT_NEAR(a.ir_short, o_ir(s.sh), 1e-9);
        EXPECT_NEAR(a.rank_sharpe, o_rank(irs, k), 1e-12);
        EXPECT_NEAR(a.rank_pnl, o_rank(pnls, k), 1e-12);
        EXPECT_NEAR(a.rank_turnover, o_rank(turns, k), 1e-12);
    }
}

BookSeries constant_series(double daily, std::size_t n) {
    BookSeries s;
    double cum = 0;
    for (std::size_t t = 0; t < n; ++t) {
        cum += daily;
        s.pnl.dates.emplace_back(static_cast<std::int32_t>(t));
        s.pnl.daily_pnl.push_back(daily);
        s.pnl.cum_pnl.push_back(cum);
        s.long_pnl.push_back(daily);
        s.short_pnl.push_back(0);
        s.turnover.push_back(0);
        s.long_fraction.emplace_back(0.5);
    }
    return s;
}

TEST(AlphaStats, ConstantPnlCapsIr) {
    const std::vector<BookSeries> s{constant_series(0.001, 50)};
    const auto stats = compute_alpha_stats(s);
    EXPECT_NEAR(stats[0].volatility, 0.0, 1e-12);
    EXPECT_EQ(stats[0].ir, kIrCap);
}

TEST(AlphaStats, IdenticalBooksAreFullyCorrelated) {
    const PanelSet p = testing::random_panel(42, 60, 6);
    const PositionMatrix b = signal_to_weights(p.field("x").values);
    const std::vector<PositionMatrix> books{b, b};
    for (const auto& s : compute_alpha_stats(books, p, DateRange{0, 60})) EXPECT_NEAR(s.avg_corr, 1.0, 1e-12);
}

TEST(AlphaStats, BalancedBookHasHalfLongShare) {
    const PanelSet p = testing::random_panel(43, 30, 2);
    Matrix w(30, 2, 0.0);
    for (std::size_t t = 0; t < 30; ++t) {
        w(t, 0) = 0.5;
        w(t, 1) = -0.5;
    }
    const std::vector<PositionMatrix> books{w, w};
    EXPECT_DOUBLE_EQ(compute_alpha_stats(books, p, DateRange{0, 30})[0].long_short_ratio, 0.5);
}

TEST(AlphaStats, MismatchedBooksAreRejected) {
    const PanelSet p = testing::random_panel(44, 30, 3);
    const std::vector<PositionMatrix> books{Matrix(30, 3, 0.0), Matrix(29, 3, 0.0)};
    try {
        compute_alpha_stats(books, p, DateRange{0, 29});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CalendarMismatch);
    }
}

TEST(Schemes, RawScoreFixtures) {
    AlphaStats s;
    s.ir = 2.0;
    s.turnover = 0.5;
    EXPECT_NEAR(scheme_raw_score(SchemeId::IrExpTurnover, s), 1.2131, 5e-5);
    s.momentum = 0.0;
    EXPECT_DOUBLE_EQ(scheme_raw_score(SchemeId::SigmoidMomentum, s), 0.5);
    s.zscore = 2.5;
    EXPECT_EQ(scheme_raw_score(SchemeId::ZscoreGate, s), 0.0);
    s.zscore = -1.9;
    EXPECT_EQ(scheme_raw_score(SchemeId::ZscoreGate, s), 1.0);
}

TEST(Schemes, NormalisationAndFallback) {
    std::vector<AlphaStats> stats(2);
    stats[0].expected_pnl = 1.0;
    stats[1].expected_pnl = 3.0;
    const auto w = scheme_weight(SchemeId::PosExpectedPnl, stats);
    EXPECT_DOUBLE_EQ(w[0], 0.25);
    EXPECT_DOUBLE_EQ(w[1], 0.75);
    stats[0].expected_pnl = -1.0;
    stats[1].expected_pnl = 0.0;
    const auto eq = scheme_weight(SchemeId::PosExpectedPnl, stats);
    EXPECT_DOUBLE_EQ(eq[0], 0.5);
    EXPECT_DOUBLE_EQ(eq[1], 0.5);
}

std::vector<AlphaStats> random_stats(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    std::vector<AlphaStats> out(n);
    for (auto& s : out) {
        s.ir = 2 * normal(rng);
        s.volatility = unit(rng);
        s.turnover = unit(rng);
        s.avg_corr = 2 * unit(rng) - 1;
        s.momentum = normal(rng);
        s.drawdown = unit(rng);
        s.expected_pnl = normal(rng);
        s.long_short_ratio = unit(rng);
        s.zscore = 2 * normal(rng);
        s.ir_long = normal(rng);
        s.ir_short = normal(rng);
        s.rank_sharpe = unit(rng);
        s.rank_pnl = unit(rng);
        s.rank_turnover = unit(rng);
    }
    return out;
}

TEST(Schemes, CompositeIsTheMeanOfItsComponents) {
    std::mt19937_64 rng(45);
    for (const auto& s : random_stats(rng, 1000)) {
        const double want = (s.ir + scheme_raw_score(SchemeId::InvVolatility, s) +
                             scheme_raw_score(SchemeId::SigmoidMomentum, s)) /
                            3.0;
        EXPECT_NEAR(scheme_raw_score(SchemeId::Composite, s), want, 1e-12);
    }
}

TEST(Schemes, EveryOutputIsOnTheSimplex) {
    std::mt19937_64 rng(46);
    for (int trial = 0; trial < 200; ++trial) {
        const auto stats = random_stats(rng, 1 + rng() % 8);
        for (SchemeId id : kAllSchemes) {
            const auto w = scheme_weight(id, stats);
            ASSERT_EQ(w.size(), stats.size());
            double sum = 0;
            for (double v : w) {
                EXPECT_GE(v, 0.0);
                sum += v;
            }
            EXPECT_NEAR(sum, 1.0, 1e-12) << to_string(id);
        }
    }
}

TEST(Schemes, RaisingIrNeverLowersItsWeight) {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 200; ++trial) {
        auto stats = random_stats(rng, 4);
        const double before = scheme_weight(SchemeId::IrExpTurnover, stats)[0];
        stats[0].ir += 0.5;
        EXPECT_GE(scheme_weight(SchemeId::IrExpTurnover, stats)[0], before - 1e-15);
    }
}

TEST(Schemes, NamesRoundTrip) {
    for (SchemeId id : kAllSchemes) EXPECT_EQ(scheme_from_string(to_string(id)), id);
    EXPECT_THROW(scheme_from_string("kelly"), Error);
}

TEST(CombineBooks, Identities) {
    const PanelSet p = testing::random_panel(48, 20, 5, 0.1);
    const PositionMatrix a = signal_to_weights(p.field("x").values);
    const PositionMatrix b = signal_to_weights(p.field("y").values);
    const std::vector<PositionMatrix> ab{a, b};
    const PositionMatrix first = combine_books({1.0, 0.0}, ab);
    const std::vector<PositionMatrix> aa{a, a};
    const PositionMatrix same = combine_books({0.3, 0.7}, aa);
    const std::vector<PositionMatrix> single{a};
    const PositionMatrix idem = combine_books({1.0}, single);
    for (std::size_t c = 0; c < a.values().size(); ++c) {
        EXPECT_NEAR(first.values()[c], a.values()[c], 1e-15);
        EXPECT_NEAR(same.values()[c], a.values()[c], 1e-15);
        EXPECT_NEAR(idem.values()[c], a.values()[c], 1e-15);
    }
    EXPECT_THROW(combine_books({1.0}, ab), Error);
}

TEST(CombineBooks, OutputIsAValidPositionMatrix) {
    std::mt19937_64 rng(49);
    std::uniform_real_distribution<double> unit;
    for (int trial = 0; trial < 50; ++trial) {
        const PanelSet p = testing::random_panel(rng(), 10, 6, 0.2);
        const std::vector<PositionMatrix> books{signal_to_weights(p.field("x").values),
                                                signal_to_weights(p.field("y").values),
                                                signal_to_weights(p.field("z").values)};
        std::vector<double> w{unit(rng), unit(rng), unit(rng)};
        const double s = w[0] + w[1] + w[2];
        for (double& v : w) v /= s;
        const PositionMatrix out = combine_books(w, books);
        for (std::size_t t = 0; t < 10; ++t) {
            double net = 0, gross = 0;
            for (std::size_t j = 0; j < 6; ++j) {
                ASSERT_FALSE(is_missing(out(t, j)));
                net += out(t, j);
                gross += std::fabs(out(t, j));
            }
            EXPECT_NEAR(net, 0.0, 1e-12);
            EXPECT_TRUE(gross == 0.0 || std::fabs(gross - 1.0) < 1e-12);
        }
    }
}

MvoInputs three_assets() {
    MvoInputs in;
    in.mu = Eigen::Vector3d(0.10, 0.05, 0.02);
    in.sigma = Eigen::Vector3d(0.04, 0.01, 0.0025).asDiagonal();
    return in;
}

TEST(Mvo, ThreeAssetTangencyWithinOnePercent) {
    const MvoInputs in = three_assets();
    // closed form: w* proportional to Sigma^-1 mu = [2.5, 5, 8]
    Eigen::Vector3d star(2.5, 5.0, 8.0);
    star /= star.sum();
    EXPECT_NEAR(star(0), 0.1613, 1e-4);
    EXPECT_NEAR(star(1), 0.3226, 1e-4);
    EXPECT_NEAR(star(2), 0.5161, 1e-4);
    const double f_star = mvo_objective(star, in);
    const MvoResult r = mvo_hill_climb(1, in);
    EXPECT_GE(r.objective, 0.99 * f_star);
    EXPECT_LE(r.objective, f_star + 1e-12);
    EXPECT_NEAR(r.objective, mvo_objective(r.weights, in), 1e-15);
}

TEST(Mvo, AcceptedStepsStrictlyImproveAndStayFeasible) {
    const MvoInputs in = three_assets();
    MvoConstraints c;
    c.n_steps = 2000;
    const MvoResult r = mvo_hill_climb(2, in, c);
    for (std::size_t k = 1; k < r.accepted_objectives.size(); ++k) {
        EXPECT_GT(r.accepted_objectives[k], r.accepted_objectives[k - 1]);
    }
    EXPECT_NEAR(r.weights.sum(), 1.0, 1e-12);
    EXPECT_GE(r.weights.minCoeff(), 0.0);
    EXPECT_EQ(r.weights, mvo_hill_climb(2, in, c).weights);
}

TEST(Mvo, IdenticalAssetsCannotBeatEqualWeights) {
    MvoInputs in;
    in.mu = Eigen::VectorXd::Constant(4, 0.01);
    in.sigma = 0.04 * Eigen::MatrixXd::Identity(4, 4);
    const MvoResult r = mvo_hill_climb(3, in);
    EXPECT_GE(mvo_objective(Eigen::VectorXd::Constant(4, 0.25), in), r.objective - 1e-12);
}

TEST(Mvo, CardinalityLimitsTheSupport) {
    MvoInputs in;
    in.mu = Eigen::VectorXd::LinSpaced(5, 0.01, 0.05);
    in.sigma = 0.01 * Eigen::MatrixXd::Identity(5, 5);
    MvoConstraints c;
    c.cardinality = 2;
    c.n_steps = 500;
    const MvoResult r = mvo_hill_climb(4, in, c);
    EXPECT_EQ(r.selected.size(), 2U);
    int nonzero = 0;
    for (Eigen::Index k = 0; k < 5; ++k) {
        if (r.weights(k) > 0) {
            ++nonzero;
            EXPECT_NE(std::find(r.selected.begin(), r.selected.end(), static_cast<std::size_t>(k)),
                      r.selected.end());
        }
    }
    EXPECT_LE(nonzero, 2);
    for (std::size_t bad : {0UL, 6UL}) {
        c.cardinality = bad;
        try {
            mvo_hill_climb(4, in, c);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InfeasibleCardinality);
        }
    }
}

TEST(Mvo, SimplexProjection) {
    const Eigen::VectorXd p = project_to_simplex(Eigen::Vector3d(0.5, 0.8, -0.2));
    EXPECT_NEAR(p(0), 0.35, 1e-12);
    EXPECT_NEAR(p(1), 0.65, 1e-12);
    EXPECT_EQ(p(2), 0.0);
    const Eigen::Vector3d inside(0.2, 0.3, 0.5);
    EXPECT_TRUE(project_to_simplex(inside).isApprox(inside, 1e-15));
}

TEST(Mvo, InputsAreSampleMoments) {
    PnlSeries a, b;
    a.daily_pnl = {1, 2, 3, 4};
    b.daily_pnl = {2, 1, 4, 3};
    const std::vector<PnlSeries> s{a, b};
    const MvoInputs in = mvo_inputs(s);
    EXPECT_DOUBLE_EQ(in.mu(0), 2.5);
    EXPECT_NEAR(in.sigma(0, 0), 5.0 / 3.0, 1e-12);
    EXPECT_NEAR(in.sigma(0, 1), 3.0 / 3.0, 1e-12);
}

TEST(Baselines, InverseVolatilityFixture) {
    MvoInputs in;
    in.mu = Eigen::Vector2d(0, 0);
    in.sigma = Eigen::Vector2d(0.01, 0.04).asDiagonal();
    const auto w = baseline_allocate(Baseline::InverseVolatility, in);
    EXPECT_NEAR(w[0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(w[1], 1.0 / 3.0, 1e-12);
    const auto eq = baseline_allocate(Baseline::Equal, in);
    EXPECT_EQ(eq, (PortfolioWeights{0.5, 0.5}));
}

TEST(Baselines, DiagonalRiskParityIsInverseVolatility) {
    MvoInputs in;
    in.mu = Eigen::VectorXd::Zero(4);
    in.sigma = Eigen::Vector4d(0.01, 0.04, 0.09, 0.0025).asDiagonal();
    const auto rp = baseline_allocate(Baseline::RiskParity, in);
    const auto iv = baseline_allocate(Baseline::InverseVolatility, in);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(rp[k], iv[k], 1e-8);
}

TEST(Baselines, RiskParityEqualisesContributions) {
    std::mt19937_64 rng(50);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd a(5, 5);
        for (Eigen::Index r = 0; r < 5; ++r) {
            for (Eigen::Index c = 0; c < 5; ++c) a(r, c) = normal(rng);
        }
        MvoInputs in;
        in.mu = Eigen::VectorXd::Zero(5);
        in.sigma = a * a.transpose() + 0.01 * Eigen::MatrixXd::Identity(5, 5);
        const auto w = baseline_allocate(Baseline::RiskParity, in);
        const Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), 5);
        const Eigen::VectorXd rc = risk_contributions(wv, in.sigma);
        EXPECT_LT(rc.maxCoeff() - rc.minCoeff(), 1e-8);
        EXPECT_NEAR(wv.sum(), 1.0, 1e-12);
    }
}

TEST(Baselines, ZeroVolatilityAssetIsRejected) {
    MvoInputs in;
    in.mu = Eigen::Vector2d(0, 0);
    in.sigma = Eigen::Vector2d(0.01, 0.0).asDiagonal();
    try {
        baseline_allocate(Baseline::InverseVolatility, in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroVolatilityAsset);
    }
}

TEST(CompareAllocations, FifteenRowsInTheDocumentedOrder) {
    const PanelSet p = testing::random_panel(51, 200, 10);
    std::vector<PositionMatrix> books;
    for (const char* f : {"x", "y", "z"}) books.push_back(signal_to_weights(p.field(f).values));
    AllocationConfig cfg;
    cfg.mvo.n_steps = 500;
    const auto rows = compare_allocations(books, p, DateRange{0, 150}, DateRange{150, 200}, cfg);
    ASSERT_EQ(rows.size(), 15U);
    for (std::size_t k = 0; k < 11; ++k) {
        EXPECT_EQ(rows[k].name, to_string(kAllSchemes[k]));
        EXPECT_EQ(rows[k].kind, "scheme");
    }
    EXPECT_EQ(rows[11].name, "equal");
    EXPECT_EQ(rows[12].name, "inverse_volatility");
    EXPECT_EQ(rows[13].name, "risk_parity");
    EXPECT_EQ(rows[14].name, "mvo");
    for (const auto& r : rows) {
        EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-9) << r.name;
        EXPECT_EQ(r.out_sample.n_days, 50U);
    }
    const auto again = compare_allocations(books, p, DateRange{0, 150}, DateRange{150, 200}, cfg);
    for (std::size_t k = 0; k < rows.size(); ++k) EXPECT_EQ(rows[k].weights, again[k].weights);
}

}  // namespace
}  // namespace alphadesk
