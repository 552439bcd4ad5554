#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "alphadesk/ensemble.hpp"
#include "test_util.hpp"

namespace alphadesk {
namespace {

const char* const kTexts[] = {
    "rank(sig)",           "sig",                  "zscore(sig)",         "ts_mean(sig, 2)",
    "ts_mean(sig, 3)",     "ts_rank(sig, 5)",      "add(sig, ts_delay(sig, 2))",
    "ts_sum(sig, 4)", "power(sig, 3)", "demean(sig)", "rank(ts_mean(sig, 5))",
    "subtract(sig, ts_mean(sig, 10))"};

AlphaArchive archive_of(const PanelSet& panel, const SampleSplit& split, std::size_t n) {
    AlphaArchive a;
    for (std::size_t k = 0; k < n; ++k) a.entries.push_back(backtest_entry(canonicalize(parse(kTexts[k])), panel, split));
    a.n_evaluated = n;
    return a;
}

class Ensemble : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        SyntheticConfig c;
        c.seed = 21;
        c.n_symbols = 15;
        c.n_days = 260;
        c.signal_strength = 0.2;
        panel_ = new PanelSet(generate_synthetic(c));
        split_ = new SampleSplit(split_sample(panel_->calendar()));
        archive_ = new AlphaArchive(archive_of(*panel_, *split_, 12));
        pool_ = new AlphaPool(AlphaPool::from_archive(*archive_, *panel_));
    }
    static void TearDownTestSuite() {
        delete pool_;
        delete archive_;
        delete split_;
        delete panel_;
    }
    static PanelSet* panel_;
    static SampleSplit* split_;
    static AlphaArchive* archive_;
    static AlphaPool* pool_;
};

PanelSet* Ensemble::panel_ = nullptr;
SampleSplit* Ensemble::split_ = nullptr;
AlphaArchive* Ensemble::archive_ = nullptr;
AlphaPool* Ensemble::pool_ = nullptr;

TEST(BuildDataset, MatchesBruteForceRowSelection) {
    const PanelSet p = testing::random_panel(31, 30, 6, 0.15);
    const std::vector<SignalMatrix> features{p.field("x").values, p.field("y").values};
    const Matrix& r = p.field("returns").values;
    for (std::size_t horizon : {1UL, 3UL}) {
        const DateRange range{5, 25};
        const SupervisedDataset ds = build_dataset(features, p, range, horizon);
        std::size_t row = 0;
        for (std::size_t t = range.begin; t < range.end; ++t) {
            for (std::size_t j = 0; j < 6; ++j) {
                if (t + horizon >= range.end) continue;
                if (is_missing(features[0](t, j)) || is_missing(features[1](t, j))) continue;
                double g = 1.0;
                bool ok = true;
                for (std::size_t h = 1; h <= horizon; ++h) {
                    ok = ok && !is_missing(r(t + h, j));
                    if (ok) g *= 1.0 + r(t + h, j);
                }
                if (!ok) continue;
                ASSERT_LT(row, ds.rows());
                EXPECT_EQ(ds.dates[row], t);
                EXPECT_EQ(ds.symbols[row], j);
                EXPECT_EQ(ds.x(row, 1), features[1](t, j));
                EXPECT_NEAR(ds.y(row), g - 1.0, 1e-15);
                ++row;
            }
        }
        EXPECT_EQ(row, ds.rows());
    }
}

TEST(BuildDataset, Errors) {
    const PanelSet p = testing::random_panel(32, 10, 3);
    const std::vector<SignalMatrix> features{p.field("x").values};
    EXPECT_THROW(build_dataset(features, p, DateRange{0, 10}, 0), Error);
    try {
        build_dataset(features, p, DateRange{0, 1}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
    }
}

TEST_F(Ensemble, WeightedVoteWithUnitWeightIsIdentity) {
    const std::vector<SignalMatrix> feats{pool_->signal(0), pool_->signal(1)};
    const SupervisedDataset train = build_dataset(feats, *panel_, split_->train);
    const SignalMatrix a = pool_->signal(2), b = pool_->signal(3);
    const std::vector<SignalMatrix> members{a, b};
    Combiner c;
    c.weights = {1.0, 0.0};
    EXPECT_TRUE(identical(combine(members, {}, c, train), a));
    c.weights = {0.5, 0.4};
    EXPECT_THROW(combine(members, {}, c, train), Error);
}

TEST_F(Ensemble, StackingFitsTrainAtLeastAsWellAsAnyMember) {
    std::vector<SignalMatrix> feats;
    for (std::size_t id : {0, 3, 5}) feats.push_back(pool_->signal(id));
    const SupervisedDataset train = build_dataset(feats, *panel_, split_->train);
    std::vector<SignalMatrix> signals;
    std::vector<Eigen::VectorXd> preds;
    for (auto family : {ModelFamily::Ols, ModelFamily::Knn, ModelFamily::DecisionTree}) {
        ModelSpec m;
        m.family = family;
        m.min_leaf = 20;
        FitOutput out = fit_predict(m, train, feats, split_->train);
        signals.push_back(out.signal);
        preds.push_back(out.train_prediction);
    }
    Combiner c;
    c.kind = CombinerKind::Stacking;
    const SignalMatrix stacked = combine(signals, preds, c, train);
    double best = 1e300, stacked_sse = 0;
    for (const auto& p : preds) best = std::min(best, (p - train.y).squaredNorm());
    for (std::size_t r = 0; r < train.rows(); ++r) {
        const double v = stacked(train.dates[r], train.symbols[r]);
        ASSERT_FALSE(is_missing(v));
        stacked_sse += (v - train.y(static_cast<Eigen::Index>(r))) * (v - train.y(static_cast<Eigen::Index>(r)));
    }
    EXPECT_LE(stacked_sse, best * (1 + 1e-9));
}

TEST_F(Ensemble, TrainPredictionsMatchTheScoredSignalOnTrainRows) {
    std::vector<SignalMatrix> feats{pool_->signal(0), pool_->signal(4)};
    const SupervisedDataset train = build_dataset(feats, *panel_, split_->train);
    const FitOutput out = fit_predict(ModelSpec{}, train, feats, split_->train);
    for (std::size_t r = 0; r < train.rows(); ++r) {
        EXPECT_NEAR(out.signal(train.dates[r], train.symbols[r]), out.train_prediction(static_cast<Eigen::Index>(r)),
                    1e-12);
    }
}

EnsembleSpec base_spec(const AlphaPool& pool) {
    EnsembleSpec s;
    s.alpha_ids.assign(pool.ids().begin(), pool.ids().begin() + 10);
    ModelSpec m;
    m.family = ModelFamily::Ridge;
    m.lambda = 10.0;
    s.members = {m};
    s.combiner.weights = {1.0};
    return s;
}

TEST_F(Ensemble, SingleBagWithoutBootstrapIsThePlainFit) {
    const EnsembleSpec plain = base_spec(*pool_);
    EnsembleSpec bag = plain;
    bag.combiner = Combiner{CombinerKind::Bagging, {}, 1, false};
    const auto a = evaluate_ensemble(plain, *pool_, *panel_, *split_, true);
    const auto b = evaluate_ensemble(bag, *pool_, *panel_, *split_, true);
    EXPECT_EQ(a.validation, b.validation);
    EXPECT_EQ(*a.test, *b.test);
    EXPECT_EQ(a.validation_pnl.daily_pnl, b.validation_pnl.daily_pnl);
}

TEST_F(Ensemble, EvaluationIsDeterministic) {
    EnsembleSpec s = base_spec(*pool_);
    s.combiner = Combiner{CombinerKind::Bagging, {}, 3, true};
    s.seed = 99;
    const auto a = evaluate_ensemble(s, *pool_, *panel_, *split_);
    const auto b = evaluate_ensemble(s, *pool_, *panel_, *split_);
    EXPECT_EQ(a.validation, b.validation);
    EXPECT_FALSE(a.test.has_value());
}

TEST_F(Ensemble, SearchIsMonotoneAndDeterministic) {
    EnsembleSearchConfig cfg;
    cfg.seed = 4;
    cfg.budget = 12;
    const auto a = ensemble_search(cfg, *pool_, *panel_, *split_);
    const auto b = ensemble_search(cfg, *pool_, *panel_, *split_);
    EXPECT_EQ(a.n_evaluated, 12U);
    for (std::size_t k = 1; k < a.accepted_scores.size(); ++k) {
        EXPECT_GE(a.accepted_scores[k], a.accepted_scores[k - 1] - 1e-12);
    }
    EXPECT_EQ(a.accepted_scores, b.accepted_scores);
    EXPECT_EQ(a.spec, b.spec);
    EXPECT_EQ(a.evaluation.validation.sharpe, a.accepted_scores.back());
    ASSERT_TRUE(a.evaluation.test.has_value());
    EXPECT_NO_THROW(a.spec.validate());
}

TEST_F(Ensemble, RandomSpecsCoverEveryAlphaCount) {
    // a pool of 20 makes every count in [10, 20] reachable
    AlphaArchive big = *archive_;
    for (std::size_t k = 0; k < 8; ++k) {
        big.entries.push_back(backtest_entry(
            canonicalize(parse("ts_mean(sig, " + std::to_string(11 + k) + ")")), *panel_, *split_));
    }
    const AlphaPool pool = AlphaPool::from_archive(big, *panel_);
    ASSERT_EQ(pool.size(), 20U);
    std::set<std::size_t> counts;
    std::set<CombinerKind> kinds;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const EnsembleSpec s = random_ensemble_spec(seed, pool);
        EXPECT_NO_THROW(s.validate());
        counts.insert(s.alpha_ids.size());
        kinds.insert(s.combiner.kind);
    }
    EXPECT_EQ(counts.size(), 11U);
    EXPECT_EQ(*counts.begin(), 10U);
    EXPECT_EQ(*counts.rbegin(), 20U);
    EXPECT_EQ(kinds.size(), 3U);
}

TEST_F(Ensemble, StudyIsSortedWithTestForTheTopDecile) {
    const auto trials = random_composition_study(7, *pool_, *panel_, *split_, 12, 1, 1);
    ASSERT_EQ(trials.size(), 12U);
    std::set<std::size_t> seen;
    for (std::size_t k = 0; k < trials.size(); ++k) {
        seen.insert(trials[k].index);
        if (k > 0) EXPECT_GE(trials[k - 1].validation.sharpe, trials[k].validation.sharpe);
        EXPECT_EQ(trials[k].test.has_value(), k < 2) << k;
        EXPECT_EQ(trials[k].spec, random_ensemble_spec(derive_seed(7, trials[k].index), *pool_));
    }
    EXPECT_EQ(seen.size(), 12U);
    const auto parallel = random_composition_study(7, *pool_, *panel_, *split_, 12, 1, 3);
    for (std::size_t k = 0; k < trials.size(); ++k) {
        EXPECT_EQ(to_json(trials[k], pool_).dump(), to_json(parallel[k], pool_).dump());
    }
}

TEST_F(Ensemble, TooFewAlphasIsRejected) {
    const AlphaPool small = AlphaPool::from_archive(archive_of(*panel_, *split_, 9), *panel_);
    try {
        random_composition_study(1, small, *panel_, *split_, 5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ArchiveTooSmall);
    }
    EXPECT_THROW(ensemble_search(EnsembleSearchConfig{}, small, *panel_, *split_), Error);
}

TEST_F(Ensemble, PoolKeepsTheStrongestAlphas) {
    const AlphaPool top = AlphaPool::from_archive(*archive_, *panel_, 3);
    ASSERT_EQ(top.size(), 3U);
    double weakest_kept = 1e300;
    for (std::size_t id : top.ids()) weakest_kept = std::min(weakest_kept, top.validation_sharpe(id));
    for (std::size_t id = 0; id < archive_->entries.size(); ++id) {
        if (std::find(top.ids().begin(), top.ids().end(), id) == top.ids().end()) {
            EXPECT_LE(archive_->entries[id].validation.sharpe, weakest_kept);
        }
    }
}

}  // namespace
}  // namespace alphadesk
