#include <gtest/gtest.h>

#include <random>

#include "alphadesk/models.hpp"

namespace alphadesk {
namespace {

struct Data {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

Data random_data(std::uint64_t seed, int n, int f, double noise = 0.1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Data d{Eigen::MatrixXd(n, f), Eigen::VectorXd(n)};
    for (int r = 0; r < n; ++r) {
        double target = 0;
        for (int c = 0; c < f; ++c) {
            d.x(r, c) = normal(rng);
            target += (c % 2 == 0 ? 1.0 : -0.5) * d.x(r, c);
        }
        d.y(r) = target + noise * normal(rng);
    }
    return d;
}

double mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm() / a.size(); }

TEST(Linear, RecoversExactCoefficients) {
    Eigen::MatrixXd x(5, 1);
    x << 1, 2, 3, 4, 6;
    const Eigen::VectorXd y = (2.0 * x.col(0)).array() + 1.0;
    LinearModel m(0.0);
    m.fit(x, y);
    EXPECT_NEAR(m.coefficients()(0), 2.0, 1e-10);
    EXPECT_NEAR(m.intercept(), 1.0, 1e-10);
    EXPECT_FALSE(m.singular_fallback());
}

TEST(Linear, HugeRidgePenaltyShrinksSlopesToZero) {
    const Data d = random_data(1, 200, 3);
    LinearModel m(1e9);
    m.fit(d.x, d.y);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(m.coefficients()(c), 0.0, 1e-5);
    EXPECT_NEAR(m.intercept(), d.y.mean(), 1e-4);
}

TEST(Linear, RankDeficientDesignFallsBack) {
    Data d = random_data(2, 100, 2);
    d.x.col(1) = d.x.col(0);
    LinearModel m(0.0);
    m.fit(d.x, d.y);
    EXPECT_TRUE(m.singular_fallback());
    const Eigen::VectorXd p = m.predict(d.x);
    EXPECT_TRUE(p.allFinite());
    EXPECT_NEAR(m.coefficients()(0), m.coefficients()(1), 1e-6);
}

TEST(Logistic, SeparableDataIsClassified) {
    Eigen::MatrixXd x(40, 1);
    Eigen::VectorXd y(40);
    for (int r = 0; r < 40; ++r) {
        x(r, 0) = r - 19.5;
        y(r) = x(r, 0) > 0 ? 0.3 : -0.3;
    }
    LogisticModel m(1e-6);
    m.fit(x, y);
    const Eigen::VectorXd p = m.predict(x);
    for (int r = 0; r < 40; ++r) {
        EXPECT_GE(p(r), 0.0);
        EXPECT_LE(p(r), 1.0);
        EXPECT_EQ(p(r) > 0.5, y(r) > 0) << r;
    }
}

TEST(Logistic, BalancedNoiseIsNearOneHalf) {
    Data d = random_data(3, 400, 2);
    std::mt19937_64 rng(4);
    for (int r = 0; r < 400; ++r) d.y(r) = (rng() % 2 == 0) ? 1.0 : -1.0;
    LogisticModel m(1.0);
    m.fit(d.x, d.y);
    const Eigen::VectorXd p = m.predict(d.x);
    EXPECT_NEAR(p.mean(), 0.5, 0.05);
}

TEST(Knn, KEqualToNIsTheTrainingMean) {
    const Data d = random_data(5, 30, 2);
    KnnModel m(30);
    m.fit(d.x, d.y);
    const Eigen::VectorXd p = m.predict(d.x.topRows(5));
    for (int r = 0; r < 5; ++r) EXPECT_NEAR(p(r), d.y.mean(), 1e-12);
}

TEST(Knn, DistanceTiesGoToTheLowerRow) {
    // duplicated rows standardise identically, so their distances tie exactly
    Eigen::MatrixXd x(4, 1);
    x << 1, 1, 3, 3;
    Eigen::VectorXd y(4);
    y << 10, 20, 30, 40;
    KnnModel m(1);
    m.fit(x, y);
    Eigen::MatrixXd q(2, 1);
    q << 1, 3;
    const Eigen::VectorXd p = m.predict(q);
    EXPECT_EQ(p(0), 10.0);
    EXPECT_EQ(p(1), 30.0);
    KnnModel m3(3);
    m3.fit(x, y);
    // two closest rows plus the lower-index member of the tied pair
    EXPECT_NEAR(m3.predict(q)(0), (10.0 + 20.0 + 30.0) / 3.0, 1e-12);
    EXPECT_NEAR(m3.predict(q)(1), (30.0 + 40.0 + 10.0) / 3.0, 1e-12);
}

TEST(Knn, MatchesBruteForceNeighbours) {
    const Data d = random_data(6, 80, 3);
    const Data q = random_data(7, 10, 3);
    KnnModel m(7);
    m.fit(d.x, d.y);
    const Eigen::VectorXd p = m.predict(q.x);
    // standardise with training statistics, then sort by (distance, row)
    const Eigen::RowVectorXd mean = d.x.colwise().mean();
    Eigen::RowVectorXd sd(3);
    for (int c = 0; c < 3; ++c) {
        sd(c) = std::sqrt((d.x.col(c).array() - mean(c)).square().sum() / (d.x.rows() - 1));
    }
    for (int r = 0; r < q.x.rows(); ++r) {
        std::vector<std::pair<double, int>> dist;
        for (int t = 0; t < d.x.rows(); ++t) {
            const Eigen::RowVectorXd a = (q.x.row(r) - mean).cwiseQuotient(sd);
            const Eigen::RowVectorXd b = (d.x.row(t) - mean).cwiseQuotient(sd);
            dist.emplace_back((a - b).squaredNorm(), t);
        }
        std::sort(dist.begin(), dist.end());
        double sum = 0;
        for (int k = 0; k < 7; ++k) sum += d.y(dist[k].second);
        EXPECT_NEAR(p(r), sum / 7.0, 1e-9);
    }
}

TEST(Tree, StepFunctionSplitsAtTheMidpoint) {
    Eigen::MatrixXd x(6, 2);
    x << 0, 5, 1, 4, 2, 3, 3, 2, 4, 1, 5, 0;
    Eigen::VectorXd y(6);
    y << 0, 0, 0, 1, 1, 1;
    TreeModel m(1, 1);
    m.fit(x, y);
    Eigen::MatrixXd q(2, 2);
    q << 2.4, 0, 2.6, 0;
    const Eigen::VectorXd p = m.predict(q);
    // both features split perfectly; the lower feature index wins
    EXPECT_EQ(p(0), 0.0);
    EXPECT_EQ(p(1), 1.0);
}

TEST(Tree, MinLeafIsRespected) {
    const Data d = random_data(8, 100, 2);
    RegressionTree t;
    t.fit(d.x, d.y, presort_columns(d.x), 6, 20);
    std::vector<int> counts(t.nodes.size(), 0);
    for (int r = 0; r < 100; ++r) {
        int n = 0;
        while (t.nodes[n].feature >= 0) {
            n = d.x(r, t.nodes[n].feature) <= t.nodes[n].threshold ? t.nodes[n].left : t.nodes[n].right;
        }
        ++counts[n];
    }
    for (std::size_t n = 0; n < t.nodes.size(); ++n) {
        if (t.nodes[n].feature < 0) EXPECT_GE(counts[n], 20);
    }
}

TEST(Gbt, TrainingErrorNeverIncreasesWithMoreTrees) {
    const Data d = random_data(9, 300, 3, 0.5);
    double prev = mse(Eigen::VectorXd::Constant(300, d.y.mean()), d.y);
    for (int n = 1; n <= 30; n += 3) {
        GbtModel m(n, 0.2, 3, 10);
        m.fit(d.x, d.y);
        const double e = mse(m.predict(d.x), d.y);
        EXPECT_LE(e, prev + 1e-12) << n;
        prev = e;
    }
}

TEST(Gbt, Deterministic) {
    const Data d = random_data(10, 200, 4);
    GbtModel a(20, 0.1, 3, 10), b(20, 0.1, 3, 10);
    a.fit(d.x, d.y);
    b.fit(d.x, d.y);
    EXPECT_EQ(a.predict(d.x), b.predict(d.x));
}

TEST(Models, PredictBeforeFitThrows) {
    for (auto family : {ModelFamily::Ols, ModelFamily::Ridge, ModelFamily::Logistic, ModelFamily::Knn,
                        ModelFamily::DecisionTree, ModelFamily::Gbt}) {
        ModelSpec spec;
        spec.family = family;
        const auto m = make_model(spec);
        try {
            m->predict(Eigen::MatrixXd::Zero(2, 2));
            FAIL() << to_string(family);
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::NotFitted);
        }
    }
}

TEST(Models, SpecValidationAndJson) {
    ModelSpec spec;
    spec.family = ModelFamily::Gbt;
    spec.n_trees = 17;
    EXPECT_EQ(model_spec_from_json(to_json(spec)), spec);
    spec.learning_rate = 0.0;
    EXPECT_THROW(spec.validate(), Error);
    spec = ModelSpec{};
    spec.k = 0;
    EXPECT_THROW(spec.validate(), Error);
    EXPECT_THROW(model_family_from_string("svm"), Error);
    EXPECT_EQ(model_family_from_string("gbt"), ModelFamily::Gbt);
}

class ConstantModel final : public Model {
public:
    explicit ConstantModel(double v) : v_(v) {}
    void fit(const Eigen::MatrixXd&, const Eigen::VectorXd&) override {}
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
        return Eigen::VectorXd::Constant(x.rows(), v_);
    }

private:
    double v_;
};

TEST(Registry, PluginFamiliesResolveByName) {
    ModelSpec spec;
    spec.family = ModelFamily::Plugin;
    spec.plugin = "models_test_constant";
    EXPECT_THROW(make_model(spec), Error);
    register_model("models_test_constant", [](const ModelSpec& s) {
        return std::make_unique<ConstantModel>(s.lambda);
    });
    EXPECT_TRUE(has_registered_model("models_test_constant"));
    spec.lambda = 0.25;
    const auto m = make_model(spec);
    m->fit(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(3));
    EXPECT_EQ(m->predict(Eigen::MatrixXd::Zero(2, 1))(1), 0.25);
}

}  // namespace
}  // namespace alphadesk
