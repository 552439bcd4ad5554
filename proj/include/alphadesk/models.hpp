// Classical supervised models over alpha features, plus a by-name registry
// for externally supplied model families.
//
// Plugin contract: a factory returns a fresh, unfitted Model. fit() may be
// called once; predict() before fit() throws NotFitted. Both must be
// deterministic for identical inputs, and fit() must not retain references to
// its arguments.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "alphadesk/common.hpp"

namespace alphadesk {

enum class ModelFamily { Ols, Ridge, Logistic, Knn, DecisionTree, Gbt, Plugin };

std::string_view to_string(ModelFamily f) noexcept;
/// Throws InvalidConfig for unknown names.
ModelFamily model_family_from_string(std::string_view name);

struct ModelSpec {
    ModelFamily family = ModelFamily::Ols;
    /// ridge penalty; for logistic, the L2 penalty on standardised coefficients.
    double lambda = 1.0;
    int k = 25;
    int max_depth = 3;
    int min_leaf = 50;
    int n_trees = 50;
    double learning_rate = 0.1;
    /// Registry key when family == Plugin.
    std::string plugin;

    /// Throws InvalidConfig when a hyperparameter leaves its documented range:
    /// lambda in [0, 1e12], k in [1, 10000], max_depth in [1, 12],
    /// min_leaf >= 1, n_trees in [1, 1000], learning_rate in (0, 1].
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

nlohmann::json to_json(const ModelSpec& m);
ModelSpec model_spec_from_json(const nlohmann::json& j);

class Model {
public:
    virtual ~Model() = default;
    virtual void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) = 0;
    virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
    /// True when a linear fit hit a rank-deficient design and fell back to a tiny ridge.
    virtual bool singular_fallback() const { return false; }
};

using ModelFactory = std::function<std::unique_ptr<Model>(const ModelSpec&)>;

/// Registers a plugin family; replaces any factory already under `name`.
void register_model(const std::string& name, ModelFactory factory);
bool has_registered_model(const std::string& name);

/// Throws InvalidConfig for invalid specs or unknown plugins.
std::unique_ptr<Model> make_model(const ModelSpec& spec);

/// Linear least squares with intercept. A positive lambda penalises the slopes
/// only. OLS on a rank-deficient design refits with lambda = 1e-8.
class LinearModel final : public Model {
public:
    explicit LinearModel(double lambda) : lambda_(lambda) {}
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
    bool singular_fallback() const override { return fallback_; }

    const Eigen::VectorXd& coefficients() const { return beta_; }
    double intercept() const { return intercept_; }

private:
    double lambda_;
    bool fitted_ = false;
    bool fallback_ = false;
    Eigen::VectorXd beta_;
    double intercept_ = 0.0;
};

/// Per-column mean and std taken from training data; zero-std columns map to 0.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    void fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// P(y > 0) by L2-penalised Newton iterations on standardised features.
class LogisticModel final : public Model {
public:
    explicit LogisticModel(double lambda) : lambda_(lambda) {}
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;

private:
    double lambda_;
    bool fitted_ = false;
    Standardizer std_;
    Eigen::VectorXd beta_;
    double intercept_ = 0.0;
};

/// Mean target of the k nearest standardised training rows; distance ties go
/// to the lower row index. Training sets above `max_rows` are thinned by a
/// fixed stride.
class KnnModel final : public Model {
public:
    explicit KnnModel(int k, std::size_t max_rows = 1000) : k_(k), max_rows_(max_rows) {}
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;

private:
    int k_;
    std::size_t max_rows_;
    bool fitted_ = false;
    Standardizer std_;
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
};

/// Least-squares regression tree. Splits are `x[f] <= threshold` at midpoints
/// between consecutive distinct values; ties in gain go to the lower feature,
/// then the lower threshold.
struct RegressionTree {
    struct Node {
        int feature = -1;  // -1 for a leaf
        double threshold = 0.0;
        double value = 0.0;
        int left = -1;
        int right = -1;
    };
    std::vector<Node> nodes;

    /// `order[f]` lists row indices sorted by feature f (stable in row index).
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
             const std::vector<std::vector<int>>& order, int max_depth, int min_leaf);
    double predict_row(const Eigen::MatrixXd& x, Eigen::Index r) const;
};

std::vector<std::vector<int>> presort_columns(const Eigen::MatrixXd& x);

class TreeModel final : public Model {
public:
    TreeModel(int max_depth, int min_leaf) : max_depth_(max_depth), min_leaf_(min_leaf) {}
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;

private:
    int max_depth_;
    int min_leaf_;
    bool fitted_ = false;
    RegressionTree tree_;
};

/// Gradient boosting on squared loss, starting from the target mean. Split
/// candidates are at most 63 quantile cut points per feature.
class GbtModel final : public Model {
public:
    GbtModel(int n_trees, double learning_rate, int max_depth, int min_leaf)
        : n_trees_(n_trees), rate_(learning_rate), max_depth_(max_depth), min_leaf_(min_leaf) {}
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;

private:
    int n_trees_;
    double rate_;
    int max_depth_;
    int min_leaf_;
    bool fitted_ = false;
    double base_ = 0.0;
    std::vector<RegressionTree> trees_;
};

}  // namespace alphadesk
