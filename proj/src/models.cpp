#include "alphadesk/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>

namespace alphadesk {

namespace {

constexpr std::pair<ModelFamily, std::string_view> kFamilyNames[] = {
    {ModelFamily::Ols, "ols"},       {ModelFamily::Ridge, "ridge"},
    {ModelFamily::Logistic, "logistic"}, {ModelFamily::Knn, "knn"},
    {ModelFamily::DecisionTree, "decision_tree"}, {ModelFamily::Gbt, "gbt"},
    {ModelFamily::Plugin, "plugin"},
};

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

std::map<std::string, ModelFactory>& registry() {
    static std::map<std::string, ModelFactory> r;
    return r;
}

void require_fitted(bool fitted) {
    if (!fitted) throw Error(ErrorCode::NotFitted, "predict called before fit");
}

void require_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() == 0 || x.rows() != y.size()) {
        throw Error(ErrorCode::EmptyDataset, "training data is empty or misaligned");
    }
}

}  // namespace

std::string_view to_string(ModelFamily f) noexcept {
    for (const auto& [fam, name] : kFamilyNames) {
        if (fam == f) return name;
    }
    return "unknown";
}

ModelFamily model_family_from_string(std::string_view name) {
    for (const auto& [fam, n] : kFamilyNames) {
        if (n == name) return fam;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown model family '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (!(lambda >= 0.0 && lambda <= 1e12)) bad("lambda must lie in [0, 1e12]");
    if (k < 1 || k > 10000) bad("k must lie in [1, 10000]");
    if (max_depth < 1 || max_depth > 12) bad("max_depth must lie in [1, 12]");
    if (min_leaf < 1) bad("min_leaf must be >= 1");
    if (n_trees < 1 || n_trees > 1000) bad("n_trees must lie in [1, 1000]");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) bad("learning_rate must lie in (0, 1]");
    if (family == ModelFamily::Plugin && plugin.empty()) bad("plugin family needs a plugin name");
}

nlohmann::json to_json(const ModelSpec& m) {
    nlohmann::json j{{"family", std::string(to_string(m.family))}};
    switch (m.family) {
        case ModelFamily::Ols: break;
        case ModelFamily::Ridge:
        case ModelFamily::Logistic: j["lambda"] = m.lambda; break;
        case ModelFamily::Knn: j["k"] = m.k; break;
        case ModelFamily::DecisionTree:
            j["max_depth"] = m.max_depth;
            j["min_leaf"] = m.min_leaf;
            break;
        case ModelFamily::Gbt:
            j["n_trees"] = m.n_trees;
            j["learning_rate"] = m.learning_rate;
            j["max_depth"] = m.max_depth;
            j["min_leaf"] = m.min_leaf;
            break;
        case ModelFamily::Plugin: j["plugin"] = m.plugin; break;
    }
    return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec m;
    m.family = model_family_from_string(j.at("family").get<std::string>());
    m.lambda = j.value("lambda", m.lambda);
    m.k = j.value("k", m.k);
    m.max_depth = j.value("max_depth", m.max_depth);
    m.min_leaf = j.value("min_leaf", m.min_leaf);
    m.n_trees = j.value("n_trees", m.n_trees);
    m.learning_rate = j.value("learning_rate", m.learning_rate);
    m.plugin = j.value("plugin", m.plugin);
    m.validate();
    return m;
}

void register_model(const std::string& name, ModelFactory factory) {
    std::lock_guard lock(registry_mutex());
    registry()[name] = std::move(factory);
}

bool has_registered_model(const std::string& name) {
    std::lock_guard lock(registry_mutex());
    return registry().count(name) != 0;
}

std::unique_ptr<Model> make_model(const ModelSpec& spec) {
    spec.validate();
    switch (spec.family) {
        case ModelFamily::Ols: return std::make_unique<LinearModel>(0.0);
        case ModelFamily::Ridge: return std::make_unique<LinearModel>(spec.lambda);
        case ModelFamily::Logistic: return std::make_unique<LogisticModel>(spec.lambda);
        case ModelFamily::Knn: return std::make_unique<KnnModel>(spec.k);
        case ModelFamily::DecisionTree: return std::make_unique<TreeModel>(spec.max_depth, spec.min_leaf);
        case ModelFamily::Gbt:
            return std::make_unique<GbtModel>(spec.n_trees, spec.learning_rate, spec.max_depth,
                                              spec.min_leaf);
        case ModelFamily::Plugin: {
            ModelFactory factory;
            {
                std::lock_guard lock(registry_mutex());
                auto it = registry().find(spec.plugin);
                if (it != registry().end()) factory = it->second;
            }
            if (!factory) throw Error(ErrorCode::InvalidConfig, "no model registered as '" + spec.plugin + "'");
            return factory(spec);
        }
    }
    throw Error(ErrorCode::InvalidConfig, "unhandled model family");
}

// ---- linear -----------------------------------------------------------------

void LinearModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    require_rows(x, y);
    const Eigen::RowVectorXd xm = x.colwise().mean();
    const double ym = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - xm;
    const Eigen::VectorXd yc = y.array() - ym;
    const auto p = x.cols();

    double lambda = lambda_;
    fallback_ = false;
    if (lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
        if (qr.rank() == p) {
            beta_ = qr.solve(yc);
        } else {
            fallback_ = true;
            lambda = 1e-8;
        }
    }
    if (lambda > 0.0) {
        Eigen::MatrixXd a = xc.transpose() * xc;
        a.diagonal().array() += lambda;
        beta_ = a.ldlt().solve(xc.transpose() * yc);
    }
    intercept_ = ym - xm.dot(beta_);
    fitted_ = true;
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& x) const {
    require_fitted(fitted_);
    return (x * beta_).array() + intercept_;
}

// ---- logistic ---------------------------------------------------------------

void Standardizer::fit(const Eigen::MatrixXd& x) {
    mean = x.colwise().mean();
    scale.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double ss = (x.col(c).array() - mean(c)).square().sum();
        const double sd = x.rows() > 1 ? std::sqrt(ss / static_cast<double>(x.rows() - 1)) : 0.0;
        scale(c) = sd < kStdFloor ? 0.0 : 1.0 / sd;
    }
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() * scale.array();
}

namespace {

double log1p_exp(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }
double sigmoid(double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

void LogisticModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    require_rows(x, y);
    std_.fit(x);
    const Eigen::MatrixXd z = std_.apply(x);
    const auto n = z.rows();
    const auto p = z.cols();
    // design with a leading intercept column
    Eigen::MatrixXd d(n, p + 1);
    d.col(0).setOnes();
    d.rightCols(p) = z;
    const Eigen::VectorXd t = (y.array() > 0.0).cast<double>();
    const double lambda = std::max(lambda_, 1e-6);

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
    auto loss = [&](const Eigen::VectorXd& th) {
        const Eigen::VectorXd eta = d * th;
        double l = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) l += log1p_exp(eta(i)) - t(i) * eta(i);
        return l + 0.5 * lambda * th.tail(p).squaredNorm();
    };
    double current = loss(theta);
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::VectorXd eta = d * theta;
        Eigen::VectorXd prob(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            prob(i) = sigmoid(eta(i));
            w(i) = prob(i) * (1.0 - prob(i));
        }
        Eigen::VectorXd grad = d.transpose() * (prob - t);
        grad.tail(p) += lambda * theta.tail(p);
        Eigen::MatrixXd h = d.transpose() * w.asDiagonal() * d;
        h.diagonal().tail(p).array() += lambda;
        h(0, 0) += 1e-12;
        const Eigen::VectorXd step = h.ldlt().solve(grad);
        double scale = 1.0;
        Eigen::VectorXd next = theta - step;
        double next_loss = loss(next);
        for (int k = 0; k < 40 && next_loss > current; ++k) {
            scale *= 0.5;
            next = theta - scale * step;
            next_loss = loss(next);
        }
        if (next_loss > current) break;
        const double moved = (next - theta).lpNorm<Eigen::Infinity>();
        theta = next;
        current = next_loss;
        if (moved < 1e-10) break;
    }
    intercept_ = theta(0);
    beta_ = theta.tail(p);
    fitted_ = true;
}

Eigen::VectorXd LogisticModel::predict(const Eigen::MatrixXd& x) const {
    require_fitted(fitted_);
    const Eigen::VectorXd eta = (std_.apply(x) * beta_).array() + intercept_;
    return eta.unaryExpr([](double v) { return sigmoid(v); });
}

// ---- knn --------------------------------------------------------------------

void KnnModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    require_rows(x, y);
    std_.fit(x);
    const auto n = static_cast<std::size_t>(x.rows());
    const std::size_t stride = n > max_rows_ ? (n + max_rows_ - 1) / max_rows_ : 1;
    const std::size_t kept = (n + stride - 1) / stride;
    x_.resize(static_cast<Eigen::Index>(kept), x.cols());
    y_.resize(static_cast<Eigen::Index>(kept));
    const Eigen::MatrixXd z = std_.apply(x);
    for (std::size_t k = 0; k < kept; ++k) {
        x_.row(static_cast<Eigen::Index>(k)) = z.row(static_cast<Eigen::Index>(k * stride));
        y_(static_cast<Eigen::Index>(k)) = y(static_cast<Eigen::Index>(k * stride));
    }
    fitted_ = true;
}

Eigen::VectorXd KnnModel::predict(const Eigen::MatrixXd& x) const {
    require_fitted(fitted_);
    const Eigen::MatrixXd z = std_.apply(x);
    const auto n_train = x_.rows();
    const auto k = std::min<Eigen::Index>(k_, n_train);
    Eigen::VectorXd out(z.rows());
    std::vector<double> dist(static_cast<std::size_t>(n_train));
    std::vector<double> scratch(dist.size());
    for (Eigen::Index q = 0; q < z.rows(); ++q) {
        // x_ is column-major, so each feature pass streams one contiguous column
        std::fill(dist.begin(), dist.end(), 0.0);
        for (Eigen::Index f = 0; f < x_.cols(); ++f) {
            const double qf = z(q, f);
            const double* col = x_.col(f).data();
            for (std::size_t r = 0; r < dist.size(); ++r) {
                const double d = col[r] - qf;
                dist[r] += d * d;
            }
        }
        scratch = dist;
        std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
        const double kth = scratch[static_cast<std::size_t>(k - 1)];
        // everything strictly closer than the k-th distance, then ties at
        // that distance in row order until k neighbours are taken
        Eigen::Index closer = 0;
        for (double d : dist) closer += d < kth;
        Eigen::Index ties = k - closer;
        double s = 0.0;
        for (Eigen::Index r = 0; r < n_train; ++r) {
            const double d = dist[static_cast<std::size_t>(r)];
            if (d < kth || (d == kth && ties-- > 0)) s += y_(r);
        }
        out(q) = s / static_cast<double>(k);
    }
    return out;
}

// ---- trees ------------------------------------------------------------------

std::vector<std::vector<int>> presort_columns(const Eigen::MatrixXd& x) {
    std::vector<std::vector<int>> order(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& o = order[static_cast<std::size_t>(f)];
        o.resize(static_cast<std::size_t>(x.rows()));
        std::iota(o.begin(), o.end(), 0);
        std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
    }
    return order;
}

namespace {

// Every feature keeps its presorted entries in one buffer; a node owns the
// same [begin, end) segment of each list, and splitting partitions every
// segment stably in place. Entries carry value and target so scans stay sequential.
struct TreeBuilder {
    struct Entry {
        double value;
        double target;
        int row;
    };

    int max_depth;
    int min_leaf;
    std::vector<RegressionTree::Node>& nodes;
    std::vector<std::vector<Entry>> lists;
    std::vector<char> goes_left;
    std::vector<Entry> scratch;

    int build(std::size_t begin, std::size_t end, int depth) {
        const auto n = static_cast<int>(end - begin);
        const auto& first = lists.front();
        double total = 0.0;
        for (std::size_t k = begin; k < end; ++k) total += first[k].target;
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes[static_cast<std::size_t>(id)].value = total / n;
        if (depth >= max_depth || n < 2 * min_leaf) return id;

        const double base = total * total / n;
        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t f = 0; f < lists.size(); ++f) {
            const Entry* o = lists[f].data() + begin;
            double left = 0.0;
            for (int i = 0; i < min_leaf - 1; ++i) left += o[i].target;
            for (int i = min_leaf - 1; i + min_leaf < n; ++i) {
                left += o[i].target;
                const double a = o[i].value;
                const double b = o[i + 1].value;
                if (!(a < b)) continue;
                const int n_left = i + 1;
                const double right = total - left;
                const double gain = left * left / n_left + right * right / (n - n_left) - base;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = a + (b - a) / 2.0;
                }
            }
        }
        if (best_feature < 0) return id;

        std::size_t n_left = 0;
        for (std::size_t k = begin; k < end; ++k) {
            const auto& e = lists[static_cast<std::size_t>(best_feature)][k];
            const bool l = e.value <= best_threshold;
            goes_left[static_cast<std::size_t>(e.row)] = l;
            n_left += l;
        }
        for (auto& list : lists) {
            std::size_t lo = begin;
            std::size_t hi = 0;
            for (std::size_t k = begin; k < end; ++k) {
                const Entry e = list[k];
                if (goes_left[static_cast<std::size_t>(e.row)]) list[lo++] = e;
                else scratch[hi++] = e;
            }
            std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
                      list.begin() + static_cast<std::ptrdiff_t>(lo));
        }
        const int l = build(begin, begin + n_left, depth + 1);
        const int h = build(begin + n_left, end, depth + 1);
        auto& node = nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = h;
        return id;
    }
};

}  // namespace

void RegressionTree::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const std::vector<std::vector<int>>& order, int max_depth, int min_leaf) {
    nodes.clear();
    const auto n = static_cast<std::size_t>(x.rows());
    TreeBuilder b{max_depth, min_leaf, nodes, {}, std::vector<char>(n, 0),
                  std::vector<TreeBuilder::Entry>(n)};
    b.lists.resize(order.size());
    for (std::size_t f = 0; f < order.size(); ++f) {
        const double* col = x.col(static_cast<Eigen::Index>(f)).data();
        auto& list = b.lists[f];
        list.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const int r = order[f][k];
            list[k] = {col[r], y(r), r};
        }
    }
    b.build(0, n, 0);
}

double RegressionTree::predict_row(const Eigen::MatrixXd& x, Eigen::Index r) const {
    int id = 0;
    while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(id)];
        id = x(r, n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(id)].value;
}

void TreeModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    require_rows(x, y);
    tree_.fit(x, y, presort_columns(x), max_depth_, min_leaf_);
    fitted_ = true;
}

Eigen::VectorXd TreeModel::predict(const Eigen::MatrixXd& x) const {
    require_fitted(fitted_);
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = tree_.predict_row(x, r);
    return out;
}

namespace {

// Features quantised to at most kMaxBins codes; code(x) = #cuts below x, so
// code(x) <= b exactly when x <= cuts[b].
struct BinnedFeatures {
    static constexpr std::size_t kMaxBins = 64;
    std::vector<std::vector<double>> cuts;
    std::vector<std::uint8_t> codes;  // row-major, n_rows x n_features
};

BinnedFeatures bin_features(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& order) {
    const auto n = static_cast<std::size_t>(x.rows());
    BinnedFeatures b;
    b.cuts.resize(order.size());
    b.codes.resize(n * order.size());
    for (std::size_t f = 0; f < order.size(); ++f) {
        const double* col = x.col(static_cast<Eigen::Index>(f)).data();
        auto value = [&](std::size_t k) { return col[order[f][k]]; };
        auto& cuts = b.cuts[f];
        std::size_t k = 1;
        for (std::size_t q = 1; q < BinnedFeatures::kMaxBins && k < n; ++q) {
            k = std::max(k, q * n / BinnedFeatures::kMaxBins);
            while (k < n && !(value(k - 1) < value(k))) ++k;
            if (k >= n) break;
            cuts.push_back(value(k - 1) + (value(k) - value(k - 1)) / 2.0);
            ++k;
        }
        for (std::size_t r = 0; r < n; ++r) {
            b.codes[r * order.size() + f] =
                static_cast<std::uint8_t>(std::lower_bound(cuts.begin(), cuts.end(), col[r]) - cuts.begin());
        }
    }
    return b;
}

// Histogram tree on binned features. Leaves add rate * value to f for their
// rows, so boosting never re-traverses the tree on the training set.
struct HistTreeBuilder {
    const BinnedFeatures& bins;
    const Eigen::VectorXd& target;
    int max_depth;
    int min_leaf;
    double rate;
    Eigen::VectorXd& f;
    std::vector<RegressionTree::Node>& nodes;
    std::vector<int> rows;
    std::vector<int> scratch;
    std::vector<double> sum;
    std::vector<int> count;

    int build(std::size_t begin, std::size_t end, int depth) {
        const auto n = static_cast<int>(end - begin);
        double total = 0.0;
        for (std::size_t k = begin; k < end; ++k) total += target(rows[k]);
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes[static_cast<std::size_t>(id)].value = total / n;
        auto leaf = [&] {
            const double step = rate * (total / n);
            for (std::size_t k = begin; k < end; ++k) f(rows[k]) += step;
            return id;
        };
        if (depth >= max_depth || n < 2 * min_leaf) return leaf();

        const double base = total * total / n;
        double best_gain = 0.0;
        int best_feature = -1;
        std::size_t best_bin = 0;
        const std::size_t n_features = bins.cuts.size();
        constexpr std::size_t kBins = BinnedFeatures::kMaxBins;
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t k = begin; k < end; ++k) {
            const auto r = static_cast<std::size_t>(rows[k]);
            const double t = target(static_cast<Eigen::Index>(r));
            const std::uint8_t* c = bins.codes.data() + r * n_features;
            for (std::size_t j = 0; j < n_features; ++j) {
                sum[j * kBins + c[j]] += t;
                ++count[j * kBins + c[j]];
            }
        }
        for (std::size_t j = 0; j < n_features; ++j) {
            const auto& cuts = bins.cuts[j];
            double left = 0.0;
            int n_left = 0;
            for (std::size_t c = 0; c < cuts.size(); ++c) {
                left += sum[j * kBins + c];
                n_left += count[j * kBins + c];
                if (n_left < min_leaf) continue;
                if (n - n_left < min_leaf) break;
                const double right = total - left;
                const double gain = left * left / n_left + right * right / (n - n_left) - base;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(j);
                    best_bin = c;
                }
            }
        }
        if (best_feature < 0) return leaf();

        std::size_t lo = begin;
        std::size_t hi = 0;
        for (std::size_t k = begin; k < end; ++k) {
            const int r = rows[k];
            const auto cell = static_cast<std::size_t>(r) * n_features + static_cast<std::size_t>(best_feature);
            if (bins.codes[cell] <= best_bin) {
                rows[lo++] = r;
            } else {
                scratch[hi++] = r;
            }
        }
        std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
                  rows.begin() + static_cast<std::ptrdiff_t>(lo));
        const std::size_t mid = lo;
        const int l = build(begin, mid, depth + 1);
        const int h = build(mid, end, depth + 1);
        auto& node = nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = bins.cuts[static_cast<std::size_t>(best_feature)][best_bin];
        node.left = l;
        node.right = h;
        return id;
    }
};

}  // namespace

void GbtModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    require_rows(x, y);
    const auto bins = bin_features(x, presort_columns(x));
    const auto n = static_cast<std::size_t>(x.rows());
    base_ = y.mean();
    Eigen::VectorXd f = Eigen::VectorXd::Constant(y.size(), base_);
    Eigen::VectorXd residual(y.size());
    trees_.assign(static_cast<std::size_t>(n_trees_), {});
    for (auto& tree : trees_) {
        residual = y - f;
        tree.nodes.clear();
        HistTreeBuilder b{bins, residual, max_depth_, min_leaf_, rate_, f, tree.nodes,
                          std::vector<int>(n), std::vector<int>(n),
                          std::vector<double>(BinnedFeatures::kMaxBins * bins.cuts.size()),
                          std::vector<int>(BinnedFeatures::kMaxBins * bins.cuts.size())};
        std::iota(b.rows.begin(), b.rows.end(), 0);
        b.build(0, n, 0);
    }
    fitted_ = true;
}

Eigen::VectorXd GbtModel::predict(const Eigen::MatrixXd& x) const {
    require_fitted(fitted_);
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), base_);
    for (const auto& tree : trees_) {
        for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) += rate_ * tree.predict_row(x, r);
    }
    return out;
}

}  // namespace alphadesk
