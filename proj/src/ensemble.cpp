#include "alphadesk/ensemble.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

namespace alphadesk {

// ---- datasets ---------------------------------------------------------------

namespace {

// Cells of `range` where every feature is present, with their feature rows.
struct FeatureRows {
    Eigen::MatrixXd x;
    std::vector<std::size_t> dates;
    std::vector<std::size_t> symbols;
};

FeatureRows feature_rows(std::span<const SignalMatrix> features, DateRange range) {
    FeatureRows out;
    if (features.empty()) return out;
    const std::size_t n_sym = features.front().cols();
    const std::size_t end = std::min(range.end, features.front().rows());
    for (std::size_t t = range.begin; t < end; ++t) {
        for (std::size_t j = 0; j < n_sym; ++j) {
            bool ok = true;
            for (const auto& f : features) {
                if (is_missing(f(t, j))) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            out.dates.push_back(t);
            out.symbols.push_back(j);
        }
    }
    out.x.resize(static_cast<Eigen::Index>(out.dates.size()), static_cast<Eigen::Index>(features.size()));
    for (std::size_t r = 0; r < out.dates.size(); ++r) {
        for (std::size_t c = 0; c < features.size(); ++c) {
            out.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                features[c](out.dates[r], out.symbols[r]);
        }
    }
    return out;
}

SignalMatrix scatter(const FeatureRows& rows, const Eigen::VectorXd& values, std::size_t n_dates,
                     std::size_t n_symbols) {
    SignalMatrix out(n_dates, n_symbols);
    for (std::size_t r = 0; r < rows.dates.size(); ++r) {
        const double v = values(static_cast<Eigen::Index>(r));
        out(rows.dates[r], rows.symbols[r]) = std::isfinite(v) ? v : kMissing;
    }
    return out;
}

}  // namespace

SupervisedDataset build_dataset(std::span<const SignalMatrix> features, const PanelSet& panel,
                                DateRange range, std::size_t horizon) {
    if (horizon == 0) throw Error(ErrorCode::InvalidConfig, "horizon must be >= 1");
    if (!panel.has_field("returns")) throw Error(ErrorCode::MissingReturns, "panel has no returns field");
    if (features.empty()) throw Error(ErrorCode::EmptyDataset, "no features");
    for (const auto& f : features) {
        if (f.rows() != panel.n_dates() || f.cols() != panel.n_symbols()) {
            throw Error(ErrorCode::ShapeMismatch, "feature does not match the panel shape");
        }
    }
    const Matrix& ret = panel.field("returns").values;
    const std::size_t end = std::min(range.end, panel.n_dates());

    SupervisedDataset ds;
    ds.range = range;
    ds.horizon = horizon;
    std::vector<double> targets;
    for (std::size_t t = range.begin; t + horizon < end; ++t) {
        for (std::size_t j = 0; j < panel.n_symbols(); ++j) {
            bool ok = true;
            for (const auto& f : features) {
                if (is_missing(f(t, j))) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            double growth = 1.0;
            for (std::size_t h = 1; h <= horizon && ok; ++h) {
                const double r = ret(t + h, j);
                if (is_missing(r)) ok = false;
                else growth *= 1.0 + r;
            }
            if (!ok) continue;
            ds.dates.push_back(t);
            ds.symbols.push_back(j);
            targets.push_back(growth - 1.0);
        }
    }
    if (ds.dates.empty()) throw Error(ErrorCode::EmptyDataset, "no complete rows in range");
    const auto n = static_cast<Eigen::Index>(ds.dates.size());
    ds.x.resize(n, static_cast<Eigen::Index>(features.size()));
    ds.y = Eigen::Map<const Eigen::VectorXd>(targets.data(), n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < features.size(); ++c) {
            ds.x(r, static_cast<Eigen::Index>(c)) =
                features[c](ds.dates[static_cast<std::size_t>(r)], ds.symbols[static_cast<std::size_t>(r)]);
        }
    }
    return ds;
}

SupervisedDataset build_dataset(const AlphaArchive& archive, const std::vector<std::size_t>& alpha_ids,
                                const PanelSet& panel, DateRange range, std::size_t horizon) {
    std::vector<SignalMatrix> features;
    for (std::size_t id : alpha_ids) {
        if (id >= archive.entries.size()) throw Error(ErrorCode::InvalidConfig, "alpha id out of range");
        features.push_back(evaluate(archive.entries[id].expr, panel));
    }
    return build_dataset(features, panel, range, horizon);
}

FitOutput fit_predict(const ModelSpec& model, const SupervisedDataset& train,
                      std::span<const SignalMatrix> features, DateRange score_range) {
    if (train.rows() == 0) throw Error(ErrorCode::EmptyDataset, "empty training set");
    if (static_cast<Eigen::Index>(features.size()) != train.x.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "feature count differs from the training set");
    }
    auto m = make_model(model);
    m->fit(train.x, train.y);
    const auto rows = feature_rows(features, score_range);
    FitOutput out;
    out.train_prediction = m->predict(train.x);
    out.signal = scatter(rows, rows.x.rows() > 0 ? m->predict(rows.x) : Eigen::VectorXd(),
                         features.front().rows(), features.front().cols());
    out.singular_fallback = m->singular_fallback();
    return out;
}

// ---- combiners --------------------------------------------------------------

std::string_view to_string(CombinerKind k) noexcept {
    switch (k) {
        case CombinerKind::WeightedVote: return "weighted_vote";
        case CombinerKind::Stacking: return "stacking";
        case CombinerKind::Bagging: return "bagging";
    }
    return "unknown";
}

namespace {

void check_vote_weights(const std::vector<double>& w, std::size_t members) {
    if (w.size() != members) throw Error(ErrorCode::WeightMismatch, "one weight per member required");
    double total = 0.0;
    for (double v : w) {
        if (!(v >= 0.0)) throw Error(ErrorCode::WeightMismatch, "weights must be non-negative");
        total += v;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw Error(ErrorCode::WeightMismatch, "weights must sum to 1");
}

// Linear map of member values with missing propagation over members with a nonzero coefficient.
SignalMatrix linear_blend(std::span<const SignalMatrix> members, double intercept,
                          const std::vector<double>& coef) {
    const auto& first = members.front();
    SignalMatrix out(first.rows(), first.cols());
    auto o = out.values();
    for (std::size_t k = 0; k < o.size(); ++k) {
        double acc = intercept;
        bool ok = true;
        for (std::size_t m = 0; m < members.size(); ++m) {
            if (coef[m] == 0.0) continue;
            const double v = members[m].values()[k];
            if (is_missing(v)) {
                ok = false;
                break;
            }
            acc += coef[m] * v;
        }
        if (ok && std::isfinite(acc)) o[k] = acc;
    }
    return out;
}

}  // namespace

SignalMatrix combine(std::span<const SignalMatrix> member_signals,
                     std::span<const Eigen::VectorXd> member_train_predictions,
                     const Combiner& combiner, const SupervisedDataset& train) {
    if (member_signals.empty()) throw Error(ErrorCode::WeightMismatch, "no members to combine");
    for (const auto& s : member_signals) {
        if (!s.same_shape(member_signals.front())) {
            throw Error(ErrorCode::ShapeMismatch, "member signals are not aligned");
        }
    }
    const std::size_t m = member_signals.size();
    switch (combiner.kind) {
        case CombinerKind::WeightedVote:
            check_vote_weights(combiner.weights, m);
            return linear_blend(member_signals, 0.0, combiner.weights);
        case CombinerKind::Bagging:
            return linear_blend(member_signals, 0.0, std::vector<double>(m, 1.0 / static_cast<double>(m)));
        case CombinerKind::Stacking: {
            if (member_train_predictions.size() != m) {
                throw Error(ErrorCode::WeightMismatch, "one train prediction vector per member required");
            }
            const auto n = static_cast<Eigen::Index>(train.rows());
            Eigen::MatrixXd design(n, static_cast<Eigen::Index>(m) + 1);
            design.col(0).setOnes();
            for (std::size_t k = 0; k < m; ++k) {
                if (member_train_predictions[k].size() != n) {
                    throw Error(ErrorCode::ShapeMismatch, "train predictions do not match the dataset");
                }
                design.col(static_cast<Eigen::Index>(k) + 1) = member_train_predictions[k];
            }
            const Eigen::VectorXd c = design.colPivHouseholderQr().solve(train.y);
            std::vector<double> coef(m);
            for (std::size_t k = 0; k < m; ++k) coef[k] = c(static_cast<Eigen::Index>(k) + 1);
            return linear_blend(member_signals, c(0), coef);
        }
    }
    throw Error(ErrorCode::InvalidConfig, "unhandled combiner");
}

// ---- specs ------------------------------------------------------------------

void EnsembleSpec::validate() const {
    if (alpha_ids.size() < kMinEnsembleAlphas || alpha_ids.size() > kMaxEnsembleAlphas) {
        throw Error(ErrorCode::InvalidConfig, "an ensemble uses 10 to 20 alphas");
    }
    if (!std::is_sorted(alpha_ids.begin(), alpha_ids.end()) ||
        std::adjacent_find(alpha_ids.begin(), alpha_ids.end()) != alpha_ids.end()) {
        throw Error(ErrorCode::InvalidConfig, "alpha ids must be unique and ascending");
    }
    if (members.empty()) throw Error(ErrorCode::InvalidConfig, "an ensemble needs a member");
    for (const auto& m : members) m.validate();
    if (horizon == 0) throw Error(ErrorCode::InvalidConfig, "horizon must be >= 1");
    if (combiner.kind == CombinerKind::WeightedVote) check_vote_weights(combiner.weights, members.size());
    if (combiner.kind == CombinerKind::Bagging && combiner.n_bags == 0) {
        throw Error(ErrorCode::InvalidConfig, "n_bags must be >= 1");
    }
}

nlohmann::json to_json(const EnsembleSpec& spec, const AlphaPool* pool) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : spec.members) members.push_back(to_json(m));
    nlohmann::json comb{{"kind", std::string(to_string(spec.combiner.kind))}};
    if (spec.combiner.kind == CombinerKind::WeightedVote) comb["weights"] = spec.combiner.weights;
    if (spec.combiner.kind == CombinerKind::Bagging) {
        comb["n_bags"] = spec.combiner.n_bags;
        comb["bootstrap"] = spec.combiner.bootstrap;
    }
    nlohmann::json j{{"alpha_ids", spec.alpha_ids},
                     {"members", members},
                     {"combiner", comb},
                     {"horizon", spec.horizon},
                     {"seed", spec.seed}};
    if (pool != nullptr) {
        nlohmann::json texts = nlohmann::json::array();
        for (std::size_t id : spec.alpha_ids) texts.push_back(pool->text(id));
        j["alphas"] = texts;
    }
    return j;
}

// ---- pool -------------------------------------------------------------------

AlphaPool AlphaPool::from_archive(const AlphaArchive& archive, const PanelSet& panel, std::size_t top_k) {
    std::vector<std::size_t> order(archive.entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return archive.entries[a].validation.sharpe > archive.entries[b].validation.sharpe;
    });
    order.resize(std::min(order.size(), top_k));
    std::sort(order.begin(), order.end());
    AlphaPool pool;
    for (std::size_t id : order) {
        const auto& e = archive.entries[id];
        pool.ids_.push_back(id);
        pool.signals_.push_back(evaluate(e.expr, panel));
        pool.texts_.push_back(e.text);
        pool.sharpes_.push_back(e.validation.sharpe);
    }
    return pool;
}

std::size_t AlphaPool::index_of(std::size_t archive_id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), archive_id);
    if (it == ids_.end() || *it != archive_id) {
        throw Error(ErrorCode::InvalidConfig, "alpha " + std::to_string(archive_id) + " is not in the pool");
    }
    return static_cast<std::size_t>(it - ids_.begin());
}

const SignalMatrix& AlphaPool::signal(std::size_t archive_id) const { return signals_[index_of(archive_id)]; }
const std::string& AlphaPool::text(std::size_t archive_id) const { return texts_[index_of(archive_id)]; }
double AlphaPool::validation_sharpe(std::size_t archive_id) const { return sharpes_[index_of(archive_id)]; }

// ---- evaluation -------------------------------------------------------------

EnsembleEvaluation evaluate_ensemble(const EnsembleSpec& spec, const AlphaPool& pool,
                                     const PanelSet& panel, const SampleSplit& split, bool with_test,
                                     double cost_bps) {
    spec.validate();
    std::vector<SignalMatrix> features;
    features.reserve(spec.alpha_ids.size());
    for (std::size_t id : spec.alpha_ids) features.push_back(pool.signal(id));
    const auto train = build_dataset(features, panel, split.train, spec.horizon);

    const std::size_t first = split.validation.begin > 0 ? split.validation.begin - 1 : 0;
    const DateRange score{first, with_test ? split.test.end : split.validation.end};
    const auto rows = feature_rows(features, score);

    EnsembleEvaluation out;
    std::vector<SignalMatrix> member_signals;
    std::vector<Eigen::VectorXd> member_train;
    // In-sample member predictions are only consumed by the stacking combiner.
    const bool stacking = spec.combiner.kind == CombinerKind::Stacking;
    for (std::size_t m = 0; m < spec.members.size(); ++m) {
        const std::size_t bags = spec.combiner.kind == CombinerKind::Bagging ? spec.combiner.n_bags : 1;
        Eigen::VectorXd train_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train.rows()));
        Eigen::VectorXd score_sum = Eigen::VectorXd::Zero(rows.x.rows());
        for (std::size_t b = 0; b < bags; ++b) {
            auto model = make_model(spec.members[m]);
            if (spec.combiner.kind == CombinerKind::Bagging && spec.combiner.bootstrap) {
                std::mt19937_64 rng(derive_seed(spec.seed, m * 1024 + b));
                std::uniform_int_distribution<Eigen::Index> pick(0, static_cast<Eigen::Index>(train.rows()) - 1);
                Eigen::MatrixXd xb(train.x.rows(), train.x.cols());
                Eigen::VectorXd yb(train.y.size());
                for (Eigen::Index r = 0; r < xb.rows(); ++r) {
                    const auto src = pick(rng);
                    xb.row(r) = train.x.row(src);
                    yb(r) = train.y(src);
                }
                model->fit(xb, yb);
            } else {
                model->fit(train.x, train.y);
            }
            out.singular_fallback = out.singular_fallback || model->singular_fallback();
            if (stacking) train_sum += model->predict(train.x);
            if (rows.x.rows() > 0) score_sum += model->predict(rows.x);
        }
        const double inv = 1.0 / static_cast<double>(bags);
        member_train.push_back(bags == 1 ? train_sum : Eigen::VectorXd(train_sum * inv));
        member_signals.push_back(scatter(rows, bags == 1 ? score_sum : Eigen::VectorXd(score_sum * inv),
                                         panel.n_dates(), panel.n_symbols()));
    }
    const auto combined = combine(member_signals, member_train, spec.combiner, train);
    const auto weights = signal_to_weights(combined, score);
    auto val = run_backtest(weights, panel, cost_bps, split.validation);
    out.validation = val.report;
    out.validation_pnl = std::move(val.pnl);
    if (with_test) {
        auto test = run_backtest(weights, panel, cost_bps, split.test);
        out.test = test.report;
        out.test_pnl = std::move(test.pnl);
    }
    return out;
}

// ---- random specs and moves -------------------------------------------------

namespace {

constexpr double kLambdas[] = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
constexpr int kNeighbours[] = {5, 10, 25, 50, 100};
constexpr int kTreeDepths[] = {1, 2, 3, 4, 5};
constexpr int kGbtDepths[] = {1, 2, 3};
constexpr int kMinLeaves[] = {20, 50, 100, 200};
constexpr int kTreeCounts[] = {10, 25, 50, 100};
constexpr double kRates[] = {0.05, 0.1, 0.2};
constexpr std::size_t kBagCounts[] = {3, 4, 5};
constexpr ModelFamily kFamilies[] = {ModelFamily::Ols, ModelFamily::Ridge, ModelFamily::Logistic,
                                     ModelFamily::Knn, ModelFamily::DecisionTree, ModelFamily::Gbt};

template <class T, std::size_t N>
T draw(std::mt19937_64& rng, const T (&menu)[N]) {
    return menu[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

std::size_t uniform(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

ModelSpec random_model(std::mt19937_64& rng, ModelFamily family) {
    ModelSpec m;
    m.family = family;
    switch (family) {
        case ModelFamily::Ridge:
        case ModelFamily::Logistic: m.lambda = draw(rng, kLambdas); break;
        case ModelFamily::Knn: m.k = draw(rng, kNeighbours); break;
        case ModelFamily::DecisionTree:
            m.max_depth = draw(rng, kTreeDepths);
            m.min_leaf = draw(rng, kMinLeaves);
            break;
        case ModelFamily::Gbt:
            m.n_trees = draw(rng, kTreeCounts);
            m.learning_rate = draw(rng, kRates);
            m.max_depth = draw(rng, kGbtDepths);
            m.min_leaf = draw(rng, kMinLeaves);
            break;
        default: break;
    }
    return m;
}

bool has_hyperparameters(const ModelSpec& m) {
    return m.family != ModelFamily::Ols && m.family != ModelFamily::Plugin;
}

// Redraws one hyperparameter until it changes.
void jitter(std::mt19937_64& rng, ModelSpec& m) {
    auto redraw = [&](auto& field, const auto& menu) {
        const auto old = field;
        while (field == old) field = draw(rng, menu);
    };
    switch (m.family) {
        case ModelFamily::Ridge:
        case ModelFamily::Logistic: redraw(m.lambda, kLambdas); break;
        case ModelFamily::Knn: redraw(m.k, kNeighbours); break;
        case ModelFamily::DecisionTree:
            if (uniform(rng, 2) == 0) redraw(m.max_depth, kTreeDepths);
            else redraw(m.min_leaf, kMinLeaves);
            break;
        case ModelFamily::Gbt:
            switch (uniform(rng, 4)) {
                case 0: redraw(m.n_trees, kTreeCounts); break;
                case 1: redraw(m.learning_rate, kRates); break;
                case 2: redraw(m.max_depth, kGbtDepths); break;
                default: redraw(m.min_leaf, kMinLeaves); break;
            }
            break;
        default: break;
    }
}

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(n);
    double total = 0.0;
    for (double& v : w) total += (v = u(rng));
    for (double& v : w) v /= total;
    return w;
}

Combiner random_combiner(std::mt19937_64& rng, CombinerKind kind, std::size_t members) {
    Combiner c;
    c.kind = kind;
    if (kind == CombinerKind::WeightedVote) c.weights = random_weights(rng, members);
    if (kind == CombinerKind::Bagging) c.n_bags = draw(rng, kBagCounts);
    return c;
}

std::vector<std::size_t> outside(const AlphaPool& pool, const std::vector<std::size_t>& ids) {
    std::vector<std::size_t> out;
    for (std::size_t id : pool.ids()) {
        if (!std::binary_search(ids.begin(), ids.end(), id)) out.push_back(id);
    }
    return out;
}

std::optional<EnsembleSpec> apply_ensemble_move(std::mt19937_64& rng, EnsembleMove move,
                                                const EnsembleSpec& spec, const AlphaPool& pool) {
    EnsembleSpec next = spec;
    auto& ids = next.alpha_ids;
    const auto free = outside(pool, ids);
    switch (move) {
        case EnsembleMove::AddAlpha:
            if (ids.size() >= kMaxEnsembleAlphas || free.empty()) return std::nullopt;
            ids.push_back(free[uniform(rng, free.size())]);
            break;
        case EnsembleMove::DropAlpha:
            if (ids.size() <= kMinEnsembleAlphas) return std::nullopt;
            ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(uniform(rng, ids.size())));
            break;
        case EnsembleMove::SwapAlpha:
            if (free.empty()) return std::nullopt;
            ids[uniform(rng, ids.size())] = free[uniform(rng, free.size())];
            break;
        case EnsembleMove::ChangeFamily: {
            auto& m = next.members[uniform(rng, next.members.size())];
            ModelFamily f = m.family;
            while (f == m.family) f = draw(rng, kFamilies);
            m = random_model(rng, f);
            break;
        }
        case EnsembleMove::JitterHyper: {
            std::vector<std::size_t> tunable;
            for (std::size_t k = 0; k < next.members.size(); ++k) {
                if (has_hyperparameters(next.members[k])) tunable.push_back(k);
            }
            if (tunable.empty()) return std::nullopt;
            jitter(rng, next.members[tunable[uniform(rng, tunable.size())]]);
            break;
        }
        case EnsembleMove::SwitchCombiner: {
            constexpr CombinerKind kinds[] = {CombinerKind::WeightedVote, CombinerKind::Stacking,
                                              CombinerKind::Bagging};
            CombinerKind k = spec.combiner.kind;
            while (k == spec.combiner.kind) k = draw(rng, kinds);
            next.combiner = random_combiner(rng, k, next.members.size());
            break;
        }
    }
    std::sort(ids.begin(), ids.end());
    return next;
}

}  // namespace

EnsembleSpec random_ensemble_spec(std::uint64_t seed, const AlphaPool& pool, std::size_t horizon) {
    if (pool.size() < kMinEnsembleAlphas) {
        throw Error(ErrorCode::ArchiveTooSmall, "need at least 10 archived alphas, have " +
                                                    std::to_string(pool.size()));
    }
    std::mt19937_64 rng(seed);
    EnsembleSpec spec;
    spec.seed = seed;
    spec.horizon = horizon;
    const std::size_t hi = std::min(kMaxEnsembleAlphas, pool.size());
    const std::size_t count =
        std::uniform_int_distribution<std::size_t>(kMinEnsembleAlphas, hi)(rng);
    std::vector<std::size_t> ids = pool.ids();
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    spec.alpha_ids = std::move(ids);
    const std::size_t n_members = 1 + uniform(rng, 3);
    for (std::size_t k = 0; k < n_members; ++k) spec.members.push_back(random_model(rng, draw(rng, kFamilies)));
    constexpr CombinerKind kinds[] = {CombinerKind::WeightedVote, CombinerKind::Stacking,
                                      CombinerKind::Bagging};
    spec.combiner = random_combiner(rng, draw(rng, kinds), n_members);
    return spec;
}

EnsembleSearchResult ensemble_search(const EnsembleSearchConfig& cfg, const AlphaPool& pool,
                                     const PanelSet& panel, const SampleSplit& split) {
    if (pool.size() < kMinEnsembleAlphas) {
        throw Error(ErrorCode::ArchiveTooSmall, "need at least 10 archived alphas, have " +
                                                    std::to_string(pool.size()));
    }
    if (cfg.budget == 0) throw Error(ErrorCode::InvalidConfig, "budget must be >= 1");
    std::mt19937_64 rng(derive_seed(cfg.seed, 0));

    EnsembleSpec current;
    current.seed = derive_seed(cfg.seed, 1);
    current.horizon = cfg.horizon;
    std::vector<std::size_t> order = pool.ids();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pool.validation_sharpe(a) > pool.validation_sharpe(b);
    });
    current.alpha_ids.assign(order.begin(), order.begin() + kMinEnsembleAlphas);
    std::sort(current.alpha_ids.begin(), current.alpha_ids.end());
    current.members = {ModelSpec{}};
    current.combiner.weights = {1.0};

    EnsembleSearchResult result;
    auto cur = evaluate_ensemble(current, pool, panel, split, false, cfg.cost_bps);
    result.n_evaluated = 1;
    result.accepted_scores.push_back(cur.validation.sharpe);

    constexpr EnsembleMove kMoves[] = {EnsembleMove::AddAlpha,     EnsembleMove::DropAlpha,
                                       EnsembleMove::SwapAlpha,    EnsembleMove::ChangeFamily,
                                       EnsembleMove::JitterHyper,  EnsembleMove::SwitchCombiner};
    while (result.n_evaluated < cfg.budget) {
        std::optional<EnsembleSpec> proposal;
        // Draw moves uniformly until one is legal; ChangeFamily and SwitchCombiner always are.
        while (!proposal) proposal = apply_ensemble_move(rng, draw(rng, kMoves), current, pool);
        auto eval = evaluate_ensemble(*proposal, pool, panel, split, false, cfg.cost_bps);
        ++result.n_evaluated;
        if (accept(cur.validation.sharpe, eval.validation.sharpe, cur.validation.turnover,
                   eval.validation.turnover)) {
            current = std::move(*proposal);
            cur = std::move(eval);
            result.accepted_scores.push_back(cur.validation.sharpe);
        }
    }
    result.spec = current;
    result.evaluation = evaluate_ensemble(current, pool, panel, split, true, cfg.cost_bps);
    return result;
}

std::vector<StudyTrial> random_composition_study(std::uint64_t seed, const AlphaPool& pool,
                                                 const PanelSet& panel, const SampleSplit& split,
                                                 std::size_t n_trials, std::size_t horizon,
                                                 unsigned threads) {
    if (pool.size() < kMinEnsembleAlphas) {
        throw Error(ErrorCode::ArchiveTooSmall, "need at least 10 archived alphas, have " +
                                                    std::to_string(pool.size()));
    }
    if (n_trials == 0) throw Error(ErrorCode::InvalidConfig, "n_trials must be >= 1");
    std::vector<StudyTrial> trials(n_trials);
    auto run = [&](std::size_t i) {
        auto& t = trials[i];
        t.index = i;
        t.spec = random_ensemble_spec(derive_seed(seed, i), pool, horizon);
        t.validation = evaluate_ensemble(t.spec, pool, panel, split).validation;
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_trials)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n_trials; ++i) run(i);
    } else {
        std::vector<std::jthread> pool_threads;
        for (unsigned w = 0; w < workers; ++w) {
            pool_threads.emplace_back([&, w] {
                for (std::size_t i = w; i < n_trials; i += workers) run(i);
            });
        }
    }
    std::stable_sort(trials.begin(), trials.end(), [](const StudyTrial& a, const StudyTrial& b) {
        return a.validation.sharpe > b.validation.sharpe;
    });
    const std::size_t top = (n_trials + 9) / 10;
    for (std::size_t k = 0; k < top; ++k) {
        trials[k].test = evaluate_ensemble(trials[k].spec, pool, panel, split, true).test;
    }
    return trials;
}

nlohmann::json to_json(const StudyTrial& trial, const AlphaPool* pool) {
    return {{"trial", trial.index},
            {"spec", to_json(trial.spec, pool)},
            {"validation", to_json(trial.validation)},
            {"test", trial.test ? to_json(*trial.test) : nlohmann::json(nullptr)}};
}

void write_study(const std::vector<StudyTrial>& trials, const AlphaPool& pool,
                 const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (std::size_t k = 0; k < trials.size(); ++k) {
        auto j = to_json(trials[k], &pool);
        j["rank"] = k;
        out << j.dump() << '\n';
    }
}

}  // namespace alphadesk
