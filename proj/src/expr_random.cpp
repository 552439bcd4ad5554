// Random instantiation and mutation of alpha expressions.
#include <algorithm>
#include <functional>
#include <random>

#include "alphadesk/expr.hpp"

namespace alphadesk {

namespace {

const AlphaExpr* first_field(const AlphaExpr& e) {
    if (e.is_field()) return &e;
    if (!e.is_call()) return nullptr;
    const auto& sig = signature(e.op);
    for (std::size_t k = 0; k < e.args.size(); ++k) {
        const Slot s = sig.slots[k];
        if (s == Slot::Series || s == Slot::Boolean || s == Slot::Branch) {
            if (const auto* f = first_field(e.args[k])) return f;
        }
    }
    return nullptr;
}

bool params_only_after_first(const OperatorSignature& sig) {
    if (sig.slots.empty() || sig.slots[0] != Slot::Series) return false;
    for (std::size_t k = 1; k < sig.slots.size(); ++k) {
        const Slot s = sig.slots[k];
        if (s != Slot::Window && s != Slot::Count && s != Slot::Constant) return false;
    }
    return true;
}

class Generator {
public:
    Generator(std::mt19937_64& rng, const Schema& schema, const WindowMenu& windows)
        : rng_(rng), schema_(schema), windows_(windows) {}

    std::size_t uniform(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
    }
    bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

    bool allowed(const OperatorSignature& s) const {
        return s.category != Category::Group || schema_.has_groups;
    }

    static bool needs_boolean(const OperatorSignature& s) {
        return std::find(s.slots.begin(), s.slots.end(), Slot::Boolean) != s.slots.end();
    }

    AlphaExpr field() { return AlphaExpr::field(schema_.fields[uniform(schema_.fields.size())]); }

    const std::vector<int>& menu_for(const AlphaExpr& data) const {
        if (const auto* f = first_field(data)) {
            auto it = windows_.find(f->name);
            if (it != windows_.end() && !it->second.empty()) return it->second;
        }
        return kDefaultWindows;
    }

    int window_for(const AlphaExpr& data) {
        const auto& m = menu_for(data);
        return m[uniform(m.size())];
    }

    /// Sub-expression for a series slot with at most `budget` operator levels.
    AlphaExpr series(int budget, bool allow_leaf = true) {
        if (budget <= 0 || (allow_leaf && chance(0.3))) return field();
        std::vector<const OperatorSignature*> ops;
        for (const auto& s : operator_catalog()) {
            if (!allowed(s)) continue;
            if (needs_boolean(s) && budget < 2) continue;
            ops.push_back(&s);
        }
        return fill(*ops[uniform(ops.size())], budget);
    }

    AlphaExpr boolean(int budget) {
        std::vector<const OperatorSignature*> ops;
        for (const auto& s : operator_catalog()) {
            if (s.output != Domain::Boolean) continue;
            if (needs_boolean(s) && budget < 2) continue;
            ops.push_back(&s);
        }
        return fill(*ops[uniform(ops.size())], budget);
    }

    AlphaExpr branch(int budget) {
        if (chance(0.2)) return AlphaExpr::num(static_cast<double>(uniform(3)) - 1.0);
        return series(budget);
    }

    AlphaExpr fill(const OperatorSignature& sig, int budget) {
        std::vector<AlphaExpr> args(sig.slots.size());
        for (std::size_t k = 0; k < sig.slots.size(); ++k) {
            switch (sig.slots[k]) {
                case Slot::Series: args[k] = series(budget - 1); break;
                case Slot::Boolean: args[k] = boolean(budget - 1); break;
                case Slot::Branch: args[k] = branch(budget - 1); break;
                default: break;
            }
        }
        fill_params(sig, args);
        return AlphaExpr::call(sig.op, std::move(args));
    }

    void fill_params(const OperatorSignature& sig, std::vector<AlphaExpr>& args) {
        const AlphaExpr& data = args[0];
        if (sig.op == Op::TsMacd) {
            const auto& m = menu_for(data);
            std::size_t a = uniform(m.size());
            std::size_t b = uniform(m.size());
            if (m.size() > 1) {
                while (b == a) b = uniform(m.size());
            }
            args[1] = AlphaExpr::num(std::min(m[a], m[b]));
            args[2] = AlphaExpr::num(std::max(m[a], m[b]));
            return;
        }
        if (sig.op == Op::Tail) {
            const double k = static_cast<double>(1 + uniform(3));
            args[1] = AlphaExpr::num(-k);
            args[2] = AlphaExpr::num(k);
            args[3] = AlphaExpr::num(static_cast<double>(uniform(3)) - 1.0);
            return;
        }
        for (std::size_t k = 0; k < sig.slots.size(); ++k) {
            if (sig.slots[k] == Slot::Window) args[k] = AlphaExpr::num(window_for(data));
            if (sig.slots[k] == Slot::Count) args[k] = AlphaExpr::num(static_cast<double>(2 + uniform(9)));
        }
    }

    /// Feature templates: the documented shapes plus the generic
    /// <ts_op>(<data>, d) and <data1> <math_op> <data2> forms.
    std::optional<AlphaExpr> templated(int max_depth) {
        using E = AlphaExpr;
        auto x = field();
        auto y = field();
        if (schema_.fields.size() > 1) {
            while (y.name == x.name) y = field();
        }
        auto win = [&](const AlphaExpr& data) { return E::num(window_for(data)); };
        auto xy = E::call(Op::Multiply, {x, y});
        std::vector<std::pair<int, std::function<E()>>> shapes = {
            {1, [&] { return E::call(Op::TsRegression, {y, x, win(y)}); }},
            {3, [&] { return E::call(Op::Neg, {E::call(Op::TsArgMax, {xy, win(x)})}); }},
            {3, [&] { return E::call(Op::TsSkew, {E::call(Op::TsRank, {xy, win(x)}), win(x)}); }},
            {3, [&] { return E::call(Op::TsIr, {E::call(Op::TsZscore, {xy, win(x)}), win(x)}); }},
            {2, [&] { return E::call(Op::Rank, {E::call(Op::TsCorr, {x, y, win(x)})}); }},
            {2, [&] { return E::call(Op::Rank, {E::call(Op::TsCoKurtosis, {x, y, win(x)})}); }},
            {2, [&] { return E::call(Op::Rank, {E::call(Op::TsCoSkewness, {x, y, win(x)})}); }},
            {2, [&] { return E::call(Op::Normalize, {E::call(Op::TsArgMax, {x, win(x)})}); }},
            {2, [&] { return E::call(Op::Rank, {E::call(Op::Divide, {x, y})}); }},
            {1, [&] {
                 std::vector<const OperatorSignature*> ops;
                 for (const auto& s : operator_catalog()) {
                     if (s.category == Category::TimeSeries && s.slots.size() == 2) ops.push_back(&s);
                 }
                 const auto* s = ops[uniform(ops.size())];
                 return E::call(s->op, {x, win(x)});
             }},
            {1, [&] {
                 static constexpr Op kMath[] = {Op::Add, Op::Subtract, Op::Multiply, Op::Divide};
                 return E::call(kMath[uniform(4)], {x, y});
             }},
        };
        std::vector<std::size_t> fit;
        for (std::size_t k = 0; k < shapes.size(); ++k) {
            if (shapes[k].first <= max_depth) fit.push_back(k);
        }
        if (fit.empty()) return std::nullopt;
        return shapes[fit[uniform(fit.size())]].second();
    }

    std::mt19937_64& rng() { return rng_; }
    const Schema& schema() const { return schema_; }

private:
    std::mt19937_64& rng_;
    const Schema& schema_;
    const WindowMenu& windows_;
};

struct Site {
    std::vector<std::size_t> path;
    Slot slot;
    int level;  // number of call ancestors
    const AlphaExpr* node;
    const AlphaExpr* parent;
};

void collect(const AlphaExpr& e, std::vector<std::size_t>& path, Slot slot, int level,
             const AlphaExpr* parent, std::vector<Site>& out) {
    out.push_back({path, slot, level, &e, parent});
    if (!e.is_call()) return;
    const auto& sig = signature(e.op);
    for (std::size_t k = 0; k < e.args.size(); ++k) {
        path.push_back(k);
        collect(e.args[k], path, sig.slots[k], level + 1, &e, out);
        path.pop_back();
    }
}

std::vector<Site> sites_of(const AlphaExpr& e) {
    std::vector<Site> out;
    std::vector<std::size_t> path;
    collect(e, path, Slot::Series, 0, nullptr, out);
    return out;
}

AlphaExpr replace_at(const AlphaExpr& root, std::span<const std::size_t> path, AlphaExpr repl) {
    if (path.empty()) return repl;
    AlphaExpr copy = root;
    AlphaExpr* cur = &copy;
    for (std::size_t idx : path) cur = &cur->args[idx];
    *cur = std::move(repl);
    return copy;
}

template <class Pred>
std::vector<const Site*> filter(const std::vector<Site>& sites, Pred pred) {
    std::vector<const Site*> out;
    for (const auto& s : sites) {
        if (pred(s)) out.push_back(&s);
    }
    return out;
}

std::optional<AlphaExpr> try_move(Generator& gen, MutationMove move, const AlphaExpr& e) {
    const auto& schema = gen.schema();
    const auto sites = sites_of(e);
    auto pick = [&](const std::vector<const Site*>& v) { return v[gen.uniform(v.size())]; };

    switch (move) {
        case MutationMove::ReplaceOperator: {
            auto alternatives = [&](const AlphaExpr& node) {
                std::vector<Op> alts;
                const auto& sig = signature(node.op);
                for (const auto& s : operator_catalog()) {
                    if (s.op != sig.op && s.slots == sig.slots && s.output == sig.output &&
                        gen.allowed(s)) {
                        alts.push_back(s.op);
                    }
                }
                return alts;
            };
            auto cands = filter(sites, [&](const Site& s) {
                return s.node->is_call() && !alternatives(*s.node).empty();
            });
            if (cands.empty()) return std::nullopt;
            const Site* site = pick(cands);
            const auto alts = alternatives(*site->node);
            AlphaExpr repl = *site->node;
            repl.op = alts[gen.uniform(alts.size())];
            return replace_at(e, site->path, std::move(repl));
        }
        case MutationMove::JitterWindow: {
            auto options = [&](const Site& s) {
                std::vector<int> out;
                const auto& menu = gen.menu_for(s.parent->args[0]);
                for (int w : menu) {
                    if (w != s.node->number) out.push_back(w);
                }
                return out;
            };
            auto cands = filter(sites, [&](const Site& s) {
                return s.slot == Slot::Window && !options(s).empty();
            });
            if (cands.empty()) return std::nullopt;
            const Site* site = pick(cands);
            const auto opts = options(*site);
            return replace_at(e, site->path, AlphaExpr::num(opts[gen.uniform(opts.size())]));
        }
        case MutationMove::SwapField: {
            if (schema.fields.size() < 2) return std::nullopt;
            auto cands = filter(sites, [](const Site& s) { return s.node->is_field(); });
            if (cands.empty()) return std::nullopt;
            const Site* site = pick(cands);
            AlphaExpr f = gen.field();
            while (f.name == site->node->name) f = gen.field();
            return replace_at(e, site->path, std::move(f));
        }
        case MutationMove::WrapRoot: {
            if (depth(e) + 1 > schema.max_depth) return std::nullopt;
            std::vector<const OperatorSignature*> ops;
            for (const auto& s : operator_catalog()) {
                if (gen.allowed(s) && s.output == Domain::Real && params_only_after_first(s)) {
                    ops.push_back(&s);
                }
            }
            const auto* sig = ops[gen.uniform(ops.size())];
            std::vector<AlphaExpr> args(sig->slots.size());
            args[0] = e;
            gen.fill_params(*sig, args);
            return AlphaExpr::call(sig->op, std::move(args));
        }
        case MutationMove::ReplaceSubtree: {
            auto budget = [&](const Site& s) { return std::min(2, schema.max_depth - s.level); };
            auto cands = filter(sites, [&](const Site& s) {
                if (s.slot == Slot::Boolean) return budget(s) >= 1;
                return s.slot == Slot::Series || s.slot == Slot::Branch;
            });
            if (cands.empty()) return std::nullopt;
            const Site* site = pick(cands);
            const int b = std::max(0, budget(*site));
            AlphaExpr repl = site->slot == Slot::Boolean  ? gen.boolean(b)
                             : site->slot == Slot::Branch ? gen.branch(b)
                                                          : gen.series(b);
            return replace_at(e, site->path, std::move(repl));
        }
        case MutationMove::PruneToChild: {
            auto children = [&](const Site& s) {
                std::vector<std::size_t> out;
                const auto& sig = signature(s.node->op);
                for (std::size_t k = 0; k < s.node->args.size(); ++k) {
                    const Slot cs = sig.slots[k];
                    const auto& c = s.node->args[k];
                    if (cs != Slot::Series && cs != Slot::Boolean && cs != Slot::Branch) continue;
                    if (c.is_number()) continue;
                    if (s.slot == Slot::Boolean && domain_of(c) != Domain::Boolean) continue;
                    out.push_back(k);
                }
                return out;
            };
            auto cands = filter(sites, [&](const Site& s) {
                return s.node->is_call() && s.slot != Slot::Window && s.slot != Slot::Count &&
                       s.slot != Slot::Constant && !children(s).empty();
            });
            if (cands.empty()) return std::nullopt;
            const Site* site = pick(cands);
            const auto ks = children(*site);
            return replace_at(e, site->path, site->node->args[ks[gen.uniform(ks.size())]]);
        }
    }
    return std::nullopt;
}

bool acceptable(const AlphaExpr& cand, const AlphaExpr& original, const Schema& schema) {
    return !(cand == original) && depth(cand) <= schema.max_depth && validate(cand, schema).empty();
}

constexpr int kAttemptsPerMove = 8;

}  // namespace

AlphaExpr random_instantiate(std::uint64_t seed, const Schema& schema, const WindowMenu& windows,
                             int max_depth) {
    if (schema.fields.empty()) throw Error(ErrorCode::InvalidConfig, "schema has no fields");
    std::mt19937_64 rng(seed);
    Generator gen(rng, schema, windows);
    if (max_depth <= 0) return gen.field();
    if (gen.chance(0.5)) {
        if (auto t = gen.templated(max_depth)) return *t;
    }
    return gen.series(max_depth, /*allow_leaf=*/false);
}

std::optional<AlphaExpr> apply_move(std::uint64_t seed, MutationMove move, const AlphaExpr& e,
                                    const Schema& schema, const WindowMenu& windows) {
    std::mt19937_64 rng(seed);
    Generator gen(rng, schema, windows);
    for (int attempt = 0; attempt < kAttemptsPerMove; ++attempt) {
        auto cand = try_move(gen, move, e);
        if (!cand) return std::nullopt;
        if (acceptable(*cand, e, schema)) return cand;
    }
    return std::nullopt;
}

MutationResult mutate_with_info(std::uint64_t seed, const AlphaExpr& e, const Schema& schema,
                                const WindowMenu& windows) {
    std::mt19937_64 rng(seed);
    std::vector<MutationMove> moves = {MutationMove::ReplaceOperator, MutationMove::JitterWindow,
                                       MutationMove::SwapField,       MutationMove::WrapRoot,
                                       MutationMove::ReplaceSubtree,  MutationMove::PruneToChild};
    std::shuffle(moves.begin(), moves.end(), rng);
    Generator gen(rng, schema, windows);
    for (MutationMove move : moves) {
        for (int attempt = 0; attempt < kAttemptsPerMove; ++attempt) {
            auto cand = try_move(gen, move, e);
            if (!cand) break;
            if (acceptable(*cand, e, schema)) return {std::move(*cand), move};
        }
    }
    return {random_instantiate(derive_seed(seed, 0xfa11bac4), schema, windows, schema.max_depth),
            std::nullopt};
}

AlphaExpr mutate(std::uint64_t seed, const AlphaExpr& e, const Schema& schema,
                 const WindowMenu& windows) {
    return mutate_with_info(seed, e, schema, windows).expr;
}

}  // namespace alphadesk
