#include "alphadesk/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <unordered_map>

namespace alphadesk {

namespace {

using S = Slot;

std::vector<OperatorSignature> build_catalog() {
    const auto M = Category::Mathematical;
    const auto H = Category::Horizontal;
    const auto G = Category::Group;
    const auto L = Category::Logical;
    const auto T = Category::TimeSeries;
    const auto R = Category::Risk;
    const auto X = Category::Transformation;
    const auto K = Category::Technical;
    const auto real = Domain::Real;
    const auto boolean = Domain::Boolean;
    return {
        {Op::Add, "add", M, {S::Series, S::Series}, real, true},
        {Op::Subtract, "subtract", M, {S::Series, S::Series}, real},
        {Op::Multiply, "multiply", M, {S::Series, S::Series}, real, true},
        {Op::Divide, "divide", M, {S::Series, S::Series}, real},
        {Op::Power, "power", M, {S::Series, S::Series}, real},
        {Op::Min, "min", M, {S::Series, S::Series}, real, true},
        {Op::Max, "max", M, {S::Series, S::Series}, real, true},
        {Op::Neg, "neg", M, {S::Series}, real},
        {Op::Abs, "abs", M, {S::Series}, real},
        {Op::Sign, "sign", M, {S::Series}, real},
        {Op::Log, "log", M, {S::Series}, real},
        {Op::Sqrt, "sqrt", M, {S::Series}, real},
        {Op::Inverse, "inverse", M, {S::Series}, real},

        {Op::Rank, "rank", H, {S::Series}, real},
        {Op::Zscore, "zscore", H, {S::Series}, real},
        {Op::Demean, "demean", H, {S::Series}, real},
        {Op::Normalize, "normalize", H, {S::Series}, real},
        {Op::Quantile, "quantile", H, {S::Series, S::Count}, real},

        {Op::GroupRank, "group_rank", G, {S::Series}, real},
        {Op::GroupMean, "group_mean", G, {S::Series}, real},
        {Op::GroupZscore, "group_zscore", G, {S::Series}, real},

        {Op::And, "and", L, {S::Boolean, S::Boolean}, boolean, true},
        {Op::Or, "or", L, {S::Boolean, S::Boolean}, boolean, true},
        {Op::Not, "not", L, {S::Boolean}, boolean},
        {Op::Equal, "equal", L, {S::Series, S::Series}, boolean, true},
        {Op::Less, "less", L, {S::Series, S::Series}, boolean},
        {Op::Greater, "greater", L, {S::Series, S::Series}, boolean},
        {Op::IfElse, "if_else", L, {S::Boolean, S::Branch, S::Branch}, real},

        {Op::TsMean, "ts_mean", T, {S::Series, S::Window}, real},
        {Op::TsStd, "ts_std", T, {S::Series, S::Window}, real},
        {Op::TsSum, "ts_sum", T, {S::Series, S::Window}, real},
        {Op::TsMin, "ts_min", T, {S::Series, S::Window}, real},
        {Op::TsMax, "ts_max", T, {S::Series, S::Window}, real},
        {Op::TsDelay, "ts_delay", T, {S::Series, S::Window}, real},
        {Op::TsDelta, "ts_delta", T, {S::Series, S::Window}, real},
        {Op::TsRank, "ts_rank", T, {S::Series, S::Window}, real},
        {Op::TsZscore, "ts_zscore", T, {S::Series, S::Window}, real},
        {Op::TsSkew, "ts_skew", T, {S::Series, S::Window}, real},
        {Op::TsKurtosis, "ts_kurtosis", T, {S::Series, S::Window}, real},
        {Op::TsArgMax, "ts_arg_max", T, {S::Series, S::Window}, real},
        {Op::TsArgMin, "ts_arg_min", T, {S::Series, S::Window}, real},
        {Op::TsCorr, "ts_corr", T, {S::Series, S::Series, S::Window}, real, true},
        {Op::TsCov, "ts_cov", T, {S::Series, S::Series, S::Window}, real, true},
        {Op::TsIr, "ts_ir", T, {S::Series, S::Window}, real},
        {Op::TsCoSkewness, "ts_co_skewness", T, {S::Series, S::Series, S::Window}, real},
        {Op::TsCoKurtosis, "ts_co_kurtosis", T, {S::Series, S::Series, S::Window}, real},
        {Op::TsRegression, "ts_regression", T, {S::Series, S::Series, S::Window}, real},
        {Op::TsRegressionRes, "ts_regression_res", T, {S::Series, S::Series, S::Window}, real},

        {Op::TsBeta, "ts_beta", R, {S::Series, S::Series, S::Window}, real},
        {Op::TsSharpe, "ts_sharpe", R, {S::Series, S::Window}, real},

        {Op::Sin, "sin", X, {S::Series}, real},
        {Op::Cos, "cos", X, {S::Series}, real},
        {Op::Tail, "tail", X, {S::Series, S::Constant, S::Constant, S::Constant}, real},

        {Op::TsMacd, "ts_macd", K, {S::Series, S::Window, S::Window}, real},
        {Op::TaRsi, "ta_rsi", K, {S::Series, S::Window}, real},
    };
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

}  // namespace

const std::vector<OperatorSignature>& operator_catalog() {
    static const std::vector<OperatorSignature> catalog = build_catalog();
    return catalog;
}

const OperatorSignature& signature(Op op) {
    static const auto index = [] {
        std::vector<const OperatorSignature*> idx;
        for (const auto& s : operator_catalog()) {
            const auto k = static_cast<std::size_t>(s.op);
            if (idx.size() <= k) idx.resize(k + 1, nullptr);
            idx[k] = &s;
        }
        return idx;
    }();
    return *index[static_cast<std::size_t>(op)];
}

const OperatorSignature* find_operator(std::string_view name) {
    static const auto by_name = [] {
        std::unordered_map<std::string_view, const OperatorSignature*> m;
        for (const auto& s : operator_catalog()) m.emplace(s.name, &s);
        return m;
    }();
    auto it = by_name.find(name);
    return it == by_name.end() ? nullptr : it->second;
}

AlphaExpr AlphaExpr::call(Op op, std::vector<AlphaExpr> args) {
    AlphaExpr e;
    e.kind = Kind::Call;
    e.op = op;
    e.args = std::move(args);
    return e;
}

AlphaExpr AlphaExpr::field(std::string name) {
    AlphaExpr e;
    e.kind = Kind::Field;
    e.name = std::move(name);
    return e;
}

AlphaExpr AlphaExpr::num(double v) {
    AlphaExpr e;
    e.kind = Kind::Number;
    e.number = v;
    return e;
}

bool operator==(const AlphaExpr& a, const AlphaExpr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case AlphaExpr::Kind::Field: return a.name == b.name;
        case AlphaExpr::Kind::Number: return a.number == b.number;
        case AlphaExpr::Kind::Call: return a.op == b.op && a.args == b.args;
    }
    return false;
}

int depth(const AlphaExpr& e) {
    if (!e.is_call()) return 0;
    int d = 0;
    for (const auto& a : e.args) d = std::max(d, depth(a));
    return d + 1;
}

Domain domain_of(const AlphaExpr& e) {
    return e.is_call() ? signature(e.op).output : Domain::Real;
}

std::size_t count_calls(const AlphaExpr& e) {
    if (!e.is_call()) return 0;
    std::size_t n = 1;
    for (const auto& a : e.args) n += count_calls(a);
    return n;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { Ident, Integer, LParen, RParen, Comma, Plus, Minus, Star, Slash, End };

struct Token {
    Tok kind;
    std::string_view text;
    std::size_t pos;
};

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) { lex(); }

    AlphaExpr parse_all() {
        AlphaExpr e = expr();
        if (peek().kind != Tok::End) fail("unexpected '" + std::string(peek().text) + "'", peek().pos);
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg, std::size_t pos) const {
        throw Error(ErrorCode::SyntaxError, msg + " at column " + std::to_string(pos + 1));
    }

    void lex() {
        std::size_t i = 0;
        while (i < src_.size()) {
            const char c = src_[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                continue;
            }
            const std::size_t start = i;
            if (std::islower(static_cast<unsigned char>(c)) || c == '_') {
                while (i < src_.size() &&
                       (std::islower(static_cast<unsigned char>(src_[i])) ||
                        std::isdigit(static_cast<unsigned char>(src_[i])) || src_[i] == '_')) {
                    ++i;
                }
                toks_.push_back({Tok::Ident, src_.substr(start, i - start), start});
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c))) {
                while (i < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i]))) ++i;
                toks_.push_back({Tok::Integer, src_.substr(start, i - start), start});
                continue;
            }
            Tok k;
            switch (c) {
                case '(': k = Tok::LParen; break;
                case ')': k = Tok::RParen; break;
                case ',': k = Tok::Comma; break;
                case '+': k = Tok::Plus; break;
                case '-': k = Tok::Minus; break;
                case '*': k = Tok::Star; break;
                case '/': k = Tok::Slash; break;
                default: fail(std::string("unexpected character '") + c + "'", start);
            }
            toks_.push_back({k, src_.substr(start, 1), start});
            ++i;
        }
        toks_.push_back({Tok::End, "end of input", src_.size()});
    }

    const Token& peek() const { return toks_[cur_]; }
    const Token& next() { return toks_[cur_++]; }
    void expect(Tok k, const char* what) {
        if (peek().kind != k) {
            fail(std::string("expected ") + what + " but found '" + std::string(peek().text) + "'",
                 peek().pos);
        }
        ++cur_;
    }

    AlphaExpr expr() {
        AlphaExpr lhs = term();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            const Op op = next().kind == Tok::Plus ? Op::Add : Op::Subtract;
            lhs = resolve(op, {std::move(lhs), term()}, peek().pos);
        }
        return lhs;
    }

    AlphaExpr term() {
        AlphaExpr lhs = unary();
        while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
            const Op op = next().kind == Tok::Star ? Op::Multiply : Op::Divide;
            lhs = resolve(op, {std::move(lhs), unary()}, peek().pos);
        }
        return lhs;
    }

    AlphaExpr unary() {
        if (peek().kind == Tok::Minus) {
            const auto pos = next().pos;
            AlphaExpr inner = unary();
            if (inner.is_number()) {
                inner.number = -inner.number;
                return inner;
            }
            return resolve(Op::Neg, {std::move(inner)}, pos);
        }
        return primary();
    }

    AlphaExpr primary() {
        const Token t = next();
        switch (t.kind) {
            case Tok::Integer: {
                double v = 0.0;
                for (char ch : t.text) v = v * 10.0 + (ch - '0');
                return AlphaExpr::num(v);
            }
            case Tok::LParen: {
                AlphaExpr e = expr();
                expect(Tok::RParen, "')'");
                return e;
            }
            case Tok::Ident: {
                if (peek().kind != Tok::LParen) return AlphaExpr::field(std::string(t.text));
                const OperatorSignature* sig = find_operator(t.text);
                if (sig == nullptr) {
                    throw Error(ErrorCode::UnknownOperator, "'" + std::string(t.text) +
                                                                "' at column " +
                                                                std::to_string(t.pos + 1));
                }
                ++cur_;
                std::vector<AlphaExpr> args;
                args.push_back(expr());
                while (peek().kind == Tok::Comma) {
                    ++cur_;
                    args.push_back(expr());
                }
                expect(Tok::RParen, "')' or ','");
                return resolve(sig->op, std::move(args), t.pos);
            }
            default: fail("unexpected '" + std::string(t.text) + "'", t.pos);
        }
    }

    AlphaExpr resolve(Op op, std::vector<AlphaExpr> args, std::size_t pos) {
        const auto& sig = signature(op);
        const std::string where = std::string(sig.name) + " at column " + std::to_string(pos + 1);
        if (args.size() != sig.slots.size()) {
            throw Error(ErrorCode::ArityError, where + " takes " + std::to_string(sig.slots.size()) +
                                                   " arguments, got " + std::to_string(args.size()));
        }
        for (std::size_t k = 0; k < args.size(); ++k) {
            const Slot s = sig.slots[k];
            const auto& a = args[k];
            if (s == Slot::Window || s == Slot::Count) {
                if (!a.is_number()) {
                    throw Error(ErrorCode::ArityError,
                                where + ": argument " + std::to_string(k + 1) + " must be an integer");
                }
                const int lo = s == Slot::Window ? kMinWindow : 2;
                const int hi = s == Slot::Window ? kMaxWindow : kMaxCount;
                if (!is_integer(a.number) || a.number < lo || a.number > hi) {
                    throw Error(ErrorCode::WindowOutOfRange,
                                where + ": " + print(a) + " outside [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + "]");
                }
            } else if (s == Slot::Constant && !a.is_number()) {
                throw Error(ErrorCode::ArityError,
                            where + ": argument " + std::to_string(k + 1) + " must be a number");
            }
        }
        return AlphaExpr::call(op, std::move(args));
    }

    std::string_view src_;
    std::vector<Token> toks_;
    std::size_t cur_ = 0;
};

void print_into(const AlphaExpr& e, std::string& out) {
    switch (e.kind) {
        case AlphaExpr::Kind::Field: out += e.name; return;
        case AlphaExpr::Kind::Number: {
            char buf[32];
            if (is_integer(e.number) && std::fabs(e.number) < 1e15) {
                std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(e.number));
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", e.number);
            }
            out += buf;
            return;
        }
        case AlphaExpr::Kind::Call: {
            out += signature(e.op).name;
            out += '(';
            for (std::size_t k = 0; k < e.args.size(); ++k) {
                if (k) out += ", ";
                print_into(e.args[k], out);
            }
            out += ')';
            return;
        }
    }
}

}  // namespace

AlphaExpr parse(std::string_view text) { return Parser(text).parse_all(); }

std::string print(const AlphaExpr& e) {
    std::string out;
    print_into(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void validate_node(const AlphaExpr& e, Slot slot, const Schema& schema,
                   std::vector<Diagnostic>& out) {
    using K = Diagnostic::Kind;
    switch (e.kind) {
        case AlphaExpr::Kind::Number:
            if (slot == Slot::Series || slot == Slot::Boolean) {
                out.push_back({K::LiteralPlacement, "literal " + print(e) + " used as a series"});
            }
            return;
        case AlphaExpr::Kind::Field:
            if (std::find(schema.fields.begin(), schema.fields.end(), e.name) == schema.fields.end()) {
                out.push_back({K::UnknownField, "unknown field '" + e.name + "'"});
            }
            if (slot == Slot::Boolean) {
                out.push_back({K::DomainMismatch, "field '" + e.name + "' is not boolean"});
            }
            return;
        case AlphaExpr::Kind::Call: break;
    }
    const auto& sig = signature(e.op);
    if (slot == Slot::Boolean && sig.output != Domain::Boolean) {
        out.push_back({K::DomainMismatch, std::string(sig.name) + " does not produce a boolean"});
    }
    if (sig.category == Category::Group && !schema.has_groups) {
        out.push_back({K::MissingGroups, std::string(sig.name) + " requires group labels"});
    }
    if (e.args.size() != sig.slots.size()) {
        out.push_back({K::ArityError, std::string(sig.name) + " takes " +
                                          std::to_string(sig.slots.size()) + " arguments"});
        return;
    }
    for (std::size_t k = 0; k < e.args.size(); ++k) {
        const Slot s = sig.slots[k];
        const auto& a = e.args[k];
        if (s == Slot::Window || s == Slot::Count || s == Slot::Constant) {
            if (!a.is_number()) {
                out.push_back({K::LiteralPlacement,
                               std::string(sig.name) + " argument " + std::to_string(k + 1) +
                                   " must be a literal"});
                continue;
            }
            if (s != Slot::Constant) {
                const int lo = s == Slot::Window ? kMinWindow : 2;
                const int hi = s == Slot::Window ? kMaxWindow : kMaxCount;
                if (!is_integer(a.number) || a.number < lo || a.number > hi) {
                    out.push_back({K::WindowOutOfRange,
                                   std::string(sig.name) + " parameter " + print(a) + " out of range"});
                }
            } else if (!std::isfinite(a.number)) {
                out.push_back({K::LiteralPlacement, "non-finite constant"});
            }
            continue;
        }
        validate_node(a, s, schema, out);
    }
}

}  // namespace

std::vector<Diagnostic> validate(const AlphaExpr& e, const Schema& schema) {
    std::vector<Diagnostic> out;
    validate_node(e, Slot::Series, schema, out);
    if (const int d = depth(e); d > schema.max_depth) {
        out.push_back({Diagnostic::Kind::DepthExceeded,
                       "depth " + std::to_string(d) + " exceeds " + std::to_string(schema.max_depth)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonical form

AlphaExpr canonicalize(const AlphaExpr& e) {
    if (!e.is_call()) return e;
    std::vector<AlphaExpr> args;
    args.reserve(e.args.size());
    for (const auto& a : e.args) args.push_back(canonicalize(a));
    if (e.op == Op::Neg && args[0].is_call() && args[0].op == Op::Neg) {
        return std::move(args[0].args[0]);
    }
    if (signature(e.op).commutative && print(args[1]) < print(args[0])) std::swap(args[0], args[1]);
    return AlphaExpr::call(e.op, std::move(args));
}

std::uint64_t canonical_hash(const AlphaExpr& e) { return fnv1a(print(canonicalize(e))); }

}  // namespace alphadesk
