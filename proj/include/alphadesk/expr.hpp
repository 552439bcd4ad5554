// Alpha expression language: operator catalog, AST, parser, printer,
// validator, canonical form, random instantiation and mutation.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alphadesk/common.hpp"

namespace alphadesk {

enum class Op : std::uint8_t {
    // mathematical
    Add, Subtract, Multiply, Divide, Power, Min, Max, Neg, Abs, Sign, Log, Sqrt, Inverse,
    // horizontal
    Rank, Zscore, Demean, Normalize, Quantile,
    // group-based
    GroupRank, GroupMean, GroupZscore,
    // logical
    And, Or, Not, Equal, Less, Greater, IfElse,
    // time-series
    TsMean, TsStd, TsSum, TsMin, TsMax, TsDelay, TsDelta, TsRank, TsZscore, TsSkew, TsKurtosis,
    TsArgMax, TsArgMin, TsCorr, TsCov, TsIr, TsCoSkewness, TsCoKurtosis, TsRegression,
    TsRegressionRes,
    // risk
    TsBeta, TsSharpe,
    // transformation
    Sin, Cos, Tail,
    // technical
    TsMacd, TaRsi,
};

enum class Category {
    Mathematical, Horizontal, Group, Logical, Risk, TimeSeries, Transformation, Technical
};

enum class Domain { Real, Boolean };

/// What an argument position accepts.
enum class Slot {
    Series,    // any real or boolean sub-expression
    Boolean,   // boolean sub-expression only
    Window,    // integer literal in [kMinWindow, kMaxWindow]
    Count,     // integer literal in [2, kMaxCount]
    Constant,  // numeric literal
    Branch,    // sub-expression or numeric literal (if_else arms)
};

inline constexpr int kMinWindow = 2;
inline constexpr int kMaxWindow = 252;
inline constexpr int kMaxCount = 100;
inline constexpr int kDefaultMaxDepth = 6;

struct OperatorSignature {
    Op op;
    std::string_view name;
    Category category;
    std::vector<Slot> slots;
    Domain output;
    /// The first two arguments may be swapped without changing the result.
    bool commutative = false;
};

const std::vector<OperatorSignature>& operator_catalog();
const OperatorSignature& signature(Op op);
const OperatorSignature* find_operator(std::string_view name);

/// Immutable-by-convention expression tree with value semantics.
struct AlphaExpr {
    enum class Kind : std::uint8_t { Call, Field, Number };

    Kind kind = Kind::Field;
    Op op = Op::Add;     // Call only
    std::string name;    // Field only
    double number = 0.0; // Number only
    std::vector<AlphaExpr> args;

    static AlphaExpr call(Op op, std::vector<AlphaExpr> args);
    static AlphaExpr field(std::string name);
    static AlphaExpr num(double v);

    bool is_call() const noexcept { return kind == Kind::Call; }
    bool is_field() const noexcept { return kind == Kind::Field; }
    bool is_number() const noexcept { return kind == Kind::Number; }

    friend bool operator==(const AlphaExpr& a, const AlphaExpr& b);
};

/// Operator levels; leaves and literals have depth 0.
int depth(const AlphaExpr& e);
/// Domain of the value produced by `e` (literals and fields are real).
Domain domain_of(const AlphaExpr& e);
/// Number of Call nodes.
std::size_t count_calls(const AlphaExpr& e);

/// Throws Error with SyntaxError (message carries the column), UnknownOperator,
/// ArityError or WindowOutOfRange.
AlphaExpr parse(std::string_view text);
/// Canonical function-call syntax, e.g. "neg(ts_arg_max(multiply(x, y), 10))".
std::string print(const AlphaExpr& e);

struct Schema {
    std::vector<std::string> fields;
    bool has_groups = false;
    int max_depth = kDefaultMaxDepth;
};

struct Diagnostic {
    enum class Kind {
        UnknownField, DomainMismatch, MissingGroups, LiteralPlacement, WindowOutOfRange,
        ArityError, DepthExceeded
    };
    Kind kind;
    std::string message;
};

/// Empty result means the expression is valid for `schema`.
std::vector<Diagnostic> validate(const AlphaExpr& e, const Schema& schema);

/// Commutative operands sorted by printed form, neg(neg(x)) removed.
AlphaExpr canonicalize(const AlphaExpr& e);
/// FNV-1a of the printed canonical form.
std::uint64_t canonical_hash(const AlphaExpr& e);

/// Allowed window lengths per field; fields without an entry use kDefaultWindows.
using WindowMenu = std::map<std::string, std::vector<int>>;
inline const std::vector<int> kDefaultWindows = {5, 10, 21, 63};

AlphaExpr random_instantiate(std::uint64_t seed, const Schema& schema, const WindowMenu& windows,
                             int max_depth);

enum class MutationMove {
    ReplaceOperator, JitterWindow, SwapField, WrapRoot, ReplaceSubtree, PruneToChild
};

struct MutationResult {
    AlphaExpr expr;
    /// Empty when no legal move existed and a fresh expression was drawn.
    std::optional<MutationMove> move;
};

/// Applies one randomly drawn legal move (schema.max_depth bounds the result).
MutationResult mutate_with_info(std::uint64_t seed, const AlphaExpr& e, const Schema& schema,
                                const WindowMenu& windows);
AlphaExpr mutate(std::uint64_t seed, const AlphaExpr& e, const Schema& schema,
                 const WindowMenu& windows);

/// Applies only `move`; empty when that move is not legal for `e`.
std::optional<AlphaExpr> apply_move(std::uint64_t seed, MutationMove move, const AlphaExpr& e,
                                    const Schema& schema, const WindowMenu& windows);

}  // namespace alphadesk
