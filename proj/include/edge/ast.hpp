#pragma once

#include "edge/operators.hpp"
#include "edge/scalar.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace edge::ast {

struct SourceSpan {
    std::string file;
    int line = 0;
    int column = 0;
    int length = 0;
};

// Source location attached to nodes; never takes part in structural equality.
struct Loc {
    SourceSpan span;
    bool operator==(const Loc&) const { return true; }
};

struct Diagnostic {
    SourceSpan span;
    std::string message;
    std::vector<std::string> expected;

    std::string format() const;
};

struct BoolCond;

struct RankExpr {
    enum class Kind { Var, Const, Offset, Sum, Ternary, MinOf, MaxOf };
    Kind kind = Kind::Var;
    std::string a;               // Var, Offset, Sum, MinOf, MaxOf
    std::string b;               // Sum, MinOf, MaxOf
    int64_t value = 0;           // Const, Offset
    std::vector<BoolCond> cond;  // Ternary: exactly one condition
    std::vector<RankExpr> arms;  // Ternary: then, else

    static RankExpr var(std::string name);
    static RankExpr constant(int64_t v);
    static RankExpr offset(std::string name, int64_t k);
    static RankExpr sum(std::string x, std::string y);

    bool operator==(const RankExpr&) const;
};

struct BoolCond {
    enum class Kind { Compare, InList, And };
    Kind kind = Kind::Compare;
    std::string op;               // Compare: < <= > >= == !=
    std::vector<RankExpr> sides;  // Compare: lhs, rhs
    std::string var;              // InList
    std::string list;             // InList
    std::vector<BoolCond> parts;  // And

    static BoolCond compare(RankExpr l, std::string op, RankExpr r);
    static BoolCond in_list(std::string var, std::string list);

    bool operator==(const BoolCond&) const;
};

struct Subscript {
    RankExpr expr;
    std::optional<BoolCond> constraint;
    bool is_mutable = false;

    bool operator==(const Subscript&) const = default;
};

struct Access {
    std::string tensor;
    std::vector<Subscript> subs;
    std::string unary;  // empty when no unary operator is applied
    Loc loc;

    bool operator==(const Access&) const = default;
};

struct RhsExpr {
    enum class Kind { Leaf, RankVar, Literal, Binary };
    Kind kind = Kind::Leaf;
    Access access;              // Leaf
    std::string var;            // RankVar
    Scalar literal;             // Literal
    int label = 0;              // Binary
    std::vector<RhsExpr> kids;  // Binary: left, right
    Loc loc;

    static RhsExpr leaf(Access a);
    static RhsExpr binary(int label, RhsExpr l, RhsExpr r);

    bool operator==(const RhsExpr&) const;
};

struct Action {
    enum class Kind { Map, Reduce, Populate };
    Kind kind = Kind::Map;
    int label = 0;  // 0: no label (reduce only)
    std::vector<std::string> ranks;
    std::string compute;
    std::string merge = "pass";
    std::string coord = "pass";
    std::optional<int64_t> coord_arg;
    Loc loc;

    bool operator==(const Action&) const = default;
};

struct CaseArm {
    std::optional<BoolCond> guard;  // nullopt: the `else` arm
    RhsExpr rhs;
    std::vector<Action> actions;
    Loc loc;

    bool operator==(const CaseArm&) const = default;
};

struct Statement {
    enum class Kind { Assign, Update, Case };
    Kind kind = Kind::Assign;
    Access out;
    RhsExpr rhs;                  // Assign, Update
    std::vector<Action> actions;  // Assign, Update
    std::vector<CaseArm> arms;    // Case
    Loc loc;

    bool operator==(const Statement&) const = default;
};

// A reference to one generation of a tensor: T[var + offset] or T[offset] when var is empty.
struct GenRef {
    std::string tensor;
    std::string var;
    int64_t offset = 0;
    Loc loc;

    bool operator==(const GenRef&) const = default;
};

struct StopCond {
    enum class Kind { OccupancyZero, TensorEqual };
    Kind kind = Kind::OccupancyZero;
    GenRef a;
    GenRef b;  // TensorEqual only

    bool operator==(const StopCond&) const = default;
};

struct Cascade;

struct CascadeItem {
    bool is_cascade = false;
    Statement stmt;
    std::vector<Cascade> nested;  // exactly one element when is_cascade

    bool operator==(const CascadeItem&) const;
};

struct Cascade {
    std::string var = "i";
    std::vector<CascadeItem> items;
    std::optional<StopCond> stop;
    Loc loc;

    bool operator==(const Cascade&) const;
};

struct ShapeSpec {
    enum class Kind { Unbounded, Literal, Param };
    Kind kind = Kind::Literal;
    int64_t value = 0;
    std::string param;  // name between the bars of |V|

    bool operator==(const ShapeSpec&) const = default;
};

struct RankDeclAst {
    std::string name;
    ShapeSpec shape;

    bool operator==(const RankDeclAst&) const = default;
};

struct TensorDeclAst {
    std::string name;
    std::vector<RankDeclAst> ranks;
    DType dtype = DType::Int;
    Scalar empty;
    Loc loc;

    bool generative() const { return !ranks.empty() && ranks.front().shape.kind == ShapeSpec::Kind::Unbounded; }
    bool operator==(const TensorDeclAst&) const = default;
};

struct InitItem {
    bool user = false;
    std::string tensor;  // user items
    Statement stmt;      // statement items
    Loc loc;

    bool operator==(const InitItem&) const = default;
};

struct Program {
    std::vector<TensorDeclAst> decls;
    std::vector<InitItem> inits;
    Cascade body;

    const TensorDeclAst* find_decl(std::string_view name) const;
    bool operator==(const Program&) const = default;
};

inline bool RankExpr::operator==(const RankExpr&) const = default;
inline bool BoolCond::operator==(const BoolCond&) const = default;
inline bool RhsExpr::operator==(const RhsExpr&) const = default;
inline bool CascadeItem::operator==(const CascadeItem&) const = default;
inline bool Cascade::operator==(const Cascade&) const = default;

class DesugarError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- queries ----

// Variable names referenced by an expression, in first-appearance order.
std::vector<std::string> vars_of(const RankExpr& e);
std::vector<std::string> vars_of(const BoolCond& c);
// Leaves of an RHS tree from left to right.
std::vector<const RhsExpr*> leaves(const RhsExpr& e);
std::vector<int> labels_of(const RhsExpr& e);
// Named integer lists, size parameters and user tensors the program needs at run time.
std::set<std::string> list_names(const Program& p);
std::set<std::string> size_params(const Program& p);
std::vector<std::string> user_tensors(const Program& p);
// Every statement in the body, depth first, paired with the enclosing cascade variables.
std::vector<std::pair<const Statement*, std::vector<std::string>>> body_statements(const Program& p);

// ---- checks and rewrites ----

std::vector<Diagnostic> validate(const Program& p, const OperatorRegistry& reg = builtin_registry());

// `T[g+1, ...] << X` into `T[g+1, ...] = T[g, ...] .L X :: map.L(vars; update; cup)`.
Statement desugar_update(const Statement& s);
// Rewrites a case statement into guarded temporaries followed by an update chain. Temporary
// declarations are appended to `decls`.
std::vector<Statement> desugar_case(const Statement& s, std::vector<TensorDeclAst>& decls);
// Applies both rewrites everywhere in the program.
Program desugar(const Program& p);

}  // namespace edge::ast
