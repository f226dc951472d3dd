#include "edge/ast.hpp"

#include <algorithm>
#include <map>

namespace edge::ast {

std::string Diagnostic::format() const
{
    std::string s;
    if (!span.file.empty()) s += span.file + ":";
    s += std::to_string(span.line) + ":" + std::to_string(span.column) + ": error: " + message;
    if (!expected.empty()) {
        s += " (expected ";
        for (size_t i = 0; i < expected.size(); ++i) s += (i ? ", " : "") + expected[i];
        s += ")";
    }
    return s;
}

RankExpr RankExpr::var(std::string name)
{
    RankExpr e;
    e.kind = Kind::Var;
    e.a = std::move(name);
    return e;
}

RankExpr RankExpr::constant(int64_t v)
{
    RankExpr e;
    e.kind = Kind::Const;
    e.value = v;
    return e;
}

RankExpr RankExpr::offset(std::string name, int64_t k)
{
    if (k == 0) return var(std::move(name));
    RankExpr e;
    e.kind = Kind::Offset;
    e.a = std::move(name);
    e.value = k;
    return e;
}

RankExpr RankExpr::sum(std::string x, std::string y)
{
    RankExpr e;
    e.kind = Kind::Sum;
    e.a = std::move(x);
    e.b = std::move(y);
    return e;
}

BoolCond BoolCond::compare(RankExpr l, std::string op, RankExpr r)
{
    BoolCond c;
    c.kind = Kind::Compare;
    c.op = std::move(op);
    c.sides = {std::move(l), std::move(r)};
    return c;
}

BoolCond BoolCond::in_list(std::string var, std::string list)
{
    BoolCond c;
    c.kind = Kind::InList;
    c.var = std::move(var);
    c.list = std::move(list);
    return c;
}

RhsExpr RhsExpr::leaf(Access a)
{
    RhsExpr e;
    e.kind = Kind::Leaf;
    e.loc = a.loc;
    e.access = std::move(a);
    return e;
}

RhsExpr RhsExpr::binary(int label, RhsExpr l, RhsExpr r)
{
    RhsExpr e;
    e.kind = Kind::Binary;
    e.label = label;
    e.loc = l.loc;
    e.kids.push_back(std::move(l));
    e.kids.push_back(std::move(r));
    return e;
}

const TensorDeclAst* Program::find_decl(std::string_view name) const
{
    for (const auto& d : decls)
        if (d.name == name) return &d;
    return nullptr;
}

// ---- queries ----

namespace {

void push_unique(std::vector<std::string>& out, const std::string& v)
{
    if (!v.empty() && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
}

void collect(const RankExpr& e, std::vector<std::string>& out);

void collect(const BoolCond& c, std::vector<std::string>& out)
{
    switch (c.kind) {
    case BoolCond::Kind::Compare:
        for (const auto& s : c.sides) collect(s, out);
        break;
    case BoolCond::Kind::InList: push_unique(out, c.var); break;
    case BoolCond::Kind::And:
        for (const auto& p : c.parts) collect(p, out);
        break;
    }
}

void collect(const RankExpr& e, std::vector<std::string>& out)
{
    switch (e.kind) {
    case RankExpr::Kind::Const: break;
    case RankExpr::Kind::Var:
    case RankExpr::Kind::Offset: push_unique(out, e.a); break;
    case RankExpr::Kind::Sum:
    case RankExpr::Kind::MinOf:
    case RankExpr::Kind::MaxOf:
        push_unique(out, e.a);
        push_unique(out, e.b);
        break;
    case RankExpr::Kind::Ternary:
        for (const auto& c : e.cond) collect(c, out);
        for (const auto& a : e.arms) collect(a, out);
        break;
    }
}

void collect_leaves(const RhsExpr& e, std::vector<const RhsExpr*>& out)
{
    if (e.kind == RhsExpr::Kind::Binary) {
        for (const auto& k : e.kids) collect_leaves(k, out);
    } else {
        out.push_back(&e);
    }
}

void collect_labels(const RhsExpr& e, std::vector<int>& out)
{
    if (e.kind != RhsExpr::Kind::Binary) return;
    out.push_back(e.label);
    for (const auto& k : e.kids) collect_labels(k, out);
}

void walk_statements(const Cascade& c, std::vector<std::string>& scope,
                     std::vector<std::pair<const Statement*, std::vector<std::string>>>& out)
{
    scope.push_back(c.var);
    for (const auto& item : c.items) {
        if (item.is_cascade) {
            for (const auto& n : item.nested) walk_statements(n, scope, out);
        } else {
            out.emplace_back(&item.stmt, scope);
        }
    }
    scope.pop_back();
}

void for_each_statement(const Program& p, const std::function<void(const Statement&)>& f)
{
    for (const auto& it : p.inits)
        if (!it.user) f(it.stmt);
    for (const auto& [s, _] : body_statements(p)) f(*s);
}

void for_each_access(const Statement& s, const std::function<void(const Access&)>& f)
{
    f(s.out);
    auto visit_rhs = [&](const RhsExpr& r) {
        for (const RhsExpr* l : leaves(r))
            if (l->kind == RhsExpr::Kind::Leaf) f(l->access);
    };
    if (s.kind == Statement::Kind::Case) {
        for (const auto& a : s.arms) visit_rhs(a.rhs);
    } else {
        visit_rhs(s.rhs);
    }
}

}  // namespace

std::vector<std::string> vars_of(const RankExpr& e)
{
    std::vector<std::string> out;
    collect(e, out);
    return out;
}

std::vector<std::string> vars_of(const BoolCond& c)
{
    std::vector<std::string> out;
    collect(c, out);
    return out;
}

std::vector<const RhsExpr*> leaves(const RhsExpr& e)
{
    std::vector<const RhsExpr*> out;
    collect_leaves(e, out);
    return out;
}

std::vector<int> labels_of(const RhsExpr& e)
{
    std::vector<int> out;
    collect_labels(e, out);
    return out;
}

std::vector<std::pair<const Statement*, std::vector<std::string>>> body_statements(const Program& p)
{
    std::vector<std::pair<const Statement*, std::vector<std::string>>> out;
    std::vector<std::string> scope;
    walk_statements(p.body, scope, out);
    return out;
}

std::set<std::string> list_names(const Program& p)
{
    std::set<std::string> out;
    std::function<void(const BoolCond&)> from_cond = [&](const BoolCond& c) {
        if (c.kind == BoolCond::Kind::InList) out.insert(c.list);
        for (const auto& part : c.parts) from_cond(part);
        for (const auto& side : c.sides)
            for (const auto& tc : side.cond) from_cond(tc);
    };
    for_each_statement(p, [&](const Statement& s) {
        for_each_access(s, [&](const Access& a) {
            for (const auto& sub : a.subs) {
                if (sub.constraint) from_cond(*sub.constraint);
                for (const auto& c : sub.expr.cond) from_cond(c);
            }
        });
        for (const auto& arm : s.arms)
            if (arm.guard) from_cond(*arm.guard);
    });
    return out;
}

std::set<std::string> size_params(const Program& p)
{
    std::set<std::string> out;
    for (const auto& d : p.decls)
        for (const auto& r : d.ranks)
            if (r.shape.kind == ShapeSpec::Kind::Param) out.insert(r.shape.param);
    return out;
}

std::vector<std::string> user_tensors(const Program& p)
{
    std::vector<std::string> out;
    for (const auto& it : p.inits)
        if (it.user) out.push_back(it.tensor);
    return out;
}

// ---- validation ----

namespace {

bool is_gen_expr(const RankExpr& e, const std::vector<std::string>& scope, int64_t min_offset)
{
    if (e.kind == RankExpr::Kind::Const) return e.value >= 0;
    if (e.kind == RankExpr::Kind::Var || e.kind == RankExpr::Kind::Offset) {
        int64_t k = e.kind == RankExpr::Kind::Var ? 0 : e.value;
        return std::find(scope.begin(), scope.end(), e.a) != scope.end() && k >= min_offset && k <= 3;
    }
    return false;
}

std::string gen_key(const RankExpr& e)
{
    if (e.kind == RankExpr::Kind::Const) return std::to_string(e.value);
    return e.a + "+" + std::to_string(e.kind == RankExpr::Kind::Offset ? e.value : 0);
}

// Relations between two sides that a comparison admits: bit 0 "<", bit 1 "==", bit 2 ">".
int relation_mask(const std::string& op)
{
    if (op == "<") return 1;
    if (op == "<=") return 3;
    if (op == "==") return 2;
    if (op == ">=") return 6;
    if (op == ">") return 4;
    if (op == "!=") return 5;
    return 7;
}

int flip_mask(int m) { return (m & 2) | ((m & 1) << 2) | ((m & 4) >> 2); }

bool disjoint(const BoolCond& a, const BoolCond& b)
{
    if (a.kind == BoolCond::Kind::And) {
        for (const auto& p : a.parts)
            if (disjoint(p, b)) return true;
        return false;
    }
    if (b.kind == BoolCond::Kind::And) {
        for (const auto& p : b.parts)
            if (disjoint(a, p)) return true;
        return false;
    }
    if (a.kind != BoolCond::Kind::Compare || b.kind != BoolCond::Kind::Compare) return false;
    int ma = relation_mask(a.op), mb = relation_mask(b.op);
    if (a.sides[0] == b.sides[0] && a.sides[1] == b.sides[1]) return (ma & mb) == 0;
    if (a.sides[0] == b.sides[1] && a.sides[1] == b.sides[0]) return (ma & flip_mask(mb)) == 0;
    return false;
}

void check_guards_disjoint(const Statement& s)
{
    for (size_t x = 0; x < s.arms.size(); ++x)
        for (size_t y = x + 1; y < s.arms.size(); ++y) {
            if (!s.arms[x].guard || !s.arms[y].guard) continue;
            if (!disjoint(*s.arms[x].guard, *s.arms[y].guard))
                throw DesugarError("case guards " + std::to_string(x + 1) + " and " + std::to_string(y + 1) +
                                   " are not syntactically disjoint");
        }
}

const RhsExpr* find_label(const RhsExpr& e, int label)
{
    if (e.kind != RhsExpr::Kind::Binary) return nullptr;
    if (e.label == label) return &e;
    for (const auto& k : e.kids)
        if (const RhsExpr* r = find_label(k, label)) return r;
    return nullptr;
}

class Validator {
public:
    Validator(const Program& p, const OperatorRegistry& reg) : p_(p), reg_(reg) {}

    std::vector<Diagnostic> run()
    {
        check_decls();
        check_inits();
        std::vector<std::string> scope;
        check_cascade(p_.body, scope);
        return std::move(diags_);
    }

private:
    void error(const Loc& loc, std::string msg) { diags_.push_back({loc.span, std::move(msg), {}}); }

    void check_decls()
    {
        std::set<std::string> names;
        for (const auto& d : p_.decls) {
            if (!names.insert(d.name).second) error(d.loc, "tensor " + d.name + " declared twice");
            std::set<std::string> ranks;
            for (size_t r = 0; r < d.ranks.size(); ++r) {
                const auto& rk = d.ranks[r];
                if (!ranks.insert(rk.name).second) error(d.loc, "tensor " + d.name + ": duplicate rank " + rk.name);
                if (rk.shape.kind == ShapeSpec::Kind::Unbounded && r != 0)
                    error(d.loc, "tensor " + d.name + ": only the first rank may be generative");
                if (rk.shape.kind == ShapeSpec::Kind::Literal && rk.shape.value <= 0)
                    error(d.loc, "tensor " + d.name + ": rank " + rk.name + " needs a positive shape");
            }
            if (d.empty.type() != d.dtype) error(d.loc, "tensor " + d.name + ": empty value has the wrong dtype");
        }
    }

    void check_inits()
    {
        std::set<std::string> users;
        std::set<std::string> written;
        for (const auto& it : p_.inits) {
            if (it.user) {
                if (!p_.find_decl(it.tensor)) error(it.loc, "unresolved tensor " + it.tensor);
                if (!users.insert(it.tensor).second) error(it.loc, "tensor " + it.tensor + " is user-supplied twice");
                continue;
            }
            check_statement(it.stmt, {}, true);
            written.insert(it.stmt.out.tensor);
        }
        for (const auto& u : users)
            if (written.count(u)) error(p_.body.loc, "user-supplied tensor " + u + " is also initialized");
    }

    void check_cascade(const Cascade& c, std::vector<std::string>& scope)
    {
        if (std::find(scope.begin(), scope.end(), c.var) != scope.end())
            error(c.loc, "nested cascade reuses generative variable " + c.var);
        scope.push_back(c.var);
        std::map<std::string, int> assigned;
        std::vector<std::string> visible = scope;
        for (const auto& item : c.items) {
            if (item.is_cascade) {
                for (const auto& n : item.nested) {
                    check_cascade(n, scope);
                    // A finished nested cascade leaves its variable at the last generation.
                    if (std::find(visible.begin(), visible.end(), n.var) == visible.end()) visible.push_back(n.var);
                }
                continue;
            }
            const Statement& s = item.stmt;
            check_statement(s, visible, false);
            const TensorDeclAst* d = p_.find_decl(s.out.tensor);
            std::string key = s.out.tensor;
            if (d && d->generative() && !s.out.subs.empty()) key += "[" + gen_key(s.out.subs[0].expr) + "]";
            if (++assigned[key] == 2) error(s.loc, "SSA violation: " + key + " is assigned more than once per pass");
        }
        if (c.stop) {
            check_genref(c.stop->a, c.var);
            if (c.stop->kind == StopCond::Kind::TensorEqual) {
                check_genref(c.stop->b, c.var);
                const auto* da = p_.find_decl(c.stop->a.tensor);
                const auto* db = p_.find_decl(c.stop->b.tensor);
                if (da && db && da->ranks.size() != db->ranks.size())
                    error(c.stop->a.loc, "stop condition compares tensors of different rank counts");
            }
        }
        scope.pop_back();
    }

    void check_genref(const GenRef& g, const std::string& var)
    {
        const TensorDeclAst* d = p_.find_decl(g.tensor);
        if (!d) {
            error(g.loc, "unresolved tensor " + g.tensor);
            return;
        }
        if (!d->generative()) error(g.loc, "stop condition tensor " + g.tensor + " has no generative rank");
        if (!g.var.empty() && g.var != var)
            error(g.loc, "stop condition must use the cascade variable " + var);
        if (g.offset < 0 || g.offset > 3) error(g.loc, "generation offset out of range");
    }

    // Checks one access; returns false when the tensor is unknown.
    bool check_access(const Access& a, bool output, const std::vector<std::string>& scope, bool update_out)
    {
        const TensorDeclAst* d = p_.find_decl(a.tensor);
        if (!d) {
            error(a.loc, "unresolved tensor " + a.tensor);
            return false;
        }
        if (a.subs.size() != d->ranks.size()) {
            error(a.loc, "tensor " + a.tensor + " has " + std::to_string(d->ranks.size()) + " ranks but " +
                             std::to_string(a.subs.size()) + " subscripts");
            return false;
        }
        if (!a.unary.empty()) {
            if (output) error(a.loc, "unary operator on an output access");
            else if (!reg_.has_unary(a.unary)) error(a.loc, "unknown unary operator " + a.unary);
        }
        for (size_t r = 0; r < a.subs.size(); ++r) {
            const Subscript& s = a.subs[r];
            if (s.is_mutable && !output) error(a.loc, "mutable rank on an input access");
            if (r == 0 && d->generative()) {
                if (!is_gen_expr(s.expr, scope, update_out ? 1 : 0))
                    error(a.loc, update_out ? "update shorthand needs an output generation of at least g+1 or 1"
                                            : "generation subscript of " + a.tensor +
                                                  " must be a cascade variable plus 0..3 or a constant");
                if (s.constraint || s.is_mutable) error(a.loc, "generation subscript cannot be constrained");
                continue;
            }
            for (const auto& v : vars_of(s.expr))
                if (std::find(scope.begin(), scope.end(), v) != scope.end())
                    error(a.loc, "cascade variable " + v + " used as a rank variable");
            if (s.expr.kind == RankExpr::Kind::Offset && (s.expr.value > (int64_t{1} << 31) ||
                                                          s.expr.value < -(int64_t{1} << 31)))
                error(a.loc, "rank offset out of range");
        }
        return true;
    }

    void check_statement(const Statement& s, const std::vector<std::string>& scope, bool init)
    {
        const TensorDeclAst* od = p_.find_decl(s.out.tensor);
        bool update = s.kind == Statement::Kind::Update;
        bool out_ok = check_access(s.out, true, scope, update);
        if (update && od && !od->generative())
            error(s.loc, "update shorthand needs a generational output tensor");
        if (init) {
            for (const auto& it : p_.inits)
                if (it.user && it.tensor == s.out.tensor)
                    error(s.loc, "initialization writes user-supplied tensor " + s.out.tensor);
        }
        if (s.kind == Statement::Kind::Case) {
            if (s.arms.empty()) error(s.loc, "case statement without arms");
            int elses = 0;
            for (const auto& arm : s.arms) elses += arm.guard ? 0 : 1;
            if (elses > 1) error(s.loc, "case statement has more than one else arm");
            try {
                check_guards_disjoint(s);
            } catch (const DesugarError& e) {
                error(s.loc, e.what());
            }
            for (const auto& sub : s.out.subs)
                if (sub.is_mutable) error(s.loc, "case statements cannot populate mutable ranks");
            std::vector<std::string> out_vars;
            for (size_t r = (od && od->generative()) ? 1 : 0; r < s.out.subs.size(); ++r)
                if (s.out.subs[r].expr.kind == RankExpr::Kind::Var) out_vars.push_back(s.out.subs[r].expr.a);
            for (const auto& arm : s.arms) {
                if (arm.guard)
                    for (const auto& v : vars_of(*arm.guard))
                        if (std::find(out_vars.begin(), out_vars.end(), v) == out_vars.end())
                            error(arm.loc, "case guard variable " + v + " is not a plain output subscript");
                check_body(s, arm.rhs, arm.actions, scope, out_ok, &arm.guard);
            }
            return;
        }
        check_body(s, s.rhs, s.actions, scope, out_ok, nullptr);
    }

    void check_body(const Statement& s, const RhsExpr& rhs, const std::vector<Action>& actions,
                    const std::vector<std::string>& scope, bool out_ok, const std::optional<BoolCond>* guard)
    {
        // Collect accesses, bound variables and variables with an inferable range.
        std::vector<std::string> bound, ranged, rhs_vars, out_vars;
        std::vector<const Access*> accesses;
        bool all_ok = out_ok;
        auto scan = [&](const Access& a, bool output) {
            const TensorDeclAst* d = p_.find_decl(a.tensor);
            if (!d || d->ranks.size() != a.subs.size()) return;
            for (size_t r = d->generative() ? 1 : 0; r < a.subs.size(); ++r) {
                const RankExpr& e = a.subs[r].expr;
                for (const auto& v : vars_of(e)) {
                    push_unique(bound, v);
                    push_unique(output ? out_vars : rhs_vars, v);
                }
                if (e.kind == RankExpr::Kind::Var && d->ranks[r].shape.kind != ShapeSpec::Kind::Unbounded)
                    push_unique(ranged, e.a);
            }
        };
        scan(s.out, true);
        accesses.push_back(&s.out);
        std::vector<std::string> rankvar_leaves;
        for (const RhsExpr* l : leaves(rhs)) {
            if (l->kind == RhsExpr::Kind::Leaf) {
                if (!check_access(l->access, false, scope, false)) all_ok = false;
                scan(l->access, false);
                accesses.push_back(&l->access);
            } else if (l->kind == RhsExpr::Kind::RankVar) {
                rankvar_leaves.push_back(l->var);
                push_unique(rhs_vars, l->var);
                if (std::find(scope.begin(), scope.end(), l->var) != scope.end())
                    error(l->loc, "cascade variable " + l->var + " used as a rank variable");
            }
        }
        for (const auto& v : rankvar_leaves)
            if (std::find(bound.begin(), bound.end(), v) == bound.end())
                error(s.loc, "rank variable " + v + " is not bound by any subscript");
        if (!all_ok) return;
        for (const auto& v : bound)
            if (std::find(ranged.begin(), ranged.end(), v) == ranged.end())
                error(s.loc, "cannot infer the range of rank variable " + v +
                                 " (it needs a plain subscript on a bounded rank)");
        // Constraint variables must be bound.
        auto check_cond_vars = [&](const BoolCond& c, const Loc& loc) {
            for (const auto& v : vars_of(c))
                if (std::find(bound.begin(), bound.end(), v) == bound.end())
                    error(loc, "constraint variable " + v + " is not bound in this statement");
        };
        for (const Access* a : accesses)
            for (const auto& sub : a->subs)
                if (sub.constraint) check_cond_vars(*sub.constraint, a->loc);
        if (guard && *guard) check_cond_vars(**guard, s.loc);

        // Labels.
        std::vector<int> labels = labels_of(rhs);
        std::set<int> uniq;
        for (int l : labels) {
            if (l <= 0) error(rhs.loc, "operation labels must be positive");
            if (!uniq.insert(l).second) error(rhs.loc, "operation label ." + std::to_string(l) + " used twice");
        }
        int root_label = rhs.kind == RhsExpr::Kind::Binary ? rhs.label : 0;

        // Actions.
        std::set<int> mapped, reduced;
        int populates = 0;
        bool root_reduce = false;
        std::vector<std::string> inner_reduced;
        for (const auto& act : actions) {
            auto check_merge = [&] {
                try {
                    merge_op(act.merge);
                } catch (const OperatorError&) {
                    error(act.loc, "unknown merge operator " + act.merge);
                }
            };
            switch (act.kind) {
            case Action::Kind::Map: {
                const RhsExpr* node = find_label(rhs, act.label);
                if (!node) {
                    error(act.loc, "map label ." + std::to_string(act.label) + " does not appear on the right-hand side");
                    break;
                }
                if (!mapped.insert(act.label).second)
                    error(act.loc, "label ." + std::to_string(act.label) + " has two map actions");
                if (!reg_.has_binary(act.compute)) error(act.loc, "unknown compute operator " + act.compute);
                check_merge();
                std::vector<std::string> sub_vars = subtree_vars(*node);
                for (const auto& r : act.ranks)
                    if (std::find(sub_vars.begin(), sub_vars.end(), r) == sub_vars.end())
                        error(act.loc, "map rank " + r + " does not appear under label ." + std::to_string(act.label));
                break;
            }
            case Action::Kind::Reduce: {
                if (act.label != 0 && !find_label(rhs, act.label)) {
                    error(act.loc, "reduce label ." + std::to_string(act.label) + " does not appear on the right-hand side");
                    break;
                }
                if (!reduced.insert(act.label == root_label ? 0 : act.label).second)
                    error(act.loc, "two reduce actions for the same operation");
                if (!reg_.has_binary(act.compute)) error(act.loc, "unknown compute operator " + act.compute);
                check_merge();
                bool is_root = act.label == 0 || act.label == root_label;
                if (is_root) root_reduce = true;
                const RhsExpr* node = act.label == 0 ? &rhs : find_label(rhs, act.label);
                std::vector<std::string> sub_vars = subtree_vars(*node);
                for (const auto& r : act.ranks) {
                    if (std::find(out_vars.begin(), out_vars.end(), r) != out_vars.end())
                        error(act.loc, "reduced rank " + r + " appears in output");
                    else if (std::find(sub_vars.begin(), sub_vars.end(), r) == sub_vars.end())
                        error(act.loc, "reduced rank " + r + " does not appear on the right-hand side");
                    if (!is_root) {
                        inner_reduced.push_back(r);
                        if (used_outside(rhs, *node, r))
                            error(act.loc, "rank " + r + " reduced at ." + std::to_string(act.label) +
                                               " is used outside that operation");
                    }
                }
                break;
            }
            case Action::Kind::Populate: {
                ++populates;
                if (!reg_.has_unary(act.compute)) error(act.loc, "unknown unary operator " + act.compute);
                if (!reg_.has_coord(act.coord)) error(act.loc, "unknown coordinate operator " + act.coord);
                if (act.coord_arg && *act.coord_arg < 0) error(act.loc, "coordinate operator argument must be >= 0");
                for (const auto& r : act.ranks) {
                    bool ok = false;
                    for (const auto& sub : s.out.subs)
                        if (sub.is_mutable && sub.expr.kind == RankExpr::Kind::Var && sub.expr.a == r) ok = true;
                    if (!ok) error(act.loc, "populate rank " + r + " is not marked mutable in the output");
                }
                if (act.ranks.size() != 1) error(act.loc, "populate takes exactly one mutable rank");
                break;
            }
            }
        }
        int mutables = 0;
        for (const auto& sub : s.out.subs) mutables += sub.is_mutable ? 1 : 0;
        if (mutables > 0 && populates == 0) error(s.loc, "mutable output rank without a populate action");
        if (populates > 1) error(s.loc, "more than one populate action");
        if (populates == 1 && root_reduce) error(s.loc, "populate cannot be combined with a root reduce action");
        if (populates == 1 && mutables != 1) error(s.loc, "populate needs exactly one mutable output rank");
        for (const Access* a : accesses)
            for (const auto& sub : a->subs)
                if (sub.constraint)
                    for (const auto& v : vars_of(*sub.constraint))
                        if (std::find(inner_reduced.begin(), inner_reduced.end(), v) != inner_reduced.end())
                            error(a->loc, "constraint refers to rank " + v + " that is reduced inside the expression");
    }

    std::vector<std::string> subtree_vars(const RhsExpr& node) const
    {
        std::vector<std::string> out;
        for (const RhsExpr* l : leaves(node)) {
            if (l->kind == RhsExpr::Kind::RankVar) push_unique(out, l->var);
            if (l->kind != RhsExpr::Kind::Leaf) continue;
            const TensorDeclAst* d = p_.find_decl(l->access.tensor);
            for (size_t r = (d && d->generative()) ? 1 : 0; r < l->access.subs.size(); ++r)
                for (const auto& v : vars_of(l->access.subs[r].expr)) push_unique(out, v);
        }
        return out;
    }

    bool used_outside(const RhsExpr& root, const RhsExpr& node, const std::string& v) const
    {
        if (&root == &node) return false;
        if (root.kind == RhsExpr::Kind::Binary) {
            for (const auto& k : root.kids)
                if (used_outside(k, node, v)) return true;
            return false;
        }
        std::vector<std::string> vs = subtree_vars(root);
        return std::find(vs.begin(), vs.end(), v) != vs.end();
    }

    const Program& p_;
    const OperatorRegistry& reg_;
    std::vector<Diagnostic> diags_;
};

}  // namespace

std::vector<Diagnostic> validate(const Program& p, const OperatorRegistry& reg) { return Validator(p, reg).run(); }

// ---- desugaring ----

namespace {

Access plain_copy(const Access& a, const std::string& tensor)
{
    Access c;
    c.tensor = tensor;
    c.loc = a.loc;
    for (const auto& s : a.subs) c.subs.push_back(Subscript{s.expr, std::nullopt, false});
    return c;
}

std::vector<std::string> output_vars(const Access& out, bool generative)
{
    std::vector<std::string> vs;
    for (size_t r = generative ? 1 : 0; r < out.subs.size(); ++r)
        for (const auto& v : vars_of(out.subs[r].expr)) push_unique(vs, v);
    return vs;
}

bool looks_generational(const RankExpr& e)
{
    return e.kind == RankExpr::Kind::Offset || e.kind == RankExpr::Kind::Const || e.kind == RankExpr::Kind::Var;
}

void attach_guard(Access& out, const BoolCond& guard, bool generative)
{
    std::vector<std::string> gv = vars_of(guard);
    int best = -1;
    for (size_t r = generative ? 1 : 0; r < out.subs.size(); ++r) {
        const RankExpr& e = out.subs[r].expr;
        if (e.kind == RankExpr::Kind::Var && std::find(gv.begin(), gv.end(), e.a) != gv.end())
            best = static_cast<int>(r);
    }
    if (best < 0) throw DesugarError("case guard does not reference a plain output subscript");
    auto& slot = out.subs[static_cast<size_t>(best)].constraint;
    if (!slot) {
        slot = guard;
    } else {
        BoolCond both;
        both.kind = BoolCond::Kind::And;
        both.parts = {*slot, guard};
        slot = both;
    }
}

int max_label(const RhsExpr& e)
{
    int m = 0;
    for (int l : labels_of(e)) m = std::max(m, l);
    return m;
}

}  // namespace

Statement desugar_update(const Statement& s)
{
    if (s.kind != Statement::Kind::Update) return s;
    if (s.out.subs.empty() || !looks_generational(s.out.subs[0].expr))
        throw DesugarError("update shorthand needs a generational output");
    const RankExpr& g = s.out.subs[0].expr;
    RankExpr prev;
    if (g.kind == RankExpr::Kind::Const) {
        if (g.value < 1) throw DesugarError("update shorthand needs an output generation of at least 1");
        prev = RankExpr::constant(g.value - 1);
    } else {
        int64_t k = g.kind == RankExpr::Kind::Offset ? g.value : 0;
        if (k < 1) throw DesugarError("update shorthand needs an output generation of at least g+1");
        prev = RankExpr::offset(g.a, k - 1);
    }
    Access left = plain_copy(s.out, s.out.tensor);
    left.subs[0].expr = prev;
    Statement r;
    r.kind = Statement::Kind::Assign;
    r.out = s.out;
    r.loc = s.loc;
    int label = max_label(s.rhs) + 1;
    r.rhs = RhsExpr::binary(label, RhsExpr::leaf(std::move(left)), s.rhs);
    r.actions = s.actions;
    Action m;
    m.kind = Action::Kind::Map;
    m.label = label;
    m.ranks = output_vars(s.out, true);
    m.compute = "update";
    m.merge = "cup";
    m.loc = s.loc;
    r.actions.push_back(m);
    return r;
}

std::vector<Statement> desugar_case(const Statement& s, std::vector<TensorDeclAst>& decls)
{
    if (s.kind != Statement::Kind::Case) return {s};
    check_guards_disjoint(s);
    const TensorDeclAst* od = nullptr;
    for (const auto& d : decls)
        if (d.name == s.out.tensor) od = &d;
    if (!od) throw DesugarError("case output " + s.out.tensor + " is not declared");
    bool gen = od->generative();
    TensorDeclAst out_decl = *od;

    if (s.arms.size() == 1) {
        Statement r;
        r.kind = Statement::Kind::Assign;
        r.out = s.out;
        r.rhs = s.arms[0].rhs;
        r.actions = s.arms[0].actions;
        r.loc = s.loc;
        if (s.arms[0].guard) attach_guard(r.out, *s.arms[0].guard, gen);
        return {r};
    }

    // The else arm comes first so that guarded arms override it.
    std::vector<const CaseArm*> order;
    for (const auto& a : s.arms)
        if (!a.guard) order.push_back(&a);
    for (const auto& a : s.arms)
        if (a.guard) order.push_back(&a);

    std::vector<Statement> out;
    std::vector<std::string> temps;
    for (size_t t = 0; t < order.size(); ++t) {
        std::string name = s.out.tensor + "_c" + std::to_string(t);
        auto taken = [&](const std::string& n) {
            return std::any_of(decls.begin(), decls.end(), [&](const TensorDeclAst& d) { return d.name == n; });
        };
        while (taken(name)) name += "_";
        TensorDeclAst td = out_decl;
        td.name = name;
        decls.push_back(td);
        temps.push_back(name);

        Statement st;
        st.kind = Statement::Kind::Assign;
        st.out = s.out;
        st.out.tensor = name;
        st.rhs = order[t]->rhs;
        st.actions = order[t]->actions;
        st.loc = order[t]->loc;
        if (order[t]->guard) attach_guard(st.out, *order[t]->guard, gen);
        out.push_back(std::move(st));
    }

    Statement chain;
    chain.kind = Statement::Kind::Assign;
    chain.out = s.out;
    chain.loc = s.loc;
    std::vector<std::string> vars = output_vars(s.out, gen);
    RhsExpr acc = RhsExpr::leaf(plain_copy(s.out, temps[0]));
    for (size_t t = 1; t < temps.size(); ++t) {
        int label = static_cast<int>(t);
        acc = RhsExpr::binary(label, std::move(acc), RhsExpr::leaf(plain_copy(s.out, temps[t])));
        Action m;
        m.kind = Action::Kind::Map;
        m.label = label;
        m.ranks = vars;
        m.compute = "update";
        m.merge = "cup";
        m.loc = s.loc;
        chain.actions.push_back(m);
    }
    chain.rhs = std::move(acc);
    out.push_back(std::move(chain));
    return out;
}

namespace {

std::vector<Statement> expand(const Statement& s, std::vector<TensorDeclAst>& decls)
{
    if (s.kind == Statement::Kind::Update) return {desugar_update(s)};
    return desugar_case(s, decls);
}

void desugar_cascade(Cascade& c, std::vector<TensorDeclAst>& decls)
{
    std::vector<CascadeItem> items;
    for (auto& item : c.items) {
        if (item.is_cascade) {
            for (auto& n : item.nested) desugar_cascade(n, decls);
            items.push_back(std::move(item));
            continue;
        }
        for (auto& st : expand(item.stmt, decls)) {
            CascadeItem ci;
            ci.stmt = std::move(st);
            items.push_back(std::move(ci));
        }
    }
    c.items = std::move(items);
}

}  // namespace

Program desugar(const Program& p)
{
    Program out;
    out.decls = p.decls;
    for (const auto& it : p.inits) {
        if (it.user) {
            out.inits.push_back(it);
            continue;
        }
        for (auto& st : expand(it.stmt, out.decls)) {
            InitItem ni;
            ni.stmt = std::move(st);
            ni.loc = it.loc;
            out.inits.push_back(std::move(ni));
        }
    }
    out.body = p.body;
    desugar_cascade(out.body, out.decls);
    return out;
}

}  // namespace edge::ast
