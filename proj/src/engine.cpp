#include "edge/engine.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <memory>
#include <set>

namespace edge {

using namespace ast;

ValidationError::ValidationError(std::vector<Diagnostic> d)
    : std::runtime_error(d.empty() ? "validation failed" : d.front().format()), diagnostics(std::move(d))
{
}

const Tensor* Store::find(const std::string& name) const
{
    auto it = tensors.find(name);
    return it == tensors.end() ? nullptr : &it->second;
}

const Tensor* Store::slice(const std::string& name, int64_t gen) const
{
    auto it = generations.find(name);
    if (it == generations.end()) return nullptr;
    auto jt = it->second.find(gen);
    return jt == it->second.end() ? nullptr : &jt->second;
}

const Tensor* Store::latest(const std::string& name) const
{
    auto it = generations.find(name);
    if (it == generations.end() || it->second.empty()) return nullptr;
    return &it->second.rbegin()->second;
}

void Store::put(Tensor t)
{
    std::string n = t.name();
    tensors.insert_or_assign(n, std::move(t));
}

void Store::put_slice(int64_t gen, Tensor t)
{
    std::string n = t.name();
    generations[n].insert_or_assign(gen, std::move(t));
}

TensorDecl resolve_decl(const TensorDeclAst& d, const std::map<std::string, int64_t>& params)
{
    TensorDecl out;
    out.name = d.name;
    out.dtype = d.dtype;
    out.empty = d.empty;
    for (const auto& r : d.ranks) {
        RankDecl rd{r.name, std::nullopt};
        switch (r.shape.kind) {
        case ShapeSpec::Kind::Unbounded: break;
        case ShapeSpec::Kind::Literal: rd.shape = r.shape.value; break;
        case ShapeSpec::Kind::Param: {
            auto it = params.find(r.shape.param);
            if (it == params.end()) throw BindingError("size parameter |" + r.shape.param + "| is not bound");
            if (it->second <= 0) throw BindingError("size parameter |" + r.shape.param + "| must be positive");
            rd.shape = it->second;
            break;
        }
        }
        out.ranks.push_back(rd);
    }
    return out;
}

TensorDecl slice_decl(const TensorDecl& d)
{
    TensorDecl s = d;
    if (d.generative()) s.ranks.erase(s.ranks.begin());
    return s;
}

namespace {

using Key = std::vector<int64_t>;
using DeclMap = std::map<std::string, TensorDecl>;

int64_t sat_mul(int64_t a, int64_t b)
{
    int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) return std::numeric_limits<int64_t>::max();
    return r;
}

struct Budget {
    int64_t cap;
    int64_t used = 0;

    void charge(int64_t n)
    {
        if (n > cap - used)
            throw LimitError("iteration-space cap of " + std::to_string(cap) + " points exceeded");
        used += n;
    }
};

struct Binding {
    std::vector<int64_t> v;
    uint64_t mask = 0;

    explicit Binding(size_t n) : v(n, 0) {}
    bool has(int i) const { return (mask >> i) & 1U; }
    void set(int i, int64_t x)
    {
        v[static_cast<size_t>(i)] = x;
        mask |= uint64_t{1} << i;
    }
    void unset(int i) { mask &= ~(uint64_t{1} << i); }
};

using Cb = std::function<void(Binding&)>;

struct FoldState {
    bool exists = false;
    Scalar value;
};

struct Frame {
    std::vector<int> vars;
    std::map<Key, Scalar> entries;
    std::map<uint64_t, std::map<Key, std::vector<const std::pair<const Key, Scalar>*>>> index;
};

struct Node {
    RhsExpr::Kind kind = RhsExpr::Kind::Leaf;
    std::vector<int> vars;       // exposed variables, ascending canonical index
    std::vector<int> full_vars;  // binary: variables before an inner reduce
    // leaf
    const Tensor* tensor = nullptr;
    std::vector<const RankExpr*> subs;
    const UnaryOp* unary = nullptr;
    Scalar src_empty;
    Scalar eps;
    bool dense = false;
    // rank variable
    int var = -1;
    // literal
    Scalar lit;
    // binary
    int label = 0;
    std::unique_ptr<Node> l, r;
    const BinaryOp* map_op = nullptr;
    const MergeOp* map_merge = nullptr;
    const BinaryOp* red_op = nullptr;
    const MergeOp* red_merge = nullptr;
    std::vector<int> red_vars;
    Frame frame;
    std::vector<std::string> point_names;
};

std::vector<int> sorted_union(std::vector<int> a, const std::vector<int>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

std::vector<int> minus(const std::vector<int>& a, const std::vector<int>& b)
{
    std::vector<int> out;
    for (int x : a)
        if (std::find(b.begin(), b.end(), x) == b.end()) out.push_back(x);
    return out;
}

void flatten(const BoolCond& c, std::vector<const BoolCond*>& out)
{
    if (c.kind == BoolCond::Kind::And) {
        for (const auto& p : c.parts) flatten(p, out);
    } else {
        out.push_back(&c);
    }
}

class StmtEval {
public:
    StmtEval(const DeclMap& decls, const Statement& s, const Store& store, const GenEnv& env, const RunOptions& opt)
        : decls_(decls), s_(s), store_(store), env_(env), opt_(opt),
          reg_(opt.registry ? *opt.registry : builtin_registry()), budget_{opt.max_points}
    {
    }

    Tensor run()
    {
        const TensorDecl& od = decl(s_.out.tensor);
        out_decl_ = slice_decl(od);
        out_gen_ = od.generative();
        out_dtype_ = od.dtype;
        out_empty_ = od.empty;
        collect_vars();
        root_ = compile(s_.rhs);
        collect_constraints();
        find_actions();
        build(*root_, true);
        return root_stage();
    }

private:
    // ---- setup ----
    const TensorDecl& decl(const std::string& name) const
    {
        auto it = decls_.find(name);
        if (it == decls_.end()) throw BindingError("tensor " + name + " is not declared");
        return it->second;
    }

    int64_t gen_of(const RankExpr& e) const
    {
        if (e.kind == RankExpr::Kind::Const) return e.value;
        auto it = env_.find(e.a);
        if (it == env_.end()) throw BindingError("generation variable " + e.a + " is not bound");
        return it->second + (e.kind == RankExpr::Kind::Offset ? e.value : 0);
    }

    const Tensor& read(const Access& a)
    {
        const TensorDecl& d = decl(a.tensor);
        const Tensor* t = nullptr;
        if (d.generative()) t = store_.slice(a.tensor, gen_of(a.subs.at(0).expr));
        else t = store_.find(a.tensor);
        if (t) {
            if (t->rank_count() != slice_decl(d).ranks.size())
                throw BindingError("tensor " + a.tensor + " in the store has the wrong rank count");
            return *t;
        }
        placeholders_.emplace_back(slice_decl(d));
        return placeholders_.back();
    }

    size_t first_sub(const Access& a) const { return decl(a.tensor).generative() ? 1 : 0; }

    int var_index(const std::string& v)
    {
        for (size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == v) return static_cast<int>(i);
        names_.push_back(v);
        if (names_.size() > 64) throw EvalError("more than 64 rank variables in one statement");
        return static_cast<int>(names_.size() - 1);
    }

    int idx(const std::string& v) const
    {
        for (size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == v) return static_cast<int>(i);
        throw EvalError("rank variable " + v + " is not bound");
    }

    void collect_vars()
    {
        auto from_access = [&](const Access& a) {
            for (size_t r = first_sub(a); r < a.subs.size(); ++r)
                for (const auto& v : vars_of(a.subs[r].expr)) var_index(v);
        };
        from_access(s_.out);
        for (size_t r = first_sub(s_.out); r < s_.out.subs.size(); ++r)
            for (const auto& v : vars_of(s_.out.subs[r].expr)) out_vars_.push_back(idx(v));
        std::sort(out_vars_.begin(), out_vars_.end());
        out_vars_.erase(std::unique(out_vars_.begin(), out_vars_.end()), out_vars_.end());
        for (const RhsExpr* l : leaves(s_.rhs)) {
            if (l->kind == RhsExpr::Kind::Leaf) from_access(l->access);
            else if (l->kind == RhsExpr::Kind::RankVar) var_index(l->var);
        }
        ranges_.assign(names_.size(), -1);
        auto ranges_from = [&](const Access& a) {
            const TensorDecl& d = decl(a.tensor);
            for (size_t r = first_sub(a); r < a.subs.size() && r < d.ranks.size(); ++r) {
                const RankExpr& e = a.subs[r].expr;
                if (e.kind != RankExpr::Kind::Var || !d.ranks[r].shape) continue;
                int i = idx(e.a);
                if (ranges_[static_cast<size_t>(i)] < 0) ranges_[static_cast<size_t>(i)] = *d.ranks[r].shape;
            }
        };
        ranges_from(s_.out);
        for (const RhsExpr* l : leaves(s_.rhs))
            if (l->kind == RhsExpr::Kind::Leaf) ranges_from(l->access);
        for (size_t i = 0; i < names_.size(); ++i)
            if (ranges_[i] < 0) throw EvalError("cannot infer the range of rank variable " + names_[i]);
    }

    std::unique_ptr<Node> compile(const RhsExpr& e)
    {
        auto n = std::make_unique<Node>();
        n->kind = e.kind;
        switch (e.kind) {
        case RhsExpr::Kind::Leaf: {
            const Access& a = e.access;
            n->tensor = &read(a);
            if (a.subs.size() != decl(a.tensor).ranks.size())
                throw EvalError("access to " + a.tensor + " has the wrong number of subscripts");
            for (size_t r = first_sub(a); r < a.subs.size(); ++r) {
                n->subs.push_back(&a.subs[r].expr);
                for (const auto& v : vars_of(a.subs[r].expr)) n->vars.push_back(idx(v));
            }
            std::sort(n->vars.begin(), n->vars.end());
            n->vars.erase(std::unique(n->vars.begin(), n->vars.end()), n->vars.end());
            n->src_empty = n->tensor->empty_value();
            if (!a.unary.empty()) {
                n->unary = &reg_.unary(a.unary);
                Scalar y0 = apply_unary(*n, n->src_empty);
                n->eps = n->unary->boolean_input ? Scalar::boolean(false)
                                                 : cast(n->src_empty, y0.type(), n->src_empty);
                n->dense = !(y0 == n->eps);
            }
            break;
        }
        case RhsExpr::Kind::RankVar:
            n->var = idx(e.var);
            n->vars = {n->var};
            break;
        case RhsExpr::Kind::Literal:
            n->lit = cast(e.literal, out_dtype_, zero_of(e.literal.type()));
            break;
        case RhsExpr::Kind::Binary:
            n->label = e.label;
            n->l = compile(e.kids.at(0));
            n->r = compile(e.kids.at(1));
            n->full_vars = sorted_union(n->l->vars, n->r->vars);
            n->vars = n->full_vars;
            for (int v : n->full_vars) n->point_names.push_back(names_[static_cast<size_t>(v)]);
            break;
        }
        return n;
    }

    static Scalar zero_of(DType t)
    {
        switch (t) {
        case DType::Int: return Scalar::integer(0);
        case DType::Real: return Scalar::real(0.0);
        case DType::Bool: return Scalar::boolean(false);
        }
        return Scalar{};
    }

    Scalar apply_unary(const Node& n, const Scalar& x) const
    {
        Scalar in = n.unary->boolean_input ? cast(x, DType::Bool, n.src_empty) : x;
        return n.unary->fn(in);
    }

    void collect_constraints()
    {
        auto from_access = [&](const Access& a) {
            for (const auto& sub : a.subs)
                if (sub.constraint) flatten(*sub.constraint, atoms_);
        };
        from_access(s_.out);
        for (const RhsExpr* l : leaves(s_.rhs))
            if (l->kind == RhsExpr::Kind::Leaf) from_access(l->access);
    }

    Node* find_node(Node& n, int label)
    {
        if (n.kind != RhsExpr::Kind::Binary) return nullptr;
        if (n.label == label) return &n;
        if (Node* x = find_node(*n.l, label)) return x;
        return find_node(*n.r, label);
    }

    void find_actions()
    {
        int root_label = root_->kind == RhsExpr::Kind::Binary ? root_->label : 0;
        std::function<void(Node&)> defaults = [&](Node& n) {
            if (n.kind != RhsExpr::Kind::Binary) return;
            n.map_op = &reg_.binary("mul");
            n.map_merge = &merge_op("pass");
            defaults(*n.l);
            defaults(*n.r);
        };
        defaults(*root_);
        root_red_op_ = &reg_.binary("add");
        root_red_merge_ = &merge_op("pass");
        for (const auto& a : s_.actions) {
            switch (a.kind) {
            case Action::Kind::Map: {
                Node* n = find_node(*root_, a.label);
                if (!n) throw EvalError("map label ." + std::to_string(a.label) + " not found");
                n->map_op = &reg_.binary(a.compute);
                n->map_merge = &merge_op(a.merge);
                break;
            }
            case Action::Kind::Reduce:
                if (a.label == 0 || a.label == root_label) {
                    root_red_op_ = &reg_.binary(a.compute);
                    root_red_merge_ = &merge_op(a.merge);
                    has_root_reduce_ = true;
                } else {
                    Node* n = find_node(*root_, a.label);
                    if (!n) throw EvalError("reduce label ." + std::to_string(a.label) + " not found");
                    n->red_op = &reg_.binary(a.compute);
                    n->red_merge = &merge_op(a.merge);
                    for (const auto& r : a.ranks) n->red_vars.push_back(idx(r));
                    std::sort(n->red_vars.begin(), n->red_vars.end());
                }
                break;
            case Action::Kind::Populate: populate_ = &a; break;
            }
        }
        // Exposed variables shrink by inner reduce ranks.
        std::function<void(Node&)> expose = [&](Node& n) {
            if (n.kind != RhsExpr::Kind::Binary) return;
            expose(*n.l);
            expose(*n.r);
            n.full_vars = sorted_union(n.l->vars, n.r->vars);
            n.point_names.clear();
            for (int v : n.full_vars) n.point_names.push_back(names_[static_cast<size_t>(v)]);
            n.vars = minus(n.full_vars, n.red_vars);
        };
        expose(*root_);
    }

    // ---- expressions ----
    int64_t eval_rank(const RankExpr& e, const Binding& b) const
    {
        auto get = [&](const std::string& v) { return b.v[static_cast<size_t>(idx(v))]; };
        switch (e.kind) {
        case RankExpr::Kind::Var: return get(e.a);
        case RankExpr::Kind::Const: return e.value;
        case RankExpr::Kind::Offset: return get(e.a) + e.value;
        case RankExpr::Kind::Sum: return get(e.a) + get(e.b);
        case RankExpr::Kind::MinOf: return std::min(get(e.a), get(e.b));
        case RankExpr::Kind::MaxOf: return std::max(get(e.a), get(e.b));
        case RankExpr::Kind::Ternary:
            return eval_cond(e.cond.at(0), b) ? eval_rank(e.arms.at(0), b) : eval_rank(e.arms.at(1), b);
        }
        return 0;
    }

    bool bound_all(const RankExpr& e, const Binding& b) const
    {
        for (const auto& v : vars_of(e))
            if (!b.has(idx(v))) return false;
        return true;
    }

    bool eval_cond(const BoolCond& c, const Binding& b) const
    {
        switch (c.kind) {
        case BoolCond::Kind::Compare: {
            int64_t x = eval_rank(c.sides.at(0), b), y = eval_rank(c.sides.at(1), b);
            if (c.op == "<") return x < y;
            if (c.op == "<=") return x <= y;
            if (c.op == ">") return x > y;
            if (c.op == ">=") return x >= y;
            if (c.op == "==") return x == y;
            return x != y;
        }
        case BoolCond::Kind::InList: {
            const auto& l = list(c.list);
            int64_t x = b.v[static_cast<size_t>(idx(c.var))];
            return std::find(l.begin(), l.end(), x) != l.end();
        }
        case BoolCond::Kind::And:
            for (const auto& p : c.parts)
                if (!eval_cond(p, b)) return false;
            return true;
        }
        return false;
    }

    const std::vector<int64_t>& list(const std::string& name) const
    {
        auto it = store_.lists.find(name);
        if (it == store_.lists.end()) throw BindingError("list " + name + " is not bound");
        return it->second;
    }

    int64_t range(int v) const { return ranges_[static_cast<size_t>(v)]; }

    // ---- enumeration ----
    void dense_loop(const std::vector<int>& vars, Binding& b, const Cb& cb)
    {
        std::vector<int> free;
        int64_t total = 1;
        for (int v : vars)
            if (!b.has(v)) {
                free.push_back(v);
                total = sat_mul(total, range(v));
            }
        budget_.charge(total);
        dense_rec(free, 0, b, cb);
    }

    void dense_rec(const std::vector<int>& free, size_t k, Binding& b, const Cb& cb)
    {
        if (k == free.size()) {
            cb(b);
            return;
        }
        int v = free[k];
        for (int64_t x = 0; x < range(v); ++x) {
            b.set(v, x);
            dense_rec(free, k + 1, b, cb);
        }
        b.unset(v);
    }

    Operand leaf_operand(const Node& n, const Scalar* stored) const
    {
        if (!n.unary) {
            if (stored) return {cast(*stored, out_dtype_, n.src_empty), true};
            return {cast(n.src_empty, out_dtype_, n.src_empty), false};
        }
        Scalar y = apply_unary(n, stored ? *stored : n.src_empty);
        bool ex = !(y == n.eps);
        return {cast(ex ? y : n.eps, out_dtype_, n.eps), ex};
    }

    Operand probe(const Node& n, const Binding& b) const
    {
        switch (n.kind) {
        case RhsExpr::Kind::Leaf: {
            Point p(n.subs.size());
            const auto& ranks = n.tensor->decl().ranks;
            bool in = true;
            for (size_t r = 0; r < n.subs.size(); ++r) {
                p[r] = eval_rank(*n.subs[r], b);
                if (p[r] < 0 || (ranks[r].shape && p[r] >= *ranks[r].shape)) in = false;
            }
            return leaf_operand(n, in ? n.tensor->find(p) : nullptr);
        }
        case RhsExpr::Kind::RankVar:
            return {cast(Scalar::integer(b.v[static_cast<size_t>(n.var)]), out_dtype_, Scalar::integer(0)), true};
        case RhsExpr::Kind::Literal: return {n.lit, true};
        case RhsExpr::Kind::Binary: {
            Key k;
            k.reserve(n.vars.size());
            for (int v : n.vars) k.push_back(b.v[static_cast<size_t>(v)]);
            auto it = n.frame.entries.find(k);
            if (it == n.frame.entries.end()) return {cast(out_empty_, out_dtype_, out_empty_), false};
            return {it->second, true};
        }
        }
        return {};
    }

    int64_t estimate(const Node& n) const
    {
        switch (n.kind) {
        case RhsExpr::Kind::Leaf:
            if (!n.dense) return static_cast<int64_t>(n.tensor->occupancy());
            [[fallthrough]];
        case RhsExpr::Kind::RankVar:
        case RhsExpr::Kind::Literal: {
            int64_t t = 1;
            for (int v : n.vars) t = sat_mul(t, range(v));
            return t;
        }
        case RhsExpr::Kind::Binary: return static_cast<int64_t>(n.frame.entries.size());
        }
        return 0;
    }

    // Calls cb for every extension of b over n.vars where n exists.
    void enumerate(Node& n, Binding& b, const Cb& cb)
    {
        switch (n.kind) {
        case RhsExpr::Kind::Leaf:
            if (n.dense) {
                dense_loop(n.vars, b, [&](Binding& bb) {
                    if (probe(n, bb).exists) cb(bb);
                });
            } else if (!n.subs.empty()) {
                walk(n, 0, n.tensor->root(), b, cb);
            } else if (n.tensor->scalar()) {
                if (leaf_operand(n, &*n.tensor->scalar()).exists) cb(b);
            }
            return;
        case RhsExpr::Kind::RankVar:
        case RhsExpr::Kind::Literal: dense_loop(n.vars, b, cb); return;
        case RhsExpr::Kind::Binary: frame_enum(n.frame, b, cb); return;
        }
    }

    void walk(Node& n, size_t r, const Fiber& fb, Binding& b, const Cb& cb)
    {
        const RankExpr& e = *n.subs[r];
        bool last = r + 1 == n.subs.size();
        auto step_entry = [&](int64_t c) {
            if (last) {
                auto it = fb.vals.find(c);
                if (it != fb.vals.end() && leaf_operand(n, &it->second).exists) cb(b);
            } else {
                auto it = fb.kids.find(c);
                if (it != fb.kids.end()) walk(n, r + 1, *it->second, b, cb);
            }
        };
        if (bound_all(e, b)) {
            step_entry(eval_rank(e, b));
            return;
        }
        // One unbound variable that can be solved from the coordinate.
        int solve = -1;
        int64_t shift = 0;
        if (e.kind == RankExpr::Kind::Var || e.kind == RankExpr::Kind::Offset) {
            solve = idx(e.a);
            shift = e.kind == RankExpr::Kind::Offset ? e.value : 0;
        } else if (e.kind == RankExpr::Kind::Sum) {
            int a = idx(e.a), c = idx(e.b);
            if (a == c) {
                solve = -1;
            } else if (b.has(a)) {
                solve = c;
                shift = b.v[static_cast<size_t>(a)];
            } else if (b.has(c)) {
                solve = a;
                shift = b.v[static_cast<size_t>(c)];
            }
        }
        if (solve >= 0) {
            auto visit = [&](int64_t c) {
                int64_t x = c - shift;
                if (x < 0 || x >= range(solve)) return;
                b.set(solve, x);
                step_entry(c);
                b.unset(solve);
            };
            if (last) {
                for (const auto& kv : fb.vals) visit(kv.first);
            } else {
                for (const auto& kv : fb.kids) visit(kv.first);
            }
            return;
        }
        // Otherwise bind the first unbound variable densely and retry.
        std::vector<std::string> vs = vars_of(e);
        int first = -1;
        for (const auto& v : vs) {
            int i = idx(v);
            if (!b.has(i) && (first < 0 || i < first)) first = i;
        }
        budget_.charge(range(first));
        for (int64_t x = 0; x < range(first); ++x) {
            b.set(first, x);
            walk(n, r, fb, b, cb);
        }
        b.unset(first);
    }

    void frame_enum(Frame& f, Binding& b, const Cb& cb)
    {
        uint64_t m = 0;
        Key sub;
        std::vector<int> free;
        for (size_t j = 0; j < f.vars.size(); ++j) {
            if (b.has(f.vars[j])) {
                m |= uint64_t{1} << j;
                sub.push_back(b.v[static_cast<size_t>(f.vars[j])]);
            } else {
                free.push_back(static_cast<int>(j));
            }
        }
        auto emit = [&](const Key& k) {
            for (int j : free) b.set(f.vars[static_cast<size_t>(j)], k[static_cast<size_t>(j)]);
            cb(b);
            for (int j : free) b.unset(f.vars[static_cast<size_t>(j)]);
        };
        if (m == 0) {
            for (const auto& kv : f.entries) emit(kv.first);
            return;
        }
        auto it = f.index.find(m);
        if (it == f.index.end()) {
            auto& idx_map = f.index[m];
            for (const auto& kv : f.entries) {
                Key s;
                for (size_t j = 0; j < f.vars.size(); ++j)
                    if ((m >> j) & 1U) s.push_back(kv.first[j]);
                idx_map[s].push_back(&kv);
            }
            it = f.index.find(m);
        }
        auto jt = it->second.find(sub);
        if (jt == it->second.end()) return;
        for (const auto* kv : jt->second) emit(kv->first);
    }

    // ---- node evaluation ----
    void fold_step(FoldState& s, bool re, const Scalar& rv, const BinaryOp& op, const MergeOp& merge,
                   const IterPoint& pt) const
    {
        if (!merge.eval(s.exists, re)) {
            s.exists = false;
            return;
        }
        if (s.exists && re) {
            auto v = op.fn(pt, Operand{s.value, true}, Operand{rv, true});
            if (!v) {
                s.exists = false;
                return;
            }
            s.value = v->type() == out_dtype_ ? *v : cast(*v, out_dtype_, out_empty_);
            s.exists = !(s.value == out_empty_);
        } else if (re) {
            s.value = rv;
            s.exists = true;
        }
    }

    void build(Node& n, bool is_root)
    {
        if (n.kind != RhsExpr::Kind::Binary) return;
        build(*n.l, false);
        build(*n.r, false);
        const MergeOp& M = *n.map_merge;
        std::vector<Key> cands;
        Binding b(names_.size());
        auto add_point = [&](Binding& bb) {
            Key k;
            k.reserve(n.full_vars.size());
            for (int v : n.full_vars) k.push_back(bb.v[static_cast<size_t>(v)]);
            budget_.charge(1);
            cands.push_back(std::move(k));
        };
        if (M.eval(false, false)) {
            dense_loop(n.full_vars, b, add_point);
        } else {
            bool tf = M.eval(true, false), ft = M.eval(false, true), tt = M.eval(true, true);
            if (tf) {
                std::vector<int> ext = minus(n.r->vars, n.l->vars);
                enumerate(*n.l, b, [&](Binding& bb) { dense_loop(ext, bb, add_point); });
            }
            if (ft) {
                std::vector<int> ext = minus(n.l->vars, n.r->vars);
                enumerate(*n.r, b, [&](Binding& bb) { dense_loop(ext, bb, add_point); });
            }
            if (tt && !tf && !ft) {
                bool left_drives = estimate(*n.l) <= estimate(*n.r);
                Node& drive = left_drives ? *n.l : *n.r;
                Node& other = left_drives ? *n.r : *n.l;
                enumerate(drive, b, [&](Binding& bb) { enumerate(other, bb, add_point); });
            }
        }
        std::sort(cands.begin(), cands.end());
        cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

        std::vector<std::pair<Key, Scalar>> full;
        std::vector<int64_t> coords(n.full_vars.size());
        IterPoint pt{n.point_names, coords};
        for (const Key& k : cands) {
            for (size_t j = 0; j < n.full_vars.size(); ++j) {
                b.set(n.full_vars[j], k[j]);
                coords[j] = k[j];
            }
            Operand lo = probe(*n.l, b), ro = probe(*n.r, b);
            if (!M.eval(lo.exists, ro.exists)) continue;
            auto v = n.map_op->fn(pt, lo, ro);
            if (!v) continue;
            Scalar val = v->type() == out_dtype_ ? *v : cast(*v, out_dtype_, out_empty_);
            if (val == out_empty_) continue;
            full.emplace_back(k, val);
        }

        n.frame.vars = n.vars;
        if (is_root || !n.red_op) {
            for (auto& kv : full) n.frame.entries.emplace_hint(n.frame.entries.end(), std::move(kv.first), kv.second);
            return;
        }
        // Inner reduce over n.red_vars.
        std::vector<size_t> keep_pos;
        for (size_t j = 0; j < n.full_vars.size(); ++j)
            if (std::find(n.red_vars.begin(), n.red_vars.end(), n.full_vars[j]) == n.red_vars.end())
                keep_pos.push_back(j);
        auto project = [&](const Key& k) {
            Key s;
            s.reserve(keep_pos.size());
            for (size_t j : keep_pos) s.push_back(k[j]);
            return s;
        };
        std::map<Key, FoldState> groups;
        if (n.red_merge->eval(true, false)) {
            for (const auto& [k, v] : full) {
                std::copy(k.begin(), k.end(), coords.begin());
                fold_step(groups[project(k)], true, v, *n.red_op, *n.red_merge, pt);
            }
        } else {
            std::map<Key, Scalar> lookup(full.begin(), full.end());
            std::set<Key> touched;
            for (const auto& kv : full) touched.insert(project(kv.first));
            for (const Key& g : touched) {
                Binding gb(names_.size());
                for (size_t q = 0; q < keep_pos.size(); ++q) gb.set(n.full_vars[keep_pos[q]], g[q]);
                FoldState& st = groups[g];
                dense_loop(n.red_vars, gb, [&](Binding& bb) {
                    Key k;
                    for (size_t j = 0; j < n.full_vars.size(); ++j) {
                        k.push_back(bb.v[static_cast<size_t>(n.full_vars[j])]);
                        coords[j] = k.back();
                    }
                    auto it = lookup.find(k);
                    bool re = it != lookup.end();
                    fold_step(st, re, re ? it->second : out_empty_, *n.red_op, *n.red_merge, pt);
                });
            }
        }
        for (auto& [g, st] : groups)
            if (st.exists) n.frame.entries.emplace(g, st.value);
    }

    // ---- root stage ----
    bool constraints_hold(const Binding& b) const
    {
        for (const BoolCond* c : atoms_)
            if (!eval_cond(*c, b)) return false;
        return true;
    }

    void extend(const std::vector<int>& free, size_t j, Binding& b, const Cb& cb)
    {
        if (j == free.size()) {
            if (constraints_hold(b)) cb(b);
            return;
        }
        int v = free[j];
        for (const BoolCond* c : atoms_) {
            if (c->kind == BoolCond::Kind::Compare && c->op == "==") {
                for (int side = 0; side < 2; ++side) {
                    const RankExpr& me = c->sides[static_cast<size_t>(side)];
                    const RankExpr& other = c->sides[static_cast<size_t>(1 - side)];
                    if (me.kind != RankExpr::Kind::Var || idx(me.a) != v || !bound_all(other, b)) continue;
                    int64_t x = eval_rank(other, b);
                    budget_.charge(1);
                    if (x >= 0 && x < range(v)) {
                        b.set(v, x);
                        extend(free, j + 1, b, cb);
                        b.unset(v);
                    }
                    return;
                }
            }
            if (c->kind == BoolCond::Kind::InList && idx(c->var) == v) {
                std::vector<int64_t> xs = list(c->list);
                std::sort(xs.begin(), xs.end());
                xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
                budget_.charge(static_cast<int64_t>(xs.size()));
                for (int64_t x : xs) {
                    if (x < 0 || x >= range(v)) continue;
                    b.set(v, x);
                    extend(free, j + 1, b, cb);
                }
                b.unset(v);
                return;
            }
        }
        budget_.charge(range(v));
        for (int64_t x = 0; x < range(v); ++x) {
            b.set(v, x);
            extend(free, j + 1, b, cb);
        }
        b.unset(v);
    }

    // Output coordinates for a binding; nullopt when outside the output shape.
    std::optional<Point> out_point(const Binding& b) const
    {
        Point p;
        size_t f = out_gen_ ? 1 : 0;
        for (size_t r = f; r < s_.out.subs.size(); ++r) {
            int64_t c = eval_rank(s_.out.subs[r].expr, b);
            const auto& shape = out_decl_.ranks[r - f].shape;
            if (c < 0 || (shape && c >= *shape)) return std::nullopt;
            p.push_back(c);
        }
        return p;
    }

    Point out_point_checked(const Binding& b) const
    {
        auto p = out_point(b);
        if (!p) {
            std::string s;
            for (size_t i = 0; i < names_.size(); ++i)
                if (b.has(static_cast<int>(i))) s += (s.empty() ? "" : ", ") + names_[i] + "=" + std::to_string(b.v[i]);
            throw EvalError("output coordinate of " + s_.out.tensor + " out of shape at (" + s + ")");
        }
        return *p;
    }

    Tensor root_stage()
    {
        std::vector<int> root_vars = root_->kind == RhsExpr::Kind::Binary ? root_->full_vars : root_->vars;
        std::vector<int> U = sorted_union(out_vars_, root_vars);
        std::vector<int> out_only = minus(out_vars_, root_vars);
        std::vector<std::string> unames;
        for (int v : U) unames.push_back(names_[static_cast<size_t>(v)]);

        std::vector<std::pair<Key, Scalar>> pts;
        Binding b(names_.size());
        auto record = [&](Binding& bb, const Scalar& v) {
            extend(out_only, 0, bb, [&](Binding& full) {
                Key k;
                k.reserve(U.size());
                for (int u : U) k.push_back(full.v[static_cast<size_t>(u)]);
                pts.emplace_back(std::move(k), v);
            });
        };
        if (root_->kind == RhsExpr::Kind::Binary) {
            for (const auto& [k, v] : root_->frame.entries) {
                for (size_t j = 0; j < root_vars.size(); ++j) b.set(root_vars[j], k[j]);
                record(b, v);
            }
            for (int v : root_vars) b.unset(v);
        } else {
            enumerate(*root_, b, [&](Binding& bb) {
                Operand o = probe(*root_, bb);
                if (o.exists && !(o.value == out_empty_)) record(bb, o.value);
            });
        }
        std::sort(pts.begin(), pts.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

        Tensor out(out_decl_);
        std::vector<int64_t> coords(U.size());
        IterPoint pt{unames, coords};
        auto bind_u = [&](Binding& bb, const Key& k) {
            for (size_t j = 0; j < U.size(); ++j) {
                bb.set(U[j], k[j]);
                coords[j] = k[j];
            }
        };

        if (populate_) return populate_stage(pts, U, unames, std::move(out));

        std::map<Point, FoldState> folds;
        if (root_red_merge_->eval(true, false)) {
            for (const auto& [k, v] : pts) {
                bind_u(b, k);
                fold_step(folds[out_point_checked(b)], true, v, *root_red_op_, *root_red_merge_, pt);
            }
        } else {
            std::map<Key, Scalar> lookup(pts.begin(), pts.end());
            Binding db(names_.size());
            dense_loop(U, db, [&](Binding& bb) {
                if (!constraints_hold(bb)) return;
                Key k;
                for (size_t j = 0; j < U.size(); ++j) {
                    k.push_back(bb.v[static_cast<size_t>(U[j])]);
                    coords[j] = k.back();
                }
                auto it = lookup.find(k);
                bool re = it != lookup.end();
                std::optional<Point> p = re ? std::optional<Point>(out_point_checked(bb)) : out_point(bb);
                if (!p) return;
                fold_step(folds[*p], re, re ? it->second : out_empty_, *root_red_op_, *root_red_merge_, pt);
            });
        }
        for (const auto& [p, st] : folds)
            if (st.exists) out.set(p, st.value);
        return out;
    }

    Tensor populate_stage(const std::vector<std::pair<Key, Scalar>>& pts, const std::vector<int>& U,
                          const std::vector<std::string>& unames, Tensor out)
    {
        size_t f = out_gen_ ? 1 : 0;
        size_t mpos = 0;
        bool found = false;
        for (size_t r = f; r < s_.out.subs.size(); ++r)
            if (s_.out.subs[r].is_mutable) {
                mpos = r - f;
                found = true;
            }
        if (!found) throw EvalError("populate needs a mutable output rank");
        const UnaryOp& un = reg_.unary(populate_->compute);
        const CoordOp& co = reg_.coord(populate_->coord);
        int64_t k = populate_->coord_arg.value_or(1);
        std::map<Point, std::vector<CoordItem>> fibers;
        Binding b(names_.size());
        std::vector<int64_t> coords(U.size());
        IterPoint pt{unames, coords};
        for (const auto& [key, v] : pts) {
            for (size_t j = 0; j < U.size(); ++j) {
                b.set(U[j], key[j]);
                coords[j] = key[j];
            }
            Point p = out_point_checked(b);
            Scalar x = un.boolean_input ? cast(v, DType::Bool, out_empty_) : v;
            Scalar y = un.fn(x);
            if (y.type() != out_dtype_) y = cast(y, out_dtype_, un.boolean_input ? Scalar::boolean(false) : out_empty_);
            if (y == out_empty_) continue;
            Point prefix = p;
            int64_t c = p[mpos];
            prefix.erase(prefix.begin() + static_cast<std::ptrdiff_t>(mpos));
            std::vector<CoordItem>& fiber = fibers[prefix];
            CoordItem in{c, y};
            std::vector<CoordItem> next = co.fn(pt, in, fiber, k);
            for (size_t i = 0; i < next.size(); ++i) {
                if (i > 0 && next[i].coord <= next[i - 1].coord)
                    throw EvalError("coordinate operator " + co.name + " returned unsorted coordinates");
                bool ok = next[i] == in;
                if (!ok && next[i].coord != c)
                    for (const auto& it : fiber) ok = ok || it == next[i];
                if (!ok) throw EvalError("coordinate operator " + co.name + " produced an item outside its inputs");
            }
            fiber = std::move(next);
            if (opt_.populate_observer) {
                PopulateStep st{unames, key, prefix, in, fiber};
                opt_.populate_observer(st);
            }
        }
        for (const auto& [prefix, fiber] : fibers)
            for (const auto& it : fiber) {
                Point p = prefix;
                p.insert(p.begin() + static_cast<std::ptrdiff_t>(mpos), it.coord);
                out.set(p, it.value);
            }
        return out;
    }

    const DeclMap& decls_;
    const Statement& s_;
    const Store& store_;
    const GenEnv& env_;
    const RunOptions& opt_;
    const OperatorRegistry& reg_;
    Budget budget_;

    TensorDecl out_decl_;
    bool out_gen_ = false;
    DType out_dtype_ = DType::Int;
    Scalar out_empty_;
    std::vector<std::string> names_;
    std::vector<int64_t> ranges_;
    std::vector<int> out_vars_;
    std::deque<Tensor> placeholders_;
    std::unique_ptr<Node> root_;
    std::vector<const BoolCond*> atoms_;
    const BinaryOp* root_red_op_ = nullptr;
    const MergeOp* root_red_merge_ = nullptr;
    bool has_root_reduce_ = false;
    const Action* populate_ = nullptr;
};

DeclMap resolve_all(const Program& p, const std::map<std::string, int64_t>& params)
{
    DeclMap m;
    for (const auto& d : p.decls) m.emplace(d.name, resolve_decl(d, params));
    return m;
}

int64_t gen_value(const RankExpr& e, const GenEnv& env)
{
    if (e.kind == RankExpr::Kind::Const) return e.value;
    auto it = env.find(e.a);
    if (it == env.end()) throw BindingError("generation variable " + e.a + " is not bound");
    return it->second + (e.kind == RankExpr::Kind::Offset ? e.value : 0);
}

Tensor evaluate(const DeclMap& decls, const Statement& s, const Store& store, const GenEnv& env,
                const RunOptions& opt)
{
    if (s.kind == Statement::Kind::Case) throw EvalError("case statements must be desugared before evaluation");
    if (s.kind == Statement::Kind::Update) {
        Statement d = desugar_update(s);
        return StmtEval(decls, d, store, env, opt).run();
    }
    return StmtEval(decls, s, store, env, opt).run();
}

bool stop_holds(const DeclMap& decls, const StopCond& c, const Store& store, const GenEnv& env)
{
    auto slice = [&](const GenRef& g) -> Tensor {
        int64_t gen = g.offset;
        if (!g.var.empty()) {
            auto it = env.find(g.var);
            if (it == env.end()) throw BindingError("generation variable " + g.var + " is not bound");
            gen += it->second;
        }
        if (const Tensor* t = store.slice(g.tensor, gen)) return *t;
        auto it = decls.find(g.tensor);
        if (it == decls.end()) throw BindingError("tensor " + g.tensor + " is not declared");
        return Tensor(slice_decl(it->second));
    };
    if (c.kind == StopCond::Kind::OccupancyZero) return slice(c.a).occupancy() == 0;
    return slice(c.a).equals(slice(c.b));
}

class Runner {
public:
    Runner(const Program& p, Store seed, const RunOptions& opt) : p_(p), store_(std::move(seed)), opt_(opt) {}

    Store run()
    {
        decls_ = resolve_all(p_, store_.params);
        for (const auto& l : list_names(p_))
            if (!store_.lists.count(l)) throw BindingError("list " + l + " is not bound");
        std::set<std::string> users;
        for (const auto& u : user_tensors(p_)) users.insert(u);
        Store fresh;
        fresh.lists = store_.lists;
        fresh.params = store_.params;
        for (const auto& u : users) adopt_user(u, fresh);
        store_ = std::move(fresh);
        for (const auto& [name, d] : decls_)
            if (!d.generative() && !users.count(name)) store_.put(Tensor(d));
        for (const auto& it : p_.inits) {
            if (it.user) continue;
            exec(it.stmt);
        }
        run_cascade(p_.body, true);
        return std::move(store_);
    }

private:
    void adopt_user(const std::string& name, Store& fresh)
    {
        const TensorDecl& d = decls_.at(name);
        auto copy_into = [&](const Tensor& src, const TensorDecl& target) {
            if (src.rank_count() != target.ranks.size())
                throw BindingError("user tensor " + name + " has " + std::to_string(src.rank_count()) +
                                   " ranks, expected " + std::to_string(target.ranks.size()));
            if (src.dtype() != target.dtype)
                throw BindingError("user tensor " + name + " has dtype " + std::string(dtype_name(src.dtype())) +
                                   ", expected " + std::string(dtype_name(target.dtype)));
            Tensor t(target);
            try {
                src.for_each([&](const Point& p, const Scalar& v) { t.set(p, v); });
            } catch (const TensorError& e) {
                throw BindingError("user tensor " + name + ": " + e.what());
            }
            return t;
        };
        if (d.generative()) {
            auto it = store_.generations.find(name);
            if (it == store_.generations.end() || it->second.empty())
                throw BindingError("user tensor " + name + " was not supplied");
            for (const auto& [g, t] : it->second) fresh.put_slice(g, copy_into(t, slice_decl(d)));
            return;
        }
        const Tensor* t = store_.find(name);
        if (!t) throw BindingError("user tensor " + name + " was not supplied");
        fresh.put(copy_into(*t, d));
    }

    void exec(const Statement& s)
    {
        Tensor out = evaluate(decls_, s, store_, env_, opt_);
        const TensorDecl& d = decls_.at(s.out.tensor);
        if (d.generative()) store_.put_slice(gen_value(s.out.subs.at(0).expr, env_), std::move(out));
        else store_.put(std::move(out));
    }

    // Tensors whose generation subscripts only use `var` or constants.
    std::set<std::string> evictable(const std::string& var) const
    {
        std::set<std::string> ok, bad;
        std::function<void(const Cascade&)> scan = [&](const Cascade& c) {
            for (const auto& item : c.items) {
                if (item.is_cascade) {
                    for (const auto& n : item.nested) scan(n);
                    continue;
                }
                auto look = [&](const Access& a) {
                    auto it = decls_.find(a.tensor);
                    if (it == decls_.end() || !it->second.generative() || a.subs.empty()) return;
                    const RankExpr& e = a.subs[0].expr;
                    if (e.kind == RankExpr::Kind::Const || e.a == var) ok.insert(a.tensor);
                    else bad.insert(a.tensor);
                };
                look(item.stmt.out);
                for (const RhsExpr* l : leaves(item.stmt.rhs))
                    if (l->kind == RhsExpr::Kind::Leaf) look(l->access);
            }
            if (c.stop) {
                if (c.stop->a.var != var && !c.stop->a.var.empty()) bad.insert(c.stop->a.tensor);
                if (c.stop->b.var != var && !c.stop->b.var.empty()) bad.insert(c.stop->b.tensor);
            }
        };
        scan(p_.body);
        for (const auto& b : bad) ok.erase(b);
        return ok;
    }

    void reset_nested(const Cascade& c)
    {
        std::map<std::string, int64_t> lowest;
        std::function<void(const Cascade&)> scan = [&](const Cascade& cc) {
            for (const auto& item : cc.items) {
                if (item.is_cascade) {
                    for (const auto& n : item.nested) scan(n);
                    continue;
                }
                const Access& o = item.stmt.out;
                auto it = decls_.find(o.tensor);
                if (it == decls_.end() || !it->second.generative()) continue;
                const RankExpr& e = o.subs.at(0).expr;
                if (e.kind == RankExpr::Kind::Const || e.a != c.var) continue;
                int64_t k = e.kind == RankExpr::Kind::Offset ? e.value : 0;
                auto [pos, inserted] = lowest.emplace(o.tensor, k);
                if (!inserted) pos->second = std::min(pos->second, k);
            }
        };
        scan(c);
        for (const auto& [name, k] : lowest) {
            auto it = store_.generations.find(name);
            if (it == store_.generations.end()) continue;
            for (auto jt = it->second.begin(); jt != it->second.end();) {
                if (jt->first >= k) jt = it->second.erase(jt);
                else ++jt;
            }
        }
    }

    void run_cascade(const Cascade& c, bool top)
    {
        if (!top) reset_nested(c);
        std::set<std::string> evict = top && opt_.evict ? evictable(c.var) : std::set<std::string>{};
        for (int64_t g = 0;; ++g) {
            if (g >= opt_.max_generations)
                throw LimitError("generation limit of " + std::to_string(opt_.max_generations) +
                                 " reached in cascade " + c.var);
            env_[c.var] = g;
            for (const auto& item : c.items) {
                if (item.is_cascade) {
                    for (const auto& n : item.nested) run_cascade(n, false);
                } else {
                    exec(item.stmt);
                }
            }
            if (!c.stop) break;
            bool done = stop_holds(decls_, *c.stop, store_, env_);
            if (!evict.empty()) {
                for (const auto& name : evict) {
                    auto it = store_.generations.find(name);
                    if (it == store_.generations.end()) continue;
                    for (auto jt = it->second.begin(); jt != it->second.end();) {
                        if (jt->first < g) jt = it->second.erase(jt);
                        else ++jt;
                    }
                }
            }
            if (done) {
                if (!top) env_[c.var] = g + 1;
                break;
            }
        }
    }

    const Program& p_;
    Store store_;
    const RunOptions& opt_;
    DeclMap decls_;
    GenEnv env_;
};

}  // namespace

Store run(const Program& p, Store seed, const RunOptions& opt)
{
    const OperatorRegistry& reg = opt.registry ? *opt.registry : builtin_registry();
    auto diags = validate(p, reg);
    if (!diags.empty()) throw ValidationError(std::move(diags));
    Program dp = desugar(p);
    return Runner(dp, std::move(seed), opt).run();
}

Tensor eval_stmt(const Program& p, const Statement& s, const Store& store, const GenEnv& env, const RunOptions& opt)
{
    return evaluate(resolve_all(p, store.params), s, store, env, opt);
}

bool eval_stop(const Program& p, const StopCond& c, const Store& store, const GenEnv& env)
{
    return stop_holds(resolve_all(p, store.params), c, store, env);
}

}  // namespace edge
