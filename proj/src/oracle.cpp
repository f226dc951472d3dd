#include "edge/oracle.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace edge::oracle {

using namespace ast;

Graph Graph::symmetrized() const
{
    Graph g{vertices, {}};
    std::set<std::pair<int64_t, int64_t>> seen;
    for (const auto& e : edges) {
        if (seen.insert({e.src, e.dst}).second) g.edges.push_back(e);
    }
    for (const auto& e : edges) {
        if (seen.insert({e.dst, e.src}).second) g.edges.push_back({e.dst, e.src, e.weight});
    }
    return g;
}

Tensor Graph::to_tensor(DType dtype, const Scalar& empty, const std::string& name) const
{
    Tensor t(TensorDecl{name, {{"S", vertices}, {"D", vertices}}, dtype, empty});
    for (const auto& e : edges) {
        Scalar v = dtype == DType::Bool ? Scalar::boolean(true)
                   : dtype == DType::Int ? Scalar::integer(e.weight)
                                         : Scalar::real(static_cast<double>(e.weight));
        t.set({e.src, e.dst}, v);
    }
    return t;
}

Graph from_tensor(const Tensor& t)
{
    if (t.rank_count() != 2) throw std::invalid_argument("graph tensor must have two ranks");
    Graph g;
    for (const auto& r : t.decl().ranks) g.vertices = std::max(g.vertices, r.shape.value_or(0));
    t.for_each([&](const Point& p, const Scalar& v) {
        int64_t w = v.type() == DType::Bool ? 1 : v.type() == DType::Int ? v.as_int() : static_cast<int64_t>(v.as_real());
        g.edges.push_back({p[0], p[1], w});
    });
    return g;
}

namespace {

using Env = std::map<std::string, int64_t>;
using DeclMap = std::map<std::string, TensorDecl>;

Scalar zero(DType t)
{
    return t == DType::Int ? Scalar::integer(0) : t == DType::Real ? Scalar::real(0.0) : Scalar::boolean(false);
}

void flat(const BoolCond& c, std::vector<const BoolCond*>& out)
{
    if (c.kind == BoolCond::Kind::And)
        for (const auto& p : c.parts) flat(p, out);
    else
        out.push_back(&c);
}

class Dense {
public:
    Dense(const DeclMap& decls, const Store& store, const GenEnv& genv, const DenseOptions& opt)
        : decls_(decls), store_(store), genv_(genv), opt_(opt),
          reg_(opt.registry ? *opt.registry : builtin_registry())
    {
    }

    Tensor eval(const Statement& s)
    {
        switch (s.kind) {
        case Statement::Kind::Assign: return assign(s);
        case Statement::Kind::Update: return update(s);
        case Statement::Kind::Case: return cases(s);
        }
        throw EvalError("unknown statement kind");
    }

private:
    struct Act {
        const BinaryOp* op;
        const MergeOp* merge;
        std::vector<std::string> vars;
    };

    const TensorDecl& decl(const std::string& n) const
    {
        auto it = decls_.find(n);
        if (it == decls_.end()) throw BindingError("tensor " + n + " is not declared");
        return it->second;
    }

    int64_t gen(const RankExpr& e) const
    {
        if (e.kind == RankExpr::Kind::Const) return e.value;
        auto it = genv_.find(e.a);
        if (it == genv_.end()) throw BindingError("generation variable " + e.a + " is not bound");
        return it->second + (e.kind == RankExpr::Kind::Offset ? e.value : 0);
    }

    Tensor tensor_for(const Access& a) const
    {
        const TensorDecl& d = decl(a.tensor);
        const Tensor* t = d.generative() ? store_.slice(a.tensor, gen(a.subs.at(0).expr)) : store_.find(a.tensor);
        return t ? *t : Tensor(slice_decl(d));
    }

    int64_t rank(const RankExpr& e, const Env& env) const
    {
        auto v = [&](const std::string& n) { return env.at(n); };
        switch (e.kind) {
        case RankExpr::Kind::Var: return v(e.a);
        case RankExpr::Kind::Const: return e.value;
        case RankExpr::Kind::Offset: return v(e.a) + e.value;
        case RankExpr::Kind::Sum: return v(e.a) + v(e.b);
        case RankExpr::Kind::MinOf: return std::min(v(e.a), v(e.b));
        case RankExpr::Kind::MaxOf: return std::max(v(e.a), v(e.b));
        case RankExpr::Kind::Ternary: return cond(e.cond.at(0), env) ? rank(e.arms.at(0), env) : rank(e.arms.at(1), env);
        }
        return 0;
    }

    bool cond(const BoolCond& c, const Env& env) const
    {
        if (c.kind == BoolCond::Kind::And)
            return std::all_of(c.parts.begin(), c.parts.end(), [&](const BoolCond& p) { return cond(p, env); });
        if (c.kind == BoolCond::Kind::InList) {
            auto it = store_.lists.find(c.list);
            if (it == store_.lists.end()) throw BindingError("list " + c.list + " is not bound");
            return std::find(it->second.begin(), it->second.end(), env.at(c.var)) != it->second.end();
        }
        int64_t x = rank(c.sides.at(0), env), y = rank(c.sides.at(1), env);
        if (c.op == "<") return x < y;
        if (c.op == "<=") return x <= y;
        if (c.op == ">") return x > y;
        if (c.op == ">=") return x >= y;
        if (c.op == "==") return x == y;
        return x != y;
    }

    void tick()
    {
        if (++points_ > opt_.max_points) throw LimitError("dense oracle point cap exceeded");
    }

    // Calls f for every assignment of `vars` (first variable outermost) extending env.
    void odometer(const std::vector<std::string>& vars, size_t k, Env& env, const std::function<void()>& f)
    {
        if (k == vars.size()) {
            tick();
            f();
            return;
        }
        for (int64_t x = 0; x < ranges_.at(vars[k]); ++x) {
            env[vars[k]] = x;
            odometer(vars, k + 1, env, f);
        }
        env.erase(vars[k]);
    }

    std::vector<std::string> in_order(const std::set<std::string>& vs) const
    {
        std::vector<std::string> out;
        for (const auto& v : order_)
            if (vs.count(v)) out.push_back(v);
        return out;
    }

    std::set<std::string> exposed(const RhsExpr& e) const
    {
        std::set<std::string> out;
        switch (e.kind) {
        case RhsExpr::Kind::Leaf: {
            size_t f = decl(e.access.tensor).generative() ? 1 : 0;
            for (size_t r = f; r < e.access.subs.size(); ++r)
                for (const auto& v : vars_of(e.access.subs[r].expr)) out.insert(v);
            break;
        }
        case RhsExpr::Kind::RankVar: out.insert(e.var); break;
        case RhsExpr::Kind::Literal: break;
        case RhsExpr::Kind::Binary: {
            out = exposed(e.kids[0]);
            auto r = exposed(e.kids[1]);
            out.insert(r.begin(), r.end());
            if (e.label != root_label_) {
                auto it = reduces_.find(e.label);
                if (it != reduces_.end())
                    for (const auto& v : it->second.vars) out.erase(v);
            }
            break;
        }
        }
        return out;
    }

    // Value of a leaf, rank variable, literal or operation at one binding.
    Operand node(const RhsExpr& e, Env& env)
    {
        switch (e.kind) {
        case RhsExpr::Kind::Leaf: return leaf(e, env);
        case RhsExpr::Kind::RankVar: return {cast(Scalar::integer(env.at(e.var)), out_dtype_, Scalar::integer(0)), true};
        case RhsExpr::Kind::Literal: return {cast(e.literal, out_dtype_, zero(e.literal.type())), true};
        case RhsExpr::Kind::Binary: break;
        }
        auto rit = reduces_.find(e.label);
        if (e.label == root_label_ || rit == reduces_.end()) return combine(e, env);
        const Act& red = rit->second;
        std::vector<std::string> rv = in_order({red.vars.begin(), red.vars.end()});
        std::set<std::string> all = exposed(e.kids[0]);
        auto r2 = exposed(e.kids[1]);
        all.insert(r2.begin(), r2.end());
        std::vector<std::string> names = in_order(all);
        bool exists = false;
        Scalar acc = out_empty_;
        odometer(rv, 0, env, [&] {
            Operand x = combine(e, env);
            std::vector<int64_t> coords;
            for (const auto& n : names) coords.push_back(env.at(n));
            step(exists, acc, x, *red.op, *red.merge, IterPoint{names, coords});
        });
        return {exists ? acc : out_empty_, exists};
    }

    void step(bool& exists, Scalar& acc, const Operand& x, const BinaryOp& op, const MergeOp& merge,
              const IterPoint& pt) const
    {
        if (!merge.eval(exists, x.exists)) {
            exists = false;
            acc = out_empty_;
            return;
        }
        if (exists && x.exists) {
            auto v = op.fn(pt, Operand{acc, true}, x);
            if (!v) {
                exists = false;
                return;
            }
            acc = v->type() == out_dtype_ ? *v : cast(*v, out_dtype_, out_empty_);
            exists = !(acc == out_empty_);
        } else if (x.exists) {
            acc = x.value;
            exists = true;
        }
    }

    Operand combine(const RhsExpr& e, Env& env)
    {
        Operand l = node(e.kids[0], env);
        Operand r = node(e.kids[1], env);
        auto mit = maps_.find(e.label);
        const BinaryOp& op = mit == maps_.end() ? reg_.binary("mul") : *mit->second.op;
        const MergeOp& merge = mit == maps_.end() ? merge_op("pass") : *mit->second.merge;
        Operand absent{out_empty_, false};
        if (!merge.eval(l.exists, r.exists)) return absent;
        std::set<std::string> all = exposed(e.kids[0]);
        auto r2 = exposed(e.kids[1]);
        all.insert(r2.begin(), r2.end());
        std::vector<std::string> names = in_order(all);
        std::vector<int64_t> coords;
        for (const auto& n : names) coords.push_back(env.at(n));
        auto v = op.fn(IterPoint{names, coords}, l, r);
        if (!v) return absent;
        Scalar val = v->type() == out_dtype_ ? *v : cast(*v, out_dtype_, out_empty_);
        if (val == out_empty_) return absent;
        return {val, true};
    }

    Operand leaf(const RhsExpr& e, Env& env)
    {
        const Access& a = e.access;
        auto cached = leaf_tensors_.find(&a);
        if (cached == leaf_tensors_.end()) cached = leaf_tensors_.emplace(&a, tensor_for(a)).first;
        const Tensor& t = cached->second;
        size_t f = decl(a.tensor).generative() ? 1 : 0;
        Point p;
        bool in = true;
        for (size_t r = f; r < a.subs.size(); ++r) {
            int64_t c = rank(a.subs[r].expr, env);
            const auto& shape = t.decl().ranks[r - f].shape;
            if (c < 0 || (shape && c >= *shape)) in = false;
            p.push_back(c);
        }
        const Scalar* stored = in ? t.find(p) : nullptr;
        const Scalar& se = t.empty_value();
        if (a.unary.empty()) return {cast(stored ? *stored : se, out_dtype_, se), stored != nullptr};
        const UnaryOp& u = reg_.unary(a.unary);
        Scalar x = stored ? *stored : se;
        Scalar y = u.fn(u.boolean_input ? cast(x, DType::Bool, se) : x);
        Scalar y0 = u.fn(u.boolean_input ? cast(se, DType::Bool, se) : se);
        Scalar eps = u.boolean_input ? Scalar::boolean(false) : cast(se, y0.type(), se);
        bool ex = !(y == eps);
        return {cast(ex ? y : eps, out_dtype_, eps), ex};
    }

    void find_ranges(const Statement& s)
    {
        order_.clear();
        ranges_.clear();
        auto add_vars = [&](const Access& a) {
            size_t f = decl(a.tensor).generative() ? 1 : 0;
            for (size_t r = f; r < a.subs.size(); ++r)
                for (const auto& v : vars_of(a.subs[r].expr))
                    if (std::find(order_.begin(), order_.end(), v) == order_.end()) order_.push_back(v);
        };
        auto add_ranges = [&](const Access& a) {
            const TensorDecl& d = decl(a.tensor);
            size_t f = d.generative() ? 1 : 0;
            for (size_t r = f; r < a.subs.size(); ++r) {
                const RankExpr& e = a.subs[r].expr;
                if (e.kind == RankExpr::Kind::Var && d.ranks[r].shape && !ranges_.count(e.a))
                    ranges_[e.a] = *d.ranks[r].shape;
            }
        };
        add_vars(s.out);
        for (const RhsExpr* l : leaves(s.rhs)) {
            if (l->kind == RhsExpr::Kind::Leaf) add_vars(l->access);
            if (l->kind == RhsExpr::Kind::RankVar && std::find(order_.begin(), order_.end(), l->var) == order_.end())
                order_.push_back(l->var);
        }
        add_ranges(s.out);
        for (const RhsExpr* l : leaves(s.rhs))
            if (l->kind == RhsExpr::Kind::Leaf) add_ranges(l->access);
        for (const auto& v : order_)
            if (!ranges_.count(v)) throw EvalError("cannot infer the range of rank variable " + v);
    }

    Tensor assign(const Statement& s)
    {
        const TensorDecl& od = decl(s.out.tensor);
        TensorDecl sd = slice_decl(od);
        out_dtype_ = od.dtype;
        out_empty_ = od.empty;
        find_ranges(s);
        maps_.clear();
        reduces_.clear();
        leaf_tensors_.clear();
        root_label_ = s.rhs.kind == RhsExpr::Kind::Binary ? s.rhs.label : 0;
        const Action* pop = nullptr;
        std::optional<Act> root_red;
        for (const auto& a : s.actions) {
            if (a.kind == Action::Kind::Map) maps_[a.label] = Act{&reg_.binary(a.compute), &merge_op(a.merge), a.ranks};
            else if (a.kind == Action::Kind::Populate) pop = &a;
            else if (a.label == 0 || a.label == root_label_)
                root_red = Act{&reg_.binary(a.compute), &merge_op(a.merge), a.ranks};
            else reduces_[a.label] = Act{&reg_.binary(a.compute), &merge_op(a.merge), a.ranks};
        }
        std::vector<const BoolCond*> atoms;
        auto gather = [&](const Access& a) {
            for (const auto& sub : a.subs)
                if (sub.constraint) flat(*sub.constraint, atoms);
        };
        gather(s.out);
        for (const RhsExpr* l : leaves(s.rhs))
            if (l->kind == RhsExpr::Kind::Leaf) gather(l->access);

        std::set<std::string> uset = exposed(s.rhs);
        size_t f = od.generative() ? 1 : 0;
        for (size_t r = f; r < s.out.subs.size(); ++r)
            for (const auto& v : vars_of(s.out.subs[r].expr)) uset.insert(v);
        std::vector<std::string> U = in_order(uset);

        auto out_coords = [&](const Env& env) -> std::optional<Point> {
            Point p;
            for (size_t r = f; r < s.out.subs.size(); ++r) {
                int64_t c = rank(s.out.subs[r].expr, env);
                const auto& shape = sd.ranks[r - f].shape;
                if (c < 0 || (shape && c >= *shape)) return std::nullopt;
                p.push_back(c);
            }
            return p;
        };

        Tensor out(sd);
        Env env;
        std::vector<int64_t> coords(U.size());
        IterPoint pt{U, coords};
        if (pop) {
            size_t mpos = 0;
            for (size_t r = f; r < s.out.subs.size(); ++r)
                if (s.out.subs[r].is_mutable) mpos = r - f;
            const UnaryOp& un = reg_.unary(pop->compute);
            const CoordOp& co = reg_.coord(pop->coord);
            int64_t k = pop->coord_arg.value_or(1);
            std::map<Point, std::vector<CoordItem>> fibers;
            odometer(U, 0, env, [&] {
                if (!std::all_of(atoms.begin(), atoms.end(), [&](const BoolCond* c) { return cond(*c, env); })) return;
                Operand x = node(s.rhs, env);
                if (!x.exists) return;
                auto p = out_coords(env);
                if (!p) throw EvalError("output coordinate of " + s.out.tensor + " out of shape");
                for (size_t j = 0; j < U.size(); ++j) coords[j] = env.at(U[j]);
                Scalar y = un.fn(un.boolean_input ? cast(x.value, DType::Bool, out_empty_) : x.value);
                if (y.type() != out_dtype_)
                    y = cast(y, out_dtype_, un.boolean_input ? Scalar::boolean(false) : out_empty_);
                if (y == out_empty_) return;
                Point prefix = *p;
                int64_t c = prefix[mpos];
                prefix.erase(prefix.begin() + static_cast<std::ptrdiff_t>(mpos));
                auto& fb = fibers[prefix];
                fb = co.fn(pt, CoordItem{c, y}, fb, k);
            });
            for (const auto& [prefix, fb] : fibers)
                for (const auto& it : fb) {
                    Point p = prefix;
                    p.insert(p.begin() + static_cast<std::ptrdiff_t>(mpos), it.coord);
                    out.set(p, it.value);
                }
            return out;
        }

        const BinaryOp& rop = root_red ? *root_red->op : reg_.binary("add");
        const MergeOp& rmerge = root_red ? *root_red->merge : merge_op("pass");
        std::map<Point, std::pair<bool, Scalar>> acc;
        odometer(U, 0, env, [&] {
            if (!std::all_of(atoms.begin(), atoms.end(), [&](const BoolCond* c) { return cond(*c, env); })) return;
            Operand x = node(s.rhs, env);
            auto p = out_coords(env);
            if (!p) {
                if (x.exists) throw EvalError("output coordinate of " + s.out.tensor + " out of shape");
                return;
            }
            for (size_t j = 0; j < U.size(); ++j) coords[j] = env.at(U[j]);
            auto [it, fresh] = acc.try_emplace(*p, false, out_empty_);
            step(it->second.first, it->second.second, x, rop, rmerge, pt);
        });
        for (const auto& [p, st] : acc)
            if (st.first) out.set(p, st.second);
        return out;
    }

    Tensor update(const Statement& s)
    {
        const TensorDecl& od = decl(s.out.tensor);
        const RankExpr& g = s.out.subs.at(0).expr;
        int64_t prev_gen = gen(g) - 1;
        const Tensor* prev = store_.slice(s.out.tensor, prev_gen);
        Statement a = s;
        a.kind = Statement::Kind::Assign;
        Tensor fresh = assign(a);
        Tensor out = prev ? *prev : Tensor(slice_decl(od));
        fresh.for_each([&](const Point& p, const Scalar& v) { out.set(p, v); });
        return out;
    }

    Tensor cases(const Statement& s)
    {
        const TensorDecl& od = decl(s.out.tensor);
        size_t f = od.generative() ? 1 : 0;
        Tensor out(slice_decl(od));
        auto arm_tensor = [&](const CaseArm& arm) {
            Statement a;
            a.kind = Statement::Kind::Assign;
            a.out = s.out;
            a.rhs = arm.rhs;
            a.actions = arm.actions;
            return assign(a);
        };
        for (const auto& arm : s.arms)
            if (!arm.guard) arm_tensor(arm).for_each([&](const Point& p, const Scalar& v) { out.set(p, v); });
        for (const auto& arm : s.arms) {
            if (!arm.guard) continue;
            Tensor t = arm_tensor(arm);
            t.for_each([&](const Point& p, const Scalar& v) {
                Env env;
                for (size_t r = f; r < s.out.subs.size(); ++r)
                    if (s.out.subs[r].expr.kind == RankExpr::Kind::Var) env[s.out.subs[r].expr.a] = p[r - f];
                if (cond(*arm.guard, env)) out.set(p, v);
            });
        }
        return out;
    }

    const DeclMap& decls_;
    const Store& store_;
    const GenEnv& genv_;
    const DenseOptions& opt_;
    const OperatorRegistry& reg_;
    int64_t points_ = 0;

    DType out_dtype_ = DType::Int;
    Scalar out_empty_;
    std::vector<std::string> order_;
    std::map<std::string, int64_t> ranges_;
    std::map<int, Act> maps_, reduces_;
    int root_label_ = 0;
    std::map<const Access*, Tensor> leaf_tensors_;
};

DeclMap resolve(const Program& p, const std::map<std::string, int64_t>& params)
{
    DeclMap m;
    for (const auto& d : p.decls) m.emplace(d.name, resolve_decl(d, params));
    return m;
}

class DenseRunner {
public:
    DenseRunner(const Program& p, Store seed, const DenseOptions& opt) : p_(p), store_(std::move(seed)), opt_(opt) {}

    Store run()
    {
        decls_ = resolve(p_, store_.params);
        Store s;
        s.lists = store_.lists;
        s.params = store_.params;
        for (const auto& u : user_tensors(p_)) {
            const TensorDecl& d = decls_.at(u);
            if (d.generative()) {
                for (const auto& [g, t] : store_.generations.at(u)) s.put_slice(g, rehome(t, slice_decl(d)));
            } else {
                const Tensor* t = store_.find(u);
                if (!t) throw BindingError("user tensor " + u + " was not supplied");
                s.put(rehome(*t, d));
            }
        }
        store_ = std::move(s);
        for (const auto& it : p_.inits)
            if (!it.user) exec(it.stmt);
        cascade(p_.body, true);
        return std::move(store_);
    }

private:
    static Tensor rehome(const Tensor& src, const TensorDecl& d)
    {
        Tensor t(d);
        src.for_each([&](const Point& p, const Scalar& v) { t.set(p, v); });
        return t;
    }

    void exec(const Statement& s)
    {
        Tensor t = Dense(decls_, store_, env_, opt_).eval(s);
        const TensorDecl& d = decls_.at(s.out.tensor);
        if (!d.generative()) {
            store_.put(std::move(t));
            return;
        }
        const RankExpr& e = s.out.subs.at(0).expr;
        int64_t g = e.kind == RankExpr::Kind::Const ? e.value : env_.at(e.a) + (e.kind == RankExpr::Kind::Offset ? e.value : 0);
        store_.put_slice(g, std::move(t));
    }

    Tensor slice_or_empty(const GenRef& r)
    {
        int64_t g = r.offset + (r.var.empty() ? 0 : env_.at(r.var));
        if (const Tensor* t = store_.slice(r.tensor, g)) return *t;
        return Tensor(slice_decl(decls_.at(r.tensor)));
    }

    void clear_written(const Cascade& c)
    {
        std::function<void(const Cascade&)> scan = [&](const Cascade& cc) {
            for (const auto& item : cc.items) {
                if (item.is_cascade) {
                    for (const auto& n : item.nested) scan(n);
                    continue;
                }
                const Access& o = item.stmt.out;
                if (!decls_.at(o.tensor).generative()) continue;
                const RankExpr& e = o.subs.at(0).expr;
                if (e.kind == RankExpr::Kind::Const || e.a != c.var) continue;
                int64_t k = e.kind == RankExpr::Kind::Offset ? e.value : 0;
                auto it = store_.generations.find(o.tensor);
                if (it == store_.generations.end()) continue;
                std::erase_if(it->second, [&](const auto& kv) { return kv.first >= k; });
            }
        };
        scan(c);
    }

    void cascade(const Cascade& c, bool top)
    {
        if (!top) clear_written(c);
        for (int64_t g = 0; g < opt_.max_generations; ++g) {
            env_[c.var] = g;
            for (const auto& item : c.items) {
                if (item.is_cascade)
                    for (const auto& n : item.nested) cascade(n, false);
                else
                    exec(item.stmt);
            }
            if (!c.stop) return;
            bool done = c.stop->kind == StopCond::Kind::OccupancyZero
                            ? slice_or_empty(c.stop->a).occupancy() == 0
                            : slice_or_empty(c.stop->a).equals(slice_or_empty(c.stop->b));
            if (done) {
                if (!top) env_[c.var] = g + 1;
                return;
            }
        }
        throw LimitError("dense oracle generation limit reached in cascade " + c.var);
    }

    const Program& p_;
    Store store_;
    const DenseOptions& opt_;
    DeclMap decls_;
    GenEnv env_;
};

std::vector<std::vector<std::pair<int64_t, int64_t>>> adjacency(const Graph& g)
{
    std::vector<std::vector<std::pair<int64_t, int64_t>>> adj(static_cast<size_t>(g.vertices));
    for (const auto& e : g.edges) adj.at(static_cast<size_t>(e.src)).push_back({e.dst, e.weight});
    return adj;
}

void check_sources(const Graph& g, const std::vector<int64_t>& sources)
{
    for (int64_t s : sources)
        if (s < 0 || s >= g.vertices) throw std::invalid_argument("source vertex " + std::to_string(s) + " out of range");
}

}  // namespace

Tensor dense_eval_stmt(const Program& p, const Statement& s, const Store& store, const GenEnv& env,
                       const DenseOptions& opt)
{
    DeclMap d = resolve(p, store.params);
    return Dense(d, store, env, opt).eval(s);
}

Store dense_run(const Program& p, Store seed, const DenseOptions& opt)
{
    auto diags = validate(p, opt.registry ? *opt.registry : builtin_registry());
    if (!diags.empty()) throw ValidationError(std::move(diags));
    return DenseRunner(p, std::move(seed), opt).run();
}

DepthMap bfs_oracle(const Graph& g, const std::vector<int64_t>& sources)
{
    check_sources(g, sources);
    auto adj = adjacency(g);
    DepthMap depth;
    std::queue<int64_t> q;
    for (int64_t s : sources)
        if (depth.emplace(s, 0).second) q.push(s);
    while (!q.empty()) {
        int64_t u = q.front();
        q.pop();
        for (auto [v, w] : adj[static_cast<size_t>(u)])
            if (depth.emplace(v, depth[u] + 1).second) q.push(v);
    }
    return depth;
}

DepthMap sssp_dijkstra(const Graph& g, const std::vector<int64_t>& sources)
{
    check_sources(g, sources);
    for (const auto& e : g.edges)
        if (e.weight < 0) throw std::invalid_argument("negative edge weight passed to Dijkstra");
    auto adj = adjacency(g);
    DepthMap dist;
    using Item = std::pair<int64_t, int64_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (int64_t s : sources) {
        dist[s] = 0;
        pq.push({0, s});
    }
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        for (auto [v, w] : adj[static_cast<size_t>(u)]) {
            auto it = dist.find(v);
            if (it == dist.end() || d + w < it->second) {
                dist[v] = d + w;
                pq.push({d + w, v});
            }
        }
    }
    return dist;
}

DepthMap sssp_bellman_ford(const Graph& g, const std::vector<int64_t>& sources)
{
    check_sources(g, sources);
    DepthMap dist;
    for (int64_t s : sources) dist[s] = 0;
    for (int64_t round = 0; round < g.vertices; ++round) {
        bool changed = false;
        for (const auto& e : g.edges) {
            auto it = dist.find(e.src);
            if (it == dist.end()) continue;
            auto jt = dist.find(e.dst);
            if (jt == dist.end() || it->second + e.weight < jt->second) {
                dist[e.dst] = it->second + e.weight;
                changed = true;
            }
        }
        if (!changed) return dist;
    }
    throw std::invalid_argument("negative cycle reachable from the sources");
}

Partition cc_oracle(const Graph& g)
{
    std::vector<int64_t> parent(static_cast<size_t>(g.vertices));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int64_t(int64_t)> find = [&](int64_t x) {
        auto& px = parent[static_cast<size_t>(x)];
        if (px != x) px = find(px);
        return px;
    };
    for (const auto& e : g.edges) {
        int64_t a = find(e.src), b = find(e.dst);
        if (a == b) continue;
        if (a < b) parent[static_cast<size_t>(b)] = a;
        else parent[static_cast<size_t>(a)] = b;
    }
    Partition out;
    for (int64_t v = 0; v < g.vertices; ++v) out[v] = find(v);
    return out;
}

bool partitions_equal(const Partition& a, const Partition& b)
{
    if (a.size() != b.size()) throw std::invalid_argument("partitions cover different vertex sets");
    std::map<int64_t, int64_t> ab, ba;
    for (const auto& [v, la] : a) {
        auto it = b.find(v);
        if (it == b.end()) throw std::invalid_argument("partitions cover different vertex sets");
        int64_t lb = it->second;
        if (ab.emplace(la, lb).first->second != lb) return false;
        if (ba.emplace(lb, la).first->second != la) return false;
    }
    return true;
}

std::set<int64_t> reachable(const Graph& g, const std::vector<int64_t>& sources)
{
    std::set<int64_t> out;
    for (const auto& [v, d] : bfs_oracle(g, sources)) out.insert(v);
    return out;
}

std::map<int64_t, int64_t> degree_oracle(const Graph& g)
{
    std::set<std::pair<int64_t, int64_t>> seen;
    std::map<int64_t, int64_t> out;
    for (const auto& e : g.edges)
        if (seen.insert({e.src, e.dst}).second) ++out[e.src];
    return out;
}

std::map<int64_t, int64_t> masked_degree_oracle(const Graph& g, const std::vector<int64_t>& mask)
{
    std::map<int64_t, int64_t> out;
    for (const auto& [v, d] : degree_oracle(g))
        if (std::find(mask.begin(), mask.end(), v) != mask.end()) out[v] = d;
    return out;
}

std::map<int64_t, int64_t> min_weight_oracle(const Graph& g)
{
    std::map<int64_t, int64_t> out;
    for (const auto& e : g.edges) {
        auto [it, fresh] = out.emplace(e.src, e.weight);
        if (!fresh) it->second = std::min(it->second, e.weight);
    }
    return out;
}

namespace {

// Neighbors per source sorted by id.
std::map<int64_t, std::map<int64_t, int64_t>> rows(const Graph& g)
{
    std::map<int64_t, std::map<int64_t, int64_t>> out;
    for (const auto& e : g.edges) out[e.src][e.dst] = e.weight;
    return out;
}

}  // namespace

EdgeMap min_neighbor_oracle(const Graph& g)
{
    EdgeMap out;
    for (const auto& [s, row] : rows(g)) {
        auto best = row.begin();
        for (auto it = row.begin(); it != row.end(); ++it)
            if (it->second < best->second) best = it;
        out[{s, best->first}] = best->second;
    }
    return out;
}

EdgeMap min_neighbor_ties_oracle(const Graph& g)
{
    EdgeMap out;
    for (const auto& [s, row] : rows(g)) {
        int64_t m = row.begin()->second;
        for (const auto& [d, w] : row) m = std::min(m, w);
        for (const auto& [d, w] : row)
            if (w == m) out[{s, d}] = w;
    }
    return out;
}

EdgeMap top_k_oracle(const Graph& g, int64_t k)
{
    EdgeMap out;
    for (const auto& [s, row] : rows(g)) {
        std::vector<std::pair<int64_t, int64_t>> items(row.begin(), row.end());
        std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        for (size_t i = 0; i < items.size() && static_cast<int64_t>(i) < k; ++i) out[{s, items[i].first}] = items[i].second;
    }
    return out;
}

EdgeMap max_neighbor_id_oracle(const Graph& g)
{
    EdgeMap out;
    for (const auto& [s, row] : rows(g)) out[{s, row.rbegin()->first}] = row.rbegin()->second;
    return out;
}

EdgeMap two_hop_oracle(const Graph& g)
{
    auto r = rows(g);
    EdgeMap out;
    for (const auto& [sn, w1] : min_neighbor_oracle(g)) {
        auto it = r.find(sn.second);
        if (it == r.end()) continue;
        for (const auto& [p, w2] : it->second) {
            auto [jt, fresh] = out.emplace(std::make_pair(sn.first, p), w1 + w2);
            if (!fresh) jt->second = std::min(jt->second, w1 + w2);
        }
    }
    return out;
}

}  // namespace edge::oracle
