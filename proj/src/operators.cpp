#include "edge/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace edge {

namespace {

const std::vector<MergeOp> kMerges = {
    {"pass", {true, true, true, true}},    {"none", {false, false, false, false}},
    {"cap", {false, false, false, true}},  {"lonly", {false, false, true, false}},
    {"left", {false, false, true, true}},  {"ronly", {false, true, false, false}},
    {"right", {false, true, false, true}}, {"xor", {false, true, true, false}},
    {"cup", {false, true, true, true}},    {"nor", {true, false, false, false}},
    {"eqv", {true, false, false, true}},   {"notr", {true, false, true, false}},
    {"bimpa", {true, false, true, true}},  {"notl", {true, true, false, false}},
    {"aimpb", {true, true, false, true}},  {"nand", {true, true, true, false}},
};

void same_type(const Scalar& a, const Scalar& b, std::string_view op)
{
    if (a.type() != b.type())
        throw EvalError(std::string(op) + ": operands of different dtypes (" + std::string(dtype_name(a.type())) +
                        ", " + std::string(dtype_name(b.type())) + ")");
}

Scalar ext_add(const Scalar& a, const Scalar& b)
{
    if (a.is_inf() || b.is_inf()) {
        if (a.is_inf() && b.is_inf() && a.inf_sign() != b.inf_sign()) throw EvalError("add: inf + -inf");
        return Scalar::infinity(a.is_inf() ? a.inf_sign() : b.inf_sign());
    }
    int64_t r;
    if (__builtin_add_overflow(a.as_int(), b.as_int(), &r)) throw EvalError("add: integer overflow");
    return Scalar::integer(r);
}

int sign_of(const Scalar& a)
{
    if (a.is_inf()) return a.inf_sign();
    return a.as_int() > 0 ? 1 : (a.as_int() < 0 ? -1 : 0);
}

Scalar ext_mul(const Scalar& a, const Scalar& b)
{
    if (a.is_inf() || b.is_inf()) {
        int s = sign_of(a) * sign_of(b);
        if (s == 0) return Scalar::integer(0);
        return Scalar::infinity(s);
    }
    int64_t r;
    if (__builtin_mul_overflow(a.as_int(), b.as_int(), &r)) throw EvalError("mul: integer overflow");
    return Scalar::integer(r);
}

Scalar ext_pow(const Scalar& a, const Scalar& b)
{
    if (b.is_inf() || b.as_int() < 0) throw EvalError("pow: integer exponent must be finite and non-negative");
    int64_t e = b.as_int();
    if (e == 0) return Scalar::integer(1);
    if (a.is_inf()) return Scalar::infinity(a.inf_sign() < 0 && e % 2 == 1 ? -1 : 1);
    int64_t base = a.as_int(), r = 1;
    while (e > 0) {
        if (e & 1) {
            if (__builtin_mul_overflow(r, base, &r)) throw EvalError("pow: integer overflow");
        }
        e >>= 1;
        if (e > 0 && __builtin_mul_overflow(base, base, &base)) throw EvalError("pow: integer overflow");
    }
    return Scalar::integer(r);
}

Scalar add(const Scalar& a, const Scalar& b)
{
    same_type(a, b, "add");
    switch (a.type()) {
    case DType::Int: return ext_add(a, b);
    case DType::Real: return Scalar::real(a.as_real() + b.as_real());
    case DType::Bool: return Scalar::boolean(a.as_bool() || b.as_bool());
    }
    return a;
}

Scalar mul(const Scalar& a, const Scalar& b)
{
    same_type(a, b, "mul");
    switch (a.type()) {
    case DType::Int: return ext_mul(a, b);
    case DType::Real: return Scalar::real(a.as_real() * b.as_real());
    case DType::Bool: return Scalar::boolean(a.as_bool() && b.as_bool());
    }
    return a;
}

Scalar smin(const Scalar& a, const Scalar& b)
{
    same_type(a, b, "min");
    return compare(b, a) < 0 ? b : a;
}

Scalar smax(const Scalar& a, const Scalar& b)
{
    same_type(a, b, "max");
    return compare(b, a) > 0 ? b : a;
}

Scalar spow(const Scalar& a, const Scalar& b)
{
    same_type(a, b, "pow");
    switch (a.type()) {
    case DType::Int: return ext_pow(a, b);
    case DType::Real: return Scalar::real(std::pow(a.as_real(), b.as_real()));
    case DType::Bool: return Scalar::boolean(a.as_bool() || !b.as_bool());
    }
    return a;
}

using ValueFn = Scalar (*)(const Scalar&, const Scalar&);

BinaryOp value_op(std::string name, ValueFn f, bool flags)
{
    return BinaryOp{std::move(name),
                    [f](const IterPoint&, const Operand& l, const Operand& r) -> std::optional<Scalar> {
                        return f(l.value, r.value);
                    },
                    flags, flags};
}

std::vector<CoordItem> candidates(const CoordItem& in, const std::vector<CoordItem>& fiber)
{
    std::vector<CoordItem> out;
    out.reserve(fiber.size() + 1);
    bool placed = false;
    for (const auto& it : fiber) {
        if (!placed && in.coord <= it.coord) {
            out.push_back(in);
            placed = true;
            if (in.coord == it.coord) continue;
        }
        out.push_back(it);
    }
    if (!placed) out.push_back(in);
    return out;
}

std::vector<CoordItem> keep_by_value(std::vector<CoordItem> c, int64_t k, bool largest)
{
    if (k < 0) throw EvalError("coordinate operator: negative k");
    std::stable_sort(c.begin(), c.end(), [largest](const CoordItem& a, const CoordItem& b) {
        int cmp = compare(a.value, b.value);
        if (cmp != 0) return largest ? cmp > 0 : cmp < 0;
        return a.coord < b.coord;
    });
    if (static_cast<int64_t>(c.size()) > k) c.resize(static_cast<size_t>(k));
    std::sort(c.begin(), c.end(), [](const CoordItem& a, const CoordItem& b) { return a.coord < b.coord; });
    return c;
}

std::vector<CoordItem> keep_by_coord(std::vector<CoordItem> c, int64_t k, bool largest)
{
    if (k < 0) throw EvalError("coordinate operator: negative k");
    if (static_cast<int64_t>(c.size()) <= k) return c;
    if (largest) c.erase(c.begin(), c.end() - k);
    else c.resize(static_cast<size_t>(k));
    return c;
}

OperatorRegistry make_builtins()
{
    OperatorRegistry reg;
    reg.add(value_op("add", add, true));
    reg.add(value_op("mul", mul, true));
    reg.add(value_op("min", smin, true));
    reg.add(value_op("max", smax, true));
    // On numeric dtypes `and` is the product and `or` the maximum.
    reg.add(value_op("and", mul, true));
    reg.add(value_op("or", smax, true));
    reg.add(value_op("pow", spow, false));
    reg.add(BinaryOp{"any", [](const IterPoint&, const Operand& l, const Operand&) -> std::optional<Scalar> {
                         return l.value;
                     }});
    reg.add(BinaryOp{"takeleft", [](const IterPoint&, const Operand& l, const Operand&) -> std::optional<Scalar> {
                         return l.value;
                     }});
    reg.add(BinaryOp{"takeright", [](const IterPoint&, const Operand&, const Operand& r) -> std::optional<Scalar> {
                         return r.value;
                     }});
    reg.add(BinaryOp{"pass1", [](const IterPoint&, const Operand&, const Operand& r) -> std::optional<Scalar> {
                         return r.value;
                     }});
    reg.add(BinaryOp{"update", [](const IterPoint&, const Operand& l, const Operand& r) -> std::optional<Scalar> {
                         if (!l.exists && !r.exists) return std::nullopt;
                         if (!r.exists) return l.value;
                         return r.value;
                     }});
    reg.add(BinaryOp{"ifeq", [](const IterPoint&, const Operand& l, const Operand& r) -> std::optional<Scalar> {
                         same_type(l.value, r.value, "ifeq");
                         if (l.value == r.value) return l.value;
                         return std::nullopt;
                     }});
    reg.add(BinaryOp{"leqsel", [](const IterPoint&, const Operand& l, const Operand& r) -> std::optional<Scalar> {
                         same_type(l.value, r.value, "leqsel");
                         if (compare(r.value, l.value) <= 0) return r.value;
                         return std::nullopt;
                     }});

    reg.add(UnaryOp{"not", [](const Scalar& x) { return Scalar::boolean(!x.as_bool()); }, true});
    reg.add(UnaryOp{"pass", [](const Scalar& x) { return x; }, false});
    reg.add(UnaryOp{"eexp", [](const Scalar& x) { return Scalar::real(std::exp(x.to_double())); }, false});
    reg.add(UnaryOp{"neg", [](const Scalar& x) {
                        switch (x.type()) {
                        case DType::Int:
                            if (x.is_inf()) return Scalar::infinity(-x.inf_sign());
                            if (x.as_int() == std::numeric_limits<int64_t>::min())
                                throw EvalError("neg: integer overflow");
                            return Scalar::integer(-x.as_int());
                        case DType::Real: return Scalar::real(-x.as_real());
                        case DType::Bool: break;
                        }
                        throw EvalError("neg: not defined on bool");
                    },
                    false});

    reg.add(CoordOp{"pass", [](const IterPoint&, const CoordItem& in, const std::vector<CoordItem>& f, int64_t) {
                        return candidates(in, f);
                    }});
    reg.add(CoordOp{"minval", [](const IterPoint&, const CoordItem& in, const std::vector<CoordItem>& f, int64_t k) {
                        return keep_by_value(candidates(in, f), k, false);
                    }});
    reg.add(CoordOp{"maxval", [](const IterPoint&, const CoordItem& in, const std::vector<CoordItem>& f, int64_t k) {
                        return keep_by_value(candidates(in, f), k, true);
                    }});
    reg.add(CoordOp{"mincoord",
                    [](const IterPoint&, const CoordItem& in, const std::vector<CoordItem>& f, int64_t k) {
                        return keep_by_coord(candidates(in, f), k, false);
                    }});
    reg.add(CoordOp{"maxcoord",
                    [](const IterPoint&, const CoordItem& in, const std::vector<CoordItem>& f, int64_t k) {
                        return keep_by_coord(candidates(in, f), k, true);
                    }});
    return reg;
}

Scalar random_scalar(std::mt19937_64& rng, DType t)
{
    switch (t) {
    case DType::Int: {
        auto roll = std::uniform_int_distribution<int>(0, 19)(rng);
        if (roll == 0) return Scalar::infinity(1);
        if (roll == 1) return Scalar::infinity(-1);
        return Scalar::integer(std::uniform_int_distribution<int64_t>(-20, 20)(rng));
    }
    case DType::Real: {
        // Small integers keep sums exact so associativity checks are not defeated by rounding.
        return Scalar::real(static_cast<double>(std::uniform_int_distribution<int>(-20, 20)(rng)));
    }
    case DType::Bool: return Scalar::boolean(std::uniform_int_distribution<int>(0, 1)(rng) == 1);
    }
    return Scalar{};
}

}  // namespace

const std::vector<MergeOp>& merge_ops() { return kMerges; }

const MergeOp& merge_op(std::string_view name)
{
    for (const auto& m : kMerges)
        if (m.name == name) return m;
    throw OperatorError("unknown merge operator '" + std::string(name) + "'");
}

bool merge_eval(std::string_view name, bool left, bool right) { return merge_op(name).eval(left, right); }

Scalar cast(const Scalar& v, DType target, const Scalar& src_empty)
{
    if (v.type() == target) return v;
    switch (target) {
    case DType::Bool: return Scalar::boolean(!(v == src_empty));
    case DType::Int:
        if (v.type() == DType::Bool) return Scalar::integer(v.as_bool() ? 1 : 0);
        {
            double d = v.as_real();
            if (std::isnan(d)) throw EvalError("cast: NaN has no integer value");
            if (std::isinf(d)) return Scalar::infinity(d > 0 ? 1 : -1);
            double t = std::trunc(d);
            if (t < -9223372036854775808.0 || t >= 9223372036854775808.0)
                throw EvalError("cast: " + v.to_string() + " overflows int");
            return Scalar::integer(static_cast<int64_t>(t));
        }
    case DType::Real:
        if (v.type() == DType::Bool) return Scalar::real(v.as_bool() ? 1.0 : 0.0);
        return Scalar::real(v.to_double());
    }
    return v;
}

std::optional<int64_t> IterPoint::lookup(std::string_view var) const
{
    for (size_t i = 0; i < vars.size() && i < coords.size(); ++i)
        if (vars[i] == var) return coords[i];
    return std::nullopt;
}

const BinaryOp& OperatorRegistry::binary(std::string_view name) const
{
    auto it = binary_.find(name);
    if (it == binary_.end()) throw OperatorError("unknown compute operator '" + std::string(name) + "'");
    return it->second;
}

const UnaryOp& OperatorRegistry::unary(std::string_view name) const
{
    auto it = unary_.find(name);
    if (it == unary_.end()) throw OperatorError("unknown unary operator '" + std::string(name) + "'");
    return it->second;
}

const CoordOp& OperatorRegistry::coord(std::string_view name) const
{
    auto it = coord_.find(name);
    if (it == coord_.end()) throw OperatorError("unknown coordinate operator '" + std::string(name) + "'");
    return it->second;
}

void OperatorRegistry::add(BinaryOp op)
{
    std::string n = op.name;
    if (!binary_.emplace(n, std::move(op)).second) throw OperatorError("operator '" + n + "' already registered");
}

void OperatorRegistry::add(UnaryOp op)
{
    std::string n = op.name;
    if (!unary_.emplace(n, std::move(op)).second) throw OperatorError("operator '" + n + "' already registered");
}

void OperatorRegistry::add(CoordOp op)
{
    std::string n = op.name;
    if (!coord_.emplace(n, std::move(op)).second) throw OperatorError("operator '" + n + "' already registered");
}

std::vector<std::string> OperatorRegistry::binary_names() const
{
    std::vector<std::string> out;
    for (const auto& [n, _] : binary_) out.push_back(n);
    return out;
}

const OperatorRegistry& builtin_registry()
{
    static const OperatorRegistry reg = make_builtins();
    return reg;
}

FlagCheck check_flags(const BinaryOp& op, DType sample, uint64_t seed, int samples)
{
    std::mt19937_64 rng(seed);
    FlagCheck res;
    IterPoint pt{};
    auto apply = [&](const std::optional<Scalar>& a, const std::optional<Scalar>& b) -> std::optional<Scalar> {
        if (!a || !b) return std::nullopt;
        return op.fn(pt, Operand{*a, true}, Operand{*b, true});
    };
    for (int i = 0; i < samples; ++i) {
        Scalar a = random_scalar(rng, sample), b = random_scalar(rng, sample), c = random_scalar(rng, sample);
        try {
            if (apply(a, b) != apply(b, a)) res.commutative = false;
        } catch (const EvalError&) {
        }
        try {
            if (apply(apply(a, b), c) != apply(a, apply(b, c))) res.associative = false;
        } catch (const EvalError&) {
        }
    }
    return res;
}

void register_user_op(OperatorRegistry& reg, UserOp op, DType sample)
{
    std::string name = std::visit([](const auto& o) { return o.name; }, op);
    if (name.empty()) throw OperatorError("operator name must not be empty");
    if (reg.has_any(name)) throw OperatorError("operator '" + name + "' already registered");
    if (auto* b = std::get_if<BinaryOp>(&op)) {
        if (!b->fn) throw OperatorError("operator '" + name + "' has no function");
        if (b->commutative || b->associative) {
            FlagCheck fc = check_flags(*b, sample);
            if (b->commutative && !fc.commutative)
                throw OperatorError("operator '" + name + "' is not commutative on sampled inputs");
            if (b->associative && !fc.associative)
                throw OperatorError("operator '" + name + "' is not associative on sampled inputs");
        }
    }
    std::visit([&](auto&& o) { reg.add(std::move(o)); }, std::move(op));
}

}  // namespace edge
