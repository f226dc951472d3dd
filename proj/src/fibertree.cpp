#include "edge/fibertree.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace edge {

void TensorDecl::check() const
{
    std::set<std::string> seen;
    for (size_t r = 0; r < ranks.size(); ++r) {
        if (!seen.insert(ranks[r].name).second)
            throw TensorError("tensor " + name + ": duplicate rank name " + ranks[r].name);
        if (!ranks[r].shape && r != 0)
            throw TensorError("tensor " + name + ": only the first rank may be unbounded");
        if (ranks[r].shape && *ranks[r].shape <= 0)
            throw TensorError("tensor " + name + ": rank " + ranks[r].name + " needs a positive shape");
    }
    if (empty.type() != dtype)
        throw TensorError("tensor " + name + ": empty value " + empty.to_string() + " is not of dtype " +
                          std::string(dtype_name(dtype)));
}

Fiber::Fiber(const Fiber& other) : vals(other.vals)
{
    for (const auto& [c, sub] : other.kids) kids.emplace(c, std::make_unique<Fiber>(*sub));
}

Fiber& Fiber::operator=(const Fiber& other)
{
    if (this != &other) {
        Fiber tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

Tensor::Tensor(TensorDecl decl) : decl_(std::move(decl))
{
    decl_.check();
}

bool Tensor::in_bounds(const Point& p) const
{
    for (size_t r = 0; r < p.size(); ++r) {
        if (p[r] < 0) return false;
        if (decl_.ranks[r].shape && p[r] >= *decl_.ranks[r].shape) return false;
    }
    return true;
}

const Scalar* Tensor::find(const Point& p) const
{
    if (p.size() != decl_.ranks.size())
        throw TensorError("tensor " + decl_.name + ": point arity " + std::to_string(p.size()) + " != " +
                          std::to_string(decl_.ranks.size()));
    if (p.empty()) return scalar_ ? &*scalar_ : nullptr;
    const Fiber* fb = &root_;
    for (size_t r = 0; r + 1 < p.size(); ++r) {
        auto it = fb->kids.find(p[r]);
        if (it == fb->kids.end()) return nullptr;
        fb = it->second.get();
    }
    auto it = fb->vals.find(p.back());
    return it == fb->vals.end() ? nullptr : &it->second;
}

Scalar Tensor::get(const Point& p) const
{
    const Scalar* v = find(p);
    return v ? *v : decl_.empty;
}

namespace {

// Returns +1 on insert, -1 on erase, 0 otherwise.
int set_rec(Fiber& fb, const Point& p, size_t depth, const Scalar& v, bool erase)
{
    if (depth + 1 == p.size()) {
        if (erase) return fb.vals.erase(p[depth]) ? -1 : 0;
        auto [it, inserted] = fb.vals.insert_or_assign(p[depth], v);
        return inserted ? 1 : 0;
    }
    auto it = fb.kids.find(p[depth]);
    if (it == fb.kids.end()) {
        if (erase) return 0;
        it = fb.kids.emplace(p[depth], std::make_unique<Fiber>()).first;
    }
    int delta = set_rec(*it->second, p, depth + 1, v, erase);
    if (it->second->empty()) fb.kids.erase(it);
    return delta;
}

}  // namespace

void Tensor::set(const Point& p, const Scalar& v)
{
    if (p.size() != decl_.ranks.size())
        throw TensorError("tensor " + decl_.name + ": point arity mismatch on write");
    if (!in_bounds(p)) {
        std::string s;
        for (auto c : p) s += (s.empty() ? "" : ",") + std::to_string(c);
        throw TensorError("tensor " + decl_.name + ": write out of bounds at (" + s + ")");
    }
    if (v.type() != decl_.dtype)
        throw TensorError("tensor " + decl_.name + ": value " + v.to_string() + " has the wrong dtype");
    bool erase = v == decl_.empty;
    if (p.empty()) {
        bool had = scalar_.has_value();
        if (erase) scalar_.reset();
        else scalar_ = v;
        count_ = count_ - (had ? 1 : 0) + (scalar_ ? 1 : 0);
        return;
    }
    int delta = set_rec(root_, p, 0, v, erase);
    count_ = static_cast<size_t>(static_cast<long long>(count_) + delta);
}

void Tensor::clear()
{
    root_ = Fiber();
    scalar_.reset();
    count_ = 0;
}

std::vector<FiberEntry> Tensor::fiber_at(const Point& prefix) const
{
    if (prefix.size() >= decl_.ranks.size())
        throw TensorError("tensor " + decl_.name + ": fiber prefix must be shorter than the rank count");
    const Fiber* fb = &root_;
    for (int64_t c : prefix) {
        auto it = fb->kids.find(c);
        if (it == fb->kids.end()) return {};
        fb = it->second.get();
    }
    std::vector<FiberEntry> out;
    if (prefix.size() + 1 == decl_.ranks.size()) {
        for (const auto& [c, v] : fb->vals) out.push_back({c, nullptr, v});
    } else {
        for (const auto& [c, sub] : fb->kids) out.push_back({c, sub.get(), Scalar{}});
    }
    return out;
}

Tensor Tensor::swizzle(const std::vector<size_t>& order) const
{
    size_t n = decl_.ranks.size();
    std::vector<bool> used(n, false);
    if (order.size() != n) throw TensorError("swizzle order is not a permutation");
    for (size_t r : order) {
        if (r >= n || used[r]) throw TensorError("swizzle order is not a permutation");
        used[r] = true;
    }
    TensorDecl d = decl_;
    for (size_t r = 0; r < n; ++r) d.ranks[r] = decl_.ranks[order[r]];
    // A generative rank moved away from the front is no longer valid as unbounded.
    for (size_t r = 1; r < n; ++r)
        if (!d.ranks[r].shape) d.ranks[r].shape = std::numeric_limits<int64_t>::max();
    Tensor out(std::move(d));
    Point q(n);
    for_each([&](const Point& p, const Scalar& v) {
        for (size_t r = 0; r < n; ++r) q[r] = p[order[r]];
        out.set(q, v);
    });
    return out;
}

bool Tensor::equals(const Tensor& other) const
{
    if (rank_count() != other.rank_count())
        throw TensorError("equals: rank count mismatch between " + name() + " and " + other.name());
    if (occupancy() != other.occupancy()) return false;
    auto a = nonempty();
    auto b = other.nonempty();
    return a == b;
}

std::vector<std::pair<Point, Scalar>> Tensor::nonempty() const
{
    std::vector<std::pair<Point, Scalar>> out;
    out.reserve(count_);
    for_each([&](const Point& p, const Scalar& v) { out.emplace_back(p, v); });
    return out;
}

}  // namespace edge
