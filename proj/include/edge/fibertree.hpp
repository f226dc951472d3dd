#pragma once

#include "edge/scalar.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace edge {

class TensorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RankDecl {
    std::string name;
    std::optional<int64_t> shape;  // nullopt marks the generative rank

    bool operator==(const RankDecl&) const = default;
};

struct TensorDecl {
    std::string name;
    std::vector<RankDecl> ranks;
    DType dtype = DType::Int;
    Scalar empty;

    // Throws TensorError when the invariants do not hold.
    void check() const;
    bool generative() const { return !ranks.empty() && !ranks.front().shape; }
};

using Point = std::vector<int64_t>;

// One level of the fibertree. Interior levels use `kids`, the last level uses `vals`.
struct Fiber {
    std::map<int64_t, std::unique_ptr<Fiber>> kids;
    std::map<int64_t, Scalar> vals;

    Fiber() = default;
    Fiber(const Fiber& other);
    Fiber& operator=(const Fiber& other);
    Fiber(Fiber&&) = default;
    Fiber& operator=(Fiber&&) = default;

    bool empty() const { return kids.empty() && vals.empty(); }
};

struct FiberEntry {
    int64_t coord = 0;
    const Fiber* sub = nullptr;  // set at interior levels
    Scalar value;                // set at the leaf level
};

class Tensor {
public:
    explicit Tensor(TensorDecl decl);

    const TensorDecl& decl() const { return decl_; }
    const std::string& name() const { return decl_.name; }
    size_t rank_count() const { return decl_.ranks.size(); }
    const Scalar& empty_value() const { return decl_.empty; }
    DType dtype() const { return decl_.dtype; }

    Scalar get(const Point& p) const;
    // Stored value or nullptr; out-of-bounds points are simply absent.
    const Scalar* find(const Point& p) const;
    void set(const Point& p, const Scalar& v);
    bool exists(const Point& p) const { return find(p) != nullptr; }
    size_t occupancy() const { return count_; }
    void clear();

    std::vector<FiberEntry> fiber_at(const Point& prefix) const;
    Tensor swizzle(const std::vector<size_t>& order) const;
    // Content equality: same non-empty points with equal values; shapes are ignored.
    bool equals(const Tensor& other) const;

    // Visits non-empty leaves in lexicographic order of the declared rank order.
    template <typename F>
    void for_each(F&& f) const
    {
        if (decl_.ranks.empty()) {
            if (scalar_) f(Point{}, *scalar_);
            return;
        }
        Point p(decl_.ranks.size());
        walk(root_, 0, p, f);
    }

    std::vector<std::pair<Point, Scalar>> nonempty() const;

    const Fiber& root() const { return root_; }
    const std::optional<Scalar>& scalar() const { return scalar_; }

private:
    template <typename F>
    static void walk(const Fiber& fb, size_t depth, Point& p, F& f)
    {
        if (depth + 1 == p.size()) {
            for (const auto& [c, v] : fb.vals) {
                p[depth] = c;
                f(static_cast<const Point&>(p), v);
            }
            return;
        }
        for (const auto& [c, sub] : fb.kids) {
            p[depth] = c;
            walk(*sub, depth + 1, p, f);
        }
    }

    bool in_bounds(const Point& p) const;

    TensorDecl decl_;
    Fiber root_;
    std::optional<Scalar> scalar_;  // payload of a 0-rank tensor
    size_t count_ = 0;
};

}  // namespace edge
