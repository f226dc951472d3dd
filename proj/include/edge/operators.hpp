#pragma once

#include "edge/scalar.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace edge {

class OperatorError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---- merge operators ----

struct MergeOp {
    std::string name;
    std::array<bool, 4> table;  // FF, FT, TF, TT

    bool eval(bool left, bool right) const { return table[(left ? 2 : 0) + (right ? 1 : 0)]; }
    bool operator==(const MergeOp&) const = default;
};

// All sixteen tables, ordered pass, none, cap, lonly, left, ronly, right, xor, cup,
// nor, eqv, notr, bimpa, notl, aimpb, nand.
const std::vector<MergeOp>& merge_ops();
const MergeOp& merge_op(std::string_view name);
bool merge_eval(std::string_view name, bool left, bool right);

// ---- casting ----

// `src_empty` is the empty value of the tensor the value was read from; it decides
// the truth value when casting a number to bool.
Scalar cast(const Scalar& v, DType target, const Scalar& src_empty);

// ---- iteration points handed to operators ----

struct IterPoint {
    std::span<const std::string> vars;
    std::span<const int64_t> coords;

    std::optional<int64_t> lookup(std::string_view var) const;
};

// ---- compute operators ----

struct Operand {
    Scalar value;  // the tensor's empty value when the operand is absent
    bool exists = false;
};

// nullopt means "no value": the output point is left empty.
using BinaryFn = std::function<std::optional<Scalar>(const IterPoint&, const Operand&, const Operand&)>;

struct BinaryOp {
    std::string name;
    BinaryFn fn;
    bool commutative = false;
    bool associative = false;
};

struct UnaryOp {
    std::string name;
    std::function<Scalar(const Scalar&)> fn;
    // Operand is cast to bool (against its tensor's empty) before `fn` runs.
    bool boolean_input = false;
};

struct CoordItem {
    int64_t coord = 0;
    Scalar value;

    bool operator==(const CoordItem&) const = default;
};

// Receives the incoming RHS item and the current output fiber; returns the survivors sorted by coordinate.
using CoordFn = std::function<std::vector<CoordItem>(const IterPoint&, const CoordItem& incoming,
                                                     const std::vector<CoordItem>& fiber, int64_t k)>;

struct CoordOp {
    std::string name;
    CoordFn fn;
};

using UserOp = std::variant<BinaryOp, UnaryOp, CoordOp>;

class OperatorRegistry {
public:
    const BinaryOp& binary(std::string_view name) const;
    const UnaryOp& unary(std::string_view name) const;
    const CoordOp& coord(std::string_view name) const;

    bool has_binary(std::string_view name) const { return binary_.count(std::string(name)) > 0; }
    bool has_unary(std::string_view name) const { return unary_.count(std::string(name)) > 0; }
    bool has_coord(std::string_view name) const { return coord_.count(std::string(name)) > 0; }
    bool has_any(std::string_view name) const { return has_binary(name) || has_unary(name) || has_coord(name); }

    // Raw insertion without flag checks; throws on a name already used by the same kind.
    void add(BinaryOp op);
    void add(UnaryOp op);
    void add(CoordOp op);

    std::vector<std::string> binary_names() const;

private:
    std::map<std::string, BinaryOp, std::less<>> binary_;
    std::map<std::string, UnaryOp, std::less<>> unary_;
    std::map<std::string, CoordOp, std::less<>> coord_;
};

const OperatorRegistry& builtin_registry();

struct FlagCheck {
    bool commutative = true;
    bool associative = true;
};

// Samples random operand triples of dtype `sample` and reports which algebraic laws held.
FlagCheck check_flags(const BinaryOp& op, DType sample, uint64_t seed = 1, int samples = 1000);

// Adds a user operator. Claimed binary flags are verified with 1000 random samples of
// dtype `sample`; a failed claim or a name already in use throws OperatorError.
void register_user_op(OperatorRegistry& reg, UserOp op, DType sample = DType::Int);

}  // namespace edge
