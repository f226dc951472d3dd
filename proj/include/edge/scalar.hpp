#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace edge {

enum class DType { Int, Real, Bool };

std::string_view dtype_name(DType t);
std::optional<DType> parse_dtype(std::string_view s);

// Raised for value-level failures such as inf + -inf or integer overflow.
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tagged value. Int holds an extended integer: a finite int64 or a signed infinity.
class Scalar {
public:
    Scalar() = default;

    static Scalar integer(int64_t v);
    static Scalar infinity(int sign = 1);
    static Scalar real(double v);
    static Scalar boolean(bool b);

    DType type() const { return type_; }
    bool is_inf() const { return type_ == DType::Int && inf_ != 0; }
    int inf_sign() const { return inf_; }
    int64_t as_int() const { return i_; }
    double as_real() const { return r_; }
    bool as_bool() const { return b_; }

    // Numeric view used by casts and tests: Int infinities map to IEEE infinities.
    double to_double() const;

    std::string to_string() const;

    // Parses a literal for the given dtype (`inf`, `-inf`, `true`, decimals, ...).
    static std::optional<Scalar> parse(std::string_view text, DType t);

    friend bool operator==(const Scalar& a, const Scalar& b);

private:
    DType type_ = DType::Int;
    int8_t inf_ = 0;
    bool b_ = false;
    int64_t i_ = 0;
    double r_ = 0.0;
};

// Three-way comparison of two values of the same dtype; -inf < finite < +inf for Int.
int compare(const Scalar& a, const Scalar& b);

}  // namespace edge
