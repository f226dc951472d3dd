#include "edge/scalar.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace edge {

std::string_view dtype_name(DType t)
{
    switch (t) {
    case DType::Int: return "int";
    case DType::Real: return "float";
    case DType::Bool: return "bool";
    }
    return "?";
}

std::optional<DType> parse_dtype(std::string_view s)
{
    if (s == "int") return DType::Int;
    if (s == "float") return DType::Real;
    if (s == "bool") return DType::Bool;
    return std::nullopt;
}

Scalar Scalar::integer(int64_t v)
{
    Scalar s;
    s.type_ = DType::Int;
    s.i_ = v;
    return s;
}

Scalar Scalar::infinity(int sign)
{
    Scalar s;
    s.type_ = DType::Int;
    s.inf_ = sign < 0 ? -1 : 1;
    return s;
}

Scalar Scalar::real(double v)
{
    Scalar s;
    s.type_ = DType::Real;
    s.r_ = v;
    return s;
}

Scalar Scalar::boolean(bool b)
{
    Scalar s;
    s.type_ = DType::Bool;
    s.b_ = b;
    return s;
}

double Scalar::to_double() const
{
    switch (type_) {
    case DType::Int:
        if (inf_ != 0) return inf_ * std::numeric_limits<double>::infinity();
        return static_cast<double>(i_);
    case DType::Real: return r_;
    case DType::Bool: return b_ ? 1.0 : 0.0;
    }
    return 0.0;
}

std::string Scalar::to_string() const
{
    switch (type_) {
    case DType::Int:
        if (inf_ > 0) return "inf";
        if (inf_ < 0) return "-inf";
        return std::to_string(i_);
    case DType::Bool:
        return b_ ? "true" : "false";
    case DType::Real: {
        if (std::isnan(r_)) return "nan";
        if (std::isinf(r_)) return r_ > 0 ? "inf" : "-inf";
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, r_);
        return std::string(buf, res.ptr);
    }
    }
    return "?";
}

std::optional<Scalar> Scalar::parse(std::string_view text, DType t)
{
    if (text.empty()) return std::nullopt;
    switch (t) {
    case DType::Bool:
        if (text == "true") return boolean(true);
        if (text == "false") return boolean(false);
        return std::nullopt;
    case DType::Int: {
        if (text == "inf" || text == "+inf") return infinity(1);
        if (text == "-inf") return infinity(-1);
        int64_t v = 0;
        auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
        return integer(v);
    }
    case DType::Real: {
        if (text == "inf" || text == "+inf") return real(std::numeric_limits<double>::infinity());
        if (text == "-inf") return real(-std::numeric_limits<double>::infinity());
        if (text == "nan") return real(std::numeric_limits<double>::quiet_NaN());
        double v = 0;
        auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
        return real(v);
    }
    }
    return std::nullopt;
}

bool operator==(const Scalar& a, const Scalar& b)
{
    if (a.type_ != b.type_) return false;
    switch (a.type_) {
    case DType::Int: return a.inf_ == b.inf_ && (a.inf_ != 0 || a.i_ == b.i_);
    case DType::Real: return a.r_ == b.r_;
    case DType::Bool: return a.b_ == b.b_;
    }
    return false;
}

int compare(const Scalar& a, const Scalar& b)
{
    if (a.type() != b.type()) throw EvalError("comparison between different dtypes");
    switch (a.type()) {
    case DType::Int: {
        int ka = a.inf_sign(), kb = b.inf_sign();
        if (ka != kb) return ka < kb ? -1 : 1;
        if (ka != 0) return 0;
        return a.as_int() < b.as_int() ? -1 : (a.as_int() > b.as_int() ? 1 : 0);
    }
    case DType::Real:
        return a.as_real() < b.as_real() ? -1 : (a.as_real() > b.as_real() ? 1 : 0);
    case DType::Bool:
        return static_cast<int>(a.as_bool()) - static_cast<int>(b.as_bool());
    }
    return 0;
}

}  // namespace edge
