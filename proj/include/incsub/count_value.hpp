#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <variant>

#include <gmpxx.h>

namespace incsub {

/// Nonnegative number mantissa * 2^exponent with mantissa in [1, 2), or zero
/// (mantissa == 0, exponent == 0). Each operation rounds once at binary64
/// precision; the exponent never overflows in practice.
class ExtendedFloat {
public:
    constexpr ExtendedFloat() = default;

    static ExtendedFloat from_double(double x) {
        if (!(x >= 0.0) || std::isinf(x)) throw std::domain_error("ExtendedFloat: value must be finite and >= 0");
        ExtendedFloat out;
        if (x == 0.0) return out;
        int e = 0;
        double f = std::frexp(x, &e);
        out.mantissa_ = 2.0 * f;
        out.exponent_ = e - 1;
        return out;
    }

    static ExtendedFloat from_mpz(const mpz_class& z) {
        if (sgn(z) < 0) throw std::domain_error("ExtendedFloat: value must be >= 0");
        ExtendedFloat out;
        if (sgn(z) == 0) return out;
        long e = 0;
        double f = mpz_get_d_2exp(&e, z.get_mpz_t());
        out.mantissa_ = 2.0 * f;
        out.exponent_ = static_cast<std::int64_t>(e) - 1;
        return out;
    }

    static ExtendedFloat from_parts(double mantissa, std::int64_t exponent) {
        ExtendedFloat out = from_double(mantissa);
        if (!out.is_zero()) out.exponent_ += exponent;
        return out;
    }

    double mantissa() const noexcept { return mantissa_; }
    std::int64_t exponent() const noexcept { return exponent_; }
    bool is_zero() const noexcept { return mantissa_ == 0.0; }

    /// log2 of the value; -inf for zero.
    double log2() const {
        if (is_zero()) return -INFINITY;
        return std::log2(mantissa_) + static_cast<double>(exponent_);
    }

    long double to_long_double() const {
        if (is_zero()) return 0.0L;
        return std::ldexp(static_cast<long double>(mantissa_), static_cast<int>(exponent_));
    }

    ExtendedFloat& operator+=(const ExtendedFloat& other) {
        if (other.is_zero()) return *this;
        if (is_zero()) return *this = other;
        const ExtendedFloat* hi = this;
        const ExtendedFloat* lo = &other;
        if (other.exponent_ > exponent_) std::swap(hi, lo);
        const std::int64_t shift = hi->exponent_ - lo->exponent_;
        double m = hi->mantissa_;
        if (shift < 64) m += std::ldexp(lo->mantissa_, -static_cast<int>(shift));
        std::int64_t e = hi->exponent_;
        if (m >= 2.0) {
            m *= 0.5;
            ++e;
        }
        mantissa_ = m;
        exponent_ = e;
        return *this;
    }

    ExtendedFloat& operator*=(const ExtendedFloat& other) {
        if (is_zero() || other.is_zero()) return *this = ExtendedFloat{};
        double m = mantissa_ * other.mantissa_;
        std::int64_t e = exponent_ + other.exponent_;
        if (m >= 2.0) {
            m *= 0.5;
            ++e;
        }
        mantissa_ = m;
        exponent_ = e;
        return *this;
    }

    ExtendedFloat& operator/=(const ExtendedFloat& other) {
        if (other.is_zero()) throw std::domain_error("ExtendedFloat: division by zero");
        if (is_zero()) return *this;
        double m = mantissa_ / other.mantissa_;
        std::int64_t e = exponent_ - other.exponent_;
        if (m < 1.0) {
            m *= 2.0;
            --e;
        }
        mantissa_ = m;
        exponent_ = e;
        return *this;
    }

    friend ExtendedFloat operator+(ExtendedFloat a, const ExtendedFloat& b) { return a += b; }
    friend ExtendedFloat operator*(ExtendedFloat a, const ExtendedFloat& b) { return a *= b; }
    friend ExtendedFloat operator/(ExtendedFloat a, const ExtendedFloat& b) { return a /= b; }

    friend bool operator==(const ExtendedFloat&, const ExtendedFloat&) = default;
    friend std::partial_ordering operator<=>(const ExtendedFloat& a, const ExtendedFloat& b) {
        if (a.is_zero() || b.is_zero()) return a.mantissa_ <=> b.mantissa_;
        if (a.exponent_ != b.exponent_) return a.exponent_ <=> b.exponent_;
        return a.mantissa_ <=> b.mantissa_;
    }

    /// "m·2^e" with a 17-significant-digit mantissa.
    std::string to_string() const {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", mantissa_);
        return std::string(buf) + "·2^" + std::to_string(exponent_);
    }

private:
    double mantissa_ = 0.0;
    std::int64_t exponent_ = 0;
};

enum class CountMode { exact, extended };

/// A count Z_{n,k}: either a lossless big integer or an ExtendedFloat.
class CountValue {
public:
    CountValue() : value_(mpz_class(0)) {}
    explicit CountValue(mpz_class exact) : value_(std::move(exact)) {}
    explicit CountValue(ExtendedFloat extended) : value_(extended) {}

    CountMode mode() const noexcept {
        return std::holds_alternative<mpz_class>(value_) ? CountMode::exact : CountMode::extended;
    }

    bool is_zero() const {
        if (auto* z = std::get_if<mpz_class>(&value_)) return sgn(*z) == 0;
        return std::get<ExtendedFloat>(value_).is_zero();
    }

    const mpz_class& exact() const {
        if (auto* z = std::get_if<mpz_class>(&value_)) return *z;
        throw std::logic_error("CountValue: not in exact mode");
    }

    ExtendedFloat extended() const {
        if (auto* z = std::get_if<mpz_class>(&value_)) return ExtendedFloat::from_mpz(*z);
        return std::get<ExtendedFloat>(value_);
    }

    double log2() const { return extended().log2(); }
    long double to_long_double() const { return extended().to_long_double(); }

    /// Exact decimal in exact mode; "m·2^e" in extended mode.
    std::string to_string() const {
        if (auto* z = std::get_if<mpz_class>(&value_)) return z->get_str();
        return std::get<ExtendedFloat>(value_).to_string();
    }

    /// Exact comparison when both sides are exact; otherwise compares the
    /// extended representations. Zero equals zero in either mode.
    friend bool operator==(const CountValue& a, const CountValue& b) {
        if (a.mode() == CountMode::exact && b.mode() == CountMode::exact) return a.exact() == b.exact();
        return a.extended() == b.extended();
    }

private:
    std::variant<mpz_class, ExtendedFloat> value_;
};

} // namespace incsub
