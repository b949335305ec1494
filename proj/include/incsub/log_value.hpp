#pragma once

#include <cmath>
#include <compare>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace incsub {

/// log Gamma(x) for x > 0. Boost's implementation is reentrant (std::lgamma
/// writes the global signgam).
inline double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
    return boost::math::lgamma(x);
}

inline double log_factorial(double n) { return log_gamma(n + 1.0); }

/// log C(n, k) for real 0 <= k <= n; -inf when k is outside [0, n].
inline double log_binomial(double n, double k) {
    if (k < 0.0 || k > n) return -std::numeric_limits<double>::infinity();
    return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

/// A positive quantity carried by its natural logarithm; zero is -inf.
class LogValue {
public:
    constexpr LogValue() = default;
    static constexpr LogValue from_log(double log) { return LogValue(log); }
    static LogValue from_value(double x) {
        if (x < 0.0) throw std::domain_error("LogValue: negative value");
        return LogValue(x == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(x));
    }
    static constexpr LogValue zero() { return LogValue(-std::numeric_limits<double>::infinity()); }

    constexpr double log() const noexcept { return log_; }
    constexpr bool is_zero() const noexcept { return log_ == -std::numeric_limits<double>::infinity(); }
    double value() const { return std::exp(log_); }
    double log10() const { return log_ / 2.302585092994045684; }

    friend LogValue operator*(LogValue a, LogValue b) { return LogValue(a.log_ + b.log_); }
    friend LogValue operator/(LogValue a, LogValue b) {
        if (b.is_zero()) throw std::domain_error("LogValue: division by zero");
        return LogValue(a.log_ - b.log_);
    }
    /// log-sum-exp.
    friend LogValue operator+(LogValue a, LogValue b) {
        if (a.is_zero()) return b;
        if (b.is_zero()) return a;
        if (a.log_ < b.log_) std::swap(a, b);
        return LogValue(a.log_ + std::log1p(std::exp(b.log_ - a.log_)));
    }

    friend constexpr auto operator<=>(const LogValue&, const LogValue&) = default;

private:
    constexpr explicit LogValue(double log) : log_(log) {}
    double log_ = -std::numeric_limits<double>::infinity();
};

} // namespace incsub
