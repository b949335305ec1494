#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "incsub/exact_math.hpp"
#include "incsub/log_value.hpp"

namespace incsub {

// ---------------------------------------------------------------------------
// Moments of Z_{n,k}

/// log E Z_{n,k} = log C(n,k) - log k!, valid for real 0 <= k <= n.
inline LogValue expected_Z_log(double n, double k) {
    if (!(k >= 0.0 && k <= n)) throw std::invalid_argument("expected_Z_log: need 0 <= k <= n");
    return LogValue::from_log(log_binomial(n, k) - log_factorial(k));
}

/// Stirling asymptotics of E Z_{n, c n^l}:
///   l < 1/2:  (2 pi c n^l)^{-1} [(e/c)^2 n^{1-2l}]^{c n^l}
///   l = 1/2:  the same with an extra factor exp(-c^2/2).
inline LogValue expected_Z_asymptotic(double n, double c, double l) {
    if (!(l > 0.0 && l <= 0.5)) throw std::invalid_argument("expected_Z_asymptotic: l must lie in (0, 1/2]");
    if (!(c > 0.0)) throw std::invalid_argument("expected_Z_asymptotic: c must be positive");
    const double k = c * std::pow(n, l);
    if (!(k >= 1.0)) throw std::invalid_argument("expected_Z_asymptotic: c n^l must be at least 1");
    double log = -std::log(2.0 * std::numbers::pi * k) + k * (2.0 * (1.0 - std::log(c)) + (1.0 - 2.0 * l) * std::log(n));
    if (l == 0.5) log -= c * c / 2.0;
    return LogValue::from_log(log);
}

// ---------------------------------------------------------------------------
// Position law of the j-th smallest element of a uniform k-subset of {1..N}

/// Prob(X_j = r) for r in [first(), last()] = [j, N-k+j].
struct PositionLaw {
    std::size_t N = 0;
    std::size_t k = 0;
    std::size_t j = 0;
    std::vector<double> pmf;

    std::size_t first() const noexcept { return j; }
    std::size_t last() const noexcept { return N - k + j; }
    double at(std::size_t r) const { return r < first() || r > last() ? 0.0 : pmf[r - first()]; }
};

namespace detail {

inline void check_position_args(std::size_t N, std::size_t k, std::size_t j, const char* who) {
    if (!(1 <= j && j <= k && k <= N))
        throw std::invalid_argument(std::string(who) + ": need 1 <= j <= k <= N (got N=" + std::to_string(N) +
                                    ", k=" + std::to_string(k) + ", j=" + std::to_string(j) + ")");
}

/// log Prob(X_j = r) = log C(r-1, j-1) + log C(N-r, k-j) - log C(N, k).
inline double log_position_pmf(std::size_t N, std::size_t k, std::size_t j, std::size_t r) {
    return log_binomial(double(r - 1), double(j - 1)) + log_binomial(double(N - r), double(k - j)) -
           log_binomial(double(N), double(k));
}

} // namespace detail

inline constexpr std::size_t kExactPmfMaxN = 1024;

inline PositionLaw insertion_position_pmf(std::size_t N, std::size_t k, std::size_t j) {
    detail::check_position_args(N, k, j, "insertion_position_pmf");
    PositionLaw law{N, k, j, {}};
    law.pmf.reserve(N - k + 1);
    for (std::size_t r = j; r <= N - k + j; ++r) law.pmf.push_back(std::exp(detail::log_position_pmf(N, k, j, r)));
    return law;
}

/// Rational pmf over r = j..N-k+j; N <= 1024.
inline std::vector<mpq_class> insertion_position_pmf_exact(std::size_t N, std::size_t k, std::size_t j) {
    detail::check_position_args(N, k, j, "insertion_position_pmf_exact");
    if (N > kExactPmfMaxN) throw std::invalid_argument("insertion_position_pmf_exact: N over 1024");
    const mpz_class total = binomial(N, k);
    std::vector<mpq_class> out;
    for (std::size_t r = j; r <= N - k + j; ++r) {
        mpq_class p(binomial(r - 1, j - 1) * binomial(N - r, k - j), total);
        p.canonicalize();
        out.push_back(p);
    }
    return out;
}

/// Prob(X_i = r, X_j = r'), i < j, for r in [i, N-k+i] and r' in [j, N-k+j].
struct JointPositionLaw {
    std::size_t N = 0;
    std::size_t k = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t width = 0; // N - k + 1
    std::vector<double> cells;

    double at(std::size_t r, std::size_t r2) const {
        if (r < i || r > N - k + i || r2 < j || r2 > N - k + j || r2 <= r) return 0.0;
        return cells[(r - i) * width + (r2 - j)];
    }
};

inline JointPositionLaw joint_position_pmf(std::size_t N, std::size_t k, std::size_t i, std::size_t j) {
    if (!(1 <= i && i < j && j <= k && k <= N))
        throw std::invalid_argument("joint_position_pmf: need 1 <= i < j <= k <= N");
    JointPositionLaw law{N, k, i, j, N - k + 1, {}};
    law.cells.assign(law.width * law.width, 0.0);
    const double log_total = log_binomial(double(N), double(k));
    for (std::size_t r = i; r <= N - k + i; ++r) {
        const double left = log_binomial(double(r - 1), double(i - 1));
        for (std::size_t r2 = std::max(j, r + 1); r2 <= N - k + j; ++r2) {
            if (r2 - r - 1 < j - i - 1) continue;
            const double log_p = left + log_binomial(double(r2 - r - 1), double(j - i - 1)) +
                                 log_binomial(double(N - r2), double(k - j)) - log_total;
            law.cells[(r - i) * law.width + (r2 - j)] = std::exp(log_p);
        }
    }
    return law;
}

// ---------------------------------------------------------------------------
// Mode of the position law and the bound check

/// Maximizer of H(r) = C(r-1, j-1) C(N-r, k-j). For j >= 2 the maximum sits
/// at an integer in [x, x+2] with x = (j-1)N/(k-1); the candidates there are
/// compared exactly through the step sign of H(r)/H(r-1), which is that of
/// (j-1)(N-r+1) - (r-1)(k-j). Ties resolve to the smallest maximizer.
inline std::size_t h_argmax(std::size_t N, std::size_t k, std::size_t j) {
    detail::check_position_args(N, k, j, "h_argmax");
    if (j == 1) return 1;
    const std::size_t lo_support = j;
    const std::size_t hi_support = N - k + j;
    // ceil(x) and floor(x + 2) with x = (j-1)N/(k-1), in integers.
    const std::uint64_t num = std::uint64_t(j - 1) * N;
    const std::uint64_t den = k - 1;
    std::size_t lo = static_cast<std::size_t>((num + den - 1) / den);
    std::size_t hi = static_cast<std::size_t>(num / den + 2);
    lo = std::clamp(lo, lo_support, hi_support);
    hi = std::clamp(hi, lo_support, hi_support);

    // step(r) > 0: H(r) > H(r-1); == 0: equal; < 0: H(r) < H(r-1).
    auto step = [&](std::size_t r) {
        return static_cast<std::int64_t>((j - 1) * (N - r + 1)) - static_cast<std::int64_t>((r - 1) * (k - j));
    };
    std::size_t best = lo;
    for (std::size_t r = lo + 1; r <= hi; ++r) {
        // Walking right from `best`, r improves on it iff every step in
        // (best, r] is nonnegative and at least one is positive.
        bool up = false;
        bool down = false;
        for (std::size_t t = best + 1; t <= r; ++t) {
            const auto s = step(t);
            up |= s > 0;
            down |= s < 0;
        }
        if (up && !down) best = r;
    }
    return best;
}

struct PmfBoundCheck {
    std::size_t argmax_r = 0;
    double max_pmf = 0.0;
    /// max_pmf / (k / (min(j, k-j+1)^{1/2} N)).
    double bound_ratio = 0.0;
};

inline PmfBoundCheck pmf_bound_check(std::size_t N, std::size_t k, std::size_t j) {
    detail::check_position_args(N, k, j, "pmf_bound_check");
    PmfBoundCheck out;
    out.argmax_r = h_argmax(N, k, j);
    out.max_pmf = std::exp(detail::log_position_pmf(N, k, j, out.argmax_r));
    const double depth = static_cast<double>(std::min(j, k - j + 1));
    out.bound_ratio = out.max_pmf * std::sqrt(depth) * static_cast<double>(N) / static_cast<double>(k);
    return out;
}

struct PmfBoundScan {
    double max_ratio = 0.0;
    std::size_t worst_N = 0;
    std::size_t worst_k = 0;
    std::size_t worst_j = 0;
    std::uint64_t cells = 0;
};

/// Scans every j for each (N, k) in the cross product of the given lists
/// (cells with k > N/2 are skipped) and records the largest bound ratio.
inline PmfBoundScan pmf_bound_scan(const std::vector<std::size_t>& Ns, const std::vector<std::size_t>& ks) {
    PmfBoundScan scan;
    for (std::size_t N : Ns)
        for (std::size_t k : ks) {
            if (k < 1 || 2 * k > N) continue;
            for (std::size_t j = 1; j <= k; ++j) {
                const auto check = pmf_bound_check(N, k, j);
                ++scan.cells;
                if (check.bound_ratio > scan.max_ratio) {
                    scan.max_ratio = check.bound_ratio;
                    scan.worst_N = N;
                    scan.worst_k = k;
                    scan.worst_j = j;
                }
            }
        }
    return scan;
}

// ---------------------------------------------------------------------------
// Exact moments of T-hat

/// Rank window of T-hat: floor(k/4)+1 .. floor(3k/4)-1, taken as empty for
/// every k < 8.
struct RankWindow {
    std::size_t first = 0;
    std::size_t last = 0;
    bool empty() const noexcept { return last < first; }
    std::size_t size() const noexcept { return empty() ? 0 : last - first + 1; }
};

inline RankWindow that_window(std::size_t k) {
    if (k < 8) return RankWindow{1, 0};
    RankWindow w{k / 4 + 1, 0};
    const std::size_t upper = (3 * k) / 4;
    w.last = upper >= 1 ? upper - 1 : 0;
    if (w.last < w.first) w = RankWindow{1, 0};
    return w;
}

namespace detail {

/// Relative cutoff for dropping tail mass of the position law. Dropped
/// squared mass is below 1e-20 of the peak squared.
inline constexpr double kTailCutoff = 1e-10;

/// Calls visit(r, p) for every r with p = Prob(X_j = r) >= cutoff * peak,
/// walking outward from the mode with the exact ratio
///   p(r+1)/p(r) = r (N-r-k+j) / ((r-j+1)(N-r)).
/// The mode is anchored by a single log-gamma evaluation.
template <typename Visit>
void scan_position_law(std::size_t N, std::size_t k, std::size_t j, Visit&& visit, double cutoff = kTailCutoff) {
    const std::size_t lo = j;
    const std::size_t hi = N - k + j;
    const std::size_t mode = h_argmax(N, k, j);
    const double peak = std::exp(log_position_pmf(N, k, j, mode));
    const double floor_p = peak * cutoff;
    visit(mode, peak);
    double p = peak;
    for (std::size_t r = mode; r < hi; ++r) {
        p *= double(r) * double(N - r - k + j) / (double(r - j + 1) * double(N - r));
        if (p < floor_p) break;
        visit(r + 1, p);
    }
    p = peak;
    for (std::size_t r = mode; r > lo; --r) {
        // p(r-1) = p(r) * (r-j)(N-r+1) / ((r-1)(N-r+1-k+j))
        p *= double(r - j) * double(N - r + 1) / (double(r - 1) * double(N - r + 1 - k + j));
        if (p < floor_p) break;
        visit(r - 1, p);
    }
}

/// Prob(X_j = Y_j) for independent uniform k-subsets X, Y of {1..N}.
inline double match_probability(std::size_t N, std::size_t k, std::size_t j) {
    double sum = 0.0;
    scan_position_law(N, k, j, [&](std::size_t, double p) { sum += p * p; });
    return sum;
}

} // namespace detail

/// E T-hat = sum over the rank window of sum_r Prob(X_j = r)^2.
inline double exact_expected_That(std::size_t N, std::size_t k) {
    if (k > N) throw std::invalid_argument("exact_expected_That: k exceeds N");
    const RankWindow w = that_window(k);
    double total = 0.0;
    for (std::size_t j = w.first; !w.empty() && j <= w.last; ++j) total += detail::match_probability(N, k, j);
    return total;
}

/// Rough count of inner-loop steps exact_second_moment_That performs.
inline double second_moment_work(std::size_t N, std::size_t k) {
    const RankWindow w = that_window(k);
    if (w.empty()) return 0.0;
    const double spread = std::min(double(N - k + 1), 1.0 + 14.0 * 0.5 * double(N) / std::sqrt(double(k) + 2.0));
    const double m = double(w.size());
    return m * spread * (m / 2.0) * spread;
}

/// E T-hat^2 = E T-hat + 2 sum_{i<j in window} Prob(Z_i = Z_j = 1).
///
/// Given X_i = r, the ranks above i form a uniform (k-i)-subset of
/// {r+1..N}, so Prob(X_i = Y_i = r, X_j = Y_j) factors as
/// Prob(X_i = r)^2 * match_probability(N-r, k-i, j-i).
inline double exact_second_moment_That(std::size_t N, std::size_t k) {
    if (k > N) throw std::invalid_argument("exact_second_moment_That: k exceeds N");
    const RankWindow w = that_window(k);
    if (w.empty()) return 0.0;
    double pairs = 0.0;
    for (std::size_t i = w.first; i < w.last; ++i) {
        detail::scan_position_law(N, k, i, [&](std::size_t r, double p) {
            double later = 0.0;
            for (std::size_t jj = 1; jj <= w.last - i; ++jj) later += detail::match_probability(N - r, k - i, jj);
            pairs += p * p * later;
        });
    }
    return exact_expected_That(N, k) + 2.0 * pairs;
}

// ---------------------------------------------------------------------------
// Entropy inequality

/// F(x, y) = (x+y) log(x+y) - x log x - y log y, with 0 log 0 = 0, evaluated
/// as x log(1 + y/x) + y log(1 + x/y).
inline double entropy_F(double x, double y) {
    if (x < 0.0 || y < 0.0) throw std::domain_error("entropy_F: arguments must be nonnegative");
    double out = 0.0;
    if (x > 0.0 && y > 0.0) out = x * std::log1p(y / x) + y * std::log1p(x / y);
    return out;
}

namespace detail {

/// F(a+c, b+d) - F(a, b) - F(c, d) for a, b, c, d >= 0. Each cell of the
/// table [[a, b], [c, d]] contributes n log(n S / (row col)), and
/// n S - row col = +-(ad - bc), so every term is a log1p of a small quantity.
inline double entropy_excess(double a, double b, double c, double d) {
    const double delta = std::fma(a, d, -b * c);
    auto term = [](double n, double signed_delta, double row, double col) {
        return n == 0.0 ? 0.0 : n * std::log1p(signed_delta / (row * col));
    };
    const double ab = a + b, cd = c + d, ac = a + c, bd = b + d;
    return term(a, delta, ab, ac) + term(b, -delta, ab, bd) + term(c, -delta, cd, ac) + term(d, delta, cd, bd);
}

} // namespace detail

/// G(t) = F(a+c, b+t) - F(a, b) - F(c, t); nonnegative, zero at t = bc/a.
inline double entropy_gap_G(double a, double b, double c, double t) {
    if (a < 0.0 || b < 0.0 || c < 0.0 || t < 0.0) throw std::domain_error("entropy_gap_G: arguments must be nonnegative");
    return detail::entropy_excess(a, b, c, t);
}

/// (a+b)^(a+b)/(a^a b^b) * (c+d)^(c+d)/(c^c d^d) * (a+c)^(a+c) (b+d)^(b+d) / (a+b+c+d)^(a+b+c+d)
/// = exp(F(a,b) + F(c,d) - F(a+c, b+d)) <= 1.
inline double lemma5_ratio(double a, double b, double c, double d) {
    if (!(a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0))
        throw std::invalid_argument("lemma5_ratio: a, b, c, d must be positive");
    return std::exp(-detail::entropy_excess(a, b, c, d));
}

} // namespace incsub
