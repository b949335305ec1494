#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <type_traits>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "incsub/count_value.hpp"
#include "incsub/fenwick.hpp"
#include "incsub/log_value.hpp"
#include "incsub/permutation.hpp"

namespace incsub {

/// Raised when an exact count would not fit the configured memory budget.
class CountOverflowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CountOptions {
    /// Upper bound on the bytes held by the two DP layers in exact mode.
    std::size_t exact_memory_budget = std::size_t{256} << 20;
};

namespace detail {

template <typename T>
T unit() {
    if constexpr (std::is_same_v<T, ExtendedFloat>)
        return ExtendedFloat::from_double(1.0);
    else
        return T(1);
}

/// Layered DP: after pass m, `ending[i]` is the number of increasing
/// subsequences of length m that end at position i. Each pass scans
/// positions left to right and sums the previous layer over smaller values
/// with a Fenwick tree indexed by value.
template <typename T>
T count_layers(std::span<const Value> image, std::size_t k) {
    const std::size_t n = image.size();
    if (k == 0) return unit<T>();
    std::vector<T> ending(n, unit<T>());
    std::vector<T> next(n);
    FenwickTree<T> by_value(n);
    for (std::size_t m = 2; m <= k; ++m) {
        by_value.clear();
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = by_value.prefix(image[i] - 1);
            by_value.add(image[i], ending[i]);
            if (!(next[i] == T{})) any = true;
        }
        ending.swap(next);
        if (!any) return T{};
    }
    T total{};
    for (const auto& c : ending) total += c;
    return total;
}

/// All Z_{n,m}, m = 0..n, in one sweep. Requires C(n, n/2) < 2^64.
inline std::vector<std::uint64_t> count_all_lengths_u64(std::span<const Value> image) {
    const std::size_t n = image.size();
    std::vector<std::uint64_t> totals(n + 1, 0);
    totals[0] = 1;
    if (n == 0) return totals;
    std::vector<std::uint64_t> ending(n, 1), next(n);
    FenwickTree<std::uint64_t> by_value(n);
    totals[1] = n;
    for (std::size_t m = 2; m <= n; ++m) {
        by_value.clear();
        std::uint64_t sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = by_value.prefix(image[i] - 1);
            by_value.add(image[i], ending[i]);
            sum += next[i];
        }
        totals[m] = sum;
        if (sum == 0) break;
        ending.swap(next);
    }
    return totals;
}

inline void check_k(std::size_t n, std::size_t k, const char* who) {
    if (k > n)
        throw std::invalid_argument(std::string(who) + ": k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
}

} // namespace detail

/// Z_{n,k}(sigma): the number of position sets i_1 < ... < i_k with
/// sigma(i_1) < ... < sigma(i_k). Z_{n,0} = 1. O(n k log n).
inline CountValue count_increasing_subsequences(const Permutation& p, std::size_t k,
                                                CountMode mode = CountMode::exact,
                                                const CountOptions& options = {}) {
    const std::size_t n = p.size();
    detail::check_k(n, k, "count_increasing_subsequences");
    if (mode == CountMode::extended) return CountValue(detail::count_layers<ExtendedFloat>(p.image(), k));

    // Layer m holds counts <= C(n, m), so C(n, min(k, n/2)) bounds every DP cell.
    const double widest = static_cast<double>(std::min(k, n / 2));
    const double bits = log_binomial(static_cast<double>(n), widest) / std::log(2.0) + 1.0;
    if (bits < 63.0) return CountValue(mpz_class(static_cast<unsigned long>(detail::count_layers<std::uint64_t>(p.image(), k))));
    const double bytes = 2.0 * static_cast<double>(n) * (bits / 8.0 + 16.0);
    if (bytes > static_cast<double>(options.exact_memory_budget))
        throw CountOverflowError("count_increasing_subsequences: exact count for n=" + std::to_string(n) +
                                 ", k=" + std::to_string(k) + " needs ~" + std::to_string(static_cast<long long>(bytes)) +
                                 " bytes, over the exact-mode budget of " +
                                 std::to_string(options.exact_memory_budget) + "; use extended mode");
    return CountValue(detail::count_layers<mpz_class>(p.image(), k));
}

inline constexpr std::size_t kBruteforceMaxN = 20;

/// Z_{n,k} by enumerating every k-subset of positions. n <= 20.
inline CountValue count_bruteforce(const Permutation& p, std::size_t k) {
    const std::size_t n = p.size();
    if (n > kBruteforceMaxN)
        throw std::invalid_argument("count_bruteforce: n=" + std::to_string(n) + " over the enumeration budget of " +
                                    std::to_string(kBruteforceMaxN));
    detail::check_k(n, k, "count_bruteforce");
    std::uint64_t count = 0;
    // Iterate k-subsets as bitmasks in Gosper order.
    if (k == 0) return CountValue(mpz_class(1));
    std::uint64_t mask = (std::uint64_t{1} << k) - 1;
    const std::uint64_t limit = std::uint64_t{1} << n;
    while (mask < limit) {
        Value previous = 0;
        bool increasing = true;
        for (std::size_t i = 0; i < n && increasing; ++i) {
            if (mask >> i & 1) {
                increasing = p[i] > previous;
                previous = p[i];
            }
        }
        count += increasing;
        const std::uint64_t low = mask & (~mask + 1);
        const std::uint64_t ripple = mask + low;
        mask = (((ripple ^ mask) >> 2) / low) | ripple;
    }
    return CountValue(mpz_class(static_cast<unsigned long>(count)));
}

} // namespace incsub
