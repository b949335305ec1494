#pragma once

// Independent reference implementations used only by the test suites.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "incsub/permutation.hpp"

namespace incsub::testing {

struct ChiSquare {
    double statistic = 0.0;
    double critical = 0.0;
    std::size_t dof = 0;
    bool pass = false;
};

/// Pearson chi-square goodness of fit at significance `alpha`. Adjacent
/// cells are pooled until each pooled cell expects at least 5 hits.
inline ChiSquare chi_square_test(const std::vector<double>& observed, const std::vector<double>& probs,
                                 double alpha = 0.001) {
    double total = std::accumulate(observed.begin(), observed.end(), 0.0);
    std::vector<double> obs_pooled, exp_pooled;
    double o = 0.0, e = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        o += observed[i];
        e += probs[i] * total;
        if (e >= 5.0) {
            obs_pooled.push_back(o);
            exp_pooled.push_back(e);
            o = e = 0.0;
        }
    }
    if (e > 0.0 || o > 0.0) {
        if (exp_pooled.empty()) {
            obs_pooled.push_back(o);
            exp_pooled.push_back(e);
        } else {
            obs_pooled.back() += o;
            exp_pooled.back() += e;
        }
    }
    ChiSquare out;
    for (std::size_t i = 0; i < obs_pooled.size(); ++i) {
        const double d = obs_pooled[i] - exp_pooled[i];
        out.statistic += d * d / exp_pooled[i];
    }
    out.dof = obs_pooled.size() > 1 ? obs_pooled.size() - 1 : 1;
    boost::math::chi_squared_distribution<double> dist(static_cast<double>(out.dof));
    out.critical = boost::math::quantile(boost::math::complement(dist, alpha));
    out.pass = out.statistic <= out.critical;
    return out;
}

/// O(n^2) longest strictly increasing subsequence.
inline std::size_t lis_quadratic(const std::vector<Value>& seq) {
    std::vector<std::size_t> best(seq.size(), 1);
    std::size_t overall = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j)
            if (seq[j] < seq[i]) best[i] = std::max(best[i], best[j] + 1);
        overall = std::max(overall, best[i]);
    }
    return overall;
}

/// Every element of S_n in lexicographic order.
inline std::vector<Permutation> all_permutations(std::size_t n) {
    std::vector<Value> image(n);
    std::iota(image.begin(), image.end(), Value{1});
    std::vector<Permutation> out;
    do {
        out.emplace_back(image);
    } while (std::next_permutation(image.begin(), image.end()));
    return out;
}

/// Every k-subset of {1..N}, each sorted, in lexicographic order.
inline std::vector<std::vector<Value>> all_subsets(std::size_t N, std::size_t k) {
    std::vector<std::vector<Value>> out;
    std::vector<Value> current;
    auto rec = [&](auto&& self, Value start) -> void {
        if (current.size() == k) {
            out.push_back(current);
            return;
        }
        for (Value v = start; v <= N; ++v) {
            if (N - v + 1 < k - current.size()) break;
            current.push_back(v);
            self(self, v + 1);
            current.pop_back();
        }
    };
    rec(rec, 1);
    return out;
}

/// Exact E T-hat and E T-hat^2 by enumerating all C(N,k)^2 pairs (X, Y).
struct BruteThat {
    double mean = 0.0;
    double second = 0.0;
};

inline BruteThat brute_force_That(std::size_t N, std::size_t k) {
    const auto subsets = all_subsets(N, k);
    const std::size_t lo = k / 4 + 1;
    const std::size_t hi_plus = (3 * k) / 4; // window is [lo, hi_plus - 1]
    long double sum = 0, sum_sq = 0;
    for (const auto& x : subsets)
        for (const auto& y : subsets) {
            std::size_t t = 0;
            for (std::size_t j = lo; j + 1 <= hi_plus; ++j) t += x[j - 1] == y[j - 1];
            sum += t;
            sum_sq += static_cast<long double>(t) * t;
        }
    const long double pairs = static_cast<long double>(subsets.size()) * subsets.size();
    return {static_cast<double>(sum / pairs), static_cast<double>(sum_sq / pairs)};
}

} // namespace incsub::testing
