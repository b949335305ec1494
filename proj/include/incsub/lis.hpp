#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "incsub/permutation.hpp"

namespace incsub {

/// Length of the longest strictly increasing subsequence (patience sorting,
/// O(n log n)). `tops[h]` is the smallest value that ends an increasing run
/// of length h+1 seen so far.
inline std::size_t lis_length(std::span<const Value> sequence) {
    std::vector<Value> tops;
    tops.reserve(64);
    for (Value v : sequence) {
        auto it = std::lower_bound(tops.begin(), tops.end(), v);
        if (it == tops.end())
            tops.push_back(v);
        else
            *it = v;
    }
    return tops.size();
}

inline std::size_t lis_length(const Permutation& p) { return lis_length(p.image()); }

/// LIS of the subsequence of `p` formed by the entries whose values lie in
/// `values`. Order and duplicates in `values` are irrelevant.
inline std::size_t lis_length_restricted(const Permutation& p, std::span<const Value> values) {
    std::vector<bool> keep(p.size() + 1, false);
    for (Value v : values) {
        if (v < 1 || v > p.size()) throw std::invalid_argument("lis_length_restricted: value outside 1..n");
        keep[v] = true;
    }
    std::vector<Value> filtered;
    filtered.reserve(values.size());
    for (Value v : p.image())
        if (keep[v]) filtered.push_back(v);
    return lis_length(filtered);
}

} // namespace incsub
