#pragma once

#include <cstddef>
#include <vector>

namespace incsub {

/// Binary indexed tree over 1-based indices 1..n for a commutative monoid
/// (T{} is the identity, += the operation). Only prefix sums are needed, so
/// no inverse is required.
template <typename T>
class FenwickTree {
public:
    explicit FenwickTree(std::size_t n) : tree_(n + 1) {}

    std::size_t size() const noexcept { return tree_.size() - 1; }

    void add(std::size_t index, const T& delta) {
        for (; index < tree_.size(); index += index & (~index + 1)) tree_[index] += delta;
    }

    /// Sum over indices 1..index (index 0 gives the identity).
    T prefix(std::size_t index) const {
        T sum{};
        for (; index > 0; index &= index - 1) sum += tree_[index];
        return sum;
    }

    void clear() {
        for (auto& cell : tree_) cell = T{};
    }

private:
    std::vector<T> tree_;
};

} // namespace incsub
