#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "incsub/rng.hpp"

namespace incsub {

using Value = std::uint32_t;

/// A permutation of {1..n} in one-line notation: entry i (0-based) holds
/// sigma(i+1). Immutable once constructed.
class Permutation {
public:
    /// Validates that `image` is a bijection of {1..n}, n >= 1.
    explicit Permutation(std::vector<Value> image) : image_(std::move(image)) {
        if (image_.empty()) throw std::invalid_argument("Permutation: n must be at least 1");
        std::vector<bool> seen(image_.size() + 1, false);
        for (Value v : image_) {
            if (v < 1 || v > image_.size())
                throw std::invalid_argument("Permutation: value " + std::to_string(v) + " outside 1.." +
                                            std::to_string(image_.size()));
            if (seen[v]) throw std::invalid_argument("Permutation: value " + std::to_string(v) + " repeated");
            seen[v] = true;
        }
    }

    static Permutation identity(std::size_t n) {
        std::vector<Value> image(n);
        std::iota(image.begin(), image.end(), Value{1});
        return Permutation(std::move(image));
    }

    static Permutation reversed(std::size_t n) {
        std::vector<Value> image(n);
        std::iota(image.rbegin(), image.rend(), Value{1});
        return Permutation(std::move(image));
    }

    /// Parses "1,3,4,5,2" (whitespace tolerated).
    static Permutation parse(std::string_view text) {
        std::vector<Value> image;
        std::string token;
        std::istringstream in{std::string(text)};
        while (std::getline(in, token, ',')) {
            auto first = token.find_first_not_of(" \t");
            auto last = token.find_last_not_of(" \t");
            if (first == std::string::npos) throw std::invalid_argument("Permutation::parse: empty entry");
            token = token.substr(first, last - first + 1);
            std::size_t used = 0;
            unsigned long v = 0;
            try {
                v = std::stoul(token, &used);
            } catch (const std::exception&) {
                throw std::invalid_argument("Permutation::parse: bad entry '" + token + "'");
            }
            if (used != token.size()) throw std::invalid_argument("Permutation::parse: bad entry '" + token + "'");
            image.push_back(static_cast<Value>(v));
        }
        return Permutation(std::move(image));
    }

    std::size_t size() const noexcept { return image_.size(); }
    Value operator[](std::size_t i) const { return image_[i]; }
    std::span<const Value> image() const noexcept { return image_; }

    std::string to_string() const {
        std::string out;
        for (std::size_t i = 0; i < image_.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(image_[i]);
        }
        return out;
    }

    friend bool operator==(const Permutation&, const Permutation&) = default;
    friend auto operator<=>(const Permutation& a, const Permutation& b) { return a.image_ <=> b.image_; }

private:
    std::vector<Value> image_;
};

/// A sorted k-subset of {1..N}.
class SubsetPositions {
public:
    SubsetPositions() = default;
    SubsetPositions(std::size_t universe, std::vector<Value> members)
        : universe_(universe), members_(std::move(members)) {
        for (std::size_t i = 0; i < members_.size(); ++i) {
            if (members_[i] < 1 || members_[i] > universe_)
                throw std::invalid_argument("SubsetPositions: member outside 1..N");
            if (i && members_[i - 1] >= members_[i])
                throw std::invalid_argument("SubsetPositions: members must be strictly increasing");
        }
    }

    std::size_t universe() const noexcept { return universe_; }
    std::size_t size() const noexcept { return members_.size(); }
    bool empty() const noexcept { return members_.empty(); }
    /// The (j+1)-th smallest member (0-based j).
    Value operator[](std::size_t j) const { return members_[j]; }
    std::span<const Value> members() const noexcept { return members_; }

    /// Members of {1..N} not in this subset, increasing.
    std::vector<Value> complement() const {
        std::vector<Value> out;
        out.reserve(universe_ - members_.size());
        std::size_t next = 0;
        for (Value v = 1; v <= universe_; ++v) {
            if (next < members_.size() && members_[next] == v)
                ++next;
            else
                out.push_back(v);
        }
        return out;
    }

    friend bool operator==(const SubsetPositions&, const SubsetPositions&) = default;

private:
    std::size_t universe_ = 0;
    std::vector<Value> members_;
};

/// Fisher-Yates; every element of S_n is drawn with probability 1/n!.
inline Permutation sample_uniform_permutation(std::size_t n, RngStream& rng) {
    if (n == 0) throw std::invalid_argument("sample_uniform_permutation: n must be at least 1");
    std::vector<Value> image(n);
    std::iota(image.begin(), image.end(), Value{1});
    for (std::size_t i = n - 1; i > 0; --i) {
        auto j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(image[i], image[j]);
    }
    return Permutation(std::move(image));
}

/// Uniform sorted k-subset of {1..N} (Floyd's algorithm).
inline SubsetPositions sample_k_subset(std::size_t universe, std::size_t k, RngStream& rng) {
    if (k > universe) throw std::invalid_argument("sample_k_subset: k exceeds N");
    std::vector<bool> chosen(universe + 1, false);
    std::vector<Value> members;
    members.reserve(k);
    for (std::size_t j = universe - k + 1; j <= universe; ++j) {
        auto t = static_cast<Value>(rng.between(1, j));
        auto pick = chosen[t] ? static_cast<Value>(j) : t;
        chosen[pick] = true;
        members.push_back(pick);
    }
    if (4 * k < universe) {
        std::sort(members.begin(), members.end());
    } else {
        members.clear();
        for (Value v = 1; v <= universe; ++v)
            if (chosen[v]) members.push_back(v);
    }
    return SubsetPositions(universe, std::move(members));
}

} // namespace incsub
