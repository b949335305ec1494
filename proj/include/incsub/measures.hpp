#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "incsub/count_value.hpp"
#include "incsub/counting.hpp"
#include "incsub/exact_math.hpp"
#include "incsub/parallel.hpp"
#include "incsub/permutation.hpp"
#include "incsub/rng.hpp"

namespace incsub {

/// Parameters of the adulterated measure mu_{n;k}: a uniform permutation in
/// which k randomly chosen entries are re-placed in increasing order.
struct AdulterationSpec {
    std::size_t n;
    std::size_t k;

    AdulterationSpec(std::size_t n_, std::size_t k_) : n(n_), k(k_) {
        if (n == 0) throw std::invalid_argument("AdulterationSpec: n must be at least 1");
        if (k > n) throw std::invalid_argument("AdulterationSpec: k exceeds n");
    }
};

enum class TvMethod { exact_enumeration, monte_carlo };

inline const char* to_string(TvMethod m) {
    return m == TvMethod::exact_enumeration ? "exact-enumeration" : "monte-carlo";
}

/// ||mu_{n;k} - U_n|| with its provenance. Exact results carry the rational
/// value and zero standard error; Monte Carlo results carry a 95% normal CI.
struct TvEstimate {
    double value = 0.0;
    TvMethod method = TvMethod::exact_enumeration;
    double std_error = 0.0;
    std::uint64_t trials = 0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::optional<mpq_class> exact;
};

// ---------------------------------------------------------------------------
// Samplers

/// Card realization: lay down a uniform permutation, pick k positions
/// uniformly, and rewrite the values found there in increasing order.
inline Permutation sample_mu(const AdulterationSpec& spec, RngStream& rng) {
    const Permutation base = sample_uniform_permutation(spec.n, rng);
    const SubsetPositions positions = sample_k_subset(spec.n, spec.k, rng);
    std::vector<Value> image(base.image().begin(), base.image().end());
    std::vector<Value> picked;
    picked.reserve(spec.k);
    for (Value pos : positions.members()) picked.push_back(image[pos - 1]);
    std::sort(picked.begin(), picked.end());
    for (std::size_t j = 0; j < picked.size(); ++j) image[positions[j] - 1] = picked[j];
    return Permutation(std::move(image));
}

/// Uniform on the permutations that contain x_1 < ... < x_k as an increasing
/// subsequence.
inline Permutation sample_conditioned(std::size_t n, std::span<const Value> values, RngStream& rng) {
    if (n == 0) throw std::invalid_argument("sample_conditioned: n must be at least 1");
    const SubsetPositions value_set(n, std::vector<Value>(values.begin(), values.end()));
    const SubsetPositions positions = sample_k_subset(n, values.size(), rng);
    std::vector<Value> rest = value_set.complement();
    for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[rng.below(i)]);

    std::vector<Value> image(n, 0);
    for (std::size_t j = 0; j < values.size(); ++j) image[positions[j] - 1] = values[j];
    std::size_t next = 0;
    for (auto& slot : image)
        if (slot == 0) slot = rest[next++];
    return Permutation(std::move(image));
}

// ---------------------------------------------------------------------------
// Exact quantities

/// mu_{n;k}(sigma) = Z_{n,k}(sigma) k! / (n! C(n,k)).
inline mpq_class mu_density(const Permutation& p, const AdulterationSpec& spec) {
    if (p.size() != spec.n) throw std::invalid_argument("mu_density: permutation size differs from spec.n");
    const mpz_class z = count_increasing_subsequences(p, spec.k).exact();
    mpq_class out(z * factorial(spec.k), factorial(spec.n) * binomial(spec.n, spec.k));
    out.canonicalize();
    return out;
}

/// Histogram {Z value -> number of sigma in S_n} for one k, by streaming
/// through S_n. The n blocks (first entry fixed) run in parallel and merge
/// into an ordered map, so the result is independent of worker count.
inline std::map<std::uint64_t, std::uint64_t> z_histogram(std::size_t n, std::size_t k, unsigned threads = 0) {
    if (n == 0 || n > kBruteforceMaxN) throw std::invalid_argument("z_histogram: n outside 1..20");
    if (k > n) throw std::invalid_argument("z_histogram: k exceeds n");
    std::vector<std::map<std::uint64_t, std::uint64_t>> blocks(n);
    parallel_for(n, threads, [&](std::size_t first) {
        std::vector<Value> image(n);
        image[0] = static_cast<Value>(first + 1);
        for (std::size_t i = 1, v = 1; i < n; ++v)
            if (v != first + 1) image[i++] = static_cast<Value>(v);
        auto& hist = blocks[first];
        do {
            ++hist[detail::count_layers<std::uint64_t>(image, k)];
        } while (std::next_permutation(image.begin() + 1, image.end()));
    });
    std::map<std::uint64_t, std::uint64_t> merged;
    for (const auto& block : blocks)
        for (const auto& [z, c] : block) merged[z] += c;
    return merged;
}

struct TvOptions {
    std::size_t enumeration_budget = 10;
    unsigned threads = 0;
};

/// Exact ||mu_{n;k} - U_n||, computed two ways in rational arithmetic:
/// 1/2 sum_sigma |mu(sigma) - 1/n!| and 1/2 E_U |Z/EZ - 1|. The two must agree.
inline TvEstimate exact_tv_distance(const AdulterationSpec& spec, const TvOptions& options = {}) {
    if (spec.n > options.enumeration_budget)
        throw std::invalid_argument("exact_tv_distance: n=" + std::to_string(spec.n) + " over the enumeration budget of " +
                                    std::to_string(options.enumeration_budget));
    const auto hist = z_histogram(spec.n, spec.k, options.threads);
    const mpz_class n_fact = factorial(spec.n);
    const mpq_class uniform(1, n_fact);
    const mpq_class ez = expected_Z_exact(spec.n, spec.k);
    const mpz_class mu_den = n_fact * binomial(spec.n, spec.k);
    const mpz_class k_fact = factorial(spec.k);

    mpq_class by_density = 0;
    mpq_class by_ratio = 0;
    for (const auto& [z, count] : hist) {
        const mpz_class zz(static_cast<unsigned long>(z));
        const mpz_class cc(static_cast<unsigned long>(count));
        mpq_class mu(zz * k_fact, mu_den);
        mu.canonicalize();
        by_density += cc * abs(mu - uniform);
        by_ratio += cc * abs(mpq_class(zz) / ez - 1);
    }
    by_density /= 2;
    by_ratio /= 2 * n_fact;
    if (by_density != by_ratio)
        throw std::logic_error("exact_tv_distance: density and ratio forms disagree (" + by_density.get_str() +
                               " vs " + by_ratio.get_str() + ")");

    TvEstimate out;
    out.method = TvMethod::exact_enumeration;
    out.value = by_density.get_d();
    out.ci_low = out.ci_high = out.value;
    out.trials = n_fact.get_ui();
    out.exact = by_density;
    return out;
}

/// Monte Carlo estimate of 1/2 E_U |Z/EZ - 1| in extended arithmetic. Trial i
/// uses RngStream(master_seed, i).
inline TvEstimate tv_monte_carlo(const AdulterationSpec& spec, std::uint64_t trials, std::uint64_t master_seed,
                                 unsigned threads = 0) {
    if (trials < 2) throw std::invalid_argument("tv_monte_carlo: trials must be at least 2");
    const ExtendedFloat ez =
        ExtendedFloat::from_mpz(binomial(spec.n, spec.k)) / ExtendedFloat::from_mpz(factorial(spec.k));
    std::vector<long double> half_gap(trials);
    parallel_for(trials, threads, [&](std::size_t i) {
        RngStream rng(master_seed, i);
        const Permutation sigma = sample_uniform_permutation(spec.n, rng);
        const ExtendedFloat z = count_increasing_subsequences(sigma, spec.k, CountMode::extended).extended();
        half_gap[i] = std::fabs((z / ez).to_long_double() - 1.0L) / 2.0L;
    });
    long double sum = 0, sum_sq = 0;
    for (long double g : half_gap) {
        sum += g;
        sum_sq += g * g;
    }
    const long double t = static_cast<long double>(trials);
    const long double mean = sum / t;
    const long double var = std::max(0.0L, (sum_sq - t * mean * mean) / (t - 1));

    TvEstimate out;
    out.method = TvMethod::monte_carlo;
    out.trials = trials;
    out.value = std::clamp(static_cast<double>(mean), 0.0, 1.0);
    out.std_error = static_cast<double>(std::sqrt(var / t));
    out.ci_low = std::clamp(out.value - 1.96 * out.std_error, 0.0, 1.0);
    out.ci_high = std::clamp(out.value + 1.96 * out.std_error, 0.0, 1.0);
    return out;
}

} // namespace incsub
