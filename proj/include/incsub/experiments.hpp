#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "incsub/analytics.hpp"
#include "incsub/lis.hpp"
#include "incsub/measures.hpp"
#include "incsub/parallel.hpp"
#include "incsub/permutation.hpp"
#include "incsub/rng.hpp"

namespace incsub {

/// k = floor(c n^l), at least 1 when c > 0 and exactly 0 when c == 0. A
/// relative nudge of 1e-12 keeps exact powers (1e5^0.8 = 1e4) from rounding
/// down to the integer below.
inline std::size_t k_from_rule(double n, double c, double l) {
    if (c < 0.0) throw std::invalid_argument("k_from_rule: c must be nonnegative");
    if (c == 0.0) return 0;
    const double raw = c * std::pow(n, l);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(raw * (1.0 + 1e-12))));
}

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t trials = 0;
};

template <typename Range>
MeanEstimate estimate_mean(const Range& samples) {
    MeanEstimate out;
    long double sum = 0, sum_sq = 0;
    for (double x : samples) {
        sum += x;
        sum_sq += static_cast<long double>(x) * x;
        ++out.trials;
    }
    if (out.trials == 0) return out;
    const long double t = static_cast<long double>(out.trials);
    const long double mean = sum / t;
    out.mean = static_cast<double>(mean);
    if (out.trials > 1) {
        const long double var = std::max(0.0L, (sum_sq - t * mean * mean) / (t - 1));
        out.std_error = static_cast<double>(std::sqrt(var / t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Two-row card experiment

struct CardExperimentResult {
    std::size_t s = 0;
    std::size_t k = 0;
    SubsetPositions X; // first-row spaces, i.e. the selected cards
    SubsetPositions Y; // second-row spaces receiving them
    std::vector<std::uint8_t> z_flags; // z_flags[j-1] = 1{X_j == Y_j}
    std::size_t T = 0;
    std::size_t That = 0;
    Permutation row = Permutation::identity(1);
    std::size_t verified_lis = 0;

    std::size_t N() const noexcept { return s + k; }
};

namespace detail {

struct MatchCounts {
    std::size_t T = 0;
    std::size_t That = 0;
};

inline MatchCounts count_matches(const SubsetPositions& X, const SubsetPositions& Y,
                                 std::vector<std::uint8_t>* flags = nullptr) {
    const RankWindow w = that_window(X.size());
    MatchCounts out;
    if (flags) flags->assign(X.size(), 0);
    for (std::size_t j = 1; j <= X.size(); ++j) {
        if (X[j - 1] != Y[j - 1]) continue;
        ++out.T;
        if (!w.empty() && j >= w.first && j <= w.last) ++out.That;
        if (flags) (*flags)[j - 1] = 1;
    }
    return out;
}

} // namespace detail

/// One trial: X and Y are independent uniform k-subsets of {1..s+k}. The card
/// numbered X_j goes to space Y_j; the s unselected cards fill the remaining
/// spaces in increasing order. The row then has an increasing subsequence of
/// length s + T, which is checked with patience sorting.
inline CardExperimentResult run_card_experiment(std::size_t s, std::size_t k, RngStream& rng) {
    const std::size_t N = s + k;
    if (N == 0) throw std::invalid_argument("run_card_experiment: s + k must be at least 1");
    CardExperimentResult out;
    out.s = s;
    out.k = k;
    out.X = sample_k_subset(N, k, rng);
    out.Y = sample_k_subset(N, k, rng);
    const auto counts = detail::count_matches(out.X, out.Y, &out.z_flags);
    out.T = counts.T;
    out.That = counts.That;

    std::vector<Value> image(N, 0);
    for (std::size_t j = 0; j < k; ++j) image[out.Y[j] - 1] = out.X[j];
    const std::vector<Value> cards = out.X.complement();
    std::size_t next = 0;
    for (auto& slot : image)
        if (slot == 0) slot = cards[next++];
    out.row = Permutation(std::move(image));
    out.verified_lis = lis_length(out.row);
    if (out.verified_lis < s + out.T)
        throw std::logic_error("run_card_experiment: row LIS " + std::to_string(out.verified_lis) +
                               " below s + T = " + std::to_string(s + out.T));
    return out;
}

/// Runs trials 0..trials-1 (trial i on RngStream(master_seed, i)) in parallel
/// batches and hands each result to `visit` sequentially in trial order.
template <typename Visit>
void for_each_card_trial(std::size_t s, std::size_t k, std::uint64_t trials, std::uint64_t master_seed,
                         unsigned threads, Visit&& visit) {
    constexpr std::uint64_t batch = 4096;
    std::vector<CardExperimentResult> slots;
    for (std::uint64_t begin = 0; begin < trials; begin += batch) {
        const std::uint64_t count = std::min(batch, trials - begin);
        slots.assign(count, CardExperimentResult{});
        parallel_for(count, threads, [&](std::size_t i) {
            RngStream rng(master_seed, begin + i);
            slots[i] = run_card_experiment(s, k, rng);
        });
        for (std::uint64_t i = 0; i < count; ++i) visit(begin + i, slots[i]);
    }
}

struct MomentEstimate {
    double mean = 0.0;
    double mean_stderr = 0.0;
    double second_moment = 0.0;
    double second_stderr = 0.0;
    std::uint64_t trials = 0;
};

/// Monte Carlo mean and second moment of T-hat. With verify_lis the full card
/// experiment (row construction plus LIS check) runs per trial; without it
/// only X and Y are drawn, from the same streams, so T-hat is identical.
inline MomentEstimate estimate_That_moments(std::size_t s, std::size_t k, std::uint64_t trials,
                                            std::uint64_t master_seed, unsigned threads = 0, bool verify_lis = true) {
    if (trials < 2) throw std::invalid_argument("estimate_That_moments: trials must be at least 2");
    const std::size_t N = s + k;
    if (N == 0) throw std::invalid_argument("estimate_That_moments: s + k must be at least 1");
    std::vector<double> that(trials);
    parallel_for(trials, threads, [&](std::size_t i) {
        RngStream rng(master_seed, i);
        if (verify_lis) {
            that[i] = static_cast<double>(run_card_experiment(s, k, rng).That);
        } else {
            const auto X = sample_k_subset(N, k, rng);
            const auto Y = sample_k_subset(N, k, rng);
            that[i] = static_cast<double>(detail::count_matches(X, Y).That);
        }
    });
    std::vector<double> squares(trials);
    std::transform(that.begin(), that.end(), squares.begin(), [](double x) { return x * x; });
    const auto first = estimate_mean(that);
    const auto second = estimate_mean(squares);
    return {first.mean, first.std_error, second.mean, second.std_error, trials};
}

// ---------------------------------------------------------------------------
// Scaling of E T-hat and E T-hat^2 with k = floor(N^lambda)

struct ScalingConfig {
    std::vector<std::size_t> Ns;
    std::vector<double> lambdas;
    std::uint64_t mc_trials = 10000;    // Monte Carlo fallback for E T-hat^2
    double exact_work_budget = 2e9;     // max inner steps for the exact E T-hat^2
    std::uint64_t master_seed = 0;
    unsigned threads = 0;
};

struct ScalingRow {
    std::size_t N = 0;
    double lambda = 0.0;
    std::size_t k = 0;
    double expected_That = 0.0;
    double that_ratio = 0.0;     // E T-hat / (k^{3/2} / N)
    double second_moment = 0.0;
    double second_stderr = 0.0;  // 0 when exact
    bool second_exact = true;
    double second_ratio = 0.0;   // E T-hat^2 N^2 / k^3
    bool below_threshold = false; // lambda <= 2/3
};

struct ScalingSlope {
    std::size_t N = 0;
    double slope = 0.0; // least squares slope of log E T-hat against log k
    std::size_t points = 0;
};

struct ScalingTable {
    std::vector<ScalingRow> rows;
    std::vector<ScalingSlope> slopes;
    double max_that_ratio = 0.0;
    double min_that_ratio = 0.0;
    double recorded_constant = 0.0; // max second_ratio over the grid
};

inline ScalingTable scaling_study(const ScalingConfig& config) {
    if (config.Ns.empty() || config.lambdas.empty()) throw std::invalid_argument("scaling_study: empty grid");
    ScalingTable table;
    std::uint64_t cell = 0;
    for (std::size_t N : config.Ns) {
        std::vector<double> xs, ys;
        for (double lambda : config.lambdas) {
            if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("scaling_study: lambda must lie in (0, 1]");
            ScalingRow row;
            row.N = N;
            row.lambda = lambda;
            row.k = std::min(N, k_from_rule(double(N), 1.0, lambda));
            row.below_threshold = lambda <= 2.0 / 3.0;
            const double kd = double(row.k);
            const double scale = std::pow(kd, 1.5) / double(N);
            row.expected_That = exact_expected_That(N, row.k);
            row.that_ratio = row.expected_That / scale;
            if (second_moment_work(N, row.k) <= config.exact_work_budget) {
                row.second_moment = exact_second_moment_That(N, row.k);
                row.second_exact = true;
            } else {
                const auto mc = estimate_That_moments(N - row.k, row.k, config.mc_trials,
                                                      detail::stream_seed(config.master_seed, cell), config.threads,
                                                      false);
                row.second_moment = mc.second_moment;
                row.second_stderr = mc.second_stderr;
                row.second_exact = false;
            }
            row.second_ratio = row.second_moment / (scale * scale);
            if (row.expected_That > 0.0) {
                xs.push_back(std::log(kd));
                ys.push_back(std::log(row.expected_That));
            }
            table.rows.push_back(row);
            ++cell;
        }
        ScalingSlope slope{N, 0.0, xs.size()};
        if (xs.size() >= 2) {
            const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
            const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / double(ys.size());
            double sxy = 0.0, sxx = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sxy += (xs[i] - mx) * (ys[i] - my);
                sxx += (xs[i] - mx) * (xs[i] - mx);
            }
            slope.slope = sxx > 0.0 ? sxy / sxx : 0.0;
        }
        table.slopes.push_back(slope);
    }
    table.min_that_ratio = table.rows.front().that_ratio;
    for (const auto& row : table.rows) {
        table.max_that_ratio = std::max(table.max_that_ratio, row.that_ratio);
        table.min_that_ratio = std::min(table.min_that_ratio, row.that_ratio);
        table.recorded_constant = std::max(table.recorded_constant, row.second_ratio);
    }
    return table;
}

// ---------------------------------------------------------------------------
// LIS under U_n versus mu_{n;k}

struct LisSummary {
    MeanEstimate mean;
    std::size_t min = 0;
    std::size_t max = 0;
    double q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0;
};

/// Nearest-rank quantile of sorted data.
inline double quantile_sorted(const std::vector<std::size_t>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const auto rank = static_cast<std::size_t>(std::ceil(q * double(sorted.size())));
    return double(sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1]);
}

inline LisSummary summarize_lengths(const std::vector<std::size_t>& lengths) {
    LisSummary out;
    std::vector<double> as_double(lengths.begin(), lengths.end());
    out.mean = estimate_mean(as_double);
    std::vector<std::size_t> sorted = lengths;
    std::sort(sorted.begin(), sorted.end());
    if (!sorted.empty()) {
        out.min = sorted.front();
        out.max = sorted.back();
    }
    out.q05 = quantile_sorted(sorted, 0.05);
    out.q25 = quantile_sorted(sorted, 0.25);
    out.q50 = quantile_sorted(sorted, 0.50);
    out.q75 = quantile_sorted(sorted, 0.75);
    out.q95 = quantile_sorted(sorted, 0.95);
    return out;
}

struct ExceedanceRow {
    double c = 0.0;
    double threshold = 0.0; // 2 sqrt(n) + c n^{1/6}
    double freq_uniform = 0.0;
    double freq_mu = 0.0;
};

struct LisShiftReport {
    std::size_t n = 0;
    std::size_t k = 0;
    std::uint64_t trials = 0;
    std::vector<std::size_t> lis_uniform; // per trial
    std::vector<std::size_t> lis_mu;
    LisSummary uniform;
    LisSummary mu;
    std::vector<ExceedanceRow> exceedance;
    /// Error of the rule "sample is from mu iff L_n >= k", equal priors.
    double classifier_error = 0.0;
    bool mu_all_at_least_k = true;
};

/// Trial i draws its U_n sample from stream 2i and its mu sample from 2i+1.
inline LisShiftReport lis_shift_experiment(std::size_t n, std::size_t k, std::uint64_t trials,
                                           std::uint64_t master_seed, const std::vector<double>& c_grid,
                                           unsigned threads = 0) {
    if (trials < 2) throw std::invalid_argument("lis_shift_experiment: trials must be at least 2");
    const AdulterationSpec spec(n, k);
    LisShiftReport out;
    out.n = n;
    out.k = k;
    out.trials = trials;
    out.lis_uniform.resize(trials);
    out.lis_mu.resize(trials);
    parallel_for(trials, threads, [&](std::size_t i) {
        RngStream u(master_seed, 2 * i);
        RngStream m(master_seed, 2 * i + 1);
        out.lis_uniform[i] = lis_length(sample_uniform_permutation(n, u));
        out.lis_mu[i] = lis_length(sample_mu(spec, m));
    });
    out.uniform = summarize_lengths(out.lis_uniform);
    out.mu = summarize_lengths(out.lis_mu);

    const double root = std::sqrt(double(n));
    const double sixth = std::pow(double(n), 1.0 / 6.0);
    for (double c : c_grid) {
        ExceedanceRow row{c, 2.0 * root + c * sixth, 0.0, 0.0};
        std::uint64_t hits_u = 0, hits_m = 0;
        for (std::uint64_t i = 0; i < trials; ++i) {
            hits_u += double(out.lis_uniform[i]) > row.threshold;
            hits_m += double(out.lis_mu[i]) > row.threshold;
        }
        row.freq_uniform = double(hits_u) / double(trials);
        row.freq_mu = double(hits_m) / double(trials);
        out.exceedance.push_back(row);
    }
    std::uint64_t false_mu = 0, false_uniform = 0;
    for (std::uint64_t i = 0; i < trials; ++i) {
        false_mu += out.lis_uniform[i] >= k;
        false_uniform += out.lis_mu[i] < k;
        out.mu_all_at_least_k &= out.lis_mu[i] >= k;
    }
    out.classifier_error = double(false_mu + false_uniform) / (2.0 * double(trials));
    return out;
}

// ---------------------------------------------------------------------------
// LIS over the complement values under U_{n;x}

struct ComplementRow {
    double gamma = 0.0;
    double threshold = 0.0; // 2 r^{1/2} - gamma r^{1/6}
    double frequency = 0.0; // of L_{n;y} >= threshold
};

struct ComplementReport {
    std::size_t n = 0;
    std::size_t k = 0;
    std::uint64_t trials = 0;
    std::vector<std::size_t> complement_lis;
    std::vector<std::size_t> full_lis;
    MeanEstimate complement_mean;
    std::vector<ComplementRow> rows;
    std::uint64_t monotonicity_violations = 0; // complement LIS > full LIS
};

/// Trial i: a uniform value set x (k-subset of {1..n}), sigma ~ U_{n;x}, and
/// the LIS over the complementary values y.
inline ComplementReport complement_lis_check(std::size_t n, std::size_t k, std::uint64_t trials,
                                             std::uint64_t master_seed, const std::vector<double>& gamma_grid,
                                             unsigned threads = 0) {
    if (trials < 2) throw std::invalid_argument("complement_lis_check: trials must be at least 2");
    if (n == 0 || k > n) throw std::invalid_argument("complement_lis_check: need 0 <= k <= n, n >= 1");
    ComplementReport out;
    out.n = n;
    out.k = k;
    out.trials = trials;
    out.complement_lis.resize(trials);
    out.full_lis.resize(trials);
    parallel_for(trials, threads, [&](std::size_t i) {
        RngStream rng(master_seed, i);
        const SubsetPositions x = sample_k_subset(n, k, rng);
        const Permutation sigma = sample_conditioned(n, x.members(), rng);
        const std::vector<Value> y = x.complement();
        out.complement_lis[i] = lis_length_restricted(sigma, y);
        out.full_lis[i] = lis_length(sigma);
    });
    std::vector<double> as_double(out.complement_lis.begin(), out.complement_lis.end());
    out.complement_mean = estimate_mean(as_double);
    for (std::uint64_t i = 0; i < trials; ++i) out.monotonicity_violations += out.complement_lis[i] > out.full_lis[i];

    const double r = double(n - k);
    for (double gamma : gamma_grid) {
        ComplementRow row{gamma, 2.0 * std::sqrt(r) - gamma * std::pow(r, 1.0 / 6.0), 0.0};
        std::uint64_t hits = 0;
        for (std::size_t len : out.complement_lis) hits += double(len) >= row.threshold;
        row.frequency = double(hits) / double(trials);
        out.rows.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// P(Z_{n, floor(c sqrt n)} = 0) = P(L_n < k)

struct ZeroRow {
    double c = 0.0;
    std::size_t k = 0;
    double p_zero = 0.0;
    double std_error = 0.0;
};

struct ZeroSweep {
    std::size_t n = 0;
    std::uint64_t trials = 0;
    std::vector<std::size_t> lis; // per trial, shared by every c
    std::vector<ZeroRow> rows;
};

inline ZeroSweep zero_probability_sweep(std::size_t n, const std::vector<double>& c_list, std::uint64_t trials,
                                        std::uint64_t master_seed, unsigned threads = 0) {
    if (trials < 2) throw std::invalid_argument("zero_probability_sweep: trials must be at least 2");
    if (n == 0) throw std::invalid_argument("zero_probability_sweep: n must be at least 1");
    ZeroSweep out;
    out.n = n;
    out.trials = trials;
    out.lis.resize(trials);
    parallel_for(trials, threads, [&](std::size_t i) {
        RngStream rng(master_seed, i);
        out.lis[i] = lis_length(sample_uniform_permutation(n, rng));
    });
    for (double c : c_list) {
        ZeroRow row;
        row.c = c;
        row.k = std::min(n, k_from_rule(double(n), c, 0.5));
        std::uint64_t zeros = 0;
        for (std::size_t len : out.lis) zeros += len < row.k;
        const double p = double(zeros) / double(trials);
        row.p_zero = p;
        row.std_error = std::sqrt(p * (1.0 - p) / double(trials));
        out.rows.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Total variation across an (n, k) grid

struct TvCell {
    std::size_t n = 0;
    std::size_t k = 0;
};

struct TvSweepConfig {
    std::vector<TvCell> cells;
    std::uint64_t mc_trials = 10000;
    std::size_t enumeration_budget = 10;
    bool cross_check = false; // also run Monte Carlo on exact cells
    std::uint64_t master_seed = 0;
    unsigned threads = 0;
};

struct TvSweepRow {
    std::size_t n = 0;
    std::size_t k = 0;
    double exponent = 0.0; // log k / log n
    std::optional<TvEstimate> exact;
    std::optional<TvEstimate> monte_carlo;
};

/// Cells (n, floor(c n^l)) for every n and l, deduplicated in grid order.
inline std::vector<TvCell> tv_cells_from_rule(const std::vector<std::size_t>& ns, double c,
                                              const std::vector<double>& ls) {
    std::vector<TvCell> cells;
    for (std::size_t n : ns)
        for (double l : ls) {
            const TvCell cell{n, std::min(n, k_from_rule(double(n), c, l))};
            if (std::none_of(cells.begin(), cells.end(),
                             [&](const TvCell& o) { return o.n == cell.n && o.k == cell.k; }))
                cells.push_back(cell);
        }
    return cells;
}

inline std::vector<TvSweepRow> tv_sweep(const TvSweepConfig& config) {
    if (config.cells.empty()) throw std::invalid_argument("tv_sweep: empty grid");
    std::vector<TvSweepRow> rows;
    std::uint64_t index = 0;
    for (const auto& cell : config.cells) {
        const AdulterationSpec spec(cell.n, cell.k);
        TvSweepRow row;
        row.n = cell.n;
        row.k = cell.k;
        row.exponent = cell.n > 1 && cell.k > 0 ? std::log(double(cell.k)) / std::log(double(cell.n)) : 0.0;
        const bool exact = cell.n <= config.enumeration_budget;
        if (exact) row.exact = exact_tv_distance(spec, {config.enumeration_budget, config.threads});
        if (!exact || config.cross_check)
            row.monte_carlo = tv_monte_carlo(spec, config.mc_trials, detail::stream_seed(config.master_seed, index),
                                             config.threads);
        rows.push_back(std::move(row));
        ++index;
    }
    return rows;
}

} // namespace incsub
