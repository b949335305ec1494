#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "incsub/analytics.hpp"
#include "incsub/counting.hpp"
#include "incsub/permutation.hpp"
#include "support/oracles.hpp"

using namespace incsub;
using incsub::testing::all_subsets;

namespace {

double pmf_sum(const PositionLaw& law) { return std::accumulate(law.pmf.begin(), law.pmf.end(), 0.0); }

/// Prob(X_j = r) by enumerating every k-subset.
std::vector<double> enumerated_pmf(std::size_t N, std::size_t k, std::size_t j) {
    const auto subsets = all_subsets(N, k);
    std::vector<double> out(N + 1, 0.0);
    for (const auto& s : subsets) out[s[j - 1]] += 1.0;
    for (auto& v : out) v /= double(subsets.size());
    return out;
}

double log_H(std::size_t N, std::size_t k, std::size_t j, std::size_t r) {
    return log_binomial(double(r - 1), double(j - 1)) + log_binomial(double(N - r), double(k - j));
}

/// Exact H(r) as a big integer, for scanning maximizers without rounding.
mpz_class exact_H(std::size_t N, std::size_t k, std::size_t j, std::size_t r) {
    return binomial(r - 1, j - 1) * binomial(N - r, k - j);
}

} // namespace

TEST(ExpectedZ, ExactValues) {
    EXPECT_EQ(expected_Z_exact(5, 3), mpq_class(5, 3));
    for (std::size_t n = 1; n <= 12; ++n) {
        EXPECT_EQ(expected_Z_exact(n, 1), mpq_class(n));
        EXPECT_EQ(expected_Z_exact(n, n), mpq_class(1, factorial(n)));
    }
}

TEST(ExpectedZ, BruteForceAverageOverS5) {
    mpz_class total = 0;
    for (const auto& p : incsub::testing::all_permutations(5)) total += count_bruteforce(p, 3).exact();
    mpq_class avg(total, 120);
    avg.canonicalize();
    EXPECT_EQ(avg, expected_Z_exact(5, 3));
}

TEST(ExpectedZ, LogValueMatchesExact) {
    for (std::size_t n : {5, 20, 60})
        for (std::size_t k = 0; k <= n; ++k) {
            const double exact = std::log(expected_Z_exact(n, k).get_d());
            EXPECT_NEAR(expected_Z_log(double(n), double(k)).log(), exact, 1e-12 * std::max(1.0, std::fabs(exact)));
        }
    EXPECT_THROW(expected_Z_log(3, 4), std::invalid_argument);
}

TEST(ExpectedZAsymptotic, MatchesLogGammaBelowHalf) {
    const double n = 1e6;
    const double exact = expected_Z_log(n, std::pow(n, 0.3)).log();
    const double ratio = std::exp(exact - expected_Z_asymptotic(n, 1.0, 0.3).log());
    EXPECT_GE(ratio, 0.9);
    EXPECT_LE(ratio, 1.1);
}

TEST(ExpectedZAsymptotic, TransitionAtE) {
    const double e = std::numbers::e;
    for (double n : {1e8, 1e10, 1e12}) EXPECT_LT(expected_Z_asymptotic(n, e * 1.01, 0.5).log(), 0.0);
    double previous = 0.0;
    for (double n : {1e8, 1e10, 1e12}) {
        const double log = expected_Z_asymptotic(n, e * 0.99, 0.5).log();
        EXPECT_GT(log, 0.0);
        EXPECT_GT(log, previous);
        previous = log;
    }
}

TEST(ExpectedZAsymptotic, AtHalfTracksLogGamma) {
    // Relative error of the log shrinks as n grows.
    for (double c : {1.0, 2.0, 2.5}) {
        const double n = 1e10;
        const double exact = expected_Z_log(n, c * std::sqrt(n)).log();
        const double approx = expected_Z_asymptotic(n, c, 0.5).log();
        EXPECT_LT(std::fabs(exact - approx), 1e-3 * std::fabs(exact)) << c;
    }
}

TEST(ExpectedZAsymptotic, RejectsBadArguments) {
    EXPECT_THROW(expected_Z_asymptotic(100, 1, 0.6), std::invalid_argument);
    EXPECT_THROW(expected_Z_asymptotic(100, 1, 0.0), std::invalid_argument);
    EXPECT_THROW(expected_Z_asymptotic(100, 0, 0.3), std::invalid_argument);
    EXPECT_THROW(expected_Z_asymptotic(100, 0.01, 0.3), std::invalid_argument);
}

TEST(LogValue, Arithmetic) {
    const auto a = LogValue::from_value(3.0), b = LogValue::from_value(5.0);
    EXPECT_NEAR((a + b).value(), 8.0, 8e-12);
    EXPECT_NEAR((a * b).value(), 15.0, 15e-12);
    EXPECT_NEAR((b / a).value(), 5.0 / 3.0, 1e-12);
    EXPECT_TRUE(LogValue::zero().is_zero());
    EXPECT_NEAR((a + LogValue::zero()).value(), 3.0, 3e-12);
    EXPECT_LT(a, b);
}

TEST(PositionLaw, SmallExample) {
    const auto law = insertion_position_pmf(4, 2, 1);
    ASSERT_EQ(law.pmf.size(), 3u);
    EXPECT_NEAR(law.at(1), 1.0 / 2, 1e-14);
    EXPECT_NEAR(law.at(2), 1.0 / 3, 1e-14);
    EXPECT_NEAR(law.at(3), 1.0 / 6, 1e-14);
    EXPECT_EQ(law.at(4), 0.0);
    const auto exact = insertion_position_pmf_exact(4, 2, 1);
    EXPECT_EQ(exact, (std::vector<mpq_class>{mpq_class(1, 2), mpq_class(1, 3), mpq_class(1, 6)}));
}

TEST(PositionLaw, MatchesEnumeration) {
    for (std::size_t N = 1; N <= 10; ++N)
        for (std::size_t k = 1; k <= N; ++k)
            for (std::size_t j = 1; j <= k; ++j) {
                const auto law = insertion_position_pmf(N, k, j);
                const auto oracle = enumerated_pmf(N, k, j);
                for (std::size_t r = 1; r <= N; ++r) ASSERT_NEAR(law.at(r), oracle[r], 1e-13);
            }
}

TEST(PositionLaw, SumsToOneWithExactSupport) {
    for (std::size_t N : {10, 100, 1000, 5000})
        for (std::size_t k : {std::size_t{1}, N / 7 + 1, N / 2, N})
            for (std::size_t j : {std::size_t{1}, (k + 1) / 2, k}) {
                const auto law = insertion_position_pmf(N, k, j);
                EXPECT_EQ(law.first(), j);
                EXPECT_EQ(law.last(), N - k + j);
                EXPECT_EQ(law.pmf.size(), N - k + 1);
                EXPECT_NEAR(pmf_sum(law), 1.0, 1e-10) << N << "," << k << "," << j;
            }
    EXPECT_THROW(insertion_position_pmf(5, 6, 1), std::invalid_argument);
    EXPECT_THROW(insertion_position_pmf(5, 3, 0), std::invalid_argument);
    EXPECT_THROW(insertion_position_pmf(5, 3, 4), std::invalid_argument);
}

TEST(PositionLaw, FirstRankPeaksAtOne) {
    for (std::size_t N : {10, 64, 1000})
        for (std::size_t k : {std::size_t{1}, std::size_t{3}, N / 2}) {
            const auto law = insertion_position_pmf(N, k, 1);
            const auto peak = std::max_element(law.pmf.begin(), law.pmf.end());
            EXPECT_EQ(peak - law.pmf.begin(), 0);
            EXPECT_NEAR(*peak, double(k) / double(N), 1e-12);
        }
    EXPECT_EQ(insertion_position_pmf_exact(64, 16, 1).front(), mpq_class(1, 4));
    EXPECT_EQ(insertion_position_pmf_exact(256, 32, 1).front(), mpq_class(1, 8));
}

TEST(PositionLaw, ExactAgreesWithLogGamma) {
    for (std::size_t N : {12, 30, 60})
        for (std::size_t k = 1; k <= N; k += 5)
            for (std::size_t j = 1; j <= k; j += 2) {
                const auto law = insertion_position_pmf(N, k, j);
                const auto exact = insertion_position_pmf_exact(N, k, j);
                mpq_class total = 0;
                for (std::size_t i = 0; i < exact.size(); ++i) {
                    total += exact[i];
                    const double e = exact[i].get_d();
                    ASSERT_NEAR(law.pmf[i], e, 1e-10 * e);
                }
                ASSERT_EQ(total, 1);
            }
    EXPECT_THROW(insertion_position_pmf_exact(1025, 2, 1), std::invalid_argument);
}

TEST(PositionLaw, MatchesSampledSubsets) {
    for (auto [N, k, j] : {std::tuple<std::size_t, std::size_t, std::size_t>{16, 8, 3}, {40, 5, 5}, {100, 30, 12}}) {
        const auto law = insertion_position_pmf(N, k, j);
        std::vector<double> counts(law.pmf.size(), 0.0);
        RngStream rng(101, N);
        for (int i = 0; i < 50000; ++i) counts[sample_k_subset(N, k, rng)[j - 1] - law.first()] += 1;
        const auto chi = incsub::testing::chi_square_test(counts, law.pmf);
        EXPECT_TRUE(chi.pass) << N << "," << k << "," << j << ": " << chi.statistic;
    }
}

TEST(JointPositionLaw, SmallExampleAndMarginals) {
    const auto joint = joint_position_pmf(4, 2, 1, 2);
    EXPECT_NEAR(joint.at(1, 2), 1.0 / 6, 1e-14);
    EXPECT_EQ(joint.at(2, 2), 0.0);
    for (std::size_t N : {8, 20, 50})
        for (std::size_t k : {std::size_t{2}, std::size_t{5}, N / 2})
            for (std::size_t i = 1; i < k; i += 2)
                for (std::size_t j = i + 1; j <= k; j += 3) {
                    const auto law = joint_position_pmf(N, k, i, j);
                    const auto mi = insertion_position_pmf(N, k, i);
                    const auto mj = insertion_position_pmf(N, k, j);
                    double total = 0.0;
                    for (std::size_t r = 1; r <= N; ++r) {
                        double row = 0.0, col = 0.0;
                        for (std::size_t r2 = 1; r2 <= N; ++r2) {
                            row += law.at(r, r2);
                            col += law.at(r2, r);
                        }
                        ASSERT_NEAR(row, mi.at(r), 1e-10);
                        ASSERT_NEAR(col, mj.at(r), 1e-10);
                        total += row;
                    }
                    ASSERT_NEAR(total, 1.0, 1e-10);
                }
    EXPECT_THROW(joint_position_pmf(5, 3, 2, 2), std::invalid_argument);
}

TEST(JointPositionLaw, MatchesEnumeration) {
    const std::size_t N = 9, k = 4;
    const auto subsets = all_subsets(N, k);
    for (std::size_t i = 1; i < k; ++i)
        for (std::size_t j = i + 1; j <= k; ++j) {
            const auto law = joint_position_pmf(N, k, i, j);
            std::vector<double> counts((N + 1) * (N + 1), 0.0);
            for (const auto& s : subsets) counts[s[i - 1] * (N + 1) + s[j - 1]] += 1.0 / double(subsets.size());
            for (std::size_t r = 1; r <= N; ++r)
                for (std::size_t r2 = 1; r2 <= N; ++r2) ASSERT_NEAR(law.at(r, r2), counts[r * (N + 1) + r2], 1e-13);
        }
}

TEST(HArgmax, SmallExamples) {
    // N=10, k=4, j=2: H(r) = (r-1) C(10-r, 2) gives 42, 45, 40 at r = 3, 4, 5.
    EXPECT_EQ(exact_H(10, 4, 2, 3), 42);
    EXPECT_EQ(exact_H(10, 4, 2, 4), 45);
    EXPECT_EQ(exact_H(10, 4, 2, 5), 40);
    EXPECT_EQ(h_argmax(10, 4, 2), 4u);
    // N=4, k=2, j=2: H(r) = r-1 on r in {2,3,4}.
    EXPECT_EQ(h_argmax(4, 2, 2), 4u);
    EXPECT_EQ(h_argmax(100, 10, 1), 1u);
}

TEST(HArgmax, MatchesFullScan) {
    for (std::size_t N = 2; N <= 60; ++N)
        for (std::size_t k = 2; k <= N; ++k)
            for (std::size_t j = 1; j <= k; ++j) {
                std::size_t best = j;
                for (std::size_t r = j + 1; r <= N - k + j; ++r)
                    if (exact_H(N, k, j, r) > exact_H(N, k, j, best)) best = r;
                ASSERT_EQ(h_argmax(N, k, j), best) << N << "," << k << "," << j;
            }
}

TEST(HArgmax, LocalMaximumOnLargeGrid) {
    for (std::size_t N : {1000, 54321, 100000})
        for (std::size_t k : {std::size_t{7}, std::size_t{999}, N / 3})
            for (std::size_t j = 1; j <= k; j += std::max<std::size_t>(1, k / 37)) {
                const std::size_t r0 = h_argmax(N, k, j);
                ASSERT_GE(r0, j);
                ASSERT_LE(r0, N - k + j);
                const double h0 = log_H(N, k, j, r0);
                if (r0 > j) {
                    ASSERT_GE(h0, log_H(N, k, j, r0 - 1) - 1e-9);
                }
                if (r0 < N - k + j) {
                    ASSERT_GE(h0, log_H(N, k, j, r0 + 1) - 1e-9);
                }
            }
}

TEST(PmfBound, FirstRankRatioIsOne) {
    for (std::size_t N : {100, 1000, 10000})
        for (std::size_t k : {std::size_t{1}, std::size_t{10}, N / 2}) {
            const auto check = pmf_bound_check(N, k, 1);
            EXPECT_EQ(check.argmax_r, 1u);
            EXPECT_NEAR(check.max_pmf, double(k) / double(N), 1e-10);
            EXPECT_NEAR(check.bound_ratio, 1.0, 1e-10);
        }
}

TEST(PmfBound, ReflectionSymmetry) {
    for (std::size_t N : {50, 777, 5000})
        for (std::size_t k : {std::size_t{6}, std::size_t{25}})
            for (std::size_t j = 1; j <= k; ++j) {
                const auto a = pmf_bound_check(N, k, j);
                const auto b = pmf_bound_check(N, k, k - j + 1);
                ASSERT_NEAR(a.max_pmf, b.max_pmf, 1e-10 * a.max_pmf);
            }
}

TEST(PmfBound, MaxMatchesPmfArray) {
    for (std::size_t j : {1, 2, 5, 9, 17}) {
        const auto law = insertion_position_pmf(3000, 17, j);
        const double peak = *std::max_element(law.pmf.begin(), law.pmf.end());
        EXPECT_NEAR(pmf_bound_check(3000, 17, j).max_pmf, peak, 1e-13);
    }
}

TEST(PmfBound, GridScanHasFiniteConstant) {
    std::vector<std::size_t> Ns{100, 316, 1000, 3162, 10000};
    std::vector<std::size_t> ks{1, 2, 3, 5, 8, 13, 21, 50, 100, 500, 1000, 5000};
    const auto scan = pmf_bound_scan(Ns, ks);
    EXPECT_LE(2 * scan.worst_k, scan.worst_N);
    EXPECT_GT(scan.cells, 0u);
    EXPECT_GE(scan.max_ratio, 1.0);
    EXPECT_LT(scan.max_ratio, 2.0) << "worst at N=" << scan.worst_N << " k=" << scan.worst_k << " j=" << scan.worst_j;
}

TEST(ThatWindow, Bounds) {
    for (std::size_t k = 0; k < 8; ++k) EXPECT_TRUE(that_window(k).empty()) << k;
    EXPECT_EQ(that_window(8).first, 3u);
    EXPECT_EQ(that_window(8).last, 5u);
    EXPECT_EQ(that_window(16).first, 5u);
    EXPECT_EQ(that_window(16).last, 11u);
}

TEST(ExpectedThat, EmptyWindowIsZero) {
    EXPECT_EQ(exact_expected_That(4, 2), 0.0);
    EXPECT_EQ(exact_expected_That(100, 7), 0.0);
    EXPECT_EQ(exact_second_moment_That(100, 7), 0.0);
    EXPECT_THROW(exact_expected_That(3, 4), std::invalid_argument);
}

TEST(ExpectedThat, MatchesPairEnumeration) {
    for (std::size_t N = 8; N <= 12; ++N)
        for (std::size_t k = 8; k <= N; ++k) {
            const auto brute = incsub::testing::brute_force_That(N, k);
            EXPECT_NEAR(exact_expected_That(N, k), brute.mean, 1e-12) << N << "," << k;
            EXPECT_NEAR(exact_second_moment_That(N, k), brute.second, 1e-11) << N << "," << k;
        }
}

TEST(ExpectedThat, SecondMomentMatchesJointLawSum) {
    for (auto [N, k] : {std::pair<std::size_t, std::size_t>{40, 12}, {64, 16}, {90, 20}}) {
        const RankWindow w = that_window(k);
        double pairs = 0.0;
        for (std::size_t i = w.first; i <= w.last; ++i)
            for (std::size_t j = i + 1; j <= w.last; ++j) {
                const auto law = joint_position_pmf(N, k, i, j);
                for (double p : law.cells) pairs += p * p;
            }
        const double mean = exact_expected_That(N, k);
        const double second = exact_second_moment_That(N, k);
        EXPECT_NEAR(second, mean + 2.0 * pairs, 1e-10 * second) << N << "," << k;
        EXPECT_GE(second, mean * mean);
    }
}

TEST(EntropyInequality, Examples) {
    EXPECT_EQ(lemma5_ratio(1, 1, 1, 1), 1.0);
    EXPECT_LT(lemma5_ratio(1, 1, 1, 2), 1.0);
    // Closed form for (1,1,1,2): 2^2 * 3^3/2^2 * 2^2 3^3 / 5^5.
    EXPECT_NEAR(lemma5_ratio(1, 1, 1, 2), 4.0 * 27.0 / 4.0 * 4.0 * 27.0 / 3125.0, 1e-15);
    EXPECT_THROW(lemma5_ratio(0, 1, 1, 1), std::invalid_argument);
    EXPECT_THROW(lemma5_ratio(1, -1, 1, 1), std::invalid_argument);
}

TEST(EntropyInequality, HomogeneousScaling) {
    RngStream rng(55, 0);
    for (int i = 0; i < 1000; ++i) {
        const double a = 0.1 + 5 * rng.uniform01(), b = 0.1 + 5 * rng.uniform01();
        const double c = 0.1 + 5 * rng.uniform01(), d = 0.1 + 5 * rng.uniform01();
        const double lambda = 0.25 + 4 * rng.uniform01();
        const double base = lemma5_ratio(a, b, c, d);
        ASSERT_NEAR(lemma5_ratio(lambda * a, lambda * b, lambda * c, lambda * d), std::pow(base, lambda),
                    1e-12);
    }
}

TEST(EntropyInequality, RandomQuadruplesStayBelowOne) {
    RngStream rng(56, 0);
    for (int i = 0; i < 100000; ++i) {
        const double a = 1.0 - rng.uniform01(), b = 1.0 - rng.uniform01();
        const double c = 1.0 - rng.uniform01(), d = 1.0 - rng.uniform01();
        const double r = lemma5_ratio(a, b, c, d);
        ASSERT_LE(r, 1.0 + 1e-12);
        ASSERT_LT(r, 1.0) << "off-surface equality at " << a << " " << b << " " << c << " " << d;
    }
}

TEST(EntropyInequality, EqualityOnSurface) {
    RngStream rng(57, 0);
    for (int i = 0; i < 100000; ++i) {
        const double a = std::exp(13.8 * (rng.uniform01() - 0.5));
        const double b = std::exp(13.8 * (rng.uniform01() - 0.5));
        const double c = std::exp(13.8 * (rng.uniform01() - 0.5));
        const double t = b * c / a;
        ASSERT_NEAR(lemma5_ratio(a, b, c, t), 1.0, 1e-9);
        ASSERT_NEAR(entropy_gap_G(a, b, c, t), 0.0, 1e-9);
        const double d = t * (1.0 + 1e-9 * (2.0 * rng.uniform01() - 1.0));
        ASSERT_NEAR(lemma5_ratio(a, b, c, d), 1.0, 1e-9);
    }
}

TEST(EntropyInequality, DeficitIsQuadraticInDistance) {
    // 1 - ratio ~ eps^2 / 8 at a = b = c = 1, d = 1 + eps: equality within
    // 1e-9 extends to |d - bc/a| ~ 1e-4, far outside a 1e-9 band.
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const double deficit = 1.0 - lemma5_ratio(1, 1, 1, 1 + eps);
        EXPECT_NEAR(deficit / (eps * eps), 0.125, 0.01);
    }
    EXPECT_LE(1.0 - lemma5_ratio(1, 1, 1, 1 + 5e-5), 1e-9);
}

TEST(EntropyGap, MinimumAtBalancePoint) {
    RngStream rng(58, 0);
    for (int i = 0; i < 2000; ++i) {
        const double a = 0.05 + 10 * rng.uniform01(), b = 0.05 + 10 * rng.uniform01();
        const double c = 0.05 + 10 * rng.uniform01();
        const double t0 = b * c / a;
        ASSERT_NEAR(entropy_gap_G(a, b, c, t0), 0.0, 1e-12);
        for (double f : {0.01, 0.5, 0.9, 1.1, 2.0, 100.0}) ASSERT_GE(entropy_gap_G(a, b, c, t0 * f), -1e-12);
        // G' < 0 left of t0 and > 0 right of it.
        const double h = 1e-3 * t0;
        ASSERT_GT(entropy_gap_G(a, b, c, t0 - 2 * h), entropy_gap_G(a, b, c, t0 - h));
        ASSERT_LT(entropy_gap_G(a, b, c, t0 + h), entropy_gap_G(a, b, c, t0 + 2 * h));
    }
}

TEST(EntropyF, MatchesDirectFormula) {
    for (double x : {0.5, 1.0, 3.0, 10.0})
        for (double y : {0.25, 1.0, 7.0}) {
            const double direct = (x + y) * std::log(x + y) - x * std::log(x) - y * std::log(y);
            EXPECT_NEAR(entropy_F(x, y), direct, 1e-12 * std::fabs(direct) + 1e-14);
        }
    EXPECT_EQ(entropy_F(0.0, 3.0), 0.0);
    EXPECT_THROW(entropy_F(-1.0, 1.0), std::domain_error);
}
