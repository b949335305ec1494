#pragma once

#include <cstddef>
#include <stdexcept>

#include <gmpxx.h>

namespace incsub {

inline mpz_class factorial(std::size_t n) {
    mpz_class out;
    mpz_fac_ui(out.get_mpz_t(), n);
    return out;
}

/// C(n, k); zero when k > n.
inline mpz_class binomial(std::size_t n, std::size_t k) {
    mpz_class out;
    mpz_bin_uiui(out.get_mpz_t(), n, k);
    return out;
}

/// E Z_{n,k} = C(n,k) / k!, exactly.
inline mpq_class expected_Z_exact(std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("expected_Z_exact: k exceeds n");
    mpq_class out(binomial(n, k), factorial(k));
    out.canonicalize();
    return out;
}

} // namespace incsub
