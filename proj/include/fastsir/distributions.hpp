#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/mpfr.hpp>

namespace fastsir {

// Per-step transmission probability p and recovery probability q.
// q = 0 is rejected: the process would never terminate and the direct
// mass formula is singular there.
class EpidemicParams {
public:
    EpidemicParams() = default; // p=0, q=1: no transmission, instant recovery

    EpidemicParams(double p, double q) : p_(p), q_(q) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
        if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0, 1]");
    }

    double p() const { return p_; }
    double q() const { return q_; }

    bool operator==(const EpidemicParams&) const = default;

private:
    double p_ = 0.0;
    double q_ = 1.0;
};

// Working-significand width for distribution precomputation: at least
// 0.8 bits per unit of maximum degree, floor of 64. One global precision
// per table, since the recursion mixes rows.
struct PrecisionPolicy {
    unsigned mantissa_bits(std::size_t n) const {
        const auto scaled = static_cast<unsigned>(std::ceil(0.8 * static_cast<double>(n)));
        return std::max(64u, scaled);
    }
};

// P(X_n = k) for k = 0..n at fixed degree n.
struct PmfRow {
    std::size_t degree = 0;
    std::vector<double> masses;
};

struct PmfTable {
    EpidemicParams params;
    unsigned precision_bits = 0;
    std::vector<PmfRow> rows; // rows[n] has degree n, for n = 0..n_max
};

// Raised when the recursion produces a negative mass too large to be
// rounding noise; callers should rebuild at higher precision.
class PrecisionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Probability an infected node ever transmits across one edge before
// recovering: P(X_1 = 1) = p / (1 - (1-p)(1-q)).
inline double transmissibility(const EpidemicParams& params) {
    return params.p() / (1.0 - (1.0 - params.p()) * (1.0 - params.q()));
}

namespace detail {

using big_float = boost::multiprecision::mpfr_float;
using big_int = boost::multiprecision::mpz_int;

inline unsigned bits_to_digits10(unsigned bits) {
    return static_cast<unsigned>(std::ceil(static_cast<double>(bits) * 0.3010299956639812)) + 2;
}

// Scoped default precision for mpfr_float locals created inside the scope.
class PrecisionGuard {
public:
    explicit PrecisionGuard(unsigned bits) : saved_(big_float::default_precision()) {
        big_float::default_precision(bits_to_digits10(bits));
    }
    ~PrecisionGuard() { big_float::default_precision(saved_); }
    PrecisionGuard(const PrecisionGuard&) = delete;
    PrecisionGuard& operator=(const PrecisionGuard&) = delete;

private:
    unsigned saved_;
};

inline big_int binomial_exact(unsigned long n, unsigned long k) {
    big_int r;
    mpz_bin_uiui(r.backend().data(), n, k);
    return r;
}

inline big_float to_big_float(const big_int& v) {
    big_float r;
    mpfr_set_z(r.backend().data(), v.backend().data(), MPFR_RNDN);
    return r;
}

// Cache of F_j = (1-p)^j / (1 - (1-q)(1-p)^j), the repeated fraction of
// the direct mass formula, for j = 0..n_max.
inline std::vector<big_float> fraction_cache(const EpidemicParams& params, std::size_t n_max) {
    const big_float om = big_float(1) - params.p();
    const big_float oq = big_float(1) - params.q();
    std::vector<big_float> F;
    F.reserve(n_max + 1);
    big_float om_pow(1);
    for (std::size_t j = 0; j <= n_max; ++j) {
        F.push_back(om_pow / (1 - oq * om_pow));
        om_pow *= om;
    }
    return F;
}

// Alternating inner sum of the direct formula:
//   sum_{l=0}^{k} C(k,l) (-1)^l F[n-k+l]
inline big_float direct_alternating_sum(std::size_t n, std::size_t k,
                                        std::span<const big_float> F) {
    big_float sum(0);
    big_float coeff(1); // C(k, l), advanced incrementally
    for (std::size_t l = 0; l <= k; ++l) {
        if (l % 2 == 0)
            sum += coeff * F[n - k + l];
        else
            sum -= coeff * F[n - k + l];
        if (l < k) {
            coeff *= static_cast<unsigned long>(k - l);
            coeff /= static_cast<unsigned long>(l + 1);
        }
    }
    return sum;
}

// Rounds a high-precision mass to double, clamping rounding noise into
// [0,1]. Negatives beyond the threshold indicate lost precision.
inline double emit_mass(const big_float& value, const big_float& negative_threshold) {
    if (value < 0) {
        if (value < -negative_threshold)
            throw PrecisionError(
                "negative probability mass beyond rounding tolerance; increase precision");
        return 0.0;
    }
    double d = value.convert_to<double>();
    return std::min(d, 1.0);
}

inline big_float negative_threshold_for_bits(unsigned bits) {
    return boost::multiprecision::pow(big_float(0.5), static_cast<int>(bits / 2));
}

struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

} // namespace detail

// Direct evaluation of P(X_n = k) from the alternating-sum formula at the
// requested working precision. The alternating terms cancel to roughly
// C(n,k)-sized magnitudes, so callers should budget about
// n + 53 + log2(1/q) significand bits for full double accuracy.
inline double pmf_direct(std::size_t n, std::size_t k, const EpidemicParams& params,
                         unsigned precision_bits) {
    if (k > n) throw std::invalid_argument("pmf_direct requires k <= n");
    if (precision_bits < 64) throw std::invalid_argument("precision_bits must be >= 64");
    if (params.p() == 0.0) return k == 0 ? 1.0 : 0.0;
    if (params.p() == 1.0) return k == n ? 1.0 : 0.0;

    detail::PrecisionGuard guard(precision_bits);
    std::vector<detail::big_float> F = detail::fraction_cache(params, n);
    const detail::big_float sum = detail::direct_alternating_sum(n, k, F);
    const detail::big_float mass =
        detail::big_float(params.q()) * detail::to_big_float(detail::binomial_exact(n, k)) * sum;
    return detail::emit_mass(mass, detail::negative_threshold_for_bits(precision_bits));
}

// Full direct-formula table for n = 0..n_max; the high-precision oracle
// the cheaper routes are verified against.
inline PmfTable pmf_table_direct(std::size_t n_max, const EpidemicParams& params,
                                 unsigned precision_bits) {
    if (precision_bits < 64) throw std::invalid_argument("precision_bits must be >= 64");
    PmfTable table{params, precision_bits, {}};
    table.rows.reserve(n_max + 1);
    table.rows.push_back(PmfRow{0, {1.0}});
    if (n_max == 0) return table;

    if (params.p() == 0.0 || params.p() == 1.0) {
        for (std::size_t n = 1; n <= n_max; ++n) {
            std::vector<double> masses(n + 1, 0.0);
            masses[params.p() == 0.0 ? 0 : n] = 1.0;
            table.rows.push_back(PmfRow{n, std::move(masses)});
        }
        return table;
    }

    detail::PrecisionGuard guard(precision_bits);
    const detail::big_float threshold = detail::negative_threshold_for_bits(precision_bits);
    const std::vector<detail::big_float> F = detail::fraction_cache(params, n_max);
    const detail::big_float q_big(params.q());

    for (std::size_t n = 1; n <= n_max; ++n) {
        std::vector<double> masses(n + 1);
        detail::big_float c_nk(1); // C(n, k)
        for (std::size_t k = 0; k <= n; ++k) {
            const detail::big_float sum = detail::direct_alternating_sum(n, k, F);
            masses[k] = detail::emit_mass(q_big * c_nk * sum, threshold);
            if (k < n) {
                c_nk *= static_cast<unsigned long>(n - k);
                c_nk /= static_cast<unsigned long>(k + 1);
            }
        }
        table.rows.push_back(PmfRow{n, std::move(masses)});
    }
    return table;
}

// Series form: P(X_n = k) = q C(n,k) sum_mu (1-(1-p)^(1+mu))^k ((1-p)^(1+mu))^(n-k) (1-q)^mu.
// All terms are nonnegative, so standard doubles suffice. Truncation stops
// once the analytic tail bound C(n,k) (1-q)^(mu+1) drops below tail_tol.
inline double pmf_series(std::size_t n, std::size_t k, const EpidemicParams& params,
                         double tail_tol) {
    if (k > n) throw std::invalid_argument("pmf_series requires k <= n");
    if (!(tail_tol > 0.0)) throw std::invalid_argument("tail_tol must be positive");
    if (params.p() == 0.0) return k == 0 ? 1.0 : 0.0;
    if (params.p() == 1.0) return k == n ? 1.0 : 0.0;

    const double p = params.p();
    const double q = params.q();
    const double log_binom = std::lgamma(static_cast<double>(n) + 1.0) -
                             std::lgamma(static_cast<double>(k) + 1.0) -
                             std::lgamma(static_cast<double>(n - k) + 1.0);
    const double binom = std::exp(log_binom);
    const double log_tail_tol = std::log(tail_tol);

    constexpr std::size_t max_terms = 20'000'000;
    detail::KahanSum acc;
    for (std::size_t mu = 0;; ++mu) {
        if (mu >= max_terms)
            throw std::runtime_error("pmf_series: tail budget exhausted before convergence");
        const double z = std::pow(1.0 - p, static_cast<double>(mu + 1));
        const double weight = q * std::pow(1.0 - q, static_cast<double>(mu));
        const double term = weight * binom * std::pow(1.0 - z, static_cast<double>(k)) *
                            std::pow(z, static_cast<double>(n - k));
        acc.add(term);
        // tail <= C(n,k) (1-q)^(mu+1), compared in logs to dodge overflow
        const double log_tail =
            log_binom + static_cast<double>(mu + 1) * std::log1p(-q);
        if (log_tail <= log_tail_tol) break;
    }
    return std::min(acc.sum, 1.0);
}

// One whole series row at once. The per-mu binomial slice is filled by the
// two-term recurrence from whichever end avoids underflow, which keeps the
// cost at O(n) per term instead of O(n) pow calls.
inline std::vector<double> pmf_series_row(std::size_t n, const EpidemicParams& params,
                                          double tail_tol) {
    if (!(tail_tol > 0.0)) throw std::invalid_argument("tail_tol must be positive");
    if (n > 1000) throw std::invalid_argument("pmf_series_row supports n <= 1000");
    std::vector<double> row(n + 1, 0.0);
    if (params.p() == 0.0) {
        row[0] = 1.0;
        return row;
    }
    if (params.p() == 1.0) {
        row[n] = 1.0;
        return row;
    }
    if (n == 0) {
        row[0] = 1.0;
        return row;
    }

    const double p = params.p();
    const double q = params.q();
    const double log_max_binom = std::lgamma(static_cast<double>(n) + 1.0) -
                                 2.0 * std::lgamma(static_cast<double>(n / 2) + 1.0);
    const double log_tail_tol = std::log(tail_tol);

    std::vector<detail::KahanSum> acc(n + 1);
    constexpr std::size_t max_terms = 20'000'000;
    for (std::size_t mu = 0;; ++mu) {
        if (mu >= max_terms)
            throw std::runtime_error("pmf_series_row: tail budget exhausted before convergence");
        const double z = std::pow(1.0 - p, static_cast<double>(mu + 1));
        const double weight = q * std::pow(1.0 - q, static_cast<double>(mu));
        if (z >= 0.5) {
            // b_k = C(n,k) (1-z)^k z^(n-k), ascending from b_0 = z^n
            double b = std::pow(z, static_cast<double>(n));
            for (std::size_t k = 0; k <= n; ++k) {
                acc[k].add(weight * b);
                if (k < n)
                    b *= (static_cast<double>(n - k) / static_cast<double>(k + 1)) *
                         ((1.0 - z) / z);
            }
        } else {
            double b = std::pow(1.0 - z, static_cast<double>(n));
            for (std::size_t k = n + 1; k-- > 0;) {
                acc[k].add(weight * b);
                if (k > 0)
                    b *= (static_cast<double>(k) / static_cast<double>(n - k + 1)) *
                         (z / (1.0 - z));
            }
        }
        const double log_tail =
            log_max_binom + static_cast<double>(mu + 1) * std::log1p(-q);
        if (log_tail <= log_tail_tol) break;
    }
    for (std::size_t k = 0; k <= n; ++k) row[k] = std::min(acc[k].sum, 1.0);
    return row;
}

// Recursive table build:
//   P(X_n = 0) = q (1-p)^n / (1 - (1-q)(1-p)^n)
//   P(X_n = k) = [ n P(X_{n-1} = k-1) - (n-k+1) P(X_n = k-1) ] / k
// Theta(n_max^2) arithmetic at the given significand width. The
// subtraction cancels, hence the extended working precision.
inline PmfTable pmf_table_recursive_at_bits(std::size_t n_max, const EpidemicParams& params,
                                            unsigned precision_bits,
                                            bool* clamped_negative = nullptr) {
    if (precision_bits < 64) throw std::invalid_argument("precision_bits must be >= 64");
    if (clamped_negative) *clamped_negative = false;
    PmfTable table{params, precision_bits, {}};
    table.rows.reserve(n_max + 1);
    table.rows.push_back(PmfRow{0, {1.0}});
    if (n_max == 0) return table;

    if (params.p() == 0.0 || params.p() == 1.0) {
        for (std::size_t n = 1; n <= n_max; ++n) {
            std::vector<double> masses(n + 1, 0.0);
            masses[params.p() == 0.0 ? 0 : n] = 1.0;
            table.rows.push_back(PmfRow{n, std::move(masses)});
        }
        return table;
    }

    detail::PrecisionGuard guard(precision_bits);
    const detail::big_float threshold = detail::negative_threshold_for_bits(precision_bits);
    const detail::big_float om = detail::big_float(1) - params.p();
    const detail::big_float oq = detail::big_float(1) - params.q();
    const detail::big_float q_big(params.q());

    std::vector<detail::big_float> prev{detail::big_float(1)};
    std::vector<detail::big_float> cur;
    detail::big_float om_pow(1);

    for (std::size_t n = 1; n <= n_max; ++n) {
        om_pow *= om;
        cur.assign(n + 1, detail::big_float(0));
        cur[0] = q_big * om_pow / (1 - oq * om_pow);
        for (std::size_t k = 1; k <= n; ++k) {
            cur[k] = (static_cast<unsigned long>(n) * prev[k - 1] -
                      static_cast<unsigned long>(n - k + 1) * cur[k - 1]) /
                     static_cast<unsigned long>(k);
            if (cur[k] < 0) {
                if (cur[k] < -threshold)
                    throw PrecisionError("pmf_table_recursive: negative mass at n=" +
                                         std::to_string(n) + " k=" + std::to_string(k) +
                                         "; increase precision");
                if (clamped_negative) *clamped_negative = true;
                cur[k] = 0;
            }
        }
        std::vector<double> masses(n + 1);
        for (std::size_t k = 0; k <= n; ++k) masses[k] = detail::emit_mass(cur[k], threshold);
        table.rows.push_back(PmfRow{n, std::move(masses)});
        std::swap(prev, cur);
    }
    return table;
}

inline PmfTable pmf_table_recursive(std::size_t n_max, const EpidemicParams& params,
                                    PrecisionPolicy policy = {}) {
    return pmf_table_recursive_at_bits(n_max, params, policy.mantissa_bits(n_max));
}

// Builds at the policy width and doubles the precision until two
// consecutive builds agree on every emitted double. The 0.8
// bits-per-degree guidance is empirical and falls short near the
// small-(p,q) corner for n in the hundreds (the row dynamic range wants
// closer to 1.6 bits per degree there), so this wrapper recovers as the
// precision-failure error instructs and certifies the result by
// stabilization. The accepted width is recorded in the returned table.
inline PmfTable pmf_table_recursive_auto(std::size_t n_max, const EpidemicParams& params,
                                         PrecisionPolicy policy = {}) {
    const unsigned cap = std::max<unsigned>(1u << 17, static_cast<unsigned>(8 * n_max));
    constexpr double agreement_tol = 1e-15;
    unsigned bits = policy.mantissa_bits(n_max);

    auto try_build = [&](unsigned b) -> std::unique_ptr<PmfTable> {
        try {
            return std::make_unique<PmfTable>(pmf_table_recursive_at_bits(n_max, params, b));
        } catch (const PrecisionError&) {
            if (b >= cap) throw;
            return nullptr;
        }
    };

    std::unique_ptr<PmfTable> current;
    for (;;) {
        if (!current) {
            current = try_build(bits);
            if (!current) {
                bits = std::min(cap, bits * 2);
                continue;
            }
        }
        if (bits >= cap) return std::move(*current);
        const unsigned next_bits = std::min(cap, bits * 2);
        std::unique_ptr<PmfTable> refined = try_build(next_bits);
        bits = next_bits;
        if (!refined) { // higher precision tightened the abort threshold
            current.reset();
            continue;
        }
        double worst = 0.0;
        for (std::size_t n = 0; n <= n_max; ++n)
            for (std::size_t k = 0; k <= n; ++k)
                worst = std::max(worst, std::abs(current->rows[n].masses[k] -
                                                 refined->rows[n].masses[k]));
        if (worst <= agreement_tol) return std::move(*refined);
        current = std::move(refined);
    }
}

// Probability that k out of m susceptible neighbors end up infected when
// the infecting node has n >= m neighbors in total:
//   sum_i C(n-m, i-k) C(m,k) P*(X_n = i),  P*(X_n = i) = P(X_n = i)/C(n,i)
// Equals P(X_m = k); the identity is what licenses FastSIR's full-degree draws.
inline double pmf_restricted(std::size_t n, std::size_t m, std::size_t k,
                             const EpidemicParams& params) {
    if (k > m || m > n) throw std::invalid_argument("pmf_restricted requires k <= m <= n");
    if (params.p() == 0.0) return k == 0 ? 1.0 : 0.0;
    if (params.p() == 1.0) return k == m ? 1.0 : 0.0;

    const unsigned bits = std::max<unsigned>(128, static_cast<unsigned>(2 * n + 64));
    detail::PrecisionGuard guard(bits);
    const std::vector<detail::big_float> F = detail::fraction_cache(params, n);
    const detail::big_float q_big(params.q());

    detail::big_float total(0);
    const detail::big_float c_mk = detail::to_big_float(detail::binomial_exact(m, k));
    for (std::size_t i = k; i <= n - m + k; ++i) {
        // P*(X_n = i) = q * alternating_sum(n, i)
        const detail::big_float starred = q_big * detail::direct_alternating_sum(n, i, F);
        total += detail::to_big_float(detail::binomial_exact(n - m, i - k)) * c_mk * starred;
    }
    return detail::emit_mass(total, detail::negative_threshold_for_bits(bits));
}

// Per-degree cumulative rows C_n(k) = P(X_n <= k); the FastSIR lookup
// structure. Rows are stored for exactly the requested degrees.
struct InfectionCdfTable {
    EpidemicParams params;
    unsigned precision_bits = 0;
    std::vector<std::vector<double>> rows; // indexed by degree; empty = not stored

    bool has_row(std::size_t degree) const {
        return degree < rows.size() && !rows[degree].empty();
    }

    std::span<const double> row(std::size_t degree) const {
        if (!has_row(degree))
            throw std::runtime_error("no CDF row for degree " + std::to_string(degree));
        return rows[degree];
    }

    std::vector<std::size_t> stored_degrees() const {
        std::vector<std::size_t> out;
        for (std::size_t d = 0; d < rows.size(); ++d)
            if (!rows[d].empty()) out.push_back(d);
        return out;
    }
};

// Prefix-sums the requested PMF rows into CDF rows. Compensated summation
// keeps the pre-clamp final entry within 2^-50 of 1; it is then clamped to
// exactly 1 so that inverse-transform sampling always terminates.
inline InfectionCdfTable build_cdf_table(const PmfTable& pmf,
                                         const std::vector<std::size_t>& degrees) {
    InfectionCdfTable table{pmf.params, pmf.precision_bits, {}};
    if (degrees.empty()) throw std::invalid_argument("build_cdf_table: no degrees requested");
    const std::size_t max_degree = *std::max_element(degrees.begin(), degrees.end());
    table.rows.resize(max_degree + 1);
    for (std::size_t d : degrees) {
        if (d >= pmf.rows.size() || pmf.rows[d].degree != d)
            throw std::runtime_error("build_cdf_table: missing PMF row for degree " +
                                     std::to_string(d));
        const auto& masses = pmf.rows[d].masses;
        std::vector<double> cdf(masses.size());
        detail::KahanSum acc;
        for (std::size_t k = 0; k < masses.size(); ++k) {
            acc.add(masses[k]);
            cdf[k] = std::min(acc.sum, 1.0);
        }
        if (std::abs(acc.sum - 1.0) > 1e-9)
            throw std::runtime_error("build_cdf_table: row for degree " + std::to_string(d) +
                                     " is not normalized");
        cdf.back() = 1.0;
        table.rows[d] = std::move(cdf);
    }
    return table;
}

} // namespace fastsir
