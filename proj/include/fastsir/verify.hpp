#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fastsir/analysis.hpp"
#include "fastsir/distributions.hpp"
#include "fastsir/graph.hpp"
#include "fastsir/harness.hpp"
#include "fastsir/simulate.hpp"

namespace fastsir {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SuiteReport {
    std::string suite;
    std::vector<CheckResult> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

inline void print_report(std::ostream& out, const SuiteReport& report) {
    for (const auto& c : report.checks)
        out << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << report.suite << '/' << c.name
            << (c.detail.empty() ? "" : " — " + c.detail) << '\n';
}

namespace detail {

inline std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

// Binomial(n, p) masses evaluated in extended precision, the q=1 reference.
inline std::vector<double> binomial_row(std::size_t n, double p) {
    PrecisionGuard guard(128);
    const big_float pb(p), omb = big_float(1) - p;
    std::vector<double> row(n + 1);
    big_float coeff(1);
    for (std::size_t k = 0; k <= n; ++k) {
        const big_float mass = coeff * boost::multiprecision::pow(pb, static_cast<unsigned>(k)) *
                               boost::multiprecision::pow(omb, static_cast<unsigned>(n - k));
        row[k] = mass.convert_to<double>();
        if (k < n) {
            coeff *= static_cast<unsigned long>(n - k);
            coeff /= static_cast<unsigned long>(k + 1);
        }
    }
    return row;
}

} // namespace detail

struct DistVerifyOptions {
    std::size_t n_max = 200;
    std::size_t restricted_n_max = 20;
    std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    double pair_tol = 1e-12;
    double norm_tol = 1e-12;
    double binom_tol = 1e-14;
    double expect_tol = 1e-10;
    double restricted_tol = 1e-10;
    double series_tail_tol = 1e-14;
};

// Checks: the three formulations agree pairwise; rows are normalized; the
// q=1 rows are binomial; the mean identity E[X_n] = n P(X_1=1) holds; the
// restricted-process identity holds; CDF rows are pointwise dominated as p
// grows.
inline SuiteReport verify_dist(const DistVerifyOptions& opts = {}) {
    SuiteReport report{"dist", {}};
    const unsigned oracle_bits = std::max<unsigned>(128, static_cast<unsigned>(2 * opts.n_max + 64));

    double worst_dir_rec = 0, worst_dir_ser = 0, worst_rec_ser = 0;
    double worst_norm = 0, worst_expect = 0, worst_restricted = 0, worst_dominance = 0;
    unsigned max_bits_used = 0;
    const std::vector<std::size_t> dominance_degrees = {1, 5, 25, std::min<std::size_t>(100, opts.n_max),
                                                        opts.n_max};
    // per q value: p -> CDF rows of the dominance degrees
    std::map<double, std::map<double, std::vector<std::vector<double>>>> dominance_cdfs;

    for (double p : opts.grid) {
        for (double q : opts.grid) {
            const EpidemicParams params(p, q);
            const PmfTable direct = pmf_table_direct(opts.n_max, params, oracle_bits);
            const PmfTable rec = pmf_table_recursive_auto(opts.n_max, params);
            max_bits_used = std::max(max_bits_used, rec.precision_bits);

            for (std::size_t n = 0; n <= opts.n_max; ++n) {
                const std::vector<double> series = pmf_series_row(n, params, opts.series_tail_tol);
                detail::KahanSum norm, expect;
                for (std::size_t k = 0; k <= n; ++k) {
                    const double d = direct.rows[n].masses[k];
                    const double r = rec.rows[n].masses[k];
                    const double s = series[k];
                    worst_dir_rec = std::max(worst_dir_rec, std::abs(d - r));
                    worst_dir_ser = std::max(worst_dir_ser, std::abs(d - s));
                    worst_rec_ser = std::max(worst_rec_ser, std::abs(r - s));
                    norm.add(r);
                    expect.add(static_cast<double>(k) * r);
                }
                worst_norm = std::max(worst_norm, std::abs(norm.sum - 1.0));
                worst_expect = std::max(
                    worst_expect,
                    std::abs(expect.sum - static_cast<double>(n) * transmissibility(params)));
            }

            for (std::size_t n = 1; n <= opts.restricted_n_max; ++n)
                for (std::size_t m = 1; m <= n; ++m)
                    for (std::size_t k = 0; k <= m; ++k)
                        worst_restricted =
                            std::max(worst_restricted, std::abs(pmf_restricted(n, m, k, params) -
                                                                direct.rows[m].masses[k]));

            auto& per_p = dominance_cdfs[q][p];
            for (std::size_t n : dominance_degrees) {
                std::vector<double> cdf(n + 1);
                detail::KahanSum acc;
                for (std::size_t k = 0; k <= n; ++k) {
                    acc.add(rec.rows[n].masses[k]);
                    cdf[k] = acc.sum;
                }
                per_p.push_back(std::move(cdf));
            }
        }
    }

    // More transmission shifts mass upward: CDF at larger p is pointwise <=.
    for (const auto& [q, by_p] : dominance_cdfs) {
        const std::vector<std::vector<double>>* prev = nullptr;
        for (const auto& [p, cdfs] : by_p) {
            if (prev)
                for (std::size_t i = 0; i < cdfs.size(); ++i)
                    for (std::size_t k = 0; k < cdfs[i].size(); ++k)
                        worst_dominance = std::max(worst_dominance, cdfs[i][k] - (*prev)[i][k]);
            prev = &cdfs;
        }
    }

    // q = 1 rows collapse to one round of Bernoulli trials.
    double worst_binom = 0;
    for (double p : opts.grid) {
        const PmfTable rec = pmf_table_recursive_auto(opts.n_max, EpidemicParams(p, 1.0));
        for (std::size_t n = 0; n <= opts.n_max; ++n) {
            const std::vector<double> ref = detail::binomial_row(n, p);
            for (std::size_t k = 0; k <= n; ++k)
                worst_binom = std::max(worst_binom, std::abs(rec.rows[n].masses[k] - ref[k]));
        }
    }

    const double worst_pair = std::max({worst_dir_rec, worst_dir_ser, worst_rec_ser});
    report.checks.push_back({"three_way_agreement", worst_pair <= opts.pair_tol,
                             detail::fmt("max pairwise |diff| %.3e (tol %.0e); recursion used up to "
                                         "%u bits",
                                         worst_pair, opts.pair_tol, max_bits_used)});
    report.checks.push_back({"normalization", worst_norm <= opts.norm_tol,
                             detail::fmt("max |sum-1| %.3e (tol %.0e)", worst_norm, opts.norm_tol)});
    report.checks.push_back({"binomial_q1", worst_binom <= opts.binom_tol,
                             detail::fmt("max |row - Binom| %.3e (tol %.0e)", worst_binom,
                                         opts.binom_tol)});
    report.checks.push_back({"expectation_identity", worst_expect <= opts.expect_tol,
                             detail::fmt("max |E[X_n] - n*P(X_1=1)| %.3e (tol %.0e)", worst_expect,
                                         opts.expect_tol)});
    report.checks.push_back({"restricted_identity", worst_restricted <= opts.restricted_tol,
                             detail::fmt("max |restricted - direct| %.3e (tol %.0e, n <= %zu)",
                                         worst_restricted, opts.restricted_tol,
                                         opts.restricted_n_max)});
    report.checks.push_back({"cdf_dominance_in_p", worst_dominance <= opts.pair_tol,
                             detail::fmt("max CDF increase with p %.3e", worst_dominance)});
    return report;
}

struct EquivalenceVerifyOptions {
    std::uint32_t reps = 100000;
    double alpha = 0.001;
    std::uint64_t master_seed = 20260810;
    bool corrupt_cdf_for_test = false; // negative control hook
    bool include_medium_graphs = true;
    std::size_t medium_nodes = 1000;
    std::uint32_t medium_reps = 30000;
};

// Final-size histograms of both algorithms against the exact enumeration
// oracle on the small fixtures, chi-square with a Bonferroni-shared alpha;
// plus a two-sample comparison of the two algorithms on a medium network.
inline SuiteReport verify_equivalence(const EquivalenceVerifyOptions& opts = {}) {
    SuiteReport report{"equivalence", {}};

    struct Fixture {
        std::string name;
        Network net;
    };
    const std::vector<Fixture> fixtures = {
        {"path5", generate_test_graph(TestGraphKind::path, 5)},
        {"star6", generate_test_graph(TestGraphKind::star, 6)},
        {"cycle6", generate_test_graph(TestGraphKind::cycle, 6)},
        {"complete5", generate_test_graph(TestGraphKind::complete, 5)},
        {"btree7", generate_m_ary_tree(2, 2)},
    };
    const std::vector<std::pair<double, double>> points = {
        {0.3, 0.3}, {0.3, 0.7}, {0.5, 0.5}, {0.7, 0.3}, {0.7, 0.7}, {0.5, 1.0}};
    const std::vector<NodeId> seeds = {0};

    const std::size_t n_tests = fixtures.size() * points.size() * 2;
    const double bonferroni_alpha = opts.alpha / static_cast<double>(n_tests);

    std::uint64_t combo = 0;
    bool corrupted_once = false;
    for (const auto& fixture : fixtures) {
        for (const auto& [p, q] : points) {
            const EpidemicParams params(p, q);
            const FinalSizePmf exact = exact_final_size(fixture.net, params, seeds);
            InfectionCdfTable table = build_network_table(fixture.net, params);
            if (opts.corrupt_cdf_for_test && !corrupted_once) {
                auto& row = table.rows[degree_stats(fixture.net).k_max];
                if (row.size() >= 3) {
                    row[row.size() / 2] = row[row.size() / 2 - 1];
                    corrupted_once = true;
                }
            }
            for (Algorithm alg : {Algorithm::naive, Algorithm::fast}) {
                const auto outcomes = run_ensemble(fixture.net, params, seeds, opts.reps, alg,
                                                   opts.master_seed + combo, &table);
                Histogram hist;
                for (const auto& o : outcomes)
                    ++hist[static_cast<std::uint32_t>(o.total_infected)];
                const GofReport gof = chi_square_gof(hist, exact, bonferroni_alpha);
                report.checks.push_back(
                    {detail::fmt("%s_p%.1f_q%.1f_%s", fixture.name.c_str(), p, q, to_string(alg)),
                     gof.pass,
                     detail::fmt("chi2 %.3f dof %u p-value %.5f (alpha %.2e)", gof.statistic,
                                 gof.dof, gof.p_value, bonferroni_alpha)});
                ++combo;
            }
        }
    }

    if (opts.include_medium_graphs) {
        RngStream gen_rng(opts.master_seed ^ 0x5eedf00dULL, 0);
        const Network medium = generate_scale_free(opts.medium_nodes, 2.5, 2, 0, gen_rng);
        const std::vector<NodeId> mseeds = resolve_seeds(
            medium, SweepConfig{}); // highest-degree node
        for (const auto& [p, q] : {std::pair{0.5, 0.5}, std::pair{0.2, 0.3}}) {
            const EpidemicParams params(p, q);
            const InfectionCdfTable table = build_network_table(medium, params);
            Histogram h_naive, h_fast;
            for (const auto& o : run_ensemble(medium, params, mseeds, opts.medium_reps,
                                              Algorithm::naive, opts.master_seed + 9000 + combo,
                                              nullptr))
                ++h_naive[static_cast<std::uint32_t>(o.total_infected)];
            for (const auto& o : run_ensemble(medium, params, mseeds, opts.medium_reps,
                                              Algorithm::fast, opts.master_seed + 9500 + combo,
                                              &table))
                ++h_fast[static_cast<std::uint32_t>(o.total_infected)];
            const GofReport gof = chi_square_two_sample(h_naive, h_fast, opts.alpha);
            report.checks.push_back(
                {detail::fmt("medium_p%.1f_q%.1f_two_sample", p, q), gof.pass,
                 detail::fmt("chi2 %.3f dof %u p-value %.5f", gof.statistic, gof.dof,
                             gof.p_value)});
            ++combo;
        }
    }
    return report;
}

struct TreeVerifyOptions {
    std::vector<unsigned> m_values = {2, 3};
    std::vector<unsigned> depths = {2, 4};
    std::vector<double> p_values = {0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> q_values = {0.1, 0.3, 0.5, 0.7, 0.9};
    std::uint32_t reps = 2000;
    std::uint64_t master_seed = 7101;
};

// Monte Carlo mean duration of the naive algorithm against the unrolled
// duration bound, and mean size against the exact level-sum expectation in
// the subcritical regime.
inline SuiteReport verify_tree(const TreeVerifyOptions& opts = {}) {
    SuiteReport report{"tree", {}};
    std::uint64_t combo = 0;
    for (unsigned m : opts.m_values) {
        for (unsigned depth : opts.depths) {
            const Network tree = generate_m_ary_tree(m, depth);
            const std::vector<NodeId> seeds = {0};
            double worst_margin = -1e300;
            double worst_size_sigma = 0.0;
            bool dur_ok = true, size_ok = true;
            for (double p : opts.p_values) {
                for (double q : opts.q_values) {
                    const EpidemicParams params(p, q);
                    const auto outcomes =
                        run_ensemble(tree, params, seeds, opts.reps, Algorithm::naive,
                                     opts.master_seed + combo, nullptr);
                    ++combo;
                    double dur_sum = 0, size_sum = 0;
                    for (const auto& o : outcomes) {
                        dur_sum += o.duration;
                        size_sum += static_cast<double>(o.total_infected);
                    }
                    const auto n = static_cast<double>(outcomes.size());
                    const double dur_mean = dur_sum / n;
                    const double size_mean = size_sum / n;
                    double dur_ss = 0, size_ss = 0;
                    for (const auto& o : outcomes) {
                        dur_ss += (o.duration - dur_mean) * (o.duration - dur_mean);
                        size_ss += (static_cast<double>(o.total_infected) - size_mean) *
                                   (static_cast<double>(o.total_infected) - size_mean);
                    }
                    const double dur_se = std::sqrt(dur_ss / n) / std::sqrt(n);
                    const double size_se = std::sqrt(size_ss / n) / std::sqrt(n);

                    const TreeBound bound = tree_bounds(m, depth, params);
                    const double margin = dur_mean - (bound.duration_bound_safe + 3.0 * dur_se);
                    worst_margin = std::max(worst_margin, margin);
                    if (margin > 0) dur_ok = false;

                    // Level-by-level linearity makes the safe sum the exact
                    // mean; tested where subcritical keeps variance small.
                    if (m * transmissibility(params) < 1.0 && size_se > 0) {
                        const double sigmas =
                            std::abs(size_mean - bound.expected_size_safe) / size_se;
                        worst_size_sigma = std::max(worst_size_sigma, sigmas);
                        if (sigmas > 4.0) size_ok = false;
                    }
                }
            }
            report.checks.push_back(
                {detail::fmt("duration_bound_m%u_d%u", m, depth), dur_ok,
                 detail::fmt("worst (mean - bound - 3se) = %.3f over %zux%zu grid", worst_margin,
                             opts.p_values.size(), opts.q_values.size())});
            report.checks.push_back(
                {detail::fmt("subcritical_size_m%u_d%u", m, depth), size_ok,
                 detail::fmt("worst |mean - exact|/se = %.2f (limit 4)", worst_size_sigma)});
        }
    }
    return report;
}

struct SamplingVerifyOptions {
    std::uint32_t draws = 100000;
    double alpha = 0.001;
    std::uint64_t master_seed = 424242;
};

// Subset-sampler uniformity over all C(6,3)=20 subsets and the
// min(k1, k-k1) work-counter contract.
inline SuiteReport verify_sampling(const SamplingVerifyOptions& opts = {}) {
    SuiteReport report{"sampling", {}};

    RngStream rng(opts.master_seed, 0);
    std::map<std::vector<std::uint32_t>, std::uint64_t> counts;
    for (std::uint32_t i = 0; i < opts.draws; ++i) {
        auto subset = sample_subset(6, 3, rng);
        std::sort(subset.begin(), subset.end());
        ++counts[subset];
    }
    std::vector<detail::PooledBin> bins;
    const double expected = static_cast<double>(opts.draws) / 20.0;
    for (const auto& [subset, c] : counts)
        bins.push_back({static_cast<double>(c), expected});
    const bool all_subsets_seen = counts.size() == 20;
    const GofReport gof = detail::finish_chi_square(bins, opts.alpha);
    report.checks.push_back({"subset_uniformity_c63", all_subsets_seen && gof.pass,
                             detail::fmt("%zu/20 subsets, chi2 %.3f dof %u p-value %.5f",
                                         counts.size(), gof.statistic, gof.dof, gof.p_value)});

    bool counter_ok = true;
    std::string counter_detail;
    for (std::uint32_t k1 : {0u, 3u, 50u, 97u, 100u}) {
        std::uint64_t work = 0;
        constexpr std::uint32_t calls = 64;
        for (std::uint32_t i = 0; i < calls; ++i) sample_subset(100, k1, rng, &work);
        const std::uint64_t expected_work =
            static_cast<std::uint64_t>(std::min(k1, 100 - k1)) * calls;
        if (work != expected_work) {
            counter_ok = false;
            counter_detail = detail::fmt("k1=%u: work %llu, expected %llu", k1,
                                         static_cast<unsigned long long>(work),
                                         static_cast<unsigned long long>(expected_work));
        }
    }
    report.checks.push_back({"work_counter_min_k1", counter_ok,
                             counter_ok ? "RNG draws equal min(k1, k-k1) for all probed k1"
                                        : counter_detail});
    return report;
}

} // namespace fastsir
