#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "fastsir/distributions.hpp"
#include "fastsir/graph.hpp"

namespace fastsir {

// Exact distribution of the final epidemic size (number of ever-infected
// nodes) for one (network, params, seeds) triple.
struct FinalSizePmf {
    std::map<std::uint32_t, double> masses; // size -> probability

    double total() const {
        double t = 0.0;
        for (const auto& [s, m] : masses) t += m;
        return t;
    }
    double mean() const {
        double t = 0.0;
        for (const auto& [s, m] : masses) t += static_cast<double>(s) * m;
        return t;
    }
};

namespace detail {

// State key: susceptible mask | infected mask. Recovered is the rest.
inline std::uint64_t state_key(std::uint32_t s_mask, std::uint32_t i_mask) {
    return (static_cast<std::uint64_t>(s_mask) << 32) | i_mask;
}

} // namespace detail

// Treats the epidemic as an absorbing Markov chain on {S,I,R}^N with
// synchronous rounds: every infected node independently attempts each
// susceptible neighbor with probability p, then recovers with probability
// q. The final infected set is a reachability functional of per-node
// independent coin sequences, invariant to scheduling order, so these
// absorption probabilities are exact for the queue-driven algorithms too.
inline FinalSizePmf exact_final_size(const Network& net, const EpidemicParams& params,
                                     std::span<const NodeId> seeds) {
    const std::size_t n = net.node_count();
    if (n > 10) throw std::invalid_argument("exact_final_size supports at most 10 nodes");
    if (seeds.empty()) throw std::invalid_argument("exact_final_size requires seeds");
    const auto full_mask = static_cast<std::uint32_t>((1u << n) - 1);

    std::uint32_t seed_mask = 0;
    for (NodeId s : seeds) {
        if (s >= n) throw std::invalid_argument("seed out of range");
        seed_mask |= 1u << s;
    }

    const double p = params.p();
    const double q = params.q();
    std::unordered_map<std::uint64_t, std::vector<double>> memo;

    // Returns the distribution over final sizes as a dense vector [0..n].
    auto solve = [&](auto&& self, std::uint32_t s_mask, std::uint32_t i_mask)
        -> const std::vector<double>& {
        const std::uint64_t key = detail::state_key(s_mask, i_mask);
        if (auto it = memo.find(key); it != memo.end()) return it->second;

        std::vector<double> dist(n + 1, 0.0);
        if (i_mask == 0) {
            // Absorbed; everyone outside S was infected at some point.
            dist[n - static_cast<std::size_t>(std::popcount(s_mask))] = 1.0;
            return memo.emplace(key, std::move(dist)).first->second;
        }

        // At-risk susceptible nodes and their infection probabilities.
        std::vector<std::uint32_t> at_risk;
        std::vector<double> infect_prob;
        for (std::uint32_t v = 0; v < n; ++v) {
            if (!(s_mask & (1u << v))) continue;
            int exposed = 0;
            for (NodeId w : net.neighbors(static_cast<NodeId>(v)))
                if (i_mask & (1u << w)) ++exposed;
            if (exposed == 0) continue;
            at_risk.push_back(v);
            infect_prob.push_back(1.0 - std::pow(1.0 - p, exposed));
        }
        std::vector<std::uint32_t> infected_nodes;
        for (std::uint32_t v = 0; v < n; ++v)
            if (i_mask & (1u << v)) infected_nodes.push_back(v);

        const std::size_t na = at_risk.size();
        const std::size_t ni = infected_nodes.size();
        double self_loop = 0.0;
        std::vector<std::pair<std::uint64_t, double>> transitions;
        for (std::uint32_t inf_bits = 0; inf_bits < (1u << na); ++inf_bits) {
            double prob_inf = 1.0;
            std::uint32_t new_mask = 0;
            for (std::size_t a = 0; a < na; ++a) {
                if (inf_bits & (1u << a)) {
                    prob_inf *= infect_prob[a];
                    new_mask |= 1u << at_risk[a];
                } else {
                    prob_inf *= 1.0 - infect_prob[a];
                }
            }
            if (prob_inf == 0.0) continue;
            for (std::uint32_t rec_bits = 0; rec_bits < (1u << ni); ++rec_bits) {
                double prob = prob_inf;
                std::uint32_t recovered_mask = 0;
                for (std::size_t r = 0; r < ni; ++r) {
                    if (rec_bits & (1u << r)) {
                        prob *= q;
                        recovered_mask |= 1u << infected_nodes[r];
                    } else {
                        prob *= 1.0 - q;
                    }
                }
                if (prob == 0.0) continue;
                const std::uint32_t next_s = s_mask & ~new_mask;
                const std::uint32_t next_i = (i_mask & ~recovered_mask) | new_mask;
                if (next_s == s_mask && next_i == i_mask)
                    self_loop += prob;
                else
                    transitions.emplace_back(detail::state_key(next_s, next_i), prob);
            }
        }

        // Conditioning on eventually leaving the state removes the self-loop.
        const double scale = 1.0 / (1.0 - self_loop);
        for (const auto& [next_key, prob] : transitions) {
            const auto next_s = static_cast<std::uint32_t>(next_key >> 32);
            const auto next_i = static_cast<std::uint32_t>(next_key & 0xffffffffu);
            const std::vector<double>& sub = self(self, next_s, next_i);
            const double w = prob * scale;
            for (std::size_t sz = 0; sz <= n; ++sz) dist[sz] += w * sub[sz];
        }
        return memo.emplace(key, std::move(dist)).first->second;
    };

    const std::vector<double>& dist = solve(solve, full_mask & ~seed_mask, seed_mask);
    FinalSizePmf out;
    for (std::size_t sz = 0; sz <= n; ++sz)
        if (dist[sz] > 0.0) out.masses[static_cast<std::uint32_t>(sz)] = dist[sz];
    return out;
}

inline void export_final_size_csv(const FinalSizePmf& pmf, std::ostream& out) {
    out << "size,probability\n";
    char buf[48];
    for (const auto& [s, m] : pmf.masses) {
        std::snprintf(buf, sizeof buf, "%u,%.17g", s, m);
        out << buf << '\n';
    }
}

// Expected-size and duration bounds on the complete m-ary tree seeded at
// the root. Two readings are kept: the expression as printed (whose
// exponent convention gives 0 at depth 0) and the form obtained by
// unrolling the proof recurrence from E[T_0] = 1/q, which tests bind to.
struct TreeBound {
    unsigned m = 0;
    unsigned depth = 0;
    double expected_size_paper = 0.0;
    double expected_size_safe = 0.0;
    double duration_bound_paper = 0.0;
    double duration_bound_safe = 0.0;
};

namespace detail {

// sum_{i=0}^{terms-1} x^i by direct accumulation; tree depths are small.
inline double geometric_sum(double x, unsigned terms) {
    double sum = 0.0;
    double pow_x = 1.0;
    for (unsigned i = 0; i < terms; ++i) {
        sum += pow_x;
        pow_x *= x;
    }
    return sum;
}

} // namespace detail

inline double tree_expected_size_paper(unsigned m, unsigned depth, const EpidemicParams& params) {
    return detail::geometric_sum(m * transmissibility(params), depth);
}

inline double tree_expected_size_safe(unsigned m, unsigned depth, const EpidemicParams& params) {
    return detail::geometric_sum(m * transmissibility(params), depth + 1);
}

inline double tree_duration_bound_paper(unsigned m, unsigned depth,
                                        const EpidemicParams& params) {
    return tree_expected_size_paper(m, depth, params) / params.q();
}

inline double tree_duration_bound_safe(unsigned m, unsigned depth, const EpidemicParams& params) {
    return tree_expected_size_safe(m, depth, params) / params.q();
}

inline TreeBound tree_bounds(unsigned m, unsigned depth, const EpidemicParams& params) {
    if (m < 1) throw std::invalid_argument("tree bounds require m >= 1");
    return TreeBound{m,
                     depth,
                     tree_expected_size_paper(m, depth, params),
                     tree_expected_size_safe(m, depth, params),
                     tree_duration_bound_paper(m, depth, params),
                     tree_duration_bound_safe(m, depth, params)};
}

// Goodness-of-fit report. `degenerate` flags the single-bin case, which
// passes trivially.
struct GofReport {
    double statistic = 0.0;
    unsigned dof = 0;
    double p_value = 1.0;
    bool pass = true;
    bool degenerate = false;
    unsigned bins_used = 0;
    std::string note;
};

using Histogram = std::map<std::uint32_t, std::uint64_t>;

namespace detail {

struct PooledBin {
    double observed = 0.0;
    double expected = 0.0;
};

// Pools adjacent bins (ascending order) until each expected count reaches
// min_expected; a short leftover tail merges into the previous bin.
inline std::vector<PooledBin> pool_bins(const std::vector<PooledBin>& raw, double min_expected) {
    std::vector<PooledBin> pooled;
    PooledBin acc;
    for (const auto& b : raw) {
        acc.observed += b.observed;
        acc.expected += b.expected;
        if (acc.expected >= min_expected) {
            pooled.push_back(acc);
            acc = PooledBin{};
        }
    }
    if (acc.expected > 0.0 || acc.observed > 0.0) {
        if (pooled.empty()) {
            pooled.push_back(acc);
        } else {
            pooled.back().observed += acc.observed;
            pooled.back().expected += acc.expected;
        }
    }
    return pooled;
}

inline GofReport finish_chi_square(std::vector<PooledBin> pooled, double alpha) {
    GofReport report;
    report.bins_used = static_cast<unsigned>(pooled.size());
    if (pooled.size() <= 1) {
        report.degenerate = true;
        report.note = "single bin after pooling; test passes trivially";
        return report;
    }
    double stat = 0.0;
    for (const auto& b : pooled) {
        const double diff = b.observed - b.expected;
        stat += diff * diff / b.expected;
    }
    report.statistic = stat;
    report.dof = static_cast<unsigned>(pooled.size() - 1);
    const boost::math::chi_squared dist(report.dof);
    report.p_value = boost::math::cdf(boost::math::complement(dist, stat));
    report.pass = report.p_value >= alpha;
    return report;
}

} // namespace detail

// One-sample chi-square of an observed histogram against an exact
// distribution. Bins with expected count below 5 are pooled.
inline GofReport chi_square_gof(const Histogram& observed, const FinalSizePmf& expected,
                                double alpha) {
    std::uint64_t total = 0;
    for (const auto& [s, c] : observed) total += c;
    if (total == 0) throw std::invalid_argument("chi_square_gof: empty histogram");

    // Observed mass at sizes the exact distribution forbids means an
    // outright failure, not a statistic.
    std::uint64_t impossible = 0;
    for (const auto& [s, c] : observed)
        if (!expected.masses.contains(s)) impossible += c;
    if (impossible > 0) {
        GofReport report;
        report.pass = false;
        report.p_value = 0.0;
        report.note = "observations at sizes of zero expected probability";
        return report;
    }

    std::vector<detail::PooledBin> raw;
    for (const auto& [s, prob] : expected.masses) {
        detail::PooledBin b;
        b.expected = prob * static_cast<double>(total);
        if (auto it = observed.find(s); it != observed.end())
            b.observed = static_cast<double>(it->second);
        raw.push_back(b);
    }
    return detail::finish_chi_square(detail::pool_bins(raw, 5.0), alpha);
}

// Two-sample chi-square for two histograms of possibly different totals
// (Press et al., "chstwo" with unequal sample-size scaling).
inline GofReport chi_square_two_sample(const Histogram& h1, const Histogram& h2, double alpha) {
    std::uint64_t t1 = 0, t2 = 0;
    for (const auto& [s, c] : h1) t1 += c;
    for (const auto& [s, c] : h2) t2 += c;
    if (t1 == 0 || t2 == 0) throw std::invalid_argument("chi_square_two_sample: empty histogram");

    std::map<std::uint32_t, std::pair<double, double>> merged;
    for (const auto& [s, c] : h1) merged[s].first = static_cast<double>(c);
    for (const auto& [s, c] : h2) merged[s].second = static_cast<double>(c);

    // Pool on the pooled-proportion expected counts of the smaller sample.
    const double total = static_cast<double>(t1 + t2);
    const double smaller = static_cast<double>(std::min(t1, t2));
    std::vector<std::pair<double, double>> pooled;
    std::pair<double, double> acc{0.0, 0.0};
    for (const auto& [s, counts] : merged) {
        acc.first += counts.first;
        acc.second += counts.second;
        if ((acc.first + acc.second) * smaller / total >= 5.0) {
            pooled.push_back(acc);
            acc = {0.0, 0.0};
        }
    }
    if (acc.first > 0.0 || acc.second > 0.0) {
        if (pooled.empty())
            pooled.push_back(acc);
        else {
            pooled.back().first += acc.first;
            pooled.back().second += acc.second;
        }
    }

    GofReport report;
    report.bins_used = static_cast<unsigned>(pooled.size());
    if (pooled.size() <= 1) {
        report.degenerate = true;
        report.note = "single bin after pooling; test passes trivially";
        return report;
    }
    const double scale1 = std::sqrt(static_cast<double>(t2) / static_cast<double>(t1));
    const double scale2 = std::sqrt(static_cast<double>(t1) / static_cast<double>(t2));
    double stat = 0.0;
    for (const auto& [r, s] : pooled) {
        const double diff = scale1 * r - scale2 * s;
        stat += diff * diff / (r + s);
    }
    report.statistic = stat;
    report.dof = static_cast<unsigned>(pooled.size() - 1);
    const boost::math::chi_squared dist(report.dof);
    report.p_value = boost::math::cdf(boost::math::complement(dist, stat));
    report.pass = report.p_value >= alpha;
    return report;
}

} // namespace fastsir
