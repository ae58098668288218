#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fastsir/distributions.hpp"
#include "fastsir/graph.hpp"
#include "fastsir/rng.hpp"

namespace fastsir {

// Result of one epidemic realization. `duration` counts synchronous time
// steps for the naive algorithm and generations (max generation index + 1)
// for the fast one; final-size statistics are comparable either way.
struct SimulationOutcome {
    std::vector<std::uint64_t> recovered_bits; // bit-packed R(v)
    std::uint64_t total_infected = 0;
    std::uint32_t duration = 0;

    bool recovered(NodeId v) const {
        return (recovered_bits[v >> 6] >> (v & 63)) & 1u;
    }
};

// Instrumentation for the work-accounting tests and benchmarks.
struct SimCounters {
    std::uint64_t dequeues = 0;
    std::uint64_t infection_attempts = 0;
    std::uint64_t rng_draws = 0;
};

namespace detail {

class BitSet {
public:
    explicit BitSet(std::size_t n, bool ones) : words_((n + 63) / 64, ones ? ~0ull : 0ull) {
        if (ones && n % 64 != 0) words_.back() = (1ull << (n % 64)) - 1;
    }
    bool test(NodeId v) const { return (words_[v >> 6] >> (v & 63)) & 1u; }
    void set(NodeId v) { words_[v >> 6] |= 1ull << (v & 63); }
    void clear(NodeId v) { words_[v >> 6] &= ~(1ull << (v & 63)); }
    std::uint64_t popcount() const {
        std::uint64_t c = 0;
        for (auto w : words_) c += static_cast<std::uint64_t>(std::popcount(w));
        return c;
    }
    std::vector<std::uint64_t> take() && { return std::move(words_); }

private:
    std::vector<std::uint64_t> words_;
};

// FIFO over at most `capacity` live entries (a node is enqueued only while
// not recovered, so node_count bounds the live set). The buffer is left
// uninitialized; slots are written before they are read.
class NodeQueue {
public:
    explicit NodeQueue(std::size_t capacity)
        : buf_(new NodeId[capacity + 1]), size_(capacity + 1) {}
    bool empty() const { return head_ == tail_; }
    void push(NodeId v) {
        buf_[tail_] = v;
        tail_ = (tail_ + 1) % size_;
    }
    NodeId pop() {
        NodeId v = buf_[head_];
        head_ = (head_ + 1) % size_;
        return v;
    }

private:
    std::unique_ptr<NodeId[]> buf_;
    std::size_t size_;
    std::size_t head_ = 0;
    std::size_t tail_ = 0;
};

// Per-node scratch written at infection time and read only afterwards, so
// zero-filling node_count entries per simulation would be pure overhead.
inline std::unique_ptr<std::uint32_t[]> uninitialized_u32(std::size_t n) {
    return std::unique_ptr<std::uint32_t[]>(new std::uint32_t[n]);
}

inline std::vector<NodeId> checked_seeds(const Network& net, std::span<const NodeId> seeds) {
    if (seeds.empty()) throw std::invalid_argument("simulation requires at least one seed");
    std::vector<NodeId> out(seeds.begin(), seeds.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.back() >= net.node_count())
        throw std::invalid_argument("seed node " + std::to_string(out.back()) +
                                    " out of range");
    return out;
}

} // namespace detail

// Naive SIR: a queue of infected nodes plus a susceptibility indicator.
// A dequeued node tries each still-susceptible neighbor independently with
// probability p, then recovers with probability q or is re-enqueued.
// Nodes carry an activation round (infections made in round t activate in
// round t+1), so `duration` equals the synchronous epidemic length.
inline SimulationOutcome run_naive(const Network& net, const EpidemicParams& params,
                                   std::span<const NodeId> seeds, RngStream& rng,
                                   SimCounters* counters = nullptr) {
    const auto seed_list = detail::checked_seeds(net, seeds);
    const double p = params.p();
    const double q = params.q();

    detail::BitSet susceptible(net.node_count(), true);
    detail::BitSet recovered(net.node_count(), false);
    const auto round = detail::uninitialized_u32(net.node_count());
    detail::NodeQueue queue(net.node_count());

    std::uint64_t infected_total = 0;
    for (NodeId s : seed_list) {
        susceptible.clear(s);
        recovered.set(s);
        round[s] = 0;
        queue.push(s);
        ++infected_total;
    }

    std::uint32_t max_round = 0;
    SimCounters local;
    while (!queue.empty()) {
        const NodeId u = queue.pop();
        ++local.dequeues;
        max_round = std::max(max_round, round[u]);
        for (NodeId v : net.neighbors(u)) {
            ++local.infection_attempts;
            if (susceptible.test(v)) {
                ++local.rng_draws;
                if (rng.next_double() < p) {
                    susceptible.clear(v);
                    recovered.set(v);
                    round[v] = round[u] + 1;
                    queue.push(v);
                    ++infected_total;
                }
            }
        }
        ++local.rng_draws;
        if (!(rng.next_double() < q)) {
            ++round[u];
            queue.push(u);
        }
    }
    if (counters) *counters = local;
    return SimulationOutcome{std::move(recovered).take(), infected_total, max_round + 1};
}

// Smallest k1 with cdf_row[k1] > r; the standard inverse transform,
// located by binary search.
inline std::size_t sample_infection_count(std::span<const double> cdf_row, double r) {
    if (cdf_row.empty()) throw std::invalid_argument("empty CDF row");
    const auto it = std::upper_bound(cdf_row.begin(), cdf_row.end(), r);
    if (it == cdf_row.end())
        throw std::runtime_error("CDF row does not cover the drawn value; row malformed");
    return static_cast<std::size_t>(it - cdf_row.begin());
}

namespace detail {

// Epoch-stamped membership marks shared across calls so the hot path never
// clears an array.
struct SubsetScratch {
    std::vector<std::uint32_t> stamp;
    std::uint32_t epoch = 0;

    void prepare(std::size_t k) {
        if (stamp.size() < k) stamp.resize(k, 0);
        ++epoch;
    }
    bool marked(std::uint32_t i) const { return stamp[i] == epoch; }
    void mark(std::uint32_t i) { stamp[i] = epoch; }
};

// Floyd's uniform subset sampler: exactly j draws for a j-subset of [0,k).
inline void floyd_sample(std::uint32_t k, std::uint32_t j, RngStream& rng, SubsetScratch& scratch,
                         std::vector<std::uint32_t>& out) {
    for (std::uint32_t t = k - j; t < k; ++t) {
        const auto x = static_cast<std::uint32_t>(rng.next_below(t + 1));
        if (scratch.marked(x)) {
            scratch.mark(t);
            out.push_back(t);
        } else {
            scratch.mark(x);
            out.push_back(x);
        }
    }
}

inline void sample_subset_into(std::uint32_t k, std::uint32_t k1, RngStream& rng,
                               SubsetScratch& scratch, std::vector<std::uint32_t>& out,
                               std::uint64_t* work_counter) {
    if (k1 > k) throw std::invalid_argument("sample_subset requires k1 <= k");
    out.clear();
    if (k1 == 0) return;
    scratch.prepare(k);
    const bool draw_complement = k1 > k - k1;
    const std::uint32_t j = draw_complement ? k - k1 : k1;
    if (work_counter) *work_counter += j;
    if (j > 0) floyd_sample(k, j, rng, scratch, out);
    if (draw_complement) {
        out.clear();
        for (std::uint32_t i = 0; i < k; ++i)
            if (!scratch.marked(i)) out.push_back(i);
    }
}

} // namespace detail

// Uniformly random k1-subset of [0,k). Work (RNG draws) is exactly
// min(k1, k-k1): the smaller of the subset or its complement is sampled,
// and the complement is inverted if needed.
inline std::vector<std::uint32_t> sample_subset(std::uint32_t k, std::uint32_t k1, RngStream& rng,
                                                std::uint64_t* work_counter = nullptr) {
    detail::SubsetScratch scratch;
    std::vector<std::uint32_t> out;
    detail::sample_subset_into(k, k1, rng, scratch, out, work_counter);
    return out;
}

// FastSIR: each dequeued node draws its lifetime infection count k1 from
// the per-degree CDF row, picks k1 of its deg(u) neighbors uniformly, and
// recovers in that single step. Draws are made against the full degree;
// picks that hit non-susceptible neighbors are no-ops, which leaves the
// distribution of infections unchanged.
inline SimulationOutcome run_fast(const Network& net, const EpidemicParams& params,
                                  const InfectionCdfTable& table, std::span<const NodeId> seeds,
                                  RngStream& rng, SimCounters* counters = nullptr) {
    if (!(table.params == params))
        throw std::invalid_argument("CDF table was built for different (p, q)");
    const auto seed_list = detail::checked_seeds(net, seeds);

    detail::BitSet susceptible(net.node_count(), true);
    detail::BitSet recovered(net.node_count(), false);
    const auto generation = detail::uninitialized_u32(net.node_count());
    detail::NodeQueue queue(net.node_count());
    detail::SubsetScratch scratch;
    std::vector<std::uint32_t> chosen;

    std::uint64_t infected_total = 0;
    for (NodeId s : seed_list) {
        susceptible.clear(s);
        recovered.set(s);
        generation[s] = 0;
        queue.push(s);
        ++infected_total;
    }

    std::uint32_t max_generation = 0;
    SimCounters local;
    while (!queue.empty()) {
        const NodeId u = queue.pop();
        ++local.dequeues;
        max_generation = std::max(max_generation, generation[u]);
        const auto neighbors = net.neighbors(u);
        const auto k = static_cast<std::uint32_t>(neighbors.size());
        if (k == 0) continue;
        ++local.rng_draws;
        const std::size_t k1 = sample_infection_count(table.row(k), rng.next_double());
        detail::sample_subset_into(k, static_cast<std::uint32_t>(k1), rng, scratch, chosen,
                                   &local.rng_draws);
        for (std::uint32_t idx : chosen) {
            ++local.infection_attempts;
            const NodeId v = neighbors[idx];
            if (susceptible.test(v)) {
                susceptible.clear(v);
                recovered.set(v);
                generation[v] = generation[u] + 1;
                queue.push(v);
                ++infected_total;
            }
        }
    }
    if (counters) *counters = local;
    return SimulationOutcome{std::move(recovered).take(), infected_total, max_generation + 1};
}

} // namespace fastsir
