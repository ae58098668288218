#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <vector>

#include "fastsir/analysis.hpp"
#include "fastsir/graph.hpp"
#include "fastsir/harness.hpp"
#include "fastsir/simulate.hpp"

using namespace fastsir;

namespace {

InfectionCdfTable table_for(const Network& net, const EpidemicParams& params) {
    return build_network_table(net, params);
}

// reachable set from the seeds, for the containment property
std::vector<bool> reachable_from(const Network& net, NodeId seed) {
    std::vector<bool> seen(net.node_count(), false);
    std::vector<NodeId> stack{seed};
    seen[seed] = true;
    while (!stack.empty()) {
        const NodeId u = stack.back();
        stack.pop_back();
        for (NodeId v : net.neighbors(u))
            if (!seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
    }
    return seen;
}

} // namespace

TEST_CASE("inverse transform boundary conventions") {
    const std::vector<double> row = {0.25, 0.75, 1.0};
    REQUIRE(sample_infection_count(row, 0.0) == 0);
    REQUIRE(sample_infection_count(row, 0.25) == 1); // strict inequality at the boundary
    REQUIRE(sample_infection_count(row, 0.5) == 1);
    REQUIRE(sample_infection_count(row, 0.75) == 2);
    REQUIRE(sample_infection_count(row, 0.9999) == 2);
    const std::vector<double> short_row = {0.25, 0.5};
    REQUIRE_THROWS_AS(sample_infection_count(short_row, 0.9), std::runtime_error);
    REQUIRE_THROWS_AS(sample_infection_count({}, 0.1), std::invalid_argument);
}

TEST_CASE("subset sampler endpoints and bounds") {
    RngStream rng(7, 0);
    REQUIRE(sample_subset(5, 0, rng).empty());
    auto all = sample_subset(5, 5, rng);
    std::sort(all.begin(), all.end());
    REQUIRE(all == std::vector<std::uint32_t>{0, 1, 2, 3, 4});
    REQUIRE_THROWS_AS(sample_subset(4, 5, rng), std::invalid_argument);
}

TEST_CASE("subset sampler is uniform over C(4,2)") {
    RngStream rng(12345, 0);
    std::map<std::vector<std::uint32_t>, std::uint64_t> counts;
    const std::uint64_t draws = 60000;
    for (std::uint64_t i = 0; i < draws; ++i) {
        auto s = sample_subset(4, 2, rng);
        std::sort(s.begin(), s.end());
        ++counts[s];
    }
    REQUIRE(counts.size() == 6);
    std::vector<detail::PooledBin> bins;
    for (const auto& [s, c] : counts)
        bins.push_back({static_cast<double>(c), draws / 6.0});
    const GofReport gof = detail::finish_chi_square(bins, 0.001);
    REQUIRE(gof.pass);
}

TEST_CASE("subset sampler work counter equals min(k1, k-k1)") {
    RngStream rng(5, 1);
    for (std::uint32_t k : {6u, 31u, 100u}) {
        for (std::uint32_t k1 = 0; k1 <= k; k1 += std::max(1u, k / 7)) {
            std::uint64_t work = 0;
            sample_subset(k, std::min(k1, k), rng, &work);
            REQUIRE(work == std::min(k1, k - k1));
        }
    }
}

TEST_CASE("no transmission and certain transmission") {
    const Network cycle = generate_test_graph(TestGraphKind::cycle, 8);
    const std::vector<NodeId> seeds = {3};

    const EpidemicParams p0(0.0, 0.5);
    RngStream rng_a(1, 0);
    const auto naive0 = run_naive(cycle, p0, seeds, rng_a);
    REQUIRE(naive0.total_infected == 1);
    REQUIRE(naive0.recovered(3));
    RngStream rng_b(1, 0);
    const auto fast0 = run_fast(cycle, p0, table_for(cycle, p0), seeds, rng_b);
    REQUIRE(fast0.total_infected == 1);
    REQUIRE(fast0.duration == 1); // seeds are generation 0

    const EpidemicParams p1(1.0, 0.5);
    RngStream rng_c(1, 0);
    REQUIRE(run_naive(cycle, p1, seeds, rng_c).total_infected == cycle.node_count());
    RngStream rng_d(1, 0);
    REQUIRE(run_fast(cycle, p1, table_for(cycle, p1), seeds, rng_d).total_infected ==
            cycle.node_count());
}

TEST_CASE("q=1 flood fills a path in depth-many rounds") {
    const Network path = generate_test_graph(TestGraphKind::path, 5);
    const EpidemicParams params(1.0, 1.0);
    RngStream rng(0, 0);
    const auto out = run_naive(path, params, std::vector<NodeId>{0}, rng);
    REQUIRE(out.total_infected == 5);
    REQUIRE(out.duration == 5);
    RngStream rng2(0, 0);
    const auto fast = run_fast(path, params, table_for(path, params), std::vector<NodeId>{0},
                               rng2);
    REQUIRE(fast.total_infected == 5);
    REQUIRE(fast.duration == 5); // generations coincide with rounds here
}

TEST_CASE("multiple seeds all count") {
    const Network path = generate_test_graph(TestGraphKind::path, 6);
    const EpidemicParams p0(0.0, 1.0);
    RngStream rng(9, 0);
    const auto out = run_naive(path, p0, std::vector<NodeId>{1, 4, 4}, rng);
    REQUIRE(out.total_infected == 2); // duplicate seed deduplicated
    REQUIRE(out.recovered(1));
    REQUIRE(out.recovered(4));
}

TEST_CASE("seed validation") {
    const Network path = generate_test_graph(TestGraphKind::path, 3);
    const EpidemicParams params(0.5, 0.5);
    RngStream rng(1, 0);
    REQUIRE_THROWS_AS(run_naive(path, params, std::vector<NodeId>{}, rng),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(run_naive(path, params, std::vector<NodeId>{9}, rng),
                      std::invalid_argument);
}

TEST_CASE("fast run errors name the missing degree and reject mismatched tables") {
    const Network star = generate_test_graph(TestGraphKind::star, 5); // degrees 1 and 4
    const EpidemicParams params(0.5, 0.5);
    const PmfTable pmf = pmf_table_recursive_auto(4, params);
    const InfectionCdfTable missing_four = build_cdf_table(pmf, {1});
    RngStream rng(3, 0);
    REQUIRE_THROWS_WITH(run_fast(star, params, missing_four, std::vector<NodeId>{0}, rng),
                        Catch::Matchers::ContainsSubstring("degree 4"));

    const InfectionCdfTable other = build_network_table(star, EpidemicParams(0.5, 0.6));
    RngStream rng2(3, 0);
    REQUIRE_THROWS_AS(run_fast(star, params, other, std::vector<NodeId>{0}, rng2),
                      std::invalid_argument);
}

TEST_CASE("identical inputs give bit-identical outcomes") {
    RngStream gen(2024, 0);
    const Network net = generate_scale_free(400, 2.5, 2, 0, gen);
    const EpidemicParams params(0.4, 0.3);
    const InfectionCdfTable table = table_for(net, params);
    const std::vector<NodeId> seeds = {7};
    for (int rep = 0; rep < 3; ++rep) {
        RngStream a(55, 9), b(55, 9);
        const auto na = run_naive(net, params, seeds, a);
        const auto nb = run_naive(net, params, seeds, b);
        REQUIRE(na.recovered_bits == nb.recovered_bits);
        REQUIRE(na.duration == nb.duration);
        RngStream c(55, 9), d(55, 9);
        const auto fa = run_fast(net, params, table, seeds, c);
        const auto fb = run_fast(net, params, table, seeds, d);
        REQUIRE(fa.recovered_bits == fb.recovered_bits);
        REQUIRE(fa.duration == fb.duration);
    }
}

TEST_CASE("recovered set stays inside the seed component") {
    RngStream gen(77, 0);
    // two disjoint components: a cycle and a path
    std::vector<Edge> edges;
    for (NodeId i = 0; i < 6; ++i) edges.emplace_back(i, static_cast<NodeId>((i + 1) % 6));
    for (NodeId i = 6; i < 11; ++i) edges.emplace_back(i, static_cast<NodeId>(i + 1));
    const Network net(12, std::move(edges));
    const EpidemicParams params(0.8, 0.2);
    const InfectionCdfTable table = table_for(net, params);
    const auto component = reachable_from(net, 2);
    for (std::uint64_t i = 0; i < 200; ++i) {
        RngStream rng(400, i);
        const auto out = run_fast(net, params, table, std::vector<NodeId>{2}, rng);
        for (NodeId v = 0; v < net.node_count(); ++v)
            if (out.recovered(v)) REQUIRE(component[v]);
        std::uint64_t pop = 0;
        for (NodeId v = 0; v < net.node_count(); ++v) pop += out.recovered(v);
        REQUIRE(pop == out.total_infected);
    }
}

TEST_CASE("path-of-three final sizes match the exact enumeration for both algorithms") {
    const Network path = generate_test_graph(TestGraphKind::path, 3);
    const EpidemicParams params(0.5, 1.0);
    const std::vector<NodeId> seeds = {1};
    const FinalSizePmf exact = exact_final_size(path, params, seeds);
    REQUIRE(exact.masses.at(1) == Catch::Approx(0.25));
    REQUIRE(exact.masses.at(2) == Catch::Approx(0.5));
    REQUIRE(exact.masses.at(3) == Catch::Approx(0.25));

    const InfectionCdfTable table = table_for(path, params);
    const std::uint32_t reps = 100000;
    for (Algorithm alg : {Algorithm::naive, Algorithm::fast}) {
        Histogram hist;
        const auto outcomes = run_ensemble(path, params, seeds, reps, alg, 606, &table);
        for (const auto& o : outcomes) ++hist[static_cast<std::uint32_t>(o.total_infected)];
        const GofReport gof = chi_square_gof(hist, exact, 0.001);
        INFO("algorithm " << to_string(alg) << " p-value " << gof.p_value);
        REQUIRE(gof.pass);
    }
}

TEST_CASE("work accounting: one dequeue per infected in fast, 1/q in naive") {
    const Network tree = generate_m_ary_tree(3, 4);
    const EpidemicParams params(0.35, 0.4);
    const InfectionCdfTable table = table_for(tree, params);

    double naive_dequeues = 0, naive_infected = 0;
    const std::uint32_t reps = 20000;
    for (std::uint32_t i = 0; i < reps; ++i) {
        RngStream rng(31, i);
        SimCounters counters;
        const auto out = run_naive(tree, params, std::vector<NodeId>{0}, rng, &counters);
        naive_dequeues += static_cast<double>(counters.dequeues);
        naive_infected += static_cast<double>(out.total_infected);

        RngStream rng2(31, i);
        SimCounters fast_counters;
        const auto fast = run_fast(tree, params, table, std::vector<NodeId>{0}, rng2,
                                   &fast_counters);
        REQUIRE(fast_counters.dequeues == fast.total_infected);
    }
    // mean dequeues per infected node is Geometric(q) with mean 1/q
    const double per_infected = naive_dequeues / naive_infected;
    const double se = (1.0 / params.q()) * std::sqrt(1.0 - params.q()) /
                      std::sqrt(naive_infected);
    REQUIRE(std::abs(per_infected - 1.0 / params.q()) < 5.0 * se + 1e-3);
}

TEST_CASE("mean final size is monotone in p and antitone in q") {
    const Network net = generate_test_graph(TestGraphKind::cycle, 6);
    const std::vector<NodeId> seeds = {0};
    const std::uint32_t reps = 100000;
    auto mean_at = [&](double p, double q) {
        double sum = 0;
        const auto outcomes = run_ensemble(net, EpidemicParams(p, q), seeds, reps,
                                           Algorithm::naive, 11, nullptr);
        for (const auto& o : outcomes) sum += static_cast<double>(o.total_infected);
        return sum / reps;
    };
    const double band = 3.0 * 6.0 / std::sqrt(static_cast<double>(reps)); // crude 3 sigma
    REQUIRE(mean_at(0.5, 0.5) >= mean_at(0.2, 0.5) - band);
    REQUIRE(mean_at(0.8, 0.5) >= mean_at(0.5, 0.5) - band);
    REQUIRE(mean_at(0.5, 0.8) <= mean_at(0.5, 0.5) + band);
    REQUIRE(mean_at(0.5, 0.5) <= mean_at(0.5, 0.2) + band);
}
