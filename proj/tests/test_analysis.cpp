#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fastsir/analysis.hpp"
#include "fastsir/graph.hpp"
#include "fastsir/harness.hpp"

using namespace fastsir;

TEST_CASE("exact final size on trivial cases") {
    const Network lone(1, {});
    const FinalSizePmf single = exact_final_size(lone, EpidemicParams(0.7, 0.2),
                                                 std::vector<NodeId>{0});
    REQUIRE(single.masses.size() == 1);
    REQUIRE(single.masses.at(1) == Catch::Approx(1.0));

    const Network cycle = generate_test_graph(TestGraphKind::cycle, 5);
    const FinalSizePmf flood = exact_final_size(cycle, EpidemicParams(1.0, 0.4),
                                                std::vector<NodeId>{2});
    REQUIRE(flood.masses.size() == 1);
    REQUIRE(flood.masses.at(5) == Catch::Approx(1.0));
}

TEST_CASE("exact final size on the path of three, middle seed") {
    const Network path = generate_test_graph(TestGraphKind::path, 3);
    const FinalSizePmf pmf = exact_final_size(path, EpidemicParams(0.5, 1.0),
                                              std::vector<NodeId>{1});
    REQUIRE(pmf.masses.at(1) == Catch::Approx(0.25).margin(1e-12));
    REQUIRE(pmf.masses.at(2) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(pmf.masses.at(3) == Catch::Approx(0.25).margin(1e-12));
    REQUIRE(pmf.total() == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("exact final size normalizes and respects support bounds") {
    const Network net = generate_test_graph(TestGraphKind::complete, 6);
    for (double p : {0.2, 0.6}) {
        for (double q : {0.3, 0.8, 1.0}) {
            const FinalSizePmf pmf =
                exact_final_size(net, EpidemicParams(p, q), std::vector<NodeId>{0, 3});
            REQUIRE(pmf.total() == Catch::Approx(1.0).margin(1e-10));
            REQUIRE(pmf.masses.begin()->first >= 2);
            REQUIRE(pmf.masses.rbegin()->first <= 6);
        }
    }
    REQUIRE_THROWS_AS(exact_final_size(generate_test_graph(TestGraphKind::path, 11),
                                       EpidemicParams(0.5, 0.5), std::vector<NodeId>{0}),
                      std::invalid_argument);
}

TEST_CASE("star mean equals 1 + leaves * transmissibility") {
    for (double p : {0.3, 0.8}) {
        for (double q : {0.4, 1.0}) {
            const EpidemicParams params(p, q);
            const Network star = generate_test_graph(TestGraphKind::star, 8); // 7 leaves
            const FinalSizePmf pmf = exact_final_size(star, params, std::vector<NodeId>{0});
            REQUIRE(pmf.mean() ==
                    Catch::Approx(1.0 + 7.0 * transmissibility(params)).margin(1e-10));
        }
    }
}

TEST_CASE("exact oracle agrees with naive Monte Carlo on two fixtures") {
    const EpidemicParams params(0.45, 0.35);
    for (const Network& net : {generate_test_graph(TestGraphKind::cycle, 5),
                               generate_m_ary_tree(2, 2)}) {
        const std::vector<NodeId> seeds = {0};
        const FinalSizePmf exact = exact_final_size(net, params, seeds);
        Histogram hist;
        const auto outcomes =
            run_ensemble(net, params, seeds, 30000, Algorithm::naive, 1234, nullptr);
        for (const auto& o : outcomes) ++hist[static_cast<std::uint32_t>(o.total_infected)];
        const GofReport gof = chi_square_gof(hist, exact, 0.001);
        INFO("p-value " << gof.p_value);
        REQUIRE(gof.pass);
    }
}

TEST_CASE("tree bound closed forms") {
    const EpidemicParams params(0.5, 0.5); // m P1 = 4/3 for m=2
    REQUIRE(tree_expected_size_paper(2, 1, params) == Catch::Approx(1.0));
    REQUIRE(tree_expected_size_safe(2, 1, params) == Catch::Approx(7.0 / 3.0));
    REQUIRE(tree_duration_bound_safe(2, 0, params) == Catch::Approx(1.0 / params.q()));
    REQUIRE(tree_duration_bound_paper(2, 2, params) == Catch::Approx(14.0 / 3.0));
    REQUIRE(tree_duration_bound_safe(2, 2, params) == Catch::Approx(74.0 / 9.0));

    // m P1 = 1 exactly at q=1, p=0.5, m=2: geometric series degenerates
    const EpidemicParams critical(0.5, 1.0);
    REQUIRE(2.0 * transmissibility(critical) == Catch::Approx(1.0));
    REQUIRE(tree_expected_size_paper(2, 5, critical) == Catch::Approx(5.0));
    REQUIRE(tree_expected_size_safe(2, 5, critical) == Catch::Approx(6.0));

    const TreeBound bound = tree_bounds(3, 4, EpidemicParams(0.2, 0.7));
    REQUIRE(bound.duration_bound_safe >= bound.duration_bound_paper);
    REQUIRE(bound.expected_size_safe >= bound.expected_size_paper);
    REQUIRE(bound.m == 3);
    REQUIRE(bound.depth == 4);
}

TEST_CASE("chi-square calibration: sampling from the exact distribution passes") {
    const Network path = generate_test_graph(TestGraphKind::path, 4);
    const EpidemicParams params(0.5, 0.6);
    const FinalSizePmf exact = exact_final_size(path, params, std::vector<NodeId>{1});

    // inverse-transform sample directly from the exact pmf
    std::vector<std::pair<std::uint32_t, double>> cdf;
    double acc = 0;
    for (const auto& [s, m] : exact.masses) {
        acc += m;
        cdf.emplace_back(s, acc);
    }
    int failures = 0;
    const int meta_trials = 300;
    RngStream rng(5150, 0);
    for (int t = 0; t < meta_trials; ++t) {
        Histogram hist;
        for (int i = 0; i < 10000; ++i) {
            const double r = rng.next_double();
            for (const auto& [s, c] : cdf)
                if (r < c) {
                    ++hist[s];
                    break;
                }
        }
        if (!chi_square_gof(hist, exact, 0.001).pass) ++failures;
    }
    // alpha = 0.001 means ~0.3 expected failures over 300 trials
    REQUIRE(failures <= 3);
}

TEST_CASE("chi-square power: a shifted distribution fails") {
    const Network path = generate_test_graph(TestGraphKind::path, 3);
    const FinalSizePmf expected =
        exact_final_size(path, EpidemicParams(0.5, 1.0), std::vector<NodeId>{1});
    // sample from p = 0.6 instead: {1: .16, 2: .48, 3: .36}
    Histogram hist;
    RngStream rng(808, 0);
    for (int i = 0; i < 100000; ++i) {
        const double r = rng.next_double();
        ++hist[r < 0.16 ? 1u : (r < 0.64 ? 2u : 3u)];
    }
    REQUIRE_FALSE(chi_square_gof(hist, expected, 0.001).pass);
}

TEST_CASE("chi-square self-consistency: two halves of one stream pass") {
    const Network cycle = generate_test_graph(TestGraphKind::cycle, 6);
    const EpidemicParams params(0.5, 0.5);
    Histogram h1, h2;
    const auto outcomes =
        run_ensemble(cycle, params, std::vector<NodeId>{0}, 40000, Algorithm::naive, 99, nullptr);
    for (std::size_t i = 0; i < outcomes.size(); ++i)
        ++(i % 2 == 0 ? h1 : h2)[static_cast<std::uint32_t>(outcomes[i].total_infected)];
    const GofReport gof = chi_square_two_sample(h1, h2, 0.001);
    INFO("p-value " << gof.p_value);
    REQUIRE(gof.pass);
}

TEST_CASE("chi-square degenerate and pooling behavior") {
    FinalSizePmf point;
    point.masses[3] = 1.0;
    Histogram hist;
    hist[3] = 500;
    const GofReport report = chi_square_gof(hist, point, 0.001);
    REQUIRE(report.pass);
    REQUIRE(report.degenerate);
    REQUIRE_FALSE(report.note.empty());

    // a tiny-mass bin must get pooled rather than dominate the statistic
    FinalSizePmf skewed;
    skewed.masses[1] = 0.9999;
    skewed.masses[2] = 0.0001;
    Histogram obs;
    obs[1] = 10000;
    const GofReport pooled = chi_square_gof(obs, skewed, 0.001);
    REQUIRE(pooled.degenerate); // expected count 1 < 5 pools into one bin
}

TEST_CASE("final size export") {
    FinalSizePmf pmf;
    pmf.masses[1] = 0.25;
    pmf.masses[3] = 0.75;
    std::ostringstream out;
    export_final_size_csv(pmf, out);
    REQUIRE(out.str() == "size,probability\n1,0.25\n3,0.75\n");
}
