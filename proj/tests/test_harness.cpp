#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "fastsir/harness.hpp"
#include "fastsir/verify.hpp"

using namespace fastsir;

namespace {

// strips the two timing columns (wall_seconds, ratio) from every data row
std::string strip_timing_columns(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("p,q,", 0) == 0) {
            out << line << '\n';
            continue;
        }
        std::size_t commas = 0, cut = line.size();
        for (std::size_t i = 0; i < line.size(); ++i)
            if (line[i] == ',' && ++commas == 7) {
                cut = i;
                break;
            }
        out << line.substr(0, cut) << '\n';
    }
    return out.str();
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("fastsir_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("grid spec expansion") {
    REQUIRE(GridSpec{0.1, 1.0, 0.1}.values() ==
            std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
    REQUIRE(GridSpec::single(0.37).values() == std::vector<double>{0.37});
    REQUIRE(GridSpec::parse("0.2:0.6:0.2").values() == std::vector<double>{0.2, 0.4, 0.6});
    REQUIRE_THROWS_AS((GridSpec{0.5, 0.1, 0.1}.values()), std::invalid_argument);
    REQUIRE_THROWS_AS((GridSpec{0.1, 0.5, 0.0}.values()), std::invalid_argument);
    REQUIRE_THROWS_AS(GridSpec::parse("nonsense"), std::invalid_argument);
}

TEST_CASE("degenerate ensembles have exact statistics") {
    const Network cycle = generate_test_graph(TestGraphKind::cycle, 9);
    const std::vector<NodeId> seeds = {4};

    const CellResult zero = run_repetitions(cycle, EpidemicParams(0.0, 0.5), seeds, 1000,
                                            Algorithm::naive, 1, nullptr);
    REQUIRE(zero.mean_infected == 1.0);
    REQUIRE(zero.std_infected == 0.0);
    REQUIRE(zero.histogram.at(1) == 1000);

    const EpidemicParams flood(1.0, 1.0);
    const InfectionCdfTable table = build_network_table(cycle, flood);
    const CellResult full = run_repetitions(cycle, flood, seeds, 500, Algorithm::fast, 1, &table);
    REQUIRE(full.mean_infected == 9.0);
    REQUIRE(full.std_infected == 0.0);
    REQUIRE(full.wall_seconds > 0.0);
}

TEST_CASE("path-of-three ensemble mean approaches the oracle mean") {
    const Network path = generate_test_graph(TestGraphKind::path, 3);
    const CellResult cell = run_repetitions(path, EpidemicParams(0.5, 1.0),
                                            std::vector<NodeId>{1}, 100000, Algorithm::naive, 42,
                                            nullptr);
    REQUIRE(cell.mean_infected == Catch::Approx(2.0).margin(0.01));
}

TEST_CASE("serial and parallel ensembles agree repetition by repetition") {
    RngStream gen(3, 0);
    const Network net = generate_scale_free(500, 2.5, 2, 0, gen);
    const EpidemicParams params(0.4, 0.4);
    const InfectionCdfTable table = build_network_table(net, params);
    const std::vector<NodeId> seeds = {0};
    const auto serial = run_ensemble(net, params, seeds, 400, Algorithm::fast, 7, &table, 1);
    const auto parallel = run_ensemble(net, params, seeds, 400, Algorithm::fast, 7, &table, 4);
    REQUIRE(serial == parallel);
    const auto serial_naive = run_ensemble(net, params, seeds, 400, Algorithm::naive, 7, nullptr, 1);
    const auto parallel_naive =
        run_ensemble(net, params, seeds, 400, Algorithm::naive, 7, nullptr, 3);
    REQUIRE(serial_naive == parallel_naive);
}

TEST_CASE("one-cell sweep equals run_repetitions") {
    const Network star = generate_test_graph(TestGraphKind::star, 12);
    SweepConfig config;
    config.p_grid = GridSpec::single(0.4);
    config.q_grid = GridSpec::single(0.6);
    config.repetitions = 2000;
    config.algorithm = Algorithm::naive;
    config.master_seed = 13;
    const SweepResult result = sweep(star, config);
    REQUIRE(result.cells.size() == 1);
    REQUIRE(result.seeds == std::vector<NodeId>{0}); // max-degree default

    const CellResult direct = run_repetitions(star, EpidemicParams(0.4, 0.6),
                                              std::vector<NodeId>{0}, 2000, Algorithm::naive, 13,
                                              nullptr);
    REQUIRE(result.cells[0].mean_infected == direct.mean_infected);
    REQUIRE(result.cells[0].std_infected == direct.std_infected);
    REQUIRE(result.cells[0].mean_duration == direct.mean_duration);
    REQUIRE(result.cells[0].histogram == direct.histogram);
}

TEST_CASE("full 0.1-step grid yields 100 cells") {
    const Network path = generate_test_graph(TestGraphKind::path, 4);
    SweepConfig config;
    config.p_grid = {0.1, 1.0, 0.1};
    config.q_grid = {0.1, 1.0, 0.1};
    config.repetitions = 2;
    config.algorithm = Algorithm::naive;
    const SweepResult result = sweep(path, config);
    REQUIRE(result.cells.size() == 100);
}

TEST_CASE("cell statistics match a recomputation from the histogram") {
    RngStream gen(8, 0);
    const Network net = generate_scale_free(300, 2.5, 2, 0, gen);
    const CellResult cell = run_repetitions(net, EpidemicParams(0.5, 0.3),
                                            std::vector<NodeId>{1}, 5000, Algorithm::naive, 5,
                                            nullptr);
    double total = 0, sum = 0;
    for (const auto& [size, count] : cell.histogram) {
        total += static_cast<double>(count);
        sum += static_cast<double>(size) * static_cast<double>(count);
    }
    REQUIRE(total == 5000.0);
    const double mean = sum / total;
    double ss = 0;
    for (const auto& [size, count] : cell.histogram)
        ss += static_cast<double>(count) * (size - mean) * (size - mean);
    REQUIRE(cell.mean_infected == Catch::Approx(mean).epsilon(1e-12));
    REQUIRE(cell.std_infected == Catch::Approx(std::sqrt(ss / total)).epsilon(1e-9));
}

TEST_CASE("sweep CSV format and determinism modulo timing columns") {
    RngStream gen(21, 0);
    const Network net = generate_scale_free(300, 2.5, 2, 0, gen);
    SweepConfig config;
    config.p_grid = {0.2, 0.5, 0.3};
    config.q_grid = {0.3, 0.6, 0.3};
    config.repetitions = 150;
    config.algorithm = Algorithm::both;
    config.master_seed = 99;
    const SweepMetadata meta{"gen:test"};

    std::ostringstream csv1, csv2;
    write_sweep_csv(csv1, sweep(net, config), config, meta);
    write_sweep_csv(csv2, sweep(net, config), config, meta);

    REQUIRE_THAT(csv1.str(), Catch::Matchers::ContainsSubstring(
                                 "p,q,algorithm,reps,mean_infected,std_infected,mean_duration,"
                                 "wall_seconds,ratio_naive_over_fast"));
    REQUIRE_THAT(csv1.str(), Catch::Matchers::ContainsSubstring("# master_seed: 99"));
    REQUIRE_THAT(csv1.str(), Catch::Matchers::ContainsSubstring("# network: gen:test"));
    REQUIRE(strip_timing_columns(csv1.str()) == strip_timing_columns(csv2.str()));

    // 2x2 grid, two algorithms -> 8 data rows, naive/fast alternating
    int naive_rows = 0, fast_rows = 0;
    std::istringstream in(csv1.str());
    std::string line;
    while (std::getline(in, line)) {
        if (line.find(",naive,") != std::string::npos) ++naive_rows;
        if (line.find(",fast,") != std::string::npos) ++fast_rows;
    }
    REQUIRE(naive_rows == 4);
    REQUIRE(fast_rows == 4);
}

TEST_CASE("ratio column is blank unless both algorithms ran") {
    const Network path = generate_test_graph(TestGraphKind::path, 5);
    SweepConfig config;
    config.p_grid = GridSpec::single(0.5);
    config.q_grid = GridSpec::single(0.5);
    config.repetitions = 50;
    config.algorithm = Algorithm::naive;
    std::ostringstream csv;
    write_sweep_csv(csv, sweep(path, config), config, SweepMetadata{});
    std::istringstream in(csv.str());
    std::string line, last;
    while (std::getline(in, line)) last = line;
    REQUIRE(last.back() == ','); // empty trailing ratio field
}

TEST_CASE("hybrid accounting identity with stub engines") {
    int naive_calls = 0, fast_calls = 0;
    auto naive_engine = [&](std::uint32_t) {
        ++naive_calls;
        return RepOutcome{1, 1};
    };
    auto fast_engine = [&](std::uint32_t) {
        ++fast_calls;
        return RepOutcome{1, 1};
    };
    const EpidemicParams params(0.5, 0.5);
    // pilot = reps/2 exhausts the budget during the pilots alone
    const CellResult half = detail::run_hybrid_with(naive_engine, fast_engine, 40, 20, params);
    REQUIRE(naive_calls + fast_calls == 40);
    REQUIRE(half.repetitions == 40);

    naive_calls = fast_calls = 0;
    const CellResult normal = detail::run_hybrid_with(naive_engine, fast_engine, 100, 5, params);
    REQUIRE(naive_calls + fast_calls == 100);
    REQUIRE(normal.hybrid_winner.has_value());
    REQUIRE(normal.histogram.at(1) == 100);

    REQUIRE_THROWS_AS(detail::run_hybrid_with(naive_engine, fast_engine, 10, 1, params),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(detail::run_hybrid_with(naive_engine, fast_engine, 10, 6, params),
                      std::invalid_argument);
}

TEST_CASE("hybrid on a real network produces a winner and sane statistics") {
    RngStream gen(17, 0);
    const Network net = generate_scale_free(3000, 2.5, 2, 0, gen);
    const EpidemicParams params(0.2, 0.1);
    const InfectionCdfTable table = build_network_table(net, params);
    const CellResult cell =
        run_hybrid(net, params, std::vector<NodeId>{0}, 60, 5, 31, table);
    REQUIRE(cell.hybrid_winner.has_value());
    REQUIRE(cell.repetitions == 60);
    REQUIRE(cell.mean_infected >= 1.0);
    REQUIRE(cell.wall_seconds > 0.0);
}

TEST_CASE("precalc command writes a loadable dense table") {
    TempDir dir;
    const std::string out = (dir.path / "table.fsir").string();
    const PrecalcResult res = precalc_command(0.5, 0.5, 64, std::nullopt, out);
    REQUIRE(res.row_count == 65);
    REQUIRE(res.build_seconds > 0.0);
    const InfectionCdfTable loaded = load_table_file(out);
    REQUIRE(loaded.stored_degrees().size() == 65);
    REQUIRE(loaded.params == EpidemicParams(0.5, 0.5));
    REQUIRE_THROWS_AS(precalc_command(0.5, 0.5, 0, std::nullopt, out), std::invalid_argument);
}

TEST_CASE("sweep reuses and validates the table cache") {
    TempDir dir;
    RngStream gen(4, 0);
    const Network net = generate_scale_free(200, 2.5, 2, 0, gen);
    SweepConfig config;
    config.p_grid = GridSpec::single(0.3);
    config.q_grid = GridSpec::single(0.4);
    config.repetitions = 100;
    config.algorithm = Algorithm::fast;
    config.dist_cache_dir = dir.path.string();

    const SweepResult first = sweep(net, config);
    REQUIRE(first.cells[0].dist_setup_seconds > 0.0); // built this time
    const SweepResult second = sweep(net, config);
    REQUIRE(second.cells[0].dist_setup_seconds == 0.0); // loaded from cache
    REQUIRE(second.cells[0].mean_infected == first.cells[0].mean_infected);

    std::size_t files = 0;
    for (auto const& entry : std::filesystem::directory_iterator(dir.path)) {
        ++files;
        REQUIRE_NOTHROW(load_table_file(entry.path().string()));
    }
    REQUIRE(files == 1);
}

TEST_CASE("verify equivalence catches a corrupted CDF row") {
    EquivalenceVerifyOptions opts;
    opts.reps = 20000;
    opts.include_medium_graphs = false;
    opts.corrupt_cdf_for_test = true;
    const SuiteReport broken = verify_equivalence(opts);
    REQUIRE_FALSE(broken.all_pass());
}

TEST_CASE("quick verify suites pass end to end") {
    DistVerifyOptions dist;
    dist.n_max = 40;
    dist.grid = {0.2, 0.8};
    dist.restricted_n_max = 8;
    REQUIRE(verify_dist(dist).all_pass());

    TreeVerifyOptions tree;
    tree.depths = {2};
    tree.p_values = {0.3, 0.7};
    tree.q_values = {0.5};
    tree.reps = 1500;
    REQUIRE(verify_tree(tree).all_pass());

    REQUIRE(verify_sampling().all_pass());
}
