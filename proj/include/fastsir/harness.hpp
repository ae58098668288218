#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fastsir/analysis.hpp"
#include "fastsir/distributions.hpp"
#include "fastsir/graph.hpp"
#include "fastsir/rng.hpp"
#include "fastsir/simulate.hpp"
#include "fastsir/table_io.hpp"
#include "fastsir/version.hpp"

namespace fastsir {

enum class Algorithm { naive, fast, hybrid, both };

inline const char* to_string(Algorithm a) {
    switch (a) {
    case Algorithm::naive: return "naive";
    case Algorithm::fast: return "fast";
    case Algorithm::hybrid: return "hybrid";
    case Algorithm::both: return "both";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "naive") return Algorithm::naive;
    if (s == "fast") return Algorithm::fast;
    if (s == "hybrid") return Algorithm::hybrid;
    if (s == "both") return Algorithm::both;
    throw std::invalid_argument("unknown algorithm '" + s + "'");
}

// start:stop:step, endpoints inclusive. Values are snapped to 1e-9 to keep
// 0.1-step grids exact in output and filenames.
struct GridSpec {
    double start = 0.0;
    double stop = 0.0;
    double step = 0.1;

    std::vector<double> values() const {
        if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
        if (stop < start) throw std::invalid_argument("grid stop must be >= start");
        std::vector<double> out;
        const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i)
            out.push_back(std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9);
        return out;
    }

    static GridSpec single(double v) { return GridSpec{v, v, 1.0}; }

    static GridSpec parse(const std::string& text) {
        GridSpec g;
        if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &g.start, &g.stop, &g.step) != 3)
            throw std::invalid_argument("grid spec must be start:stop:step, got '" + text + "'");
        return g;
    }
};

enum class SeedMode { max_degree, fixed };

struct SweepConfig {
    GridSpec p_grid;
    GridSpec q_grid;
    std::uint32_t repetitions = 2000;
    Algorithm algorithm = Algorithm::both;
    SeedMode seed_mode = SeedMode::max_degree;
    std::vector<NodeId> seed_nodes; // used when seed_mode == fixed
    std::uint64_t master_seed = 0;
    std::optional<std::string> dist_cache_dir;
    unsigned workers = 1;
    std::uint32_t hybrid_pilot_reps = 0; // 0 picks max(2, reps/20)
};

struct RepOutcome {
    std::uint64_t total_infected = 0;
    std::uint32_t duration = 0;

    bool operator==(const RepOutcome&) const = default;
};

struct CellResult {
    double p = 0.0;
    double q = 0.0;
    Algorithm algorithm = Algorithm::naive;
    std::uint32_t repetitions = 0;
    double mean_infected = 0.0;
    double std_infected = 0.0;
    double mean_duration = 0.0;
    double wall_seconds = 0.0;       // simulation plus table load, per the
                                     // accounting that charges FastSIR for
                                     // reading distributions from disk
    double dist_setup_seconds = 0.0; // in-process table build, reported apart
    Histogram histogram;
    std::optional<Algorithm> hybrid_winner;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// Runs repetitions with stream indices [0, reps); outcome i depends only on
// (master_seed, i) and the inputs, so any worker count produces the same
// per-repetition results.
inline std::vector<RepOutcome> run_ensemble(const Network& net, const EpidemicParams& params,
                                            std::span<const NodeId> seeds, std::uint32_t reps,
                                            Algorithm algorithm, std::uint64_t master_seed,
                                            const InfectionCdfTable* table, unsigned workers = 1) {
    if (reps < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (algorithm != Algorithm::naive && algorithm != Algorithm::fast)
        throw std::invalid_argument("run_ensemble handles naive or fast only");
    if (algorithm == Algorithm::fast && table == nullptr)
        throw std::invalid_argument("FastSIR requires a CDF table");

    std::vector<RepOutcome> out(reps);
    auto worker = [&](std::uint32_t begin, std::uint32_t end) {
        for (std::uint32_t i = begin; i < end; ++i) {
            RngStream rng(master_seed, i);
            SimulationOutcome sim = algorithm == Algorithm::naive
                                        ? run_naive(net, params, seeds, rng)
                                        : run_fast(net, params, *table, seeds, rng);
            out[i] = RepOutcome{sim.total_infected, sim.duration};
        }
    };

    const unsigned n_workers = std::max(1u, std::min<unsigned>(workers, reps));
    if (n_workers == 1) {
        worker(0, reps);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (unsigned w = 0; w < n_workers; ++w) {
            const auto begin = static_cast<std::uint32_t>(
                static_cast<std::uint64_t>(reps) * w / n_workers);
            const auto end = static_cast<std::uint32_t>(
                static_cast<std::uint64_t>(reps) * (w + 1) / n_workers);
            pool.emplace_back(worker, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    return out;
}

namespace detail {

inline void aggregate_outcomes(CellResult& cell, std::span<const RepOutcome> outcomes) {
    cell.repetitions = static_cast<std::uint32_t>(outcomes.size());
    double sum = 0.0, dur = 0.0;
    for (const auto& o : outcomes) {
        sum += static_cast<double>(o.total_infected);
        dur += static_cast<double>(o.duration);
        ++cell.histogram[static_cast<std::uint32_t>(o.total_infected)];
    }
    const auto n = static_cast<double>(outcomes.size());
    cell.mean_infected = sum / n;
    cell.mean_duration = dur / n;
    double ss = 0.0;
    for (const auto& o : outcomes) {
        const double d = static_cast<double>(o.total_infected) - cell.mean_infected;
        ss += d * d;
    }
    cell.std_infected = std::sqrt(ss / n);
}

} // namespace detail

inline CellResult run_repetitions(const Network& net, const EpidemicParams& params,
                                  std::span<const NodeId> seeds, std::uint32_t reps,
                                  Algorithm algorithm, std::uint64_t master_seed,
                                  const InfectionCdfTable* table = nullptr,
                                  unsigned workers = 1) {
    CellResult cell;
    cell.p = params.p();
    cell.q = params.q();
    cell.algorithm = algorithm;
    const auto t0 = std::chrono::steady_clock::now();
    const auto outcomes =
        run_ensemble(net, params, seeds, reps, algorithm, master_seed, table, workers);
    cell.wall_seconds = std::max(detail::seconds_since(t0), 1e-9);
    detail::aggregate_outcomes(cell, outcomes);
    return cell;
}

namespace detail {

// Hybrid selection with injectable engines, so the work-accounting identity
// is testable with stub simulators. Engines map a stream index to one
// outcome. Pilot runs count toward the ensemble: streams [0, pilot) go to
// naive, [pilot, 2 pilot) to fast, the rest to the winner.
inline CellResult run_hybrid_with(const std::function<RepOutcome(std::uint32_t)>& naive_engine,
                                  const std::function<RepOutcome(std::uint32_t)>& fast_engine,
                                  std::uint32_t reps, std::uint32_t pilot_reps,
                                  const EpidemicParams& params) {
    if (pilot_reps < 2) throw std::invalid_argument("hybrid needs pilot_reps >= 2");
    if (2ull * pilot_reps > reps)
        throw std::invalid_argument("hybrid needs 2*pilot_reps <= reps");

    CellResult cell;
    cell.p = params.p();
    cell.q = params.q();
    cell.algorithm = Algorithm::hybrid;

    std::vector<RepOutcome> outcomes(reps);
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint32_t i = 0; i < pilot_reps; ++i) outcomes[i] = naive_engine(i);
    const double naive_pilot = seconds_since(t0);

    const auto t1 = std::chrono::steady_clock::now();
    for (std::uint32_t i = pilot_reps; i < 2 * pilot_reps; ++i) outcomes[i] = fast_engine(i);
    const double fast_pilot = seconds_since(t1);

    const Algorithm winner = fast_pilot <= naive_pilot ? Algorithm::fast : Algorithm::naive;
    cell.hybrid_winner = winner;
    for (std::uint32_t i = 2 * pilot_reps; i < reps; ++i)
        outcomes[i] = winner == Algorithm::fast ? fast_engine(i) : naive_engine(i);

    cell.wall_seconds = std::max(seconds_since(t0), 1e-9);
    aggregate_outcomes(cell, outcomes);
    return cell;
}

} // namespace detail

// Pilots both algorithms, commits to the faster one for the remainder.
// Either way every repetition's outcome enters the ensemble; the two
// algorithms sample the same final-size distribution.
inline CellResult run_hybrid(const Network& net, const EpidemicParams& params,
                             std::span<const NodeId> seeds, std::uint32_t reps,
                             std::uint32_t pilot_reps, std::uint64_t master_seed,
                             const InfectionCdfTable& table) {
    auto naive_engine = [&](std::uint32_t i) {
        RngStream rng(master_seed, i);
        const auto sim = run_naive(net, params, seeds, rng);
        return RepOutcome{sim.total_infected, sim.duration};
    };
    auto fast_engine = [&](std::uint32_t i) {
        RngStream rng(master_seed, i);
        const auto sim = run_fast(net, params, table, seeds, rng);
        return RepOutcome{sim.total_infected, sim.duration};
    };
    return detail::run_hybrid_with(naive_engine, fast_engine, reps, pilot_reps, params);
}

// Sparse CDF table covering exactly the degrees present in the network.
inline InfectionCdfTable build_network_table(const Network& net, const EpidemicParams& params,
                                             PrecisionPolicy policy = {}) {
    const DegreeStats stats = degree_stats(net);
    const PmfTable pmf = pmf_table_recursive_auto(stats.k_max, params, policy);
    return build_cdf_table(pmf, stats.distinct_degrees);
}

struct TableAcquisition {
    InfectionCdfTable table;
    double load_seconds = 0.0;  // disk read, charged to FastSIR wall time
    double build_seconds = 0.0; // in-process build, reported separately
};

inline std::string table_cache_name(double p, double q, std::size_t k_max) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "fsir_p%.9g_q%.9g_k%zu.fsir", p, q, k_max);
    return buf;
}

// Loads the per-(p,q) cache file when present, otherwise builds (and saves,
// when a cache directory is configured) and then loads it back so FastSIR
// timing always includes the disk read, mirroring the measurement protocol.
inline TableAcquisition acquire_table(const Network& net, const EpidemicParams& params,
                                      const std::optional<std::string>& cache_dir) {
    TableAcquisition acq;
    const DegreeStats stats = degree_stats(net);
    if (cache_dir) {
        const std::filesystem::path path =
            std::filesystem::path(*cache_dir) / table_cache_name(params.p(), params.q(), stats.k_max);
        if (!std::filesystem::exists(path)) {
            const auto t0 = std::chrono::steady_clock::now();
            const InfectionCdfTable built = build_network_table(net, params);
            acq.build_seconds = detail::seconds_since(t0);
            save_table_file(built, path.string());
        }
        const auto t1 = std::chrono::steady_clock::now();
        acq.table = load_table_file(path.string());
        acq.load_seconds = detail::seconds_since(t1);
        if (!(acq.table.params == params))
            throw std::runtime_error("cache file " + path.string() + " holds different (p, q)");
        for (std::size_t d : stats.distinct_degrees)
            if (!acq.table.has_row(d))
                throw std::runtime_error("cache file " + path.string() +
                                         " misses degree " + std::to_string(d));
    } else {
        const auto t0 = std::chrono::steady_clock::now();
        acq.table = build_network_table(net, params);
        acq.build_seconds = detail::seconds_since(t0);
    }
    return acq;
}

inline std::vector<NodeId> resolve_seeds(const Network& net, const SweepConfig& config) {
    if (config.seed_mode == SeedMode::fixed) {
        if (config.seed_nodes.empty())
            throw std::invalid_argument("fixed seed mode requires seed nodes");
        return config.seed_nodes;
    }
    NodeId best = 0;
    for (NodeId u = 1; u < net.node_count(); ++u)
        if (net.degree(u) > net.degree(best)) best = u;
    return {best};
}

struct SweepResult {
    std::vector<CellResult> cells;
    // naive/fast wall-time ratio per (p,q) cell, filled when algorithm=both
    std::map<std::pair<double, double>, double> ratio_naive_over_fast;
    std::vector<NodeId> seeds;
};

// One CellResult per grid cell per requested algorithm. Cells run on one
// worker when timing ratios are being compared (algorithm=both); a
// discarded warm-up repetition precedes each timed ensemble.
inline SweepResult sweep(const Network& net, const SweepConfig& config) {
    SweepResult result;
    result.seeds = resolve_seeds(net, config);
    const auto p_values = config.p_grid.values();
    const auto q_values = config.q_grid.values();
    const bool timing_mode = config.algorithm == Algorithm::both;
    const unsigned workers = timing_mode ? 1 : std::max(1u, config.workers);

    for (double p : p_values) {
        for (double q : q_values) {
            const EpidemicParams params(p, q);
            const bool needs_table = config.algorithm != Algorithm::naive;
            TableAcquisition acq;
            if (needs_table) acq = acquire_table(net, params, config.dist_cache_dir);

            auto warm_up = [&](Algorithm alg) {
                run_ensemble(net, params, result.seeds, 1, alg, config.master_seed,
                             needs_table ? &acq.table : nullptr, 1);
            };

            switch (config.algorithm) {
            case Algorithm::naive: {
                CellResult cell =
                    run_repetitions(net, params, result.seeds, config.repetitions,
                                    Algorithm::naive, config.master_seed, nullptr, workers);
                result.cells.push_back(std::move(cell));
                break;
            }
            case Algorithm::fast: {
                CellResult cell =
                    run_repetitions(net, params, result.seeds, config.repetitions,
                                    Algorithm::fast, config.master_seed, &acq.table, workers);
                cell.wall_seconds += acq.load_seconds;
                cell.dist_setup_seconds = acq.build_seconds;
                result.cells.push_back(std::move(cell));
                break;
            }
            case Algorithm::hybrid: {
                const std::uint32_t pilot =
                    config.hybrid_pilot_reps != 0
                        ? config.hybrid_pilot_reps
                        : std::max<std::uint32_t>(2, config.repetitions / 20);
                CellResult cell = run_hybrid(net, params, result.seeds, config.repetitions,
                                             pilot, config.master_seed, acq.table);
                cell.wall_seconds += acq.load_seconds;
                cell.dist_setup_seconds = acq.build_seconds;
                result.cells.push_back(std::move(cell));
                break;
            }
            case Algorithm::both: {
                warm_up(Algorithm::naive);
                CellResult naive_cell =
                    run_repetitions(net, params, result.seeds, config.repetitions,
                                    Algorithm::naive, config.master_seed, nullptr, 1);
                warm_up(Algorithm::fast);
                CellResult fast_cell =
                    run_repetitions(net, params, result.seeds, config.repetitions,
                                    Algorithm::fast, config.master_seed, &acq.table, 1);
                fast_cell.wall_seconds += acq.load_seconds;
                fast_cell.dist_setup_seconds = acq.build_seconds;
                result.ratio_naive_over_fast[{p, q}] =
                    naive_cell.wall_seconds / fast_cell.wall_seconds;
                result.cells.push_back(std::move(naive_cell));
                result.cells.push_back(std::move(fast_cell));
                break;
            }
            }
        }
    }
    return result;
}

struct SweepMetadata {
    std::string network_label = "-";
};

// Header: p,q,algorithm,reps,mean_infected,std_infected,mean_duration,
// wall_seconds,ratio_naive_over_fast. The ratio column is blank unless the
// sweep ran both algorithms; '#' lines carry provenance.
inline void write_sweep_csv(std::ostream& out, const SweepResult& result,
                            const SweepConfig& config, const SweepMetadata& meta) {
    out << "# fastsir sweep, tool version " << kVersion << '\n';
    out << "# network: " << meta.network_label << '\n';
    out << "# seed_node:";
    for (NodeId s : result.seeds) out << ' ' << s;
    out << '\n';
    out << "# master_seed: " << config.master_seed << '\n';
    out << "p,q,algorithm,reps,mean_infected,std_infected,mean_duration,wall_seconds,"
           "ratio_naive_over_fast\n";
    char buf[256];
    for (const auto& cell : result.cells) {
        const auto it = result.ratio_naive_over_fast.find({cell.p, cell.q});
        std::string ratio;
        if (it != result.ratio_naive_over_fast.end()) {
            char rbuf[32];
            std::snprintf(rbuf, sizeof rbuf, "%.6g", it->second);
            ratio = rbuf;
        }
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%s,%u,%.12g,%.12g,%.12g,%.6g,%s", cell.p,
                      cell.q, to_string(cell.algorithm), cell.repetitions, cell.mean_infected,
                      cell.std_infected, cell.mean_duration, cell.wall_seconds, ratio.c_str());
        out << buf << '\n';
    }
}

struct PrecalcResult {
    double build_seconds = 0.0;
    unsigned precision_bits = 0;
    std::size_t row_count = 0;
};

// Dense table for degrees 0..k_max, saved to the cache format. The build
// is timed; this is the precalculation cost the table amortizes away.
inline PrecalcResult precalc_command(double p, double q, std::size_t k_max,
                                     std::optional<unsigned> precision_bits_override,
                                     const std::string& out_path) {
    if (k_max < 1) throw std::invalid_argument("precalc requires k_max >= 1");
    const EpidemicParams params(p, q);
    const auto t0 = std::chrono::steady_clock::now();
    const PmfTable pmf = precision_bits_override
                             ? pmf_table_recursive_at_bits(k_max, params, *precision_bits_override)
                             : pmf_table_recursive_auto(k_max, params);
    std::vector<std::size_t> degrees(k_max + 1);
    for (std::size_t d = 0; d <= k_max; ++d) degrees[d] = d;
    const InfectionCdfTable table = build_cdf_table(pmf, degrees);
    PrecalcResult res;
    res.build_seconds = detail::seconds_since(t0);
    res.precision_bits = table.precision_bits;
    res.row_count = degrees.size();
    save_table_file(table, out_path);
    return res;
}

} // namespace fastsir
