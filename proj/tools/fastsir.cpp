#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fastsir/graph.hpp"
#include "fastsir/harness.hpp"
#include "fastsir/table_io.hpp"
#include "fastsir/verify.hpp"
#include "fastsir/version.hpp"

namespace {

struct NetworkArg {
    fastsir::Network net;
    std::string label;
    std::vector<std::uint64_t> original_ids; // empty unless loaded from a file
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    return parts;
}

// --network accepts an edge-list path or a generator URI:
//   gen:scale-free:N[:exponent[:min_deg[:max_deg[:seed]]]]
//   gen:tree:m:depth
//   gen:path:n | gen:cycle:n | gen:star:n | gen:complete:n
NetworkArg load_network_arg(const std::string& spec) {
    using namespace fastsir;
    if (spec.rfind("gen:", 0) != 0) {
        std::ifstream in(spec);
        if (!in) throw std::runtime_error("cannot open network file: " + spec);
        EdgeListData data = load_edge_list_with_remap(in);
        return {std::move(data.net), spec, std::move(data.original_ids)};
    }
    const auto parts = split(spec, ':');
    if (parts.size() < 3) throw std::runtime_error("bad generator spec: " + spec);
    const std::string& kind = parts[1];
    auto num = [&](std::size_t i, double fallback) {
        return i < parts.size() && !parts[i].empty() ? std::stod(parts[i]) : fallback;
    };
    if (kind == "scale-free") {
        const auto n = static_cast<std::size_t>(std::stoull(parts[2]));
        const double exponent = num(3, 2.5);
        const auto min_deg = static_cast<std::size_t>(num(4, 2));
        const auto max_deg = static_cast<std::size_t>(num(5, 0));
        const auto seed = static_cast<std::uint64_t>(num(6, 1));
        RngStream rng(seed, 0);
        return {generate_scale_free(n, exponent, min_deg, max_deg, rng), spec, {}};
    }
    if (kind == "tree") {
        if (parts.size() < 4) throw std::runtime_error("gen:tree needs m and depth");
        return {generate_m_ary_tree(std::stoull(parts[2]), std::stoull(parts[3])), spec, {}};
    }
    const auto n = static_cast<std::size_t>(std::stoull(parts[2]));
    if (kind == "path") return {generate_test_graph(TestGraphKind::path, n), spec, {}};
    if (kind == "cycle") return {generate_test_graph(TestGraphKind::cycle, n), spec, {}};
    if (kind == "star") return {generate_test_graph(TestGraphKind::star, n), spec, {}};
    if (kind == "complete") return {generate_test_graph(TestGraphKind::complete, n), spec, {}};
    throw std::runtime_error("unknown generator kind: " + kind);
}

void apply_seed_option(fastsir::SweepConfig& config, const std::string& seed_node) {
    if (seed_node == "max-degree") {
        config.seed_mode = fastsir::SeedMode::max_degree;
        return;
    }
    config.seed_mode = fastsir::SeedMode::fixed;
    for (const auto& tok : split(seed_node, ','))
        config.seed_nodes.push_back(static_cast<fastsir::NodeId>(std::stoul(tok)));
}

void write_csv_output(const std::string& out_path, const fastsir::SweepResult& result,
                      const fastsir::SweepConfig& config, const fastsir::SweepMetadata& meta) {
    if (out_path.empty() || out_path == "-") {
        fastsir::write_sweep_csv(std::cout, result, config, meta);
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open for write: " + out_path);
    fastsir::write_sweep_csv(out, result, config, meta);
}

void maybe_write_remap(const std::string& path, const NetworkArg& net_arg) {
    if (path.empty()) return;
    if (net_arg.original_ids.empty())
        throw std::runtime_error("--remap-out needs a network loaded from a file");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    fastsir::write_remap_csv(out, net_arg.original_ids);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FastSIR epidemic simulation toolkit"};
    app.set_version_flag("--version", fastsir::kVersion);
    app.require_subcommand(1);

    // precalc
    auto* precalc = app.add_subcommand("precalc", "precompute a CDF table file");
    double pc_p = 0.5, pc_q = 0.5;
    std::size_t pc_kmax = 0;
    unsigned pc_bits = 0;
    std::string pc_out;
    precalc->add_option("--p", pc_p, "transmission probability")->required();
    precalc->add_option("--q", pc_q, "recovery probability")->required();
    precalc->add_option("--k-max", pc_kmax, "largest degree to tabulate")->required();
    precalc->add_option("--precision-bits", pc_bits, "override working precision");
    precalc->add_option("--out", pc_out, "output table path")->required();

    // shared simulation options
    std::string network_spec, seed_node = "max-degree", dist_cache, out_path, remap_out;
    std::uint32_t reps = 2000;
    std::uint64_t rng_seed = 0;
    unsigned workers = 1;
    std::string algorithm = "both";
    double opt_p = -1.0, opt_q = -1.0;
    std::string p_grid_spec, q_grid_spec;
    std::uint32_t pilot_reps = 0;

    auto add_common = [&](CLI::App* cmd, bool grids) {
        cmd->add_option("--network", network_spec, "edge-list path or gen: spec")->required();
        cmd->add_option("--reps", reps, "repetitions per cell");
        cmd->add_option("--algorithm", algorithm, "naive|fast|hybrid|both");
        cmd->add_option("--seed-node", seed_node, "node id (or comma list) or max-degree");
        cmd->add_option("--rng-seed", rng_seed, "master seed");
        cmd->add_option("--dist-cache", dist_cache, "directory for cached CDF tables");
        cmd->add_option("--workers", workers, "worker threads for repetitions");
        cmd->add_option("--out", out_path, "CSV output path ('-' = stdout)");
        cmd->add_option("--remap-out", remap_out, "write original->dense id CSV");
        cmd->add_option("--pilot-reps", pilot_reps, "hybrid pilot repetitions per algorithm");
        if (grids) {
            cmd->add_option("--p-grid", p_grid_spec, "p grid start:stop:step");
            cmd->add_option("--q-grid", q_grid_spec, "q grid start:stop:step");
        }
        cmd->add_option("--p", opt_p, "single p value");
        cmd->add_option("--q", opt_q, "single q value");
    };

    auto* run = app.add_subcommand("run", "one (p,q) ensemble");
    add_common(run, false);
    auto* sweep_cmd = app.add_subcommand("sweep", "(p,q) parametric sweep with CSV output");
    add_common(sweep_cmd, true);

    auto* verify = app.add_subcommand("verify", "run a verification suite");
    std::string suite = "all";
    bool quick = false;
    verify->add_option("suite", suite, "dist|equivalence|tree|sampling|all");
    verify->add_flag("--quick", quick, "reduced scales for a fast smoke run");

    CLI11_PARSE(app, argc, argv);

    try {
        if (precalc->parsed()) {
            const auto res = fastsir::precalc_command(
                pc_p, pc_q, pc_kmax,
                pc_bits ? std::optional<unsigned>(pc_bits) : std::nullopt, pc_out);
            std::cout << "precalc: k_max " << pc_kmax << ", " << res.row_count << " rows, "
                      << res.precision_bits << " bits, built in " << res.build_seconds
                      << " s -> " << pc_out << '\n';
            return 0;
        }

        if (run->parsed() || sweep_cmd->parsed()) {
            const NetworkArg net_arg = load_network_arg(network_spec);
            maybe_write_remap(remap_out, net_arg);

            fastsir::SweepConfig config;
            config.repetitions = reps;
            config.algorithm = fastsir::parse_algorithm(algorithm);
            config.master_seed = rng_seed;
            config.workers = workers;
            config.hybrid_pilot_reps = pilot_reps;
            if (!dist_cache.empty()) config.dist_cache_dir = dist_cache;
            apply_seed_option(config, seed_node);

            if (run->parsed()) {
                if (opt_p < 0 || opt_q < 0)
                    throw std::runtime_error("run requires --p and --q");
                if (config.algorithm == fastsir::Algorithm::both)
                    config.algorithm = fastsir::Algorithm::naive;
                config.p_grid = fastsir::GridSpec::single(opt_p);
                config.q_grid = fastsir::GridSpec::single(opt_q);
            } else {
                if (!p_grid_spec.empty())
                    config.p_grid = fastsir::GridSpec::parse(p_grid_spec);
                else if (opt_p >= 0)
                    config.p_grid = fastsir::GridSpec::single(opt_p);
                else
                    throw std::runtime_error("sweep requires --p-grid or --p");
                if (!q_grid_spec.empty())
                    config.q_grid = fastsir::GridSpec::parse(q_grid_spec);
                else if (opt_q >= 0)
                    config.q_grid = fastsir::GridSpec::single(opt_q);
                else
                    throw std::runtime_error("sweep requires --q-grid or --q");
            }

            const fastsir::SweepResult result = fastsir::sweep(net_arg.net, config);
            const fastsir::SweepMetadata meta{net_arg.label};
            if (run->parsed()) {
                for (const auto& cell : result.cells) {
                    std::cout << to_string(cell.algorithm) << " p=" << cell.p << " q=" << cell.q
                              << " reps=" << cell.repetitions
                              << " mean_infected=" << cell.mean_infected
                              << " std=" << cell.std_infected
                              << " mean_duration=" << cell.mean_duration
                              << " wall_s=" << cell.wall_seconds;
                    if (cell.hybrid_winner)
                        std::cout << " winner=" << to_string(*cell.hybrid_winner);
                    std::cout << '\n';
                }
                if (!out_path.empty()) write_csv_output(out_path, result, config, meta);
            } else {
                write_csv_output(out_path, result, config, meta);
            }
            return 0;
        }

        if (verify->parsed()) {
            std::vector<fastsir::SuiteReport> reports;
            const bool all = suite == "all";
            if (all || suite == "dist") {
                fastsir::DistVerifyOptions opts;
                if (quick) {
                    opts.n_max = 60;
                    opts.grid = {0.1, 0.5, 0.9};
                    opts.restricted_n_max = 10;
                }
                reports.push_back(fastsir::verify_dist(opts));
            }
            if (all || suite == "equivalence") {
                fastsir::EquivalenceVerifyOptions opts;
                if (quick) {
                    opts.reps = 20000;
                    opts.include_medium_graphs = false;
                }
                reports.push_back(fastsir::verify_equivalence(opts));
            }
            if (all || suite == "tree") {
                fastsir::TreeVerifyOptions opts;
                if (quick) {
                    opts.depths = {2};
                    opts.p_values = {0.3, 0.7};
                    opts.q_values = {0.3, 0.7};
                    opts.reps = 1000;
                }
                reports.push_back(fastsir::verify_tree(opts));
            }
            if (all || suite == "sampling") {
                reports.push_back(fastsir::verify_sampling());
            }
            if (reports.empty()) throw std::runtime_error("unknown suite: " + suite);

            bool ok = true;
            for (const auto& report : reports) {
                std::cout << "suite " << report.suite << ":\n";
                fastsir::print_report(std::cout, report);
                ok = ok && report.all_pass();
            }
            std::cout << (ok ? "ALL CHECKS PASSED" : "CHECKS FAILED") << '\n';
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
