#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fastsir/rng.hpp"

namespace fastsir {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Undirected simple contact network, immutable after construction.
// Stored as CSR adjacency with every neighbor row sorted ascending, which
// makes simulations byte-deterministic for a given RNG stream.
class Network {
public:
    // Normalizing constructor: drops self-loops, merges duplicate edges.
    Network(std::size_t node_count, std::vector<Edge> edges) {
        for (auto& [u, v] : edges) {
            if (u >= node_count || v >= node_count)
                throw std::invalid_argument("edge endpoint out of range");
            if (u > v) std::swap(u, v);
        }
        std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        build(node_count, edges);
    }

    // No normalization, caller guarantees the invariants hold. Exists for
    // tests that need to feed validate() an intentionally broken graph.
    static Network from_raw_parts(std::vector<std::size_t> offsets,
                                  std::vector<NodeId> neighbors,
                                  std::size_t link_count) {
        Network net;
        net.offsets_ = std::move(offsets);
        net.neighbors_ = std::move(neighbors);
        net.link_count_ = link_count;
        return net;
    }

    std::size_t node_count() const { return offsets_.size() - 1; }
    std::size_t link_count() const { return link_count_; }

    std::span<const NodeId> neighbors(NodeId u) const {
        return {neighbors_.data() + offsets_[u], neighbors_.data() + offsets_[u + 1]};
    }

    std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }

    std::size_t max_degree() const {
        std::size_t best = 0;
        for (NodeId u = 0; u < node_count(); ++u) best = std::max(best, degree(u));
        return best;
    }

    bool operator==(const Network& other) const = default;

private:
    Network() = default;

    void build(std::size_t node_count, const std::vector<Edge>& edges) {
        offsets_.assign(node_count + 1, 0);
        for (const auto& [u, v] : edges) {
            ++offsets_[u + 1];
            ++offsets_[v + 1];
        }
        std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
        neighbors_.resize(offsets_.back());
        std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
        for (const auto& [u, v] : edges) {
            neighbors_[cursor[u]++] = v;
            neighbors_[cursor[v]++] = u;
        }
        // Edges are processed in sorted order, so each row comes out sorted
        // except for the interleaving of the two endpoints' passes; sort to
        // be safe.
        for (std::size_t u = 0; u < node_count; ++u)
            std::sort(neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[u]),
                      neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[u + 1]));
        link_count_ = edges.size();
    }

    std::vector<std::size_t> offsets_;
    std::vector<NodeId> neighbors_;
    std::size_t link_count_ = 0;
};

// Degree statistics that size the FastSIR distribution tables. The sum of
// distinct degrees is the per-network storage cost of the sparse table.
struct DegreeStats {
    std::size_t k_max = 0;
    double mean_degree = 0.0;
    std::vector<std::size_t> distinct_degrees; // sorted ascending
    std::size_t sum_distinct_degrees = 0;
};

inline DegreeStats degree_stats(const Network& net) {
    DegreeStats stats;
    stats.distinct_degrees.reserve(64);
    for (NodeId u = 0; u < net.node_count(); ++u)
        stats.distinct_degrees.push_back(net.degree(u));
    std::sort(stats.distinct_degrees.begin(), stats.distinct_degrees.end());
    stats.distinct_degrees.erase(
        std::unique(stats.distinct_degrees.begin(), stats.distinct_degrees.end()),
        stats.distinct_degrees.end());
    stats.k_max = stats.distinct_degrees.empty() ? 0 : stats.distinct_degrees.back();
    stats.sum_distinct_degrees = std::accumulate(stats.distinct_degrees.begin(),
                                                 stats.distinct_degrees.end(), std::size_t{0});
    stats.mean_degree = net.node_count() == 0
                            ? 0.0
                            : 2.0 * static_cast<double>(net.link_count()) /
                                  static_cast<double>(net.node_count());
    return stats;
}

// Checks every Network invariant: neighbor symmetry, sorted rows, no
// self-loops or duplicates, link count = half the adjacency total.
inline void validate(const Network& net) {
    std::size_t total = 0;
    for (NodeId u = 0; u < net.node_count(); ++u) {
        auto row = net.neighbors(u);
        total += row.size();
        for (std::size_t i = 0; i < row.size(); ++i) {
            const NodeId v = row[i];
            if (v >= net.node_count())
                throw std::logic_error("neighbor index out of range");
            if (v == u) throw std::logic_error("self-loop present");
            if (i > 0 && row[i - 1] >= v)
                throw std::logic_error("adjacency row not sorted strictly ascending");
            auto back = net.neighbors(v);
            if (!std::binary_search(back.begin(), back.end(), u))
                throw std::logic_error("adjacency not symmetric");
        }
    }
    if (total != 2 * net.link_count())
        throw std::logic_error("link count inconsistent with adjacency lists");
}

struct EdgeListData {
    Network net;
    std::vector<std::uint64_t> original_ids; // dense id i had this id in the input
};

// Plain edge-list text: one "u v" pair per line, '#'/'%' comment lines.
// Node ids are remapped to dense [0, N) in first-appearance order.
inline EdgeListData load_edge_list_with_remap(std::istream& in) {
    std::unordered_map<std::uint64_t, NodeId> remap;
    std::vector<std::uint64_t> original_ids;
    std::vector<Edge> edges;
    std::string line;
    std::size_t line_no = 0;

    auto dense_id = [&](std::uint64_t orig) {
        auto [it, inserted] = remap.try_emplace(orig, static_cast<NodeId>(original_ids.size()));
        if (inserted) original_ids.push_back(orig);
        return it->second;
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::size_t pos = 0;
        while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
        if (pos == line.size() || line[pos] == '#' || line[pos] == '%') continue;

        std::uint64_t ids[2];
        int found = 0;
        while (pos < line.size()) {
            while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
            if (pos == line.size()) break;
            std::size_t start = pos;
            while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
            const std::string token = line.substr(start, pos - start);
            std::uint64_t value = 0;
            try {
                std::size_t used = 0;
                value = std::stoull(token, &used);
                if (used != token.size()) throw std::invalid_argument(token);
            } catch (const std::exception&) {
                throw std::runtime_error("edge list parse error at line " +
                                         std::to_string(line_no) + ": bad token '" + token + "'");
            }
            if (found >= 2)
                throw std::runtime_error("edge list parse error at line " +
                                         std::to_string(line_no) + ": more than two ids");
            ids[found++] = value;
        }
        if (found != 2)
            throw std::runtime_error("edge list parse error at line " + std::to_string(line_no) +
                                     ": expected two ids");
        const NodeId u = dense_id(ids[0]); // left token registers first
        const NodeId v = dense_id(ids[1]);
        edges.emplace_back(u, v);
    }
    if (edges.empty()) throw std::runtime_error("edge list contains no edges");

    return EdgeListData{Network(original_ids.size(), std::move(edges)), std::move(original_ids)};
}

inline Network load_edge_list(std::istream& in) { return load_edge_list_with_remap(in).net; }

// Emits one "u v" line per undirected link with u < v; reloading yields an
// identical Network. The loader assigns dense ids in first-appearance
// order, so when plain edge emission would not introduce ids as 0,1,2,...
// (or when isolated nodes exist), a prelude of "t t" self-loop lines pins
// the order: the loader registers both ids of a line and then drops the
// loop edge.
inline void write_edge_list(std::ostream& out, const Network& net) {
    const std::size_t n = net.node_count();
    bool ascending = true;
    {
        NodeId expected = 0;
        std::vector<bool> seen(n, false);
        auto appear = [&](NodeId v) {
            if (seen[v]) return;
            if (v != expected) ascending = false;
            seen[v] = true;
            ++expected;
        };
        for (NodeId u = 0; u < n && ascending; ++u)
            for (NodeId v : net.neighbors(u))
                if (u < v) {
                    appear(u);
                    appear(v);
                    if (!ascending) break;
                }
        if (ascending && expected != n) ascending = false; // isolated nodes
    }
    if (!ascending)
        for (NodeId t = 0; t < n; ++t) out << t << ' ' << t << '\n';
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v : net.neighbors(u))
            if (u < v) out << u << ' ' << v << '\n';
}

inline void write_remap_csv(std::ostream& out, const std::vector<std::uint64_t>& original_ids) {
    out << "original_id,dense_id\n";
    for (std::size_t i = 0; i < original_ids.size(); ++i)
        out << original_ids[i] << ',' << i << '\n';
}

// Rooted complete m-ary tree of `depth`+1 levels as an undirected network.
// Level order: root is node 0, children of v are m*v+1 .. m*v+m.
inline Network generate_m_ary_tree(std::uint64_t m, std::uint64_t depth) {
    if (m < 1) throw std::invalid_argument("m-ary tree requires m >= 1");
    constexpr std::uint64_t cap = std::uint64_t{1} << 32;
    std::uint64_t nodes = 1;
    std::uint64_t level = 1;
    for (std::uint64_t d = 0; d < depth; ++d) {
        if (level > cap / m) throw std::overflow_error("m-ary tree node count overflows");
        level *= m;
        nodes += level;
        if (nodes > cap) throw std::overflow_error("m-ary tree node count overflows");
    }
    std::vector<Edge> edges;
    edges.reserve(nodes - 1);
    for (std::uint64_t v = 1; v < nodes; ++v)
        edges.emplace_back(static_cast<NodeId>((v - 1) / m), static_cast<NodeId>(v));
    return Network(nodes, std::move(edges));
}

enum class TestGraphKind { path, cycle, star, complete };

inline Network generate_test_graph(TestGraphKind kind, std::size_t n) {
    if (n < 1) throw std::invalid_argument("test graph needs n >= 1");
    std::vector<Edge> edges;
    switch (kind) {
    case TestGraphKind::path:
        for (std::size_t i = 0; i + 1 < n; ++i)
            edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(i + 1));
        break;
    case TestGraphKind::cycle:
        if (n < 3) throw std::invalid_argument("cycle needs n >= 3");
        for (std::size_t i = 0; i < n; ++i)
            edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % n));
        break;
    case TestGraphKind::star:
        for (std::size_t i = 1; i < n; ++i)
            edges.emplace_back(NodeId{0}, static_cast<NodeId>(i));
        break;
    case TestGraphKind::complete:
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
        break;
    }
    return Network(n, std::move(edges));
}

// Erased configuration model with a power-law degree sequence
// P(k) ~ k^-exponent on [min_degree, max_degree]. Self-loops and duplicate
// stub pairings are dropped, so realized degrees can fall slightly below
// the drawn sequence. max_degree = 0 selects the structural cutoff sqrt(N).
inline Network generate_scale_free(std::size_t node_count, double exponent,
                                   std::size_t min_degree, std::size_t max_degree,
                                   RngStream& rng) {
    if (node_count < 2) throw std::invalid_argument("scale-free network needs >= 2 nodes");
    if (exponent <= 1.0) throw std::invalid_argument("power-law exponent must exceed 1");
    if (max_degree == 0)
        max_degree = static_cast<std::size_t>(std::sqrt(static_cast<double>(node_count)));
    max_degree = std::min(max_degree, node_count - 1);
    if (min_degree < 1 || min_degree > max_degree)
        throw std::invalid_argument("degree bounds invalid");

    // Inverse-transform sampling of the discrete power law.
    std::vector<double> cdf(max_degree - min_degree + 1);
    double mass = 0.0;
    for (std::size_t k = min_degree; k <= max_degree; ++k) {
        mass += std::pow(static_cast<double>(k), -exponent);
        cdf[k - min_degree] = mass;
    }
    for (double& c : cdf) c /= mass;

    std::vector<std::size_t> degree(node_count);
    std::size_t stub_total = 0;
    for (std::size_t i = 0; i < node_count; ++i) {
        const double r = rng.next_double();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
        degree[i] = min_degree + static_cast<std::size_t>(it - cdf.begin());
        if (degree[i] > max_degree) degree[i] = max_degree;
        stub_total += degree[i];
    }
    if (stub_total % 2 != 0) {
        ++degree[0];
        ++stub_total;
    }

    std::vector<NodeId> stubs;
    stubs.reserve(stub_total);
    for (std::size_t i = 0; i < node_count; ++i)
        stubs.insert(stubs.end(), degree[i], static_cast<NodeId>(i));
    // Fisher-Yates shuffle, then pair consecutive stubs.
    for (std::size_t i = stubs.size() - 1; i > 0; --i)
        std::swap(stubs[i], stubs[rng.next_below(i + 1)]);

    std::vector<Edge> edges;
    edges.reserve(stubs.size() / 2);
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2)
        edges.emplace_back(stubs[i], stubs[i + 1]);
    return Network(node_count, std::move(edges));
}

} // namespace fastsir
