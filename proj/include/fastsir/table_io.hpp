#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "fastsir/distributions.hpp"

namespace fastsir {

// Cache file layout (little-endian):
//   magic "FSIR" | version u32 | p f64 | q f64 | precision_bits u32 |
//   row_count u32 | row_count * ( degree u32, (degree+1) * cdf f64 )

inline constexpr std::uint32_t kTableFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 4);
}

inline void put_f64(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4))
        throw std::runtime_error("table load: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8))
        throw std::runtime_error("table load: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

} // namespace detail

inline void save_table(const InfectionCdfTable& table, std::ostream& out) {
    out.write("FSIR", 4);
    detail::put_u32(out, kTableFormatVersion);
    detail::put_f64(out, table.params.p());
    detail::put_f64(out, table.params.q());
    detail::put_u32(out, table.precision_bits);
    const auto degrees = table.stored_degrees();
    detail::put_u32(out, static_cast<std::uint32_t>(degrees.size()));
    for (std::size_t d : degrees) {
        detail::put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : table.rows[d]) detail::put_f64(out, v);
    }
    if (!out) throw std::runtime_error("table save: write failed");
}

inline InfectionCdfTable load_table(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != "FSIR")
        throw std::runtime_error("table load: bad magic");
    const std::uint32_t version = detail::get_u32(in);
    if (version != kTableFormatVersion)
        throw std::runtime_error("table load: unsupported format version " +
                                 std::to_string(version));
    const double p = detail::get_f64(in);
    const double q = detail::get_f64(in);
    const std::uint32_t precision_bits = detail::get_u32(in);
    const std::uint32_t row_count = detail::get_u32(in);
    constexpr std::uint32_t sanity_cap = 1u << 26;
    if (row_count > sanity_cap) throw std::runtime_error("table load: implausible row count");

    constexpr double one_tol = 0x1.0p-50;
    InfectionCdfTable table{EpidemicParams(p, q), precision_bits, {}};
    for (std::uint32_t r = 0; r < row_count; ++r) {
        const std::uint32_t degree = detail::get_u32(in);
        if (degree > sanity_cap) throw std::runtime_error("table load: implausible degree");
        if (degree >= table.rows.size()) table.rows.resize(degree + 1);
        if (!table.rows[degree].empty())
            throw std::runtime_error("table load: duplicate degree " + std::to_string(degree));
        std::vector<double> cdf(degree + 1);
        double prev = 0.0;
        for (std::uint32_t k = 0; k <= degree; ++k) {
            const double v = detail::get_f64(in);
            if (!(v >= 0.0 && v <= 1.0) || std::isnan(v))
                throw std::runtime_error("table load: CDF value out of [0,1]");
            if (v < prev)
                throw std::runtime_error("table load: CDF row for degree " +
                                         std::to_string(degree) + " is not nondecreasing");
            cdf[k] = v;
            prev = v;
        }
        if (std::abs(cdf.back() - 1.0) > one_tol)
            throw std::runtime_error("table load: CDF row for degree " + std::to_string(degree) +
                                     " does not end at 1");
        table.rows[degree] = std::move(cdf);
    }
    in.peek();
    if (!in.eof()) throw std::runtime_error("table load: trailing bytes after last row");
    return table;
}

inline void save_table_file(const InfectionCdfTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    save_table(table, out);
}

inline InfectionCdfTable load_table_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for read: " + path);
    return load_table(in);
}

// Inspection export: degree,k,pmf,cdf with the PMF recovered from
// adjacent CDF differences.
inline void export_table_csv(const InfectionCdfTable& table, std::ostream& out) {
    out << "degree,k,pmf,cdf\n";
    char buf[64];
    for (std::size_t d : table.stored_degrees()) {
        const auto& cdf = table.rows[d];
        double prev = 0.0;
        for (std::size_t k = 0; k < cdf.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g", d, k, cdf[k] - prev, cdf[k]);
            out << buf << '\n';
            prev = cdf[k];
        }
    }
}

} // namespace fastsir
