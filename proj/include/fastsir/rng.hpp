#pragma once

#include <bit>
#include <cstdint>

namespace fastsir {

// SplitMix64 (Steele, Lea, Flood: "Fast splittable pseudorandom number
// generators"). Used only to expand seed material.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// PCG XSL-RR 128/64 ("pcg64", O'Neill, "PCG: A Family of Simple Fast
// Space-Efficient Statistically Good Algorithms for Random Number
// Generation"). Passes TestU01 BigCrush and PractRand per the PCG paper.
// Streams are selected through the (odd) increment, the generator's
// documented multi-stream mechanism.
class Pcg64 {
public:
    using u128 = unsigned __int128;

    Pcg64(u128 initstate, u128 initseq) : state_(0), inc_((initseq << 1) | 1u) {
        step();
        state_ += initstate;
        step();
    }

    std::uint64_t next() {
        const u128 old = state_;
        step();
        const std::uint64_t xored =
            static_cast<std::uint64_t>(old >> 64) ^ static_cast<std::uint64_t>(old);
        const int rot = static_cast<int>(old >> 122);
        return std::rotr(xored, rot);
    }

private:
    void step() { state_ = state_ * mult() + inc_; }

    static constexpr u128 mult() {
        return (static_cast<u128>(2549297995355413924ULL) << 64) | 4865540595714422341ULL;
    }

    u128 state_;
    u128 inc_;
};

// One reproducible random stream. (master_seed, stream_index) fully
// determines the output sequence; distinct stream indices select distinct
// PCG increments and therefore independent streams.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
        : master_seed_(master_seed),
          stream_index_(stream_index),
          engine_(make_engine(master_seed, stream_index)) {}

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_index() const { return stream_index_; }

    std::uint64_t next_u64() { return engine_.next(); }

    // Uniform on [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

    // Unbiased uniform integer in [0, bound). Lemire's multiply-shift
    // rejection method.
    std::uint64_t next_below(std::uint64_t bound) {
        using u128 = Pcg64::u128;
        u128 m = static_cast<u128>(next_u64()) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                m = static_cast<u128>(next_u64()) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static Pcg64 make_engine(std::uint64_t master_seed, std::uint64_t stream_index) {
        using u128 = Pcg64::u128;
        std::uint64_t s = master_seed;
        const std::uint64_t w0 = splitmix64(s);
        const std::uint64_t w1 = splitmix64(s);
        s ^= stream_index;
        const std::uint64_t w2 = splitmix64(s);
        const std::uint64_t w3 = splitmix64(s);
        return Pcg64((static_cast<u128>(w0) << 64) | w1, (static_cast<u128>(w2) << 64) | w3);
    }

    std::uint64_t master_seed_;
    std::uint64_t stream_index_;
    Pcg64 engine_;
};

} // namespace fastsir
