#pragma once

#include <array>
#include <cstdint>
#include <cstddef>

#include "cpi/math.hpp"

namespace cpi {

// Stream labels used to derive independent substreams from one master seed.
// Streams depend only on (seed, domain, index), never on worker scheduling,
// so parallel runs reproduce serial ones bit for bit.
enum class RngDomain : std::uint64_t {
    bootstrap = 1,
    sim_markets,
    feasible_starts,
    eam_init,
    eam_uniform,
    eam_ei_seed,
    replication,
    generic,
    test = 900,
};

/// Deterministic xoshiro256** stream keyed by (seed, domain, index).
class RngStream {
public:
    RngStream(std::uint64_t seed, RngDomain domain, std::uint64_t index = 0);

    std::uint64_t next();

    /// Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform index in [0, n), n >= 1.
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    /// Standard normal by inverse-CDF (keeps the stream stdlib-independent).
    double normal() {
        double u;
        do { u = uniform01(); } while (u <= 0.0);
        return normal_quantile(u);
    }

private:
    std::array<std::uint64_t, 4> state_;
};

} // namespace cpi
