#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace quadstab {

// Error hierarchy. Everything thrown by the library derives from error, so
// callers (simulator, CLI) can classify outcomes without string matching.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad caller-supplied values: non-finite inputs, invalid parameter sets.
struct invalid_input : error {
    using error::error;
};

// State outside the design model's validity region (|roll| or |pitch| >= pi/2).
struct tilt_domain_error : error {
    using error::error;
};

// Controller cannot produce a command at this state.
struct control_fault : error {
    using error::error;
};

// A decoupling matrix is (near-)singular; subtype of control_fault.
struct singularity_error : control_fault {
    using control_fault::control_fault;
};

// Gain synthesis could not certify within its iteration budget.
struct synthesis_error : error {
    using error::error;
};

// Non-finite values produced during integration.
struct integration_fault : error {
    using error::error;
};

// Config file problems (parse or validation), message carries the location.
struct config_error : error {
    using error::error;
};

inline double saturate(double x, double level)
{
    if (x > level) return level;
    if (x < -level) return -level;
    return x;
}

inline bool all_finite(const double* v, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

// splitmix64: tiny deterministic PRNG. Used for randomized certification
// trials and the verify suite; unlike std:: distributions its output is
// identical on every platform, which keeps seeded reports reproducible.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double()
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double uniform(double lo, double hi)
    {
        return lo + (hi - lo) * next_double();
    }

    // standard normal via Box-Muller
    double gaussian()
    {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace quadstab
