#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace focusmr {

// Seed derivation and draws are fully pinned down here instead of relying on
// std distributions, whose sequences differ between standard libraries.
// Simulation outputs are contractually byte-identical across runs and thread
// counts, so every random stream must be a pure function of
// (master_seed, stream id, counter).

// One splitmix64 absorption round.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Independent stream seed from (master, stream, counter). Counter-based, so
// workers can seed rep r of stream s without any shared RNG state.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t counter = 0) {
    std::uint64_t z = master;
    const std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
    z = mix64(z + golden + stream);
    z = mix64(z + golden + counter);
    z = mix64(z + golden);
    return z;
}

// Deterministic uniform/normal source. Box-Muller on explicit 53-bit
// uniforms; the spare normal is cached per instance, never shared.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    Rng(std::uint64_t master, std::uint64_t stream, std::uint64_t counter = 0)
        : eng_(derive_seed(master, stream, counter)) {}

    // uniform on the open interval (0,1); never returns 0, so log() below is safe
    double uniform() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace focusmr
