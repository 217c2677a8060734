#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace seal {

// Thrown when inputs violate a documented contract (bad descriptor, shape
// mismatch, inconsistent plan, invalid configuration).
class InvariantError : public std::runtime_error {
public:
    explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown for filesystem / serialization failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr std::uint64_t kLineBytes = 128;

// Deterministic RNG used everywhere reproducibility matters. mt19937_64 has a
// standard-pinned algorithm, and the float mapping below avoids the
// implementation-defined std::uniform_real_distribution.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    std::uint64_t next_below(std::uint64_t bound) {
        // Modulo bias is irrelevant for the small bounds used here.
        return engine_() % bound;
    }

    // Uniform in [-1, 1).
    double next_signed_unit() {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return 2.0 * u - 1.0;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace seal
