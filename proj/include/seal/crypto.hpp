#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "seal/common.hpp"

namespace seal {

using LineData = std::array<std::uint8_t, kLineBytes>;

// 128-bit global key, kept as two little-endian 64-bit halves.
struct Key {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;

    static Key from_bytes(const std::array<std::uint8_t, 16>& b);
};

enum class CipherMode { None, Direct, CounterMode, ColoE };

const char* cipher_mode_name(CipherMode mode);
CipherMode cipher_mode_from_name(const std::string& name);

// 56-bit write counters; incrementing past this value is an error.
inline constexpr std::uint64_t kCounterLimit = (std::uint64_t{1} << 56) - 1;

// One 136-byte memory line: 128B data plus the 8B counter area
// (56-bit counter + flag byte, bit 0 marks an encrypted allocation).
struct MemoryLine {
    LineData data{};
    std::uint64_t counter = 0;
    std::uint8_t flags = 0;

    bool encrypted_region() const { return (flags & 1u) != 0; }
};

// Keystream for one line, derived from (key, line address, counter).
// Eight 16-byte blocks, each produced by the avalanche mixing recipe.
LineData otp(const Key& key, std::uint64_t address, std::uint64_t counter);

LineData encrypt_ctr(const LineData& plaintext, const Key& key,
                     std::uint64_t address, std::uint64_t counter);
LineData decrypt_ctr(const LineData& ciphertext, const Key& key,
                     std::uint64_t address, std::uint64_t counter);

// Address-independent keyed permutation per 16-byte block: identical
// plaintext blocks always map to identical ciphertext blocks.
LineData encrypt_direct(const LineData& plaintext, const Key& key);
LineData decrypt_direct(const LineData& ciphertext, const Key& key);

// Bumps the co-located counter, then stores the counter-mode ciphertext in
// the same line. Requires the encrypted-region flag.
void coloe_write(MemoryLine& line, const Key& key, std::uint64_t address,
                 const LineData& plaintext);
LineData coloe_read(const MemoryLine& line, const Key& key, std::uint64_t address);

struct WriteRecord {
    std::uint64_t address = 0;
    LineData plaintext{};
};

struct DistinctnessReport {
    std::uint64_t repeated_ciphertext_pairs = 0;
};

// Runs the workload through the chosen mode and counts unordered pairs of
// identical ciphertexts, the observable a dictionary attacker exploits.
DistinctnessReport distinctness_probe(CipherMode mode,
                                      const std::vector<WriteRecord>& workload,
                                      const Key& key);

}  // namespace seal
