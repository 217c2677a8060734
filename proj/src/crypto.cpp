#include "seal/crypto.hpp"

#include <cstring>
#include <map>
#include <unordered_map>

namespace seal {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer; full 64-bit avalanche.
std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

void put_le64(std::uint8_t* out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_le64(const std::uint8_t* in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
    return v;
}

// Feistel round function shared by the direct-mode permutation.
std::uint64_t feistel_f(const Key& key, std::uint64_t half, std::uint32_t round) {
    std::uint64_t h = mix64(key.lo ^ (half + kGolden * (round + 1)));
    return mix64(h ^ key.hi);
}

}  // namespace

Key Key::from_bytes(const std::array<std::uint8_t, 16>& b) {
    Key k;
    k.lo = get_le64(b.data());
    k.hi = get_le64(b.data() + 8);
    return k;
}

const char* cipher_mode_name(CipherMode mode) {
    switch (mode) {
        case CipherMode::None: return "none";
        case CipherMode::Direct: return "direct";
        case CipherMode::CounterMode: return "counter";
        case CipherMode::ColoE: return "coloe";
    }
    return "?";
}

CipherMode cipher_mode_from_name(const std::string& name) {
    if (name == "none") return CipherMode::None;
    if (name == "direct") return CipherMode::Direct;
    if (name == "counter") return CipherMode::CounterMode;
    if (name == "coloe") return CipherMode::ColoE;
    throw InvariantError("unknown cipher mode: " + name);
}

LineData otp(const Key& key, std::uint64_t address, std::uint64_t counter) {
    LineData pad{};
    for (std::uint64_t block = 0; block < kLineBytes / 16; ++block) {
        std::uint64_t h = mix64(key.lo + kGolden);
        h = mix64(h ^ key.hi);
        h = mix64(h ^ address);
        h = mix64(h ^ counter);
        h = mix64(h ^ block);
        const std::uint64_t w0 = mix64(h + kGolden);
        const std::uint64_t w1 = mix64(w0 + kGolden);
        put_le64(pad.data() + 16 * block, w0);
        put_le64(pad.data() + 16 * block + 8, w1);
    }
    return pad;
}

LineData encrypt_ctr(const LineData& plaintext, const Key& key,
                     std::uint64_t address, std::uint64_t counter) {
    LineData out = otp(key, address, counter);
    for (std::size_t i = 0; i < kLineBytes; ++i) out[i] ^= plaintext[i];
    return out;
}

LineData decrypt_ctr(const LineData& ciphertext, const Key& key,
                     std::uint64_t address, std::uint64_t counter) {
    return encrypt_ctr(ciphertext, key, address, counter);
}

LineData encrypt_direct(const LineData& plaintext, const Key& key) {
    LineData out{};
    for (std::size_t block = 0; block < kLineBytes / 16; ++block) {
        std::uint64_t l = get_le64(plaintext.data() + 16 * block);
        std::uint64_t r = get_le64(plaintext.data() + 16 * block + 8);
        for (std::uint32_t round = 0; round < 4; ++round) {
            const std::uint64_t next = l ^ feistel_f(key, r, round);
            l = r;
            r = next;
        }
        put_le64(out.data() + 16 * block, l);
        put_le64(out.data() + 16 * block + 8, r);
    }
    return out;
}

LineData decrypt_direct(const LineData& ciphertext, const Key& key) {
    LineData out{};
    for (std::size_t block = 0; block < kLineBytes / 16; ++block) {
        std::uint64_t l = get_le64(ciphertext.data() + 16 * block);
        std::uint64_t r = get_le64(ciphertext.data() + 16 * block + 8);
        for (std::uint32_t round = 4; round-- > 0;) {
            const std::uint64_t prev = r ^ feistel_f(key, l, round);
            r = l;
            l = prev;
        }
        put_le64(out.data() + 16 * block, l);
        put_le64(out.data() + 16 * block + 8, r);
    }
    return out;
}

void coloe_write(MemoryLine& line, const Key& key, std::uint64_t address,
                 const LineData& plaintext) {
    if (!line.encrypted_region())
        throw InvariantError("coloe_write: plaintext region");
    if (line.counter >= kCounterLimit)
        throw InvariantError("coloe_write: counter exhausted");
    line.counter += 1;
    line.data = encrypt_ctr(plaintext, key, address, line.counter);
}

LineData coloe_read(const MemoryLine& line, const Key& key, std::uint64_t address) {
    if (!line.encrypted_region())
        throw InvariantError("coloe_read: plaintext region");
    return decrypt_ctr(line.data, key, address, line.counter);
}

DistinctnessReport distinctness_probe(CipherMode mode,
                                      const std::vector<WriteRecord>& workload,
                                      const Key& key) {
    std::map<std::uint64_t, std::uint64_t> counters;
    std::map<std::vector<std::uint8_t>, std::uint64_t> seen;
    for (const auto& w : workload) {
        LineData ct{};
        switch (mode) {
            case CipherMode::None:
                ct = w.plaintext;
                break;
            case CipherMode::Direct:
                ct = encrypt_direct(w.plaintext, key);
                break;
            case CipherMode::CounterMode:
            case CipherMode::ColoE: {
                std::uint64_t& c = counters[w.address];
                c += 1;
                ct = encrypt_ctr(w.plaintext, key, w.address, c);
                break;
            }
        }
        seen[std::vector<std::uint8_t>(ct.begin(), ct.end())] += 1;
    }
    DistinctnessReport rep;
    for (const auto& [ct, n] : seen) rep.repeated_ciphertext_pairs += n * (n - 1) / 2;
    return rep;
}

}  // namespace seal
