#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "seal/crypto.hpp"

using namespace seal;

namespace {

LineData random_line(Rng& rng) {
    LineData d{};
    for (auto& b : d) b = static_cast<std::uint8_t>(rng.next_u64());
    return d;
}

Key random_key(Rng& rng) { return Key{rng.next_u64(), rng.next_u64()}; }

LineData load_golden() {
    std::ifstream f(std::string(TEST_DATA_DIR) + "/otp_golden.hex");
    REQUIRE(f.good());
    LineData out{};
    std::string line;
    std::size_t pos = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        REQUIRE(line.size() == 32);
        for (std::size_t i = 0; i < 16; ++i) {
            out[pos++] = static_cast<std::uint8_t>(
                std::stoul(line.substr(2 * i, 2), nullptr, 16));
        }
    }
    REQUIRE(pos == kLineBytes);
    return out;
}

}  // namespace

TEST_CASE("otp matches the frozen reference vector") {
    const LineData golden = load_golden();
    const LineData pad = otp(Key{1, 0}, 0, 0);
    CHECK(pad == golden);
}

TEST_CASE("otp is pure and counter-sensitive") {
    Rng rng(2024);
    for (int i = 0; i < 10000; ++i) {
        const Key k = random_key(rng);
        const std::uint64_t a = rng.next_u64();
        const std::uint64_t c = rng.next_u64() & kCounterLimit;
        CHECK(otp(k, a, c) == otp(k, a, c));
        CHECK(otp(k, a, c) != otp(k, a, c + 1));
    }
}

TEST_CASE("counter mode: zero plaintext yields the pad itself") {
    const Key k{0x1234, 0x5678};
    const LineData zeros{};
    CHECK(encrypt_ctr(zeros, k, 77, 3) == otp(k, 77, 3));
}

TEST_CASE("counter mode roundtrip and rewrite distinctness") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const Key k = random_key(rng);
        const std::uint64_t a = rng.next_u64();
        const std::uint64_t c = rng.next_u64() & kCounterLimit;
        const LineData pt = random_line(rng);
        const LineData ct = encrypt_ctr(pt, k, a, c);
        CHECK(decrypt_ctr(ct, k, a, c) == pt);
        CHECK(encrypt_ctr(pt, k, a, c + 1) != ct);
    }
}

TEST_CASE("counter mode: address separation") {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const Key k = random_key(rng);
        const std::uint64_t a = rng.next_u64();
        const std::uint64_t c = rng.next_u64() & kCounterLimit;
        const LineData pt = random_line(rng);
        CHECK(encrypt_ctr(pt, k, a, c) != encrypt_ctr(pt, k, a + 128, c));
    }
}

TEST_CASE("direct mode: identical plaintexts collide across addresses") {
    Rng rng(13);
    const Key k = random_key(rng);
    const LineData pt = random_line(rng);
    const std::vector<WriteRecord> two = {{0, pt}, {4096, pt}};
    CHECK(distinctness_probe(CipherMode::Direct, two, k).repeated_ciphertext_pairs == 1);
}

TEST_CASE("direct mode roundtrip") {
    Rng rng(17);
    for (int i = 0; i < 10000; ++i) {
        const Key k = random_key(rng);
        const LineData pt = random_line(rng);
        CHECK(decrypt_direct(encrypt_direct(pt, k), k) == pt);
    }
}

TEST_CASE("direct mode: per-block independence") {
    Rng rng(19);
    const Key k = random_key(rng);
    LineData a = random_line(rng);
    LineData b = a;
    b[35] ^= 0xff;  // inside block 2
    const LineData ca = encrypt_direct(a, k);
    const LineData cb = encrypt_direct(b, k);
    for (std::size_t block = 0; block < kLineBytes / 16; ++block) {
        bool differs = false;
        for (std::size_t i = 0; i < 16; ++i)
            differs |= ca[16 * block + i] != cb[16 * block + i];
        CHECK(differs == (block == 2));
    }
}

TEST_CASE("coloe write bumps the counter and re-randomizes") {
    const Key k{9, 9};
    MemoryLine line;
    line.flags = 1;
    line.counter = 41;
    LineData pt{};
    pt[0] = 0xaa;
    coloe_write(line, k, 512, pt);
    CHECK(line.counter == 42);
    const LineData first = line.data;
    coloe_write(line, k, 512, pt);
    CHECK(line.counter == 43);
    CHECK(line.data != first);
    CHECK(coloe_read(line, k, 512) == pt);
}

TEST_CASE("coloe rejects plaintext regions and exhausted counters") {
    const Key k{1, 2};
    const LineData pt{};
    MemoryLine plain;
    CHECK_THROWS_AS(coloe_write(plain, k, 0, pt), InvariantError);
    MemoryLine full;
    full.flags = 1;
    full.counter = kCounterLimit;
    CHECK_THROWS_AS(coloe_write(full, k, 0, pt), InvariantError);
}

TEST_CASE("distinctness probe quantifies dictionary exposure") {
    const Key k{3, 4};
    LineData pt{};
    pt[5] = 1;
    std::vector<WriteRecord> workload;
    for (std::uint64_t i = 0; i < 100; ++i)
        workload.push_back({i * kLineBytes, pt});

    CHECK(distinctness_probe(CipherMode::Direct, workload, k).repeated_ciphertext_pairs ==
          4950);
    CHECK(distinctness_probe(CipherMode::CounterMode, workload, k)
              .repeated_ciphertext_pairs == 0);
    CHECK(distinctness_probe(CipherMode::ColoE, workload, k).repeated_ciphertext_pairs ==
          0);
    CHECK(distinctness_probe(CipherMode::Direct, {}, k).repeated_ciphertext_pairs == 0);
}
