#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seal/crypto.hpp"
#include "seal/trace.hpp"

namespace seal {

struct CacheGeometry {
    std::uint64_t bytes = 0;  // zero disables the cache
    std::uint32_t ways = 8;
    std::uint32_t line = kLineBytes;
};

// Set-associative LRU cache, write-back + write-allocate, driven one access
// at a time. A user flag rides along with each entry so evictions can tell
// encrypted lines from plaintext ones.
class CacheSim {
public:
    explicit CacheSim(const CacheGeometry& geom);

    struct AccessResult {
        bool hit = false;
        bool evicted_dirty = false;
        std::uint64_t evicted_address = 0;
        bool evicted_flag = false;
    };

    AccessResult access(std::uint64_t address, bool write, bool flag = false);

    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }
    std::uint64_t evictions() const { return evictions_; }

private:
    struct Way {
        std::uint64_t line_index = 0;
        std::uint64_t stamp = 0;
        bool valid = false;
        bool dirty = false;
        bool flag = false;
    };

    CacheGeometry geom_;
    std::uint64_t set_count_ = 0;
    std::uint64_t tick_ = 0;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
    std::uint64_t evictions_ = 0;
    std::vector<Way> ways_;  // set-major
};

struct SimConfig {
    std::uint32_t core_clock_mhz = 700;
    std::uint32_t channels = 6;
    std::uint32_t bus_width_bits = 384;
    std::uint32_t dram_data_rate_mts = 3696;

    CacheGeometry l2{786432, 8, kLineBytes};
    std::uint32_t l2_hit_latency_cycles = 10;

    // Partitioned evenly across the memory controllers.
    CacheGeometry counter_cache{49152, 8, kLineBytes};

    std::uint32_t aes_latency_cycles = 20;
    double aes_bandwidth_gb_s = 8.0;  // per engine, one engine per controller

    CipherMode scheme = CipherMode::None;
    bool se_enabled = false;

    std::uint32_t max_outstanding = 64;  // per controller

    // Consecutive lines mapped to one controller before rotating. The
    // default matches the counter grouping (16 lines per counter line), so
    // a counter line and all the data lines it covers share a controller.
    std::uint32_t channel_interleave_lines = 16;

    // Aggregate MAC throughput and the fixed part of a DRAM access.
    std::uint64_t macs_per_cycle = 512;
    std::uint32_t dram_fixed_latency_cycles = 20;
};

SimConfig load_sim_config(const std::string& json_text);
std::string dump_sim_config(const SimConfig& config);

struct DerivedTiming {
    std::uint64_t aes_interval_cycles = 0;   // engine initiation interval per line
    std::uint64_t dram_service_cycles = 0;   // per-channel occupancy per line
};

// Validates the configuration and resolves the two bandwidth-derived
// per-line costs.
DerivedTiming derive_timing(const SimConfig& config);

struct Metrics {
    std::uint64_t total_cycles = 0;
    std::uint64_t compute_cycles = 0;
    std::uint64_t data_reads_enc = 0;
    std::uint64_t data_reads_plain = 0;
    std::uint64_t data_writes_enc = 0;
    std::uint64_t data_writes_plain = 0;
    std::uint64_t counter_reads = 0;
    std::uint64_t counter_writes = 0;
    std::uint64_t l2_hits = 0;
    std::uint64_t l2_misses = 0;
    std::uint64_t counter_cache_hits = 0;
    std::uint64_t counter_cache_misses = 0;
    std::uint64_t aes_busy_cycles = 0;
    std::uint64_t aes_stall_cycles = 0;
    std::uint64_t channel_busy_cycles = 0;  // summed over controllers
    double normalized_perf = 0.0;  // filled when tables are built

    std::uint64_t data_accesses() const {
        return data_reads_enc + data_reads_plain + data_writes_enc + data_writes_plain;
    }
    std::uint64_t encrypted_data_accesses() const {
        return data_reads_enc + data_writes_enc;
    }
    std::uint64_t counter_accesses() const { return counter_reads + counter_writes; }
    std::uint64_t latency_proxy() const { return total_cycles; }
};

// Deterministic single-pass execution of an inference trace: in-order issue
// into an outstanding-request window, L2 and per-controller counter caches,
// FCFS channels and a pipelined AES engine per controller. Per layer the
// clock advances by max(memory completion, compute), a roofline bound.
Metrics simulate(const InferenceTrace& trace, const SimConfig& config);

}  // namespace seal
