#include "seal/memsim.hpp"

#include <algorithm>
#include <queue>

#include "json.hpp"

namespace seal {

namespace {

// Counter storage sits above the 2^40 data space; one counter line covers
// sixteen data lines (8B counter area per 128B line).
constexpr std::uint64_t kCounterRegionBase = std::uint64_t{1} << 41;
constexpr std::uint64_t kCountersPerLine = kLineBytes / 8;

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

CacheSim::CacheSim(const CacheGeometry& geom) : geom_(geom) {
    if (geom.bytes == 0) return;  // disabled
    if (geom.line == 0 || geom.ways == 0)
        throw InvariantError("cache geometry must have nonzero line and ways");
    const std::uint64_t way_bytes = std::uint64_t{geom.line} * geom.ways;
    if (geom.bytes % way_bytes != 0)
        throw InvariantError("cache bytes must be a multiple of line*ways");
    set_count_ = geom.bytes / way_bytes;
    ways_.resize(set_count_ * geom.ways);
}

CacheSim::AccessResult CacheSim::access(std::uint64_t address, bool write, bool flag) {
    AccessResult res;
    if (set_count_ == 0) {
        misses_ += 1;
        return res;
    }
    const std::uint64_t line_index = address / geom_.line;
    const std::uint64_t set = line_index % set_count_;
    Way* base = &ways_[set * geom_.ways];
    ++tick_;

    Way* victim = base;
    for (std::uint32_t w = 0; w < geom_.ways; ++w) {
        Way& way = base[w];
        if (way.valid && way.line_index == line_index) {
            way.stamp = tick_;
            way.dirty = way.dirty || write;
            hits_ += 1;
            res.hit = true;
            return res;
        }
        if (!way.valid) {
            victim = &way;
        } else if (victim->valid && way.stamp < victim->stamp) {
            victim = &way;
        }
    }

    misses_ += 1;
    if (victim->valid) {
        evictions_ += 1;
        if (victim->dirty) {
            res.evicted_dirty = true;
            res.evicted_address = victim->line_index * geom_.line;
            res.evicted_flag = victim->flag;
        }
    }
    victim->valid = true;
    victim->line_index = line_index;
    victim->stamp = tick_;
    victim->dirty = write;
    victim->flag = flag;
    return res;
}

DerivedTiming derive_timing(const SimConfig& config) {
    if (config.channels == 0) throw InvariantError("channels must be positive");
    if (config.core_clock_mhz == 0 || config.dram_data_rate_mts == 0)
        throw InvariantError("clock rates must be positive");
    if (config.l2.line != kLineBytes || config.counter_cache.line != kLineBytes)
        throw InvariantError("line size must be 128 bytes");
    if (config.bus_width_bits % (config.channels * 8) != 0)
        throw InvariantError("bus width must split evenly across channels");
    if (config.aes_bandwidth_gb_s <= 0.0)
        throw InvariantError("aes bandwidth must be positive");
    if (config.max_outstanding == 0)
        throw InvariantError("max_outstanding must be positive");
    if (config.macs_per_cycle == 0)
        throw InvariantError("macs_per_cycle must be positive");
    if (config.channel_interleave_lines == 0)
        throw InvariantError("channel_interleave_lines must be positive");

    const std::uint64_t core_hz = std::uint64_t{config.core_clock_mhz} * 1'000'000;
    const auto aes_bytes_per_s =
        static_cast<std::uint64_t>(config.aes_bandwidth_gb_s * 1e9);
    if (aes_bytes_per_s == 0) throw InvariantError("aes bandwidth must be positive");

    DerivedTiming t;
    t.aes_interval_cycles = ceil_div(core_hz * kLineBytes, aes_bytes_per_s);

    const std::uint64_t channel_bytes_per_transfer = config.bus_width_bits / config.channels / 8;
    const std::uint64_t channel_bytes_per_s =
        std::uint64_t{config.dram_data_rate_mts} * 1'000'000 * channel_bytes_per_transfer;
    t.dram_service_cycles = ceil_div(kLineBytes * core_hz, channel_bytes_per_s);
    if (t.aes_interval_cycles == 0 || t.dram_service_cycles == 0)
        throw InvariantError("derived timing degenerate");
    return t;
}

namespace {

// Per-run mutable machine state.
struct Machine {
    const SimConfig& cfg;
    DerivedTiming timing;
    CacheSim l2;
    std::vector<CacheSim> counter_caches;
    std::vector<std::uint64_t> chan_free;
    std::vector<std::uint64_t> aes_free;
    std::vector<std::uint64_t> chan_busy;
    std::priority_queue<std::uint64_t, std::vector<std::uint64_t>, std::greater<>> window;
    Metrics m;

    explicit Machine(const SimConfig& config)
        : cfg(config),
          timing(derive_timing(config)),
          l2(config.l2),
          chan_free(config.channels, 0),
          aes_free(config.channels, 0),
          chan_busy(config.channels, 0) {
        if (cfg.scheme == CipherMode::CounterMode) {
            CacheGeometry per = cfg.counter_cache;
            per.bytes = cfg.counter_cache.bytes / cfg.channels;
            for (std::uint32_t c = 0; c < cfg.channels; ++c)
                counter_caches.emplace_back(per);
        }
    }

    // Hashed block interleaving: strided sweeps (kernel-row chunks) spread
    // across every controller instead of camping on a stride-aliased few,
    // and one counter group never straddles controllers at the default
    // interleave of 16 lines.
    std::uint32_t channel_of(std::uint64_t address) const {
        std::uint64_t block = address / kLineBytes / cfg.channel_interleave_lines;
        block ^= block >> 30;
        block *= 0xbf58476d1ce4e5b9ULL;
        block ^= block >> 27;
        block *= 0x94d049bb133111ebULL;
        block ^= block >> 31;
        return static_cast<std::uint32_t>(block % cfg.channels);
    }

    static std::uint64_t counter_line_address(std::uint64_t data_address) {
        return kCounterRegionBase +
               (data_address / kLineBytes / kCountersPerLine) * kLineBytes;
    }

    // FCFS channel occupancy; returns the data arrival time.
    std::uint64_t dram_read(std::uint32_t ch, std::uint64_t ready) {
        const std::uint64_t start = std::max(chan_free[ch], ready);
        chan_free[ch] = start + timing.dram_service_cycles;
        chan_busy[ch] += timing.dram_service_cycles;
        return chan_free[ch] + cfg.dram_fixed_latency_cycles;
    }

    // Posted write; only occupies the channel.
    void dram_write(std::uint32_t ch, std::uint64_t ready) {
        const std::uint64_t start = std::max(chan_free[ch], ready);
        chan_free[ch] = start + timing.dram_service_cycles;
        chan_busy[ch] += timing.dram_service_cycles;
    }

    // Reserves one slot of the AES pipeline; returns when its output is ready.
    std::uint64_t aes_job(std::uint32_t ch, std::uint64_t ready) {
        const std::uint64_t start = std::max(aes_free[ch], ready);
        aes_free[ch] = start + timing.aes_interval_cycles;
        m.aes_busy_cycles += timing.aes_interval_cycles;
        return start + cfg.aes_latency_cycles;
    }

    // Dirty data line leaving the L2.
    void write_back(std::uint64_t address, bool encrypted, std::uint64_t at) {
        const std::uint32_t ch = channel_of(address);
        const bool enc = cfg.scheme != CipherMode::None && encrypted;
        if (!enc) {
            dram_write(ch, at);
            m.data_writes_plain += 1;
            return;
        }
        m.data_writes_enc += 1;
        switch (cfg.scheme) {
            case CipherMode::Direct: {
                const std::uint64_t done = aes_job(ch, at);
                dram_write(ch, done);
                break;
            }
            case CipherMode::CounterMode: {
                const std::uint64_t ctr_at = counter_access(ch, address, at, true);
                const std::uint64_t done = aes_job(ch, ctr_at);
                dram_write(ch, done);
                break;
            }
            case CipherMode::ColoE: {
                // Counter rides in the line's sidecar; bump and encrypt.
                const std::uint64_t done = aes_job(ch, at);
                dram_write(ch, done);
                break;
            }
            default:
                break;
        }
    }

    // CounterMode helper: probe this controller's counter cache, fetching
    // the counter line on a miss. `dirtying` marks a write-path increment.
    std::uint64_t counter_access(std::uint32_t ch, std::uint64_t data_address,
                                 std::uint64_t at, bool dirtying) {
        const std::uint64_t ctr_addr = counter_line_address(data_address);
        const CacheSim::AccessResult res =
            counter_caches[ch].access(ctr_addr, dirtying);
        if (res.evicted_dirty) {
            m.counter_writes += 1;
            dram_write(ch, at);
        }
        if (res.hit) {
            m.counter_cache_hits += 1;
            return at;
        }
        m.counter_cache_misses += 1;
        m.counter_reads += 1;
        return dram_read(ch, at);
    }
};

}  // namespace

Metrics simulate(const InferenceTrace& trace, const SimConfig& config) {
    Machine mc(config);
    Metrics& m = mc.m;
    const std::uint64_t window_cap =
        std::uint64_t{config.max_outstanding} * config.channels;

    std::uint64_t now = 0;
    std::uint64_t issue_t = 0;

    for (const LayerTrace& lt : trace) {
        const std::uint64_t layer_start = now;
        issue_t = std::max(issue_t, layer_start);
        std::uint64_t layer_last = layer_start;

        for (const MemoryRequest& q : lt.requests) {
            while (mc.window.size() >= window_cap) {
                issue_t = std::max(issue_t, mc.window.top());
                mc.window.pop();
            }
            const std::uint64_t t = issue_t;
            issue_t += 1;

            const bool enc =
                config.scheme != CipherMode::None && (!config.se_enabled || q.encrypted);
            const bool is_write = q.op == RequestOp::Write;

            const CacheSim::AccessResult l2res = mc.l2.access(q.address, is_write, enc);
            std::uint64_t completion;
            if (l2res.hit) {
                completion = t + config.l2_hit_latency_cycles;
            } else {
                if (l2res.evicted_dirty)
                    mc.write_back(l2res.evicted_address, l2res.evicted_flag, t);

                // Write-allocate: the miss fills the line from DRAM either way.
                const std::uint32_t ch = mc.channel_of(q.address);
                if (enc) m.data_reads_enc += 1; else m.data_reads_plain += 1;

                const std::uint64_t data_at = mc.dram_read(ch, t);
                if (!enc) {
                    completion = data_at;
                } else {
                    switch (config.scheme) {
                        case CipherMode::Direct: {
                            // Decryption sits on the critical path.
                            completion = mc.aes_job(ch, data_at);
                            break;
                        }
                        case CipherMode::CounterMode: {
                            const std::uint64_t ctr_at =
                                mc.counter_access(ch, q.address, t, false);
                            const std::uint64_t otp_ready = mc.aes_job(ch, ctr_at);
                            completion = std::max(data_at, otp_ready) + 1;
                            break;
                        }
                        case CipherMode::ColoE: {
                            // Pad generation overlaps the read; only the XOR
                            // lands on the critical path.
                            const std::uint64_t otp_ready = mc.aes_job(ch, t);
                            completion = std::max(data_at, otp_ready) + 1;
                            break;
                        }
                        default:
                            completion = data_at;
                            break;
                    }
                    m.aes_stall_cycles += completion - data_at;
                }
            }
            mc.window.push(completion);
            layer_last = std::max(layer_last, completion);
        }

        const std::uint64_t layer_mem = layer_last - layer_start;
        const std::uint64_t layer_compute =
            ceil_div(lt.compute_macs, config.macs_per_cycle);
        m.compute_cycles += layer_compute;
        now = layer_start + std::max(layer_mem, layer_compute);
        issue_t = std::max(issue_t, now);
    }

    std::uint64_t total = now;
    for (std::uint32_t c = 0; c < config.channels; ++c) {
        total = std::max(total, mc.chan_free[c]);
        total = std::max(total, mc.aes_free[c]);
        m.channel_busy_cycles += mc.chan_busy[c];
    }
    m.total_cycles = total;
    m.l2_hits = mc.l2.hits();
    m.l2_misses = mc.l2.misses();
    return m;
}

SimConfig load_sim_config(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw InvariantError(std::string("bad sim config: ") + e.what());
    }
    SimConfig c;
    c.core_clock_mhz = doc.value("core_clock_mhz", c.core_clock_mhz);
    c.channels = doc.value("channels", c.channels);
    c.bus_width_bits = doc.value("bus_width_bits", c.bus_width_bits);
    c.dram_data_rate_mts = doc.value("dram_data_rate_mts", c.dram_data_rate_mts);
    if (doc.contains("l2")) {
        const auto& j = doc["l2"];
        c.l2.bytes = j.value("bytes", c.l2.bytes);
        c.l2.ways = j.value("ways", c.l2.ways);
        c.l2.line = j.value("line", c.l2.line);
        c.l2_hit_latency_cycles = j.value("hit_latency_cycles", c.l2_hit_latency_cycles);
    }
    if (doc.contains("counter_cache")) {
        const auto& j = doc["counter_cache"];
        c.counter_cache.bytes = j.value("bytes", c.counter_cache.bytes);
        c.counter_cache.ways = j.value("ways", c.counter_cache.ways);
        c.counter_cache.line = j.value("line", c.counter_cache.line);
    }
    if (doc.contains("aes")) {
        const auto& j = doc["aes"];
        c.aes_latency_cycles = j.value("latency_cycles", c.aes_latency_cycles);
        c.aes_bandwidth_gb_s = j.value("bandwidth_gb_s", c.aes_bandwidth_gb_s);
    }
    c.max_outstanding = doc.value("max_outstanding", c.max_outstanding);
    c.channel_interleave_lines =
        doc.value("channel_interleave_lines", c.channel_interleave_lines);
    c.macs_per_cycle = doc.value("macs_per_cycle", c.macs_per_cycle);
    c.dram_fixed_latency_cycles =
        doc.value("dram_fixed_latency_cycles", c.dram_fixed_latency_cycles);
    return c;
}

std::string dump_sim_config(const SimConfig& c) {
    nlohmann::json doc;
    doc["core_clock_mhz"] = c.core_clock_mhz;
    doc["channels"] = c.channels;
    doc["bus_width_bits"] = c.bus_width_bits;
    doc["dram_data_rate_mts"] = c.dram_data_rate_mts;
    doc["l2"] = {{"bytes", c.l2.bytes},
                 {"ways", c.l2.ways},
                 {"line", c.l2.line},
                 {"hit_latency_cycles", c.l2_hit_latency_cycles}};
    doc["counter_cache"] = {{"bytes", c.counter_cache.bytes},
                            {"ways", c.counter_cache.ways},
                            {"line", c.counter_cache.line}};
    doc["aes"] = {{"latency_cycles", c.aes_latency_cycles},
                  {"bandwidth_gb_s", c.aes_bandwidth_gb_s}};
    doc["max_outstanding"] = c.max_outstanding;
    doc["channel_interleave_lines"] = c.channel_interleave_lines;
    doc["macs_per_cycle"] = c.macs_per_cycle;
    doc["dram_fixed_latency_cycles"] = c.dram_fixed_latency_cycles;
    return doc.dump(2);
}

}  // namespace seal
