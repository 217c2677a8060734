#include "seal/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace seal {

namespace {

std::string fmt_fixed(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string scheme_label(const SchemeConfig& s) {
    std::string label = cipher_mode_name(s.mode);
    if (s.se && s.mode != CipherMode::None) label += "+se";
    return label;
}

SchemeConfig scheme_from_label(const std::string& label) {
    SchemeConfig s;
    std::string mode = label;
    if (const auto pos = label.rfind("+se"); pos != std::string::npos &&
                                             pos + 3 == label.size()) {
        s.se = true;
        mode = label.substr(0, pos);
    }
    s.mode = cipher_mode_from_name(mode);
    return s;
}

std::vector<RunRecord> run_matrix(const ExperimentSpec& spec) {
    if (spec.presets.empty() || spec.scales.empty() || spec.schemes.empty() ||
        spec.ratios.empty())
        throw InvariantError("experiment spec lists must be non-empty");
    for (double r : spec.ratios)
        if (!(r >= 0.0 && r <= 1.0)) throw InvariantError("ratio out of range");

    bool has_baseline = false;
    for (const SchemeConfig& s : spec.schemes)
        if (s.mode == CipherMode::None) has_baseline = true;
    std::vector<SchemeConfig> schemes = spec.schemes;
    if (!has_baseline) schemes.insert(schemes.begin(), SchemeConfig{});

    std::vector<RunRecord> runs;
    for (Preset preset : spec.presets) {
        for (std::uint32_t scale : spec.scales) {
            const Model model = generate_synthetic(preset, scale, spec.seed);

            // Traces differ across ratios only in their encryption flags;
            // runs that ignore the flags reuse the first ratio's trace.
            std::map<double, InferenceTrace> traces;
            auto trace_for = [&](double ratio) -> const InferenceTrace& {
                auto it = traces.find(ratio);
                if (it == traces.end()) {
                    EncryptionPlan plan = build_plan(model, ratio, spec.policy);
                    it = traces.emplace(ratio,
                                        gen_inference_trace(model, plan, spec.tiling))
                             .first;
                }
                return it->second;
            };

            for (const SchemeConfig& scheme : schemes) {
                std::vector<double> ratios;
                if (scheme.mode == CipherMode::None)
                    ratios = {0.0};
                else if (scheme.se)
                    ratios = spec.ratios;
                else
                    ratios = {1.0};

                for (double ratio : ratios) {
                    const double trace_ratio =
                        (scheme.mode != CipherMode::None && scheme.se) ? ratio
                                                                       : spec.ratios.front();
                    SimConfig cfg = spec.base_config;
                    cfg.scheme = scheme.mode;
                    cfg.se_enabled = scheme.se;
                    RunRecord rec;
                    rec.preset = preset_name(preset);
                    rec.scale = scale;
                    rec.scheme = scheme_label(scheme);
                    rec.ratio = ratio;
                    rec.seed = spec.seed;
                    rec.metrics = simulate(trace_for(trace_ratio), cfg);
                    runs.push_back(std::move(rec));
                }
            }
        }
    }

    if (!spec.output_dir.empty()) {
        std::filesystem::create_directories(spec.output_dir);
        write_runs_csv(runs, spec.output_dir + "/runs.csv");
    }
    return runs;
}

std::string runs_csv_header() {
    return "preset,scale,scheme,ratio,seed,total_cycles,compute_cycles,"
           "data_reads_enc,data_reads_plain,data_writes_enc,data_writes_plain,"
           "counter_reads,counter_writes,l2_hits,l2_misses,"
           "counter_cache_hits,counter_cache_misses,aes_busy_cycles,"
           "aes_stall_cycles,channel_busy_cycles,latency_proxy,normalized_perf";
}

std::string run_record_csv_row(const RunRecord& r) {
    const Metrics& m = r.metrics;
    std::ostringstream os;
    os << r.preset << ',' << r.scale << ',' << r.scheme << ','
       << fmt_fixed(r.ratio, 4) << ',' << r.seed << ',' << m.total_cycles << ','
       << m.compute_cycles << ',' << m.data_reads_enc << ',' << m.data_reads_plain
       << ',' << m.data_writes_enc << ',' << m.data_writes_plain << ','
       << m.counter_reads << ',' << m.counter_writes << ',' << m.l2_hits << ','
       << m.l2_misses << ',' << m.counter_cache_hits << ','
       << m.counter_cache_misses << ',' << m.aes_busy_cycles << ','
       << m.aes_stall_cycles << ',' << m.channel_busy_cycles << ','
       << m.latency_proxy() << ','
       << fmt_fixed(m.normalized_perf, 6);
    return os.str();
}

void write_runs_csv(const std::vector<RunRecord>& runs, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << runs_csv_header() << '\n';
    for (const RunRecord& r : runs) f << run_record_csv_row(r) << '\n';
    if (!f) throw IoError("write failed: " + path);
}

std::vector<RunRecord> read_runs_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty csv: " + path);
    if (line != runs_csv_header())
        throw IoError("unexpected csv header in " + path);
    std::vector<RunRecord> runs;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split_csv_line(line);
        if (cols.size() != 22) throw IoError("bad csv row in " + path);
        RunRecord r;
        std::size_t i = 0;
        r.preset = cols[i++];
        r.scale = static_cast<std::uint32_t>(std::stoul(cols[i++]));
        r.scheme = cols[i++];
        r.ratio = std::stod(cols[i++]);
        r.seed = std::stoull(cols[i++]);
        Metrics& m = r.metrics;
        m.total_cycles = std::stoull(cols[i++]);
        m.compute_cycles = std::stoull(cols[i++]);
        m.data_reads_enc = std::stoull(cols[i++]);
        m.data_reads_plain = std::stoull(cols[i++]);
        m.data_writes_enc = std::stoull(cols[i++]);
        m.data_writes_plain = std::stoull(cols[i++]);
        m.counter_reads = std::stoull(cols[i++]);
        m.counter_writes = std::stoull(cols[i++]);
        m.l2_hits = std::stoull(cols[i++]);
        m.l2_misses = std::stoull(cols[i++]);
        m.counter_cache_hits = std::stoull(cols[i++]);
        m.counter_cache_misses = std::stoull(cols[i++]);
        m.aes_busy_cycles = std::stoull(cols[i++]);
        m.aes_stall_cycles = std::stoull(cols[i++]);
        m.channel_busy_cycles = std::stoull(cols[i++]);
        i++;  // latency_proxy mirrors total_cycles
        m.normalized_perf = std::stod(cols[i++]);
        runs.push_back(std::move(r));
    }
    return runs;
}

ComparisonTable build_table(const std::vector<RunRecord>& runs) {
    std::map<std::pair<std::string, std::uint32_t>, const RunRecord*> baselines;
    for (const RunRecord& r : runs)
        if (r.scheme == "none") baselines[{r.preset, r.scale}] = &r;

    ComparisonTable table;
    for (const RunRecord& r : runs) {
        auto it = baselines.find({r.preset, r.scale});
        if (it == baselines.end())
            throw InvariantError("missing baseline for preset " + r.preset);
        const Metrics& base = it->second->metrics;
        const Metrics& m = r.metrics;
        if (base.total_cycles == 0 || base.data_accesses() == 0)
            throw InvariantError("degenerate baseline for preset " + r.preset);
        ComparisonRow row;
        row.preset = r.preset;
        row.scale = r.scale;
        row.scheme = r.scheme;
        row.ratio = r.ratio;
        row.normalized_perf = static_cast<double>(base.total_cycles) /
                              static_cast<double>(m.total_cycles);
        row.normalized_latency = static_cast<double>(m.total_cycles) /
                                 static_cast<double>(base.total_cycles);
        row.norm_data_accesses = static_cast<double>(m.data_accesses()) /
                                 static_cast<double>(base.data_accesses());
        row.norm_encrypted_accesses = static_cast<double>(m.encrypted_data_accesses()) /
                                      static_cast<double>(base.data_accesses());
        row.norm_counter_accesses = static_cast<double>(m.counter_accesses()) /
                                    static_cast<double>(base.data_accesses());
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

const char* kTableHeader =
    "preset,scale,scheme,ratio,normalized_perf,normalized_latency,"
    "norm_data_accesses,norm_encrypted_accesses,norm_counter_accesses";

std::string table_row_fields(const ComparisonRow& r, char sep) {
    std::ostringstream os;
    os << r.preset << sep << r.scale << sep << r.scheme << sep
       << fmt_fixed(r.ratio, 4) << sep << fmt_fixed(r.normalized_perf, 6) << sep
       << fmt_fixed(r.normalized_latency, 6) << sep
       << fmt_fixed(r.norm_data_accesses, 6) << sep
       << fmt_fixed(r.norm_encrypted_accesses, 6) << sep
       << fmt_fixed(r.norm_counter_accesses, 6);
    return os.str();
}

}  // namespace

void write_table_csv(const ComparisonTable& table, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << kTableHeader << '\n';
    for (const ComparisonRow& r : table.rows) f << table_row_fields(r, ',') << '\n';
    if (!f) throw IoError("write failed: " + path);
}

void write_table_dat(const ComparisonTable& table, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "# " << kTableHeader << '\n';
    for (const ComparisonRow& r : table.rows) f << table_row_fields(r, ' ') << '\n';
    if (!f) throw IoError("write failed: " + path);
}

std::string render_table_text(const ComparisonTable& table) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s %-5s %-11s %-6s %10s %10s %10s %10s %10s\n",
                  "preset", "scale", "scheme", "ratio", "perf", "latency", "data",
                  "enc", "counter");
    os << buf;
    for (const ComparisonRow& r : table.rows) {
        std::snprintf(buf, sizeof buf,
                      "%-14s %-5u %-11s %-6.2f %10.4f %10.4f %10.4f %10.4f %10.4f\n",
                      r.preset.c_str(), r.scale, r.scheme.c_str(), r.ratio,
                      r.normalized_perf, r.normalized_latency, r.norm_data_accesses,
                      r.norm_encrypted_accesses, r.norm_counter_accesses);
        os << buf;
    }
    return os.str();
}

}  // namespace seal
