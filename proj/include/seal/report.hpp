#pragma once

#include <string>
#include <vector>

#include "seal/memsim.hpp"
#include "seal/planner.hpp"
#include "seal/trace.hpp"

namespace seal {

struct SchemeConfig {
    CipherMode mode = CipherMode::None;
    bool se = false;
};

std::string scheme_label(const SchemeConfig& s);
SchemeConfig scheme_from_label(const std::string& label);

struct ExperimentSpec {
    std::vector<Preset> presets;
    std::vector<std::uint32_t> scales;
    std::vector<double> ratios;
    std::vector<SchemeConfig> schemes;
    BoundaryPolicy policy = BoundaryPolicy::PaperDefault;
    std::uint64_t seed = 7;
    std::string output_dir;  // empty: do not write runs.csv
    SimConfig base_config;
    TilingConfig tiling;
};

struct RunRecord {
    std::string preset;
    std::uint32_t scale = 0;
    std::string scheme;  // label, e.g. "coloe+se"
    double ratio = 0.0;
    std::uint64_t seed = 0;
    Metrics metrics;
};

// One simulation per (preset, scale, scheme[, ratio]) cell; a baseline cell
// is added per preset/scale when the scheme list lacks one. Writes
// runs.csv under output_dir when set.
std::vector<RunRecord> run_matrix(const ExperimentSpec& spec);

std::string runs_csv_header();
std::string run_record_csv_row(const RunRecord& r);
void write_runs_csv(const std::vector<RunRecord>& runs, const std::string& path);
std::vector<RunRecord> read_runs_csv(const std::string& path);

struct ComparisonRow {
    std::string preset;
    std::uint32_t scale = 0;
    std::string scheme;
    double ratio = 0.0;
    double normalized_perf = 0.0;     // baseline cycles / scheme cycles
    double normalized_latency = 0.0;  // scheme cycles / baseline cycles
    double norm_data_accesses = 0.0;
    double norm_encrypted_accesses = 0.0;
    double norm_counter_accesses = 0.0;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
};

// Normalizes every run against its (preset, scale) baseline row.
ComparisonTable build_table(const std::vector<RunRecord>& runs);

void write_table_csv(const ComparisonTable& table, const std::string& path);
void write_table_dat(const ComparisonTable& table, const std::string& path);
std::string render_table_text(const ComparisonTable& table);

}  // namespace seal
