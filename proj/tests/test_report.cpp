#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "seal/report.hpp"

using namespace seal;

namespace {

ExperimentSpec small_spec() {
    ExperimentSpec spec;
    spec.presets = {Preset::Toy};
    spec.scales = {56};
    spec.ratios = {0.5};
    spec.schemes = {{CipherMode::None, false}, {CipherMode::ColoE, true}};
    spec.seed = 7;
    return spec;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("scheme labels round trip") {
    for (const char* label : {"none", "direct", "counter", "coloe", "direct+se",
                              "counter+se", "coloe+se"}) {
        CHECK(scheme_label(scheme_from_label(label)) == label);
    }
    CHECK_THROWS_AS(scheme_from_label("rot13"), InvariantError);
}

TEST_CASE("matrix: cell counts") {
    const auto runs = run_matrix(small_spec());
    CHECK(runs.size() == 2);
    CHECK(runs[0].scheme == "none");
    CHECK(runs[1].scheme == "coloe+se");

    ExperimentSpec full = small_spec();
    full.presets = {Preset::Toy, Preset::Vgg16Like, Preset::Resnet18Like};
    full.scales = {56};
    full.schemes = {{CipherMode::None, false},       {CipherMode::Direct, false},
                    {CipherMode::CounterMode, false}, {CipherMode::Direct, true},
                    {CipherMode::CounterMode, true},  {CipherMode::ColoE, true}};
    CHECK(run_matrix(full).size() == 18);
}

TEST_CASE("matrix: baseline cell is added when missing") {
    ExperimentSpec spec = small_spec();
    spec.schemes = {{CipherMode::ColoE, true}};
    const auto runs = run_matrix(spec);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0].scheme == "none");
}

TEST_CASE("matrix: invalid specs are rejected") {
    ExperimentSpec spec = small_spec();
    spec.presets.clear();
    CHECK_THROWS_AS(run_matrix(spec), InvariantError);
    spec = small_spec();
    spec.ratios = {1.25};
    CHECK_THROWS_AS(run_matrix(spec), InvariantError);
}

TEST_CASE("matrix reruns are byte-identical") {
    ExperimentSpec spec = small_spec();
    spec.output_dir = "report_test_a";
    run_matrix(spec);
    spec.output_dir = "report_test_b";
    run_matrix(spec);
    CHECK(slurp("report_test_a/runs.csv") == slurp("report_test_b/runs.csv"));
    std::filesystem::remove_all("report_test_a");
    std::filesystem::remove_all("report_test_b");
}

TEST_CASE("runs csv round trip") {
    const auto runs = run_matrix(small_spec());
    write_runs_csv(runs, "report_test_rt.csv");
    const auto back = read_runs_csv("report_test_rt.csv");
    REQUIRE(back.size() == runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        CHECK(back[i].preset == runs[i].preset);
        CHECK(back[i].scheme == runs[i].scheme);
        CHECK(back[i].metrics.total_cycles == runs[i].metrics.total_cycles);
        CHECK(back[i].metrics.counter_reads == runs[i].metrics.counter_reads);
    }
    std::remove("report_test_rt.csv");
}

TEST_CASE("table: baseline normalizes to exactly 1.0, coloe counters to 0.0") {
    ExperimentSpec spec = small_spec();
    spec.presets = {Preset::Toy, Preset::Vgg16Like};
    spec.scales = {56};
    spec.schemes = {{CipherMode::None, false},
                    {CipherMode::Direct, false},
                    {CipherMode::ColoE, true}};
    const ComparisonTable table = build_table(run_matrix(spec));
    for (const auto& row : table.rows) {
        if (row.scheme == "none") {
            CHECK(row.normalized_perf == 1.0);
            CHECK(row.normalized_latency == 1.0);
            CHECK(row.norm_data_accesses == 1.0);
        }
        if (row.scheme == "coloe+se") CHECK(row.norm_counter_accesses == 0.0);
        if (row.scheme == "direct") CHECK(row.normalized_perf < 1.0);
        CHECK(std::isfinite(row.normalized_perf));
        CHECK(row.normalized_perf > 0.0);
    }
}

TEST_CASE("table: missing baseline is an error") {
    auto runs = run_matrix(small_spec());
    runs.erase(runs.begin());  // drop the baseline row
    CHECK_THROWS_WITH_AS(build_table(runs), doctest::Contains("missing baseline"),
                         InvariantError);
}

TEST_CASE("table renders to csv, dat and text") {
    const ComparisonTable table = build_table(run_matrix(small_spec()));
    write_table_csv(table, "report_test_table.csv");
    write_table_dat(table, "report_test_table.dat");
    const std::string text = render_table_text(table);
    CHECK(text.find("coloe+se") != std::string::npos);
    CHECK(slurp("report_test_table.csv").find("toy") != std::string::npos);
    CHECK(slurp("report_test_table.dat").front() == '#');
    std::remove("report_test_table.csv");
    std::remove("report_test_table.dat");
}
