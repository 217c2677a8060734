// seal-sim: plan/simulate/matrix/report/analyze driver around libsealcore.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "seal/report.hpp"

using namespace seal;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::vector<std::uint8_t> read_blob(const std::string& path) {
    const std::string s = read_file(path);
    return {s.begin(), s.end()};
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << content;
    if (!f) throw IoError("write failed: " + path);
}

std::string default_out_dir() {
    const char* env = std::getenv("SEAL_OUT_DIR");
    return env ? env : "out";
}

struct ModelArgs {
    std::string preset = "vgg16-like";
    std::uint32_t scale = 4;
    std::uint64_t seed = 7;
    std::string descriptor_path;
    std::string weights_path;

    Model build() const {
        if (!descriptor_path.empty())
            return load_model(read_file(descriptor_path), read_blob(weights_path));
        return generate_synthetic(preset_from_name(preset), scale, seed);
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "synthetic model preset")
            ->check(CLI::IsMember({"vgg16-like", "resnet18-like", "resnet34-like", "toy"}));
        cmd->add_option("--scale", scale, "divisor for the 224-pixel input");
        cmd->add_option("--seed", seed, "weight/experiment seed");
        cmd->add_option("--model", descriptor_path, "model descriptor JSON");
        cmd->add_option("--weights", weights_path, "weight blob (little-endian f32)")
            ->needs(cmd->get_option("--model"));
    }
};

SimConfig config_from(const std::string& path) {
    return path.empty() ? SimConfig{} : load_sim_config(read_file(path));
}

int cmd_plan(const ModelArgs& margs, double ratio, const std::string& policy,
             const std::string& out) {
    const Model model = margs.build();
    const EncryptionPlan plan =
        build_plan(model, ratio, boundary_policy_from_name(policy));
    const ClosureReport rep = verify_closure(model, plan);
    write_file(out, dump_plan(plan));
    std::cout << "plan written to " << out << "\nclosure ok: " << (rep.ok ? "true" : "false")
              << "\n";
    for (const auto& v : rep.violations)
        std::cout << "violation: layer " << v.layer_id << " row " << v.row << " channel "
                  << v.channel << " (" << v.reason << ")\n";
    return rep.ok ? 0 : 2;
}

int cmd_simulate(const ModelArgs& margs, double ratio, const std::string& policy,
                 const std::string& scheme_label_str, bool se_flag,
                 const std::string& config_path, const std::string& out,
                 const std::string& trace_dump) {
    const Model model = margs.build();
    const EncryptionPlan plan =
        build_plan(model, ratio, boundary_policy_from_name(policy));
    const InferenceTrace trace = gen_inference_trace(model, plan, {});
    if (!trace_dump.empty()) write_trace_dump(trace, trace_dump);

    SchemeConfig scheme = scheme_from_label(scheme_label_str);
    scheme.se = scheme.se || se_flag;
    SimConfig cfg = config_from(config_path);
    cfg.scheme = scheme.mode;
    cfg.se_enabled = scheme.se;

    RunRecord rec;
    rec.preset = model.name;
    rec.scale = margs.scale;
    rec.scheme = scheme_label(scheme);
    rec.ratio = ratio;
    rec.seed = margs.seed;
    rec.metrics = simulate(trace, cfg);

    std::cout << runs_csv_header() << '\n' << run_record_csv_row(rec) << '\n';
    if (!out.empty()) write_runs_csv({rec}, out);
    return 0;
}

int cmd_matrix(const std::vector<std::string>& presets,
               const std::vector<std::uint32_t>& scales,
               const std::vector<double>& ratios,
               const std::vector<std::string>& schemes, const std::string& policy,
               std::uint64_t seed, const std::string& config_path,
               const std::string& out_dir) {
    ExperimentSpec spec;
    for (const auto& p : presets) spec.presets.push_back(preset_from_name(p));
    spec.scales = scales;
    spec.ratios = ratios;
    for (const auto& s : schemes) spec.schemes.push_back(scheme_from_label(s));
    spec.policy = boundary_policy_from_name(policy);
    spec.seed = seed;
    spec.base_config = config_from(config_path);
    spec.output_dir = out_dir;
    const auto runs = run_matrix(spec);
    std::cout << "wrote " << runs.size() << " runs to " << out_dir << "/runs.csv\n";
    return 0;
}

int cmd_report(const std::string& in, const std::string& out_dir) {
    const auto runs = read_runs_csv(in);
    const ComparisonTable table = build_table(runs);
    std::filesystem::create_directories(out_dir);
    write_table_csv(table, out_dir + "/table.csv");
    write_table_dat(table, out_dir + "/table.dat");
    std::cout << render_table_text(table);
    return 0;
}

int cmd_analyze(const std::vector<std::uint32_t>& channels, std::uint32_t height,
                std::uint32_t width, std::uint64_t seed, double ratio, bool rows_only,
                const std::string& drop_channel, std::int64_t drop_edge) {
    const Model model = make_matrix_chain(channels, height, width, seed);
    EncryptionPlan plan = build_plan(model, ratio, BoundaryPolicy::None);
    if (rows_only)
        for (auto& [e, ep] : plan.edges) ep.channels.clear();
    if (drop_edge >= 0) plan.edges.at(static_cast<std::uint32_t>(drop_edge)).channels.clear();
    if (!drop_channel.empty()) {
        std::string arg = drop_channel;
        if (arg.front() == 'L' || arg.front() == 'l') arg.erase(0, 1);
        const auto colon = arg.find(':');
        std::uint32_t layer = 0;
        std::uint32_t chan = 0;
        try {
            if (colon == std::string::npos) throw std::invalid_argument("no colon");
            layer = static_cast<std::uint32_t>(std::stoul(arg.substr(0, colon)));
            chan = static_cast<std::uint32_t>(std::stoul(arg.substr(colon + 1)));
        } catch (const std::exception&) {
            throw InvariantError("--drop-channel expects LAYER:CHANNEL, e.g. L3:0");
        }
        if (layer == 0) throw InvariantError("layer 0 consumes no feature map");
        auto& chans = plan.edges.at(layer - 1).channels;
        std::erase(chans, chan);
    }

    const ClosureReport rep = verify_closure(model, plan);
    std::cout << "closure ok: " << (rep.ok ? "true" : "false") << "\n";
    for (const auto& v : rep.violations)
        std::cout << "violation: layer " << v.layer_id << " row " << v.row << " channel "
                  << v.channel << " (" << v.reason << ")\n";

    const FeatureMap input =
        random_feature_map(channels.front(), height * width, seed ^ 0xabcdef);
    const AttackResult res =
        solvability_oracle(model, plan, forward_feature_maps(model, input));
    std::cout << "recoverable: " << (res.recoverable ? "true" : "false") << "\n";
    std::cout << "determined entries: " << res.determined_entries << "\n";
    for (const auto& [key, vals] : res.recovered_rows) {
        std::cout << "recovered layer " << key.first << " row " << key.second << ":";
        for (double v : vals) std::cout << ' ' << v;
        std::cout << '\n';
    }
    if (!res.degeneracy_note.empty())
        std::cout << "note: " << res.degeneracy_note << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SEAL-style secure DL accelerator memory-system simulator"};
    app.require_subcommand(1);

    ModelArgs plan_margs;
    double plan_ratio = 0.5;
    std::string plan_policy = "paper-default";
    std::string plan_out = "plan.json";
    auto* plan_cmd = app.add_subcommand("plan", "build and verify an encryption plan");
    plan_margs.attach(plan_cmd);
    plan_cmd->add_option("--ratio", plan_ratio, "encryption ratio in [0,1]");
    plan_cmd->add_option("--policy", plan_policy)
        ->check(CLI::IsMember({"paper-default", "none"}));
    plan_cmd->add_option("--out", plan_out, "plan JSON path");

    ModelArgs sim_margs;
    double sim_ratio = 0.5;
    std::string sim_policy = "paper-default";
    std::string sim_scheme = "none";
    bool sim_se = false;
    std::string sim_config;
    std::string sim_out;
    std::string sim_trace_dump;
    auto* sim_cmd = app.add_subcommand("simulate", "run one scheme over one model");
    sim_margs.attach(sim_cmd);
    sim_cmd->add_option("--ratio", sim_ratio);
    sim_cmd->add_option("--policy", sim_policy)
        ->check(CLI::IsMember({"paper-default", "none"}));
    sim_cmd->add_option("--scheme", sim_scheme,
                        "none|direct|counter|coloe, optionally with +se");
    sim_cmd->add_flag("--se", sim_se, "enable smart-encryption bypass");
    sim_cmd->add_option("--config", sim_config, "simulator config JSON");
    sim_cmd->add_option("--out", sim_out, "write a one-row runs CSV here");
    sim_cmd->add_option("--trace-dump", sim_trace_dump, "binary trace dump path");

    std::vector<std::string> mx_presets = {"vgg16-like"};
    std::vector<std::uint32_t> mx_scales = {4};
    std::vector<double> mx_ratios = {0.5};
    std::vector<std::string> mx_schemes = {"none",      "direct",     "counter",
                                           "direct+se", "counter+se", "coloe+se"};
    std::string mx_policy = "paper-default";
    std::uint64_t mx_seed = 7;
    std::string mx_config;
    std::string mx_out = default_out_dir();
    auto* mx_cmd = app.add_subcommand("matrix", "run a preset x scheme matrix");
    mx_cmd->add_option("--presets", mx_presets)->delimiter(',');
    mx_cmd->add_option("--scales", mx_scales)->delimiter(',');
    mx_cmd->add_option("--ratios", mx_ratios)->delimiter(',');
    mx_cmd->add_option("--schemes", mx_schemes)->delimiter(',');
    mx_cmd->add_option("--policy", mx_policy)
        ->check(CLI::IsMember({"paper-default", "none"}));
    mx_cmd->add_option("--seed", mx_seed);
    mx_cmd->add_option("--config", mx_config);
    mx_cmd->add_option("--out", mx_out, "output directory (default $SEAL_OUT_DIR or ./out)");

    std::string rp_in;
    std::string rp_out = default_out_dir();
    auto* rp_cmd = app.add_subcommand("report", "normalize runs against the baseline");
    rp_cmd->add_option("--in", rp_in, "runs.csv path")->required();
    rp_cmd->add_option("--out", rp_out, "output directory");

    std::vector<std::uint32_t> an_channels = {4, 4, 4};
    std::uint32_t an_height = 3;
    std::uint32_t an_width = 3;
    std::uint64_t an_seed = 11;
    double an_ratio = 0.5;
    bool an_rows_only = false;
    std::string an_drop_channel;
    std::int64_t an_drop_edge = -1;
    auto* an_cmd =
        app.add_subcommand("analyze", "closure check + algebraic attack on a 1x1 toy");
    an_cmd->add_option("--channels", an_channels, "channel widths of the conv chain")
        ->delimiter(',');
    an_cmd->add_option("--height", an_height);
    an_cmd->add_option("--width", an_width);
    an_cmd->add_option("--seed", an_seed);
    an_cmd->add_option("--ratio", an_ratio);
    an_cmd->add_flag("--rows-only", an_rows_only,
                     "encrypt rows but no feature-map channels");
    an_cmd->add_option("--drop-channel", an_drop_channel,
                       "LAYER:CHANNEL, un-encrypt one input channel");
    an_cmd->add_option("--drop-edge", an_drop_edge,
                       "un-encrypt every channel of one map");

    try {
        app.parse(argc, argv);
        if (*plan_cmd) return cmd_plan(plan_margs, plan_ratio, plan_policy, plan_out);
        if (*sim_cmd)
            return cmd_simulate(sim_margs, sim_ratio, sim_policy, sim_scheme, sim_se,
                                sim_config, sim_out, sim_trace_dump);
        if (*mx_cmd)
            return cmd_matrix(mx_presets, mx_scales, mx_ratios, mx_schemes, mx_policy,
                              mx_seed, mx_config, mx_out);
        if (*rp_cmd) return cmd_report(rp_in, rp_out);
        if (*an_cmd)
            return cmd_analyze(an_channels, an_height, an_width, an_seed, an_ratio,
                               an_rows_only, an_drop_channel, an_drop_edge);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 3;
    } catch (const InvariantError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
