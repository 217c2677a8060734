#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "seal/planner.hpp"

using namespace seal;

namespace {

KernelMatrix kernel_2x2(std::array<float, 4> w) {
    return KernelMatrix{2, 2, 1, 1, {w[0], w[1], w[2], w[3]}};
}

// Independent top-k: repeated argmax with the lowest-index tie break.
std::vector<std::uint32_t> topk_by_scan(const std::vector<double>& sums, std::size_t k) {
    std::vector<bool> taken(sums.size(), false);
    std::vector<std::uint32_t> out;
    for (std::size_t round = 0; round < k; ++round) {
        std::size_t best = sums.size();
        for (std::size_t i = 0; i < sums.size(); ++i) {
            if (taken[i]) continue;
            if (best == sums.size() || sums[i] > sums[best]) best = i;
        }
        taken[best] = true;
        out.push_back(static_cast<std::uint32_t>(best));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Eq-style two-conv chain with pinned rankings: row 0 tops the first kernel,
// row 1 tops the second.
Model eq_toy() {
    Model m = make_matrix_chain({2, 2, 2}, 2, 2, 99);
    m.layers[1].kernel->weights = {0.9f, 0.8f, 0.1f, 0.2f};
    m.layers[2].kernel->weights = {0.1f, 0.2f, 0.9f, 0.8f};
    return m;
}

EncryptionPlan strip_channels(EncryptionPlan plan) {
    for (auto& [e, ep] : plan.edges) ep.channels.clear();
    return plan;
}

const std::vector<std::uint32_t>& edge_channels(const EncryptionPlan& p, std::uint32_t e) {
    return p.edges.at(e).channels;
}

}  // namespace

TEST_CASE("row importance: hand-summed l1 values and ordering") {
    const auto r = row_importance(kernel_2x2({0.5f, -1.5f, 0.2f, 0.1f}));
    CHECK(r.row_sums[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(r.row_sums[1] == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(r.order == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("row importance: zero kernel and sign symmetry tie-break") {
    const auto zero = row_importance(kernel_2x2({0, 0, 0, 0}));
    CHECK(zero.order == std::vector<std::uint32_t>{0, 1});

    const auto tied = row_importance(kernel_2x2({1.f, -1.f, 1.f, 1.f}));
    CHECK(tied.row_sums[0] == 2.0);
    CHECK(tied.row_sums[1] == 2.0);
    CHECK(tied.order == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("top-k selection matches exhaustive scan on random kernels") {
    Rng rng(321);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<std::uint32_t>(2 + rng.next_below(7));  // <= 8
        const auto cols = static_cast<std::uint32_t>(1 + rng.next_below(4));
        KernelMatrix k{n, cols, 1, 1, {}};
        k.weights.resize(k.element_count());
        for (float& w : k.weights) w = static_cast<float>(rng.next_signed_unit());
        const auto r = row_importance(k);
        const std::size_t kk = 1 + rng.next_below(n);
        std::vector<std::uint32_t> top(r.order.begin(), r.order.begin() + kk);
        std::sort(top.begin(), top.end());
        CHECK(top == topk_by_scan(r.row_sums, kk));
    }
}

TEST_CASE("build_plan: ratio bounds and degenerate ratios") {
    const Model m = generate_synthetic(Preset::Toy, 28, 3);
    CHECK_THROWS_AS(build_plan(m, -0.1, BoundaryPolicy::None), InvariantError);
    CHECK_THROWS_AS(build_plan(m, 1.5, BoundaryPolicy::None), InvariantError);

    const EncryptionPlan none = build_plan(m, 0.0, BoundaryPolicy::None);
    for (const auto& [id, lp] : none.layers) CHECK(lp.encrypted_rows.empty());
    for (const auto& [e, ep] : none.edges) CHECK(ep.channels.empty());

    const EncryptionPlan full = build_plan(m, 1.0, BoundaryPolicy::None);
    for (const auto& [id, lp] : full.layers)
        CHECK(lp.encrypted_rows.size() == m.layers[id].kernel->n_in);
    for (const auto& [e, ep] : full.edges) {
        if (e + 2 == m.layers.size()) continue;  // output map stays observable
        CHECK(ep.channels.size() == m.layers[e].shape_out.channels);
    }
}

TEST_CASE("Eq-style toy: X0 and Y1 are the propagated channels") {
    const Model m = eq_toy();
    const EncryptionPlan plan = build_plan(m, 0.5, BoundaryPolicy::None);
    CHECK(plan.layers.at(1).encrypted_rows == std::vector<std::uint32_t>{0});
    CHECK(plan.layers.at(2).encrypted_rows == std::vector<std::uint32_t>{1});
    CHECK(edge_channels(plan, 0) == std::vector<std::uint32_t>{0});  // X0
    CHECK(edge_channels(plan, 1) == std::vector<std::uint32_t>{1});  // Y1
}

TEST_CASE("Eq-style toy extended: Z0 encrypted once a consumer demands it") {
    Model m = make_matrix_chain({2, 2, 2, 2}, 2, 2, 99);
    m.layers[1].kernel->weights = {0.9f, 0.8f, 0.1f, 0.2f};
    m.layers[2].kernel->weights = {0.1f, 0.2f, 0.9f, 0.8f};
    m.layers[3].kernel->weights = {0.7f, 0.7f, 0.1f, 0.1f};  // row 0 tops
    const EncryptionPlan plan = build_plan(m, 0.5, BoundaryPolicy::None);
    CHECK(edge_channels(plan, 2) == std::vector<std::uint32_t>{0});  // Z0
}

TEST_CASE("propagation: pools pass channel sets through unchanged") {
    const Model m = generate_synthetic(Preset::Vgg16Like, 28, 11);
    const EncryptionPlan plan = build_plan(m, 0.5, BoundaryPolicy::PaperDefault);
    for (const Layer& l : m.layers) {
        if (l.kind != LayerKind::Pool) continue;
        CHECK(edge_channels(plan, l.id - 1) == edge_channels(plan, l.id));
    }
    // Interior 64-channel conv at ratio 0.5 -> exactly 32 channels.
    for (const Layer& l : m.layers) {
        if (l.kind != LayerKind::Conv) continue;
        if (plan.layers.at(l.id).full_encrypt) continue;
        if (l.kernel->n_in == 64)
            CHECK(edge_channels(plan, l.id - 1).size() == 32);
    }
}

TEST_CASE("paper-default policy: boundary layers full, input/output maps plain") {
    const Model m = generate_synthetic(Preset::Vgg16Like, 28, 11);
    const EncryptionPlan plan = build_plan(m, 0.5, BoundaryPolicy::PaperDefault);
    std::vector<std::uint32_t> convs;
    for (const Layer& l : m.layers)
        if (l.kind == LayerKind::Conv) convs.push_back(l.id);
    CHECK(plan.layers.at(convs[0]).full_encrypt);
    CHECK(plan.layers.at(convs[1]).full_encrypt);
    CHECK(!plan.layers.at(convs[2]).full_encrypt);
    CHECK(plan.layers.at(convs.back()).full_encrypt);
    for (const Layer& l : m.layers)
        if (l.kind == LayerKind::FC) CHECK(plan.layers.at(l.id).full_encrypt);
    CHECK(edge_channels(plan, 0).empty());
    CHECK(edge_channels(plan, static_cast<std::uint32_t>(m.layers.size()) - 2).empty());
}

TEST_CASE("closure holds for generated plans on all presets and policies") {
    for (Preset p : {Preset::Toy, Preset::Vgg16Like, Preset::Resnet18Like,
                     Preset::Resnet34Like}) {
        const Model m = generate_synthetic(p, 28, 17);
        for (BoundaryPolicy policy : {BoundaryPolicy::PaperDefault, BoundaryPolicy::None}) {
            for (double ratio : {0.0, 0.3, 0.5, 1.0}) {
                const EncryptionPlan plan = build_plan(m, ratio, policy);
                const ClosureReport rep = verify_closure(m, plan);
                INFO(preset_name(p), " policy=", boundary_policy_name(policy),
                     " ratio=", ratio);
                CHECK(rep.ok);
                CHECK(rep.violations.empty());
            }
        }
    }
}

TEST_CASE("closure: dropping any encrypted channel breaks the plan") {
    Rng rng(5150);
    for (Preset p : {Preset::Vgg16Like, Preset::Resnet18Like}) {
        const Model m = generate_synthetic(p, 28, 23);
        const EncryptionPlan plan = build_plan(m, 0.5, BoundaryPolicy::PaperDefault);
        for (const auto& [e, ep] : plan.edges) {
            if (ep.channels.empty()) continue;
            EncryptionPlan broken = plan;
            auto& chans = broken.edges[e].channels;
            chans.erase(chans.begin() + static_cast<std::ptrdiff_t>(
                                             rng.next_below(chans.size())));
            const ClosureReport rep = verify_closure(m, broken);
            INFO(std::string(preset_name(p)), " edge ", e);
            CHECK(!rep.ok);
        }
    }
}

TEST_CASE("closure: hand-built single violation names the row and channel") {
    const Model m = eq_toy();
    EncryptionPlan plan = build_plan(m, 0.5, BoundaryPolicy::None);
    plan.edges[0].channels.clear();  // X0 no longer encrypted, rows untouched
    const ClosureReport rep = verify_closure(m, plan);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0].layer_id == 1);
    CHECK(rep.violations[0].row == 0);
    CHECK(rep.violations[0].channel == 0);
    CHECK(rep.violations[0].reason.find("output channel 0") != std::string::npos);
}

TEST_CASE("oracle: rows-only plan exposes every encrypted row exactly") {
    const Model m = eq_toy();
    const EncryptionPlan plan = strip_channels(build_plan(m, 0.5, BoundaryPolicy::None));
    const FeatureMap input = random_feature_map(2, 4, 777);
    const auto maps = forward_feature_maps(m, input);
    const AttackResult res = solvability_oracle(m, plan, maps);
    CHECK(res.recoverable);
    REQUIRE(res.recovered_rows.count({1, 0}) == 1);
    REQUIRE(res.recovered_rows.count({2, 1}) == 1);
    for (const auto& [key, vals] : res.recovered_rows) {
        const auto& [layer, row] = key;
        for (std::uint32_t j = 0; j < vals.size(); ++j) {
            const double truth = m.layers[layer].kernel->at(row, j, 0, 0);
            CHECK(std::abs(vals[j] - truth) <= 1e-6 * std::max(1.0, std::abs(truth)));
        }
    }
}

TEST_CASE("oracle: valid plans and all-encrypted plans are unsolvable") {
    const Model m = eq_toy();
    const FeatureMap input = random_feature_map(2, 4, 778);
    const auto maps = forward_feature_maps(m, input);

    const AttackResult valid =
        solvability_oracle(m, build_plan(m, 0.5, BoundaryPolicy::None), maps);
    CHECK(!valid.recoverable);
    CHECK(valid.recovered_rows.empty());

    const AttackResult all_enc =
        solvability_oracle(m, build_plan(m, 1.0, BoundaryPolicy::None), maps);
    CHECK(!all_enc.recoverable);
}

TEST_CASE("oracle: singular visible system reports degeneracy") {
    const Model m = make_matrix_chain({2, 2}, 2, 1, 4242);
    const EncryptionPlan plan = strip_channels(build_plan(m, 1.0, BoundaryPolicy::None));
    FeatureMap input;
    input.channels = 2;
    input.pixels = 2;
    input.values = {0.4, -0.7, 0.4, -0.7};  // duplicate pixels, rank 1
    const auto maps = forward_feature_maps(m, input);
    const AttackResult res = solvability_oracle(m, plan, maps);
    CHECK(!res.recoverable);
    CHECK(res.degeneracy_note.find("singular") != std::string::npos);
}

TEST_CASE("ratio monotonicity: row sets nest as the ratio grows") {
    const Model m = generate_synthetic(Preset::Vgg16Like, 28, 31);
    EncryptionPlan prev = build_plan(m, 0.1, BoundaryPolicy::PaperDefault);
    for (double ratio : {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
        const EncryptionPlan cur = build_plan(m, ratio, BoundaryPolicy::PaperDefault);
        for (const auto& [id, lp] : prev.layers) {
            const auto& wider = cur.layers.at(id).encrypted_rows;
            CHECK(std::includes(wider.begin(), wider.end(), lp.encrypted_rows.begin(),
                                lp.encrypted_rows.end()));
        }
        for (const auto& [e, ep] : prev.edges) {
            const auto& wider = cur.edges.at(e).channels;
            CHECK(std::includes(wider.begin(), wider.end(), ep.channels.begin(),
                                ep.channels.end()));
        }
        prev = cur;
    }
}

TEST_CASE("plans are deterministic and survive a JSON round trip") {
    const Model m = generate_synthetic(Preset::Resnet18Like, 28, 77);
    const EncryptionPlan a = build_plan(m, 0.5, BoundaryPolicy::PaperDefault);
    const EncryptionPlan b = build_plan(m, 0.5, BoundaryPolicy::PaperDefault);
    CHECK(dump_plan(a) == dump_plan(b));

    const EncryptionPlan back = load_plan(dump_plan(a));
    CHECK(dump_plan(back) == dump_plan(a));
    CHECK(back.ratio == a.ratio);
}
