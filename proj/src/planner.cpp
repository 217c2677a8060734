#include "seal/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <Eigen/Dense>

#include "json.hpp"

namespace seal {

namespace {

using nlohmann::json;

bool contains(const std::vector<std::uint32_t>& sorted, std::uint32_t v) {
    return std::binary_search(sorted.begin(), sorted.end(), v);
}

std::vector<std::uint32_t> set_symmetric_difference(
    const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    std::vector<std::uint32_t> out;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                  std::back_inserter(out));
    return out;
}

std::uint32_t encrypted_row_count(double ratio, std::uint32_t n) {
    if (ratio >= 1.0) return n;
    // The epsilon keeps grid ratios like 0.1 * 70 from rounding up to 8.
    const double raw = ratio * static_cast<double>(n) - 1e-9;
    if (raw <= 0.0) return 0;
    return std::min<std::uint32_t>(n, static_cast<std::uint32_t>(std::ceil(raw)));
}

std::vector<std::uint32_t> weight_layer_ids(const Model& model, bool convs_only) {
    std::vector<std::uint32_t> ids;
    for (const Layer& l : model.layers) {
        if (l.kind == LayerKind::Conv || (!convs_only && l.kind == LayerKind::FC))
            ids.push_back(l.id);
    }
    return ids;
}

// Edges carrying the (possibly pooled) input image: edge 0 and anything it
// reaches through Pool layers only.
std::vector<bool> input_derived_edges(const Model& model) {
    std::vector<bool> derived(model.layers.size() - 1, false);
    derived[0] = true;
    for (std::size_t i = 1; i + 1 < model.layers.size(); ++i) {
        if (model.layers[i].kind == LayerKind::Pool && derived[i - 1])
            derived[i] = true;
    }
    return derived;
}

}  // namespace

ImportanceRanking row_importance(const KernelMatrix& kernel, std::uint32_t layer_id) {
    if (kernel.element_count() == 0) throw InvariantError("empty kernel");
    ImportanceRanking r;
    r.layer_id = layer_id;
    r.row_sums.resize(kernel.n_in, 0.0);
    const std::uint64_t per_row = kernel.elements_per_row();
    for (std::uint32_t i = 0; i < kernel.n_in; ++i) {
        double s = 0.0;
        for (std::uint64_t k = 0; k < per_row; ++k)
            s += std::abs(static_cast<double>(kernel.weights[i * per_row + k]));
        r.row_sums[i] = s;
    }
    r.order.resize(kernel.n_in);
    std::iota(r.order.begin(), r.order.end(), 0u);
    std::sort(r.order.begin(), r.order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (r.row_sums[a] != r.row_sums[b]) return r.row_sums[a] > r.row_sums[b];
        return a < b;
    });
    return r;
}

const char* boundary_policy_name(BoundaryPolicy policy) {
    return policy == BoundaryPolicy::PaperDefault ? "paper-default" : "none";
}

BoundaryPolicy boundary_policy_from_name(const std::string& name) {
    if (name == "paper-default") return BoundaryPolicy::PaperDefault;
    if (name == "none") return BoundaryPolicy::None;
    throw InvariantError("unknown boundary policy: " + name);
}

bool EncryptionPlan::row_encrypted(std::uint32_t layer_id, std::uint32_t row) const {
    auto it = layers.find(layer_id);
    return it != layers.end() && contains(it->second.encrypted_rows, row);
}

bool EncryptionPlan::channel_encrypted(std::uint32_t producer, std::uint32_t channel) const {
    auto it = edges.find(producer);
    return it != edges.end() && contains(it->second.channels, channel);
}

EncryptionPlan build_plan(const Model& model, double ratio, BoundaryPolicy policy) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvariantError("ratio out of range");
    validate_model(model);

    const std::vector<std::uint32_t> convs = weight_layer_ids(model, true);

    EncryptionPlan plan;
    plan.ratio = ratio;
    plan.policy = policy;
    for (const Layer& l : model.layers) {
        if (!l.has_weights()) continue;
        bool full = false;
        if (policy == BoundaryPolicy::PaperDefault) {
            if (l.kind == LayerKind::FC) {
                full = true;
            } else {
                const auto pos = std::find(convs.begin(), convs.end(), l.id) - convs.begin();
                full = pos < 2 || l.id == convs.back();
            }
        }
        LayerPlan lp;
        lp.full_encrypt = full;
        const std::uint32_t n = l.kernel->n_in;
        if (full) {
            lp.encrypted_rows.resize(n);
            std::iota(lp.encrypted_rows.begin(), lp.encrypted_rows.end(), 0u);
        } else {
            const std::uint32_t k = encrypted_row_count(ratio, n);
            const ImportanceRanking ranking = row_importance(*l.kernel, l.id);
            lp.encrypted_rows.assign(ranking.order.begin(), ranking.order.begin() + k);
            std::sort(lp.encrypted_rows.begin(), lp.encrypted_rows.end());
        }
        plan.layers[l.id] = std::move(lp);
    }
    return propagate_channels(model, std::move(plan));
}

EncryptionPlan propagate_channels(const Model& model, EncryptionPlan plan) {
    const auto& layers = model.layers;
    if (layers.size() < 2) throw InvariantError("model has no edges");
    const std::size_t n_edges = layers.size() - 1;

    std::vector<std::optional<std::vector<std::uint32_t>>> sets(n_edges);

    const std::vector<bool> from_input = input_derived_edges(model);

    // Exact demands: the map feeding a weight layer carries that layer's
    // encrypted rows; the model output map is always observable. Under the
    // paper-default policy the input image stays plaintext no matter what
    // the first layer's rows ask for.
    for (std::uint32_t e = 0; e < n_edges; ++e) {
        if (from_input[e] && plan.policy == BoundaryPolicy::PaperDefault) {
            sets[e] = std::vector<std::uint32_t>{};
            continue;
        }
        std::optional<std::vector<std::uint32_t>> demand;
        for (std::uint32_t c : edge_consumers(model, e)) {
            const Layer& l = layers[c];
            std::optional<std::vector<std::uint32_t>> d;
            if (l.has_weights()) {
                auto it = plan.layers.find(c);
                if (it == plan.layers.end())
                    throw InvariantError("plan missing rows for layer " + std::to_string(c));
                d = it->second.encrypted_rows;
            } else if (l.kind == LayerKind::Output) {
                d = std::vector<std::uint32_t>{};
            } else {
                continue;  // Pool and Add demands resolved below
            }
            if (demand && *demand != *d)
                throw InvariantError("inconsistent channel demands on edge " + std::to_string(e));
            demand = std::move(d);
        }
        sets[e] = std::move(demand);
    }

    auto pool_fixpoint = [&] {
        bool changed = true;
        while (changed) {
            changed = false;
            for (const Layer& l : layers) {
                if (l.kind != LayerKind::Pool) continue;
                auto& in = sets[l.id - 1];
                auto& out = sets[l.id];
                if (out && !in) { in = out; changed = true; }
                else if (in && !out) { out = in; changed = true; }
                else if (in && out && *in != *out)
                    throw InvariantError("inconsistent pool pass-through at layer " +
                                         std::to_string(l.id));
            }
        }
    };

    pool_fixpoint();

    // Add layers, latest first. Every channel of the (skip, residual, sum)
    // triple must be hidden on zero or two maps: one encrypted operand pins
    // the other down. The shared skip map keeps the set its weight-layer
    // consumer dictates; the residual map takes the minimal complement.
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        if (it->kind != LayerKind::Add) continue;
        pool_fixpoint();
        const auto [a, b] = *it->add_sources;
        if (!sets[it->id]) sets[it->id] = std::vector<std::uint32_t>{};
        const std::vector<std::uint32_t>& out = *sets[it->id];
        if (!sets[b]) {
            sets[b] = set_symmetric_difference(
                out, sets[a] ? *sets[a] : std::vector<std::uint32_t>{});
        } else if (!sets[a]) {
            sets[a] = set_symmetric_difference(out, *sets[b]);
        }
        // Both fixed: the final sweep below reports violations.
    }

    pool_fixpoint();
    for (auto& s : sets)
        if (!s) s = std::vector<std::uint32_t>{};

    // A channel protected on exactly one of an Add's three maps would be
    // derivable from the other two; refuse to emit such a plan.
    for (const Layer& l : layers) {
        if (l.kind != LayerKind::Add) continue;
        const auto [a, b] = *l.add_sources;
        for (std::uint32_t c = 0; c < l.shape_out.channels; ++c) {
            const int cnt = static_cast<int>(contains(*sets[a], c)) +
                            static_cast<int>(contains(*sets[b], c)) +
                            static_cast<int>(contains(*sets[l.id], c));
            if (cnt == 1)
                throw InvariantError("inconsistent Add-layer requirement at layer " +
                                     std::to_string(l.id) + " channel " + std::to_string(c));
        }
    }

    plan.edges.clear();
    for (std::uint32_t e = 0; e < n_edges; ++e)
        plan.edges[e] = EdgePlan{std::move(*sets[e])};
    return plan;
}

ClosureReport verify_closure(const Model& model, const EncryptionPlan& plan) {
    ClosureReport rep;
    static const std::vector<std::uint32_t> kEmpty;
    const std::vector<bool> from_input = input_derived_edges(model);
    auto edge_set = [&](std::uint32_t e) -> const std::vector<std::uint32_t>& {
        auto it = plan.edges.find(e);
        return it == plan.edges.end() ? kEmpty : it->second.channels;
    };

    for (const Layer& l : model.layers) {
        if (l.has_weights()) {
            const auto& in_set = edge_set(l.id - 1);
            const auto& out_set = edge_set(l.id);
            const std::uint32_t n_out = l.shape_out.channels;
            std::uint32_t first_visible = n_out;
            for (std::uint32_t j = 0; j < n_out; ++j) {
                if (!contains(out_set, j)) { first_visible = j; break; }
            }
            // The waiver for the paper's boundary handling: the input image
            // is known anyway, so a fully hidden output map keeps every
            // product of the first weight layer unobservable.
            const bool input_edge_waiver = from_input[l.id - 1] && first_visible == n_out;
            if (input_edge_waiver) continue;
            const auto lp = plan.layers.find(l.id);
            const auto& rows = lp == plan.layers.end() ? kEmpty : lp->second.encrypted_rows;
            for (std::uint32_t i = 0; i < l.kernel->n_in; ++i) {
                const bool enc_w = contains(rows, i);
                const bool enc_x = contains(in_set, i);
                if (enc_w == enc_x) continue;
                std::string reason = enc_w
                    ? "row encrypted but input channel plain"
                    : "input channel encrypted but row plain";
                if (first_visible < n_out)
                    reason += "; observable via output channel " +
                              std::to_string(first_visible);
                rep.violations.push_back({l.id, i, i, std::move(reason)});
            }
        } else if (l.kind == LayerKind::Pool) {
            const auto& in_set = edge_set(l.id - 1);
            const auto& out_set = edge_set(l.id);
            for (std::uint32_t c = 0; c < l.shape_out.channels; ++c) {
                if (contains(in_set, c) != contains(out_set, c))
                    rep.violations.push_back(
                        {l.id, c, c, "pool channel set differs across the pass-through"});
            }
        } else if (l.kind == LayerKind::Add) {
            const auto [a, b] = *l.add_sources;
            for (std::uint32_t c = 0; c < l.shape_out.channels; ++c) {
                const int cnt = static_cast<int>(contains(edge_set(a), c)) +
                                static_cast<int>(contains(edge_set(b), c)) +
                                static_cast<int>(contains(edge_set(l.id), c));
                if (cnt == 1)
                    rep.violations.push_back(
                        {l.id, c, c, "add channel protected on exactly one of three maps"});
            }
        }
    }
    rep.ok = rep.violations.empty();
    return rep;
}

std::string dump_plan(const EncryptionPlan& plan) {
    json doc;
    doc["ratio"] = plan.ratio;
    doc["policy"] = boundary_policy_name(plan.policy);
    doc["layers"] = json::array();
    for (const auto& [id, lp] : plan.layers) {
        json jl;
        jl["id"] = id;
        jl["rows"] = lp.encrypted_rows;
        jl["full"] = lp.full_encrypt;
        doc["layers"].push_back(std::move(jl));
    }
    doc["edges"] = json::array();
    for (const auto& [producer, ep] : plan.edges) {
        json je;
        je["producer"] = producer;
        je["channels"] = ep.channels;
        doc["edges"].push_back(std::move(je));
    }
    return doc.dump(2);
}

EncryptionPlan load_plan(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InvariantError(std::string("bad plan: ") + e.what());
    }
    EncryptionPlan plan;
    plan.ratio = doc.at("ratio").get<double>();
    plan.policy = boundary_policy_from_name(doc.at("policy").get<std::string>());
    for (const json& jl : doc.at("layers")) {
        LayerPlan lp;
        lp.encrypted_rows = jl.at("rows").get<std::vector<std::uint32_t>>();
        lp.full_encrypt = jl.at("full").get<bool>();
        std::sort(lp.encrypted_rows.begin(), lp.encrypted_rows.end());
        plan.layers[jl.at("id").get<std::uint32_t>()] = std::move(lp);
    }
    for (const json& je : doc.at("edges")) {
        EdgePlan ep;
        ep.channels = je.at("channels").get<std::vector<std::uint32_t>>();
        std::sort(ep.channels.begin(), ep.channels.end());
        plan.edges[je.at("producer").get<std::uint32_t>()] = std::move(ep);
    }
    return plan;
}

FeatureMap random_feature_map(std::uint32_t channels, std::uint32_t pixels,
                              std::uint64_t seed) {
    FeatureMap fm;
    fm.channels = channels;
    fm.pixels = pixels;
    fm.values.resize(std::size_t{channels} * pixels);
    Rng rng(seed);
    for (double& v : fm.values) v = rng.next_signed_unit();
    return fm;
}

Model make_matrix_chain(const std::vector<std::uint32_t>& channels,
                        std::uint32_t height, std::uint32_t width,
                        std::uint64_t seed) {
    if (channels.size() < 2) throw InvariantError("chain needs at least one weight layer");
    Model m;
    m.name = "matrix-chain";
    m.weight_seed = seed;
    Rng rng(seed);

    Layer input;
    input.kind = LayerKind::Input;
    input.id = 0;
    input.shape_in = input.shape_out = {channels[0], height, width};
    m.layers.push_back(input);

    for (std::size_t t = 1; t < channels.size(); ++t) {
        Layer l;
        l.kind = LayerKind::Conv;
        l.id = static_cast<std::uint32_t>(m.layers.size());
        l.shape_in = m.layers.back().shape_out;
        l.shape_out = {channels[t], height, width};
        KernelMatrix k{channels[t - 1], channels[t], 1, 1, {}};
        k.weights.resize(k.element_count());
        for (float& w : k.weights) w = static_cast<float>(rng.next_signed_unit());
        l.kernel = std::move(k);
        m.layers.push_back(std::move(l));
    }

    Layer output;
    output.kind = LayerKind::Output;
    output.id = static_cast<std::uint32_t>(m.layers.size());
    output.shape_in = output.shape_out = m.layers.back().shape_out;
    m.layers.push_back(output);
    validate_model(m);
    return m;
}

std::vector<FeatureMap> forward_feature_maps(const Model& model,
                                             const FeatureMap& input) {
    validate_model(model);
    const auto& layers = model.layers;
    if (input.channels != layers[0].shape_out.channels ||
        input.pixels != layers[0].shape_out.height * layers[0].shape_out.width)
        throw InvariantError("input map shape mismatch");

    std::vector<FeatureMap> maps;
    maps.push_back(input);
    for (std::size_t i = 1; i + 1 < layers.size(); ++i) {
        const Layer& l = layers[i];
        if (l.kind != LayerKind::Conv || l.kernel->kernel_h != 1 || l.kernel->kernel_w != 1)
            throw InvariantError("forward_feature_maps requires a 1x1 Conv chain");
        const FeatureMap& x = maps.back();
        FeatureMap y;
        y.channels = l.shape_out.channels;
        y.pixels = x.pixels;
        y.values.assign(std::size_t{y.channels} * y.pixels, 0.0);
        for (std::uint32_t p = 0; p < x.pixels; ++p)
            for (std::uint32_t j = 0; j < y.channels; ++j) {
                double acc = 0.0;
                for (std::uint32_t c = 0; c < x.channels; ++c)
                    acc += x.at(p, c) * static_cast<double>(l.kernel->at(c, j, 0, 0));
                y.at(p, j) = acc;
            }
        maps.push_back(std::move(y));
    }
    return maps;
}

AttackResult solvability_oracle(const Model& model, const EncryptionPlan& plan,
                                const std::vector<FeatureMap>& known_maps) {
    if (known_maps.size() + 1 != model.layers.size())
        throw InvariantError("oracle needs one map per edge");
    AttackResult res;

    for (const Layer& l : model.layers) {
        if (l.kind != LayerKind::Conv) continue;
        if (l.kernel->kernel_h != 1 || l.kernel->kernel_w != 1)
            throw InvariantError("oracle requires 1x1 kernels");

        auto lp = plan.layers.find(l.id);
        if (lp == plan.layers.end() || lp->second.encrypted_rows.empty()) continue;
        const auto& enc_rows = lp->second.encrypted_rows;

        // Any hidden input channel poisons every equation of this layer:
        // the term is either bilinear or carries an unknown channel value.
        const std::uint32_t in_edge = l.id - 1;
        bool input_visible = true;
        for (std::uint32_t c = 0; c < l.kernel->n_in; ++c)
            if (plan.channel_encrypted(in_edge, c)) { input_visible = false; break; }
        if (!input_visible) continue;

        std::vector<std::uint32_t> visible_cols;
        for (std::uint32_t j = 0; j < l.kernel->n_out; ++j)
            if (!plan.channel_encrypted(l.id, j)) visible_cols.push_back(j);
        if (visible_cols.empty()) continue;

        const FeatureMap& x = known_maps[in_edge];
        const FeatureMap& y = known_maps[l.id];
        const auto pixels = static_cast<Eigen::Index>(x.pixels);
        const auto m = static_cast<Eigen::Index>(enc_rows.size());

        Eigen::MatrixXd a(pixels, m);
        for (Eigen::Index p = 0; p < pixels; ++p)
            for (Eigen::Index k = 0; k < m; ++k)
                a(p, k) = x.at(static_cast<std::uint32_t>(p), enc_rows[k]);

        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        std::vector<bool> determined(enc_rows.size(), true);
        if (lu.rank() < m) {
            res.degeneracy_note += "layer " + std::to_string(l.id) +
                                   ": singular visible system; ";
            const Eigen::MatrixXd kernel = lu.kernel();
            for (Eigen::Index k = 0; k < m; ++k) {
                for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
                    const double col_norm = kernel.col(c).norm();
                    if (col_norm > 0 && std::abs(kernel(k, c)) > 1e-8 * col_norm)
                        determined[k] = false;
                }
            }
        }

        // Solve one right-hand side per visible output channel; known rows
        // move to the right-hand side.
        std::map<std::uint32_t, std::vector<double>> partial;  // row -> per-col values
        for (std::uint32_t j : visible_cols) {
            Eigen::VectorXd rhs(pixels);
            for (Eigen::Index p = 0; p < pixels; ++p) {
                double v = y.at(static_cast<std::uint32_t>(p), j);
                for (std::uint32_t i = 0; i < l.kernel->n_in; ++i) {
                    if (contains(enc_rows, i)) continue;
                    v -= x.at(static_cast<std::uint32_t>(p), i) *
                         static_cast<double>(l.kernel->at(i, j, 0, 0));
                }
                rhs(p) = v;
            }
            const Eigen::VectorXd sol = lu.solve(rhs);
            for (std::size_t k = 0; k < enc_rows.size(); ++k) {
                if (!determined[k]) continue;
                auto& row_vals = partial[enc_rows[k]];
                row_vals.resize(l.kernel->n_out,
                                std::numeric_limits<double>::quiet_NaN());
                row_vals[j] = sol(static_cast<Eigen::Index>(k));
                res.determined_entries += 1;
            }
        }

        if (visible_cols.size() == l.kernel->n_out) {
            for (auto& [row, vals] : partial)
                res.recovered_rows[{l.id, row}] = std::move(vals);
        }
    }
    res.recoverable = !res.recovered_rows.empty();
    return res;
}

}  // namespace seal
