#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seal/model.hpp"

namespace seal {

// Per-row l1 sums of a kernel matrix plus the descending importance order.
// Ties break toward the lower row index so plans are platform-stable.
struct ImportanceRanking {
    std::uint32_t layer_id = 0;
    std::vector<double> row_sums;
    std::vector<std::uint32_t> order;
};

ImportanceRanking row_importance(const KernelMatrix& kernel, std::uint32_t layer_id = 0);

// paper-default: full encryption on the first two Conv layers, the last Conv
// layer and every FC layer; the model input and output maps stay plaintext.
// none: pure row/channel correspondence on every edge, no boundary handling.
enum class BoundaryPolicy { PaperDefault, None };

const char* boundary_policy_name(BoundaryPolicy policy);
BoundaryPolicy boundary_policy_from_name(const std::string& name);

struct LayerPlan {
    std::vector<std::uint32_t> encrypted_rows;  // sorted ascending
    bool full_encrypt = false;
};

struct EdgePlan {
    std::vector<std::uint32_t> channels;  // sorted ascending
};

struct EncryptionPlan {
    double ratio = 0.0;
    BoundaryPolicy policy = BoundaryPolicy::PaperDefault;
    std::map<std::uint32_t, LayerPlan> layers;  // keyed by Conv/FC layer id
    std::map<std::uint32_t, EdgePlan> edges;    // keyed by producing layer id

    bool row_encrypted(std::uint32_t layer_id, std::uint32_t row) const;
    bool channel_encrypted(std::uint32_t producer, std::uint32_t channel) const;
};

// Selects ceil(ratio * n_in) top-ranked rows per weight layer (all rows for
// boundary layers under paper-default), then propagates channel sets.
EncryptionPlan build_plan(const Model& model, double ratio, BoundaryPolicy policy);

// Fills per-edge channel sets from the per-layer row sets: the map feeding a
// weight layer carries exactly that layer's encrypted rows, pooling passes
// sets through, and Add layers never leave a channel protected on exactly
// one of its three maps. Unsatisfiable Add constraints are an error.
EncryptionPlan propagate_channels(const Model& model, EncryptionPlan plan);

struct ClosureViolation {
    std::uint32_t layer_id = 0;
    std::uint32_t row = 0;
    std::uint32_t channel = 0;
    std::string reason;
};

struct ClosureReport {
    bool ok = true;
    std::vector<ClosureViolation> violations;
};

// Flags every product term pairing an encrypted operand with a plaintext one
// where the result is observable, plus pooling/add set mismatches.
ClosureReport verify_closure(const Model& model, const EncryptionPlan& plan);

std::string dump_plan(const EncryptionPlan& plan);
EncryptionPlan load_plan(const std::string& json_text);

// Dense feature map for the algebra toys: pixels x channels, row-major.
struct FeatureMap {
    std::uint32_t channels = 0;
    std::uint32_t pixels = 0;
    std::vector<double> values;

    double at(std::uint32_t p, std::uint32_t c) const {
        return values[std::size_t{p} * channels + c];
    }
    double& at(std::uint32_t p, std::uint32_t c) {
        return values[std::size_t{p} * channels + c];
    }
};

FeatureMap random_feature_map(std::uint32_t channels, std::uint32_t pixels,
                              std::uint64_t seed);

// Input(channels[0]) -> Conv 1x1 -> ... -> Output chain on a height x width
// grid; each weight layer is then a plain pixels x channels matrix product.
Model make_matrix_chain(const std::vector<std::uint32_t>& channels,
                        std::uint32_t height, std::uint32_t width,
                        std::uint64_t seed);

// Ground-truth maps for every edge, index = producing layer id. Requires a
// 1x1-kernel Conv chain.
std::vector<FeatureMap> forward_feature_maps(const Model& model,
                                             const FeatureMap& input);

struct AttackResult {
    bool recoverable = false;
    // (layer id, row) -> fully recovered row weights (n_out values).
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<double>> recovered_rows;
    // Count of uniquely determined single weights, including partial rows.
    std::uint64_t determined_entries = 0;
    std::string degeneracy_note;
};

// Linear-algebra attack: every encrypted quantity is an unknown; equations
// are formed only from fully visible operands and a weight row counts as
// recovered when every entry is uniquely determined by the visible system.
AttackResult solvability_oracle(const Model& model, const EncryptionPlan& plan,
                                const std::vector<FeatureMap>& known_maps);

}  // namespace seal
