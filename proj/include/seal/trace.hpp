#pragma once

#include <map>
#include <string>
#include <vector>

#include "seal/model.hpp"
#include "seal/planner.hpp"

namespace seal {

enum class RequestOp : std::uint8_t { Read = 0, Write = 1 };
enum class RequestTag : std::uint8_t { Weight = 0, Ifm = 1, Ofm = 2, Counter = 3 };

struct MemoryRequest {
    std::uint64_t address = 0;  // 128-byte aligned
    RequestOp op = RequestOp::Read;
    RequestTag tag = RequestTag::Ifm;
    bool encrypted = false;
    std::uint64_t issue_order = 0;
};

// Output tile shape. Zero means the full extent in that dimension; the
// channel tile clamps to the layer, explicit spatial tiles must fit and the
// width cannot be split (channel rows are only contiguous at full width).
// Weights are re-read per tile unless weight_reuse, modeling a small
// on-chip buffer.
struct TilingConfig {
    std::uint32_t ofm_tile_channels = 8;
    std::uint32_t ofm_tile_height = 0;
    std::uint32_t ofm_tile_width = 0;
    bool weight_reuse = false;
};

// One laid-out tensor: `units` channels (feature maps) or kernel rows
// (weights), each padded to whole lines so a line never mixes encrypted and
// plaintext data.
struct TensorRegion {
    std::uint64_t base = 0;
    std::uint64_t unit_lines = 0;
    std::uint32_t units = 0;
    std::vector<bool> unit_encrypted;

    std::uint64_t lines() const { return unit_lines * units; }
    std::uint64_t bytes() const { return lines() * kLineBytes; }
    std::uint64_t unit_base(std::uint32_t u) const {
        return base + std::uint64_t{u} * unit_lines * kLineBytes;
    }
};

struct AddressMap {
    std::map<std::uint32_t, TensorRegion> weights;       // by layer id
    std::map<std::uint32_t, TensorRegion> feature_maps;  // by producing layer id
    std::uint64_t total_bytes = 0;
};

// Channel-major placement with per-unit line padding; encryption flags come
// from the propagated plan. Fails past the 2^40-byte address space.
AddressMap layout_tensors(const Model& model, const EncryptionPlan& plan);

struct LayerTrace {
    std::uint32_t layer_id = 0;
    LayerKind kind = LayerKind::Input;
    std::uint64_t compute_macs = 0;
    std::vector<MemoryRequest> requests;
};

LayerTrace gen_layer_trace(const Layer& layer, const AddressMap& map,
                           const TilingConfig& tiling);

using InferenceTrace = std::vector<LayerTrace>;

InferenceTrace gen_inference_trace(const Model& model, const EncryptionPlan& plan,
                                   const TilingConfig& tiling);

std::uint64_t trace_request_count(const InferenceTrace& trace);

// Regression dump: 10-byte records, address LE64 + flags (bit0 encrypted,
// bit1 write) + tag.
void write_trace_dump(const InferenceTrace& trace, const std::string& path);
std::vector<MemoryRequest> read_trace_dump(const std::string& path);

}  // namespace seal
