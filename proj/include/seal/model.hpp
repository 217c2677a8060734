#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seal/common.hpp"

namespace seal {

struct TensorShape {
    std::uint32_t channels = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;

    std::uint64_t elements() const {
        return std::uint64_t{channels} * height * width;
    }
    std::uint64_t bytes() const { return elements() * 4; }

    bool operator==(const TensorShape&) const = default;
};

// Convolutional kernel matrix: n_in rows (one per input channel), n_out
// columns (one per output channel), each cell a kernel_h x kernel_w kernel.
// Weights are flat in (row, col, kh, kw) order.
struct KernelMatrix {
    std::uint32_t n_in = 0;
    std::uint32_t n_out = 0;
    std::uint32_t kernel_h = 1;
    std::uint32_t kernel_w = 1;
    std::vector<float> weights;

    std::uint64_t elements_per_row() const {
        return std::uint64_t{n_out} * kernel_h * kernel_w;
    }
    std::uint64_t element_count() const { return n_in * elements_per_row(); }

    float at(std::uint32_t row, std::uint32_t col, std::uint32_t kh,
             std::uint32_t kw) const {
        return weights[((std::uint64_t{row} * n_out + col) * kernel_h + kh) * kernel_w + kw];
    }

    bool operator==(const KernelMatrix&) const = default;
};

enum class LayerKind { Input, Conv, Pool, FC, Add, Output };

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct Layer {
    LayerKind kind = LayerKind::Input;
    std::uint32_t id = 0;
    TensorShape shape_in;
    TensorShape shape_out;
    std::optional<KernelMatrix> kernel;                          // Conv/FC
    std::optional<std::uint32_t> pool_window;                    // Pool
    std::optional<std::pair<std::uint32_t, std::uint32_t>> add_sources;  // Add

    bool has_weights() const {
        return kind == LayerKind::Conv || kind == LayerKind::FC;
    }

    bool operator==(const Layer&) const = default;
};

struct Model {
    std::string name;
    std::vector<Layer> layers;
    std::optional<std::uint64_t> weight_seed;

    const Layer& layer(std::uint32_t id) const { return layers.at(id); }

    bool operator==(const Model&) const = default;
};

// Consumers of the feature map produced by layer `producer`: the next layer
// in the chain plus any Add layer whose skip source references it.
std::vector<std::uint32_t> edge_consumers(const Model& model, std::uint32_t producer);

struct LayerCost {
    std::uint64_t macs = 0;
    std::uint64_t weight_bytes = 0;
    std::uint64_t ifm_bytes = 0;
    std::uint64_t ofm_bytes = 0;
};

LayerCost layer_cost(const Layer& layer);

// Throws InvariantError on any structural defect (shape chain breaks,
// missing kernels, bad Add sources, missing Input/Output).
void validate_model(const Model& model);

// Descriptor is a JSON document; the blob holds little-endian f32 weights
// concatenated per Conv/FC layer in (row, col, kh, kw) order.
Model load_model(const std::string& descriptor_json,
                 const std::vector<std::uint8_t>& weight_blob);
std::pair<std::string, std::vector<std::uint8_t>> dump_model(const Model& model);

enum class Preset { Vgg16Like, Resnet18Like, Resnet34Like, Toy };

const char* preset_name(Preset preset);
Preset preset_from_name(const std::string& name);

// Deterministic synthetic model: spatial dims are 224/scale, weights are
// seeded uniform in [-1, 1).
Model generate_synthetic(Preset preset, std::uint32_t scale, std::uint64_t seed);

}  // namespace seal
