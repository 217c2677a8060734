#include "seal/model.hpp"

#include <cstring>
#include <string>

#include "json.hpp"

namespace seal {

namespace {

using nlohmann::json;

std::uint32_t pool_out(std::uint32_t in, std::uint32_t window) {
    return (in + window - 1) / window;
}

json shape_to_json(const TensorShape& s) {
    return json::array({s.channels, s.height, s.width});
}

TensorShape shape_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3)
        throw InvariantError("shape must be [channels, height, width]");
    return TensorShape{j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>(),
                       j[2].get<std::uint32_t>()};
}

void append_f32_le(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float read_f32_le(const std::uint8_t* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Input: return "Input";
        case LayerKind::Conv: return "Conv";
        case LayerKind::Pool: return "Pool";
        case LayerKind::FC: return "FC";
        case LayerKind::Add: return "Add";
        case LayerKind::Output: return "Output";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "Input") return LayerKind::Input;
    if (name == "Conv") return LayerKind::Conv;
    if (name == "Pool") return LayerKind::Pool;
    if (name == "FC") return LayerKind::FC;
    if (name == "Add") return LayerKind::Add;
    if (name == "Output") return LayerKind::Output;
    throw InvariantError("unknown layer kind: " + name);
}

std::vector<std::uint32_t> edge_consumers(const Model& model, std::uint32_t producer) {
    std::vector<std::uint32_t> out;
    if (producer + 1 < model.layers.size()) out.push_back(producer + 1);
    for (const Layer& l : model.layers) {
        if (l.kind == LayerKind::Add && l.add_sources->first == producer)
            out.push_back(l.id);
    }
    return out;
}

LayerCost layer_cost(const Layer& layer) {
    LayerCost c;
    if (layer.kind != LayerKind::Input) c.ifm_bytes = layer.shape_in.bytes();
    if (layer.kind != LayerKind::Output) c.ofm_bytes = layer.shape_out.bytes();
    if (layer.kind == LayerKind::Conv) {
        const KernelMatrix& k = *layer.kernel;
        c.macs = std::uint64_t{k.n_in} * k.n_out * k.kernel_h * k.kernel_w *
                 layer.shape_out.height * layer.shape_out.width;
        c.weight_bytes = k.element_count() * 4;
    } else if (layer.kind == LayerKind::FC) {
        const KernelMatrix& k = *layer.kernel;
        c.macs = std::uint64_t{k.n_in} * k.n_out * layer.shape_in.height *
                 layer.shape_in.width;
        c.weight_bytes = k.element_count() * 4;
    }
    return c;
}

void validate_model(const Model& model) {
    const auto& layers = model.layers;
    if (layers.empty()) throw InvariantError("no layers");
    if (layers.front().kind != LayerKind::Input)
        throw InvariantError("first layer must be Input");
    if (layers.back().kind != LayerKind::Output)
        throw InvariantError("last layer must be Output");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        if (l.id != i) throw InvariantError("layer ids must be ordinal");
        if ((l.kind == LayerKind::Input) != (i == 0))
            throw InvariantError("exactly one Input layer, at position 0");
        if ((l.kind == LayerKind::Output) != (i + 1 == layers.size()))
            throw InvariantError("exactly one Output layer, at the end");
        const TensorShape& in = l.shape_in;
        const TensorShape& out = l.shape_out;
        if (in.elements() == 0 || out.elements() == 0)
            throw InvariantError("all tensor dimensions must be >= 1");

        if (l.has_weights() != l.kernel.has_value())
            throw InvariantError(std::string("kernel presence mismatch on ") +
                                 layer_kind_name(l.kind));
        if ((l.kind == LayerKind::Pool) != l.pool_window.has_value())
            throw InvariantError("pool_window only on Pool layers");
        if ((l.kind == LayerKind::Add) != l.add_sources.has_value())
            throw InvariantError("add_sources only on Add layers");

        switch (l.kind) {
            case LayerKind::Input:
            case LayerKind::Output:
                if (!(in == out)) throw InvariantError("Input/Output shapes must match");
                break;
            case LayerKind::Conv: {
                const KernelMatrix& k = *l.kernel;
                if (k.n_in != in.channels || k.n_out != out.channels)
                    throw InvariantError("kernel rows/cols must match channel counts");
                if (out.height != in.height || out.width != in.width)
                    throw InvariantError("Conv preserves spatial dims");
                if (k.weights.size() != k.element_count())
                    throw InvariantError("kernel weight count mismatch");
                break;
            }
            case LayerKind::FC: {
                const KernelMatrix& k = *l.kernel;
                if (k.n_in != in.channels || k.n_out != out.channels)
                    throw InvariantError("kernel rows/cols must match channel counts");
                if (k.kernel_h != 1 || k.kernel_w != 1)
                    throw InvariantError("FC kernels are 1x1");
                if (out.height != 1 || out.width != 1)
                    throw InvariantError("FC output is 1x1 spatial");
                if (k.weights.size() != k.element_count())
                    throw InvariantError("kernel weight count mismatch");
                break;
            }
            case LayerKind::Pool: {
                if (*l.pool_window < 1) throw InvariantError("pool window must be >= 1");
                if (out.channels != in.channels ||
                    out.height != pool_out(in.height, *l.pool_window) ||
                    out.width != pool_out(in.width, *l.pool_window))
                    throw InvariantError("Pool output shape mismatch");
                break;
            }
            case LayerKind::Add: {
                const auto [a, b] = *l.add_sources;
                if (b + 1 != l.id || a >= b)
                    throw InvariantError("Add sources must be (skip, predecessor)");
                if (!(layers[a].shape_out == in) || !(layers[b].shape_out == in))
                    throw InvariantError("Add source shapes must match");
                if (!(in == out)) throw InvariantError("Add preserves shape");
                break;
            }
        }
        if (i > 0 && l.kind != LayerKind::Add) {
            if (!(layers[i - 1].shape_out == in))
                throw InvariantError("shape-chain mismatch at layer " + std::to_string(i));
        }
    }
}

Model load_model(const std::string& descriptor_json,
                 const std::vector<std::uint8_t>& weight_blob) {
    json doc;
    try {
        doc = json::parse(descriptor_json);
    } catch (const json::exception& e) {
        throw InvariantError(std::string("bad descriptor: ") + e.what());
    }
    Model m;
    m.name = doc.value("name", "");
    if (doc.contains("seed")) m.weight_seed = doc["seed"].get<std::uint64_t>();
    if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty())
        throw InvariantError("no layers");

    std::size_t blob_pos = 0;
    std::uint32_t id = 0;
    for (const json& jl : doc["layers"]) {
        Layer l;
        l.id = id++;
        l.kind = layer_kind_from_name(jl.at("kind").get<std::string>());
        l.shape_in = shape_from_json(jl.at("in"));
        l.shape_out = shape_from_json(jl.at("out"));
        if (l.has_weights()) {
            KernelMatrix k;
            k.n_in = l.shape_in.channels;
            k.n_out = l.shape_out.channels;
            if (l.kind == LayerKind::Conv) {
                const json& kj = jl.at("kernel");
                k.kernel_h = kj.at(0).get<std::uint32_t>();
                k.kernel_w = kj.at(1).get<std::uint32_t>();
            }
            const std::uint64_t n = k.element_count();
            if (blob_pos + n * 4 > weight_blob.size())
                throw InvariantError("weight blob length mismatch (too short)");
            k.weights.resize(n);
            for (std::uint64_t i = 0; i < n; ++i)
                k.weights[i] = read_f32_le(weight_blob.data() + blob_pos + 4 * i);
            blob_pos += n * 4;
            l.kernel = std::move(k);
        }
        if (l.kind == LayerKind::Pool)
            l.pool_window = jl.at("window").get<std::uint32_t>();
        if (l.kind == LayerKind::Add) {
            const json& js = jl.at("sources");
            l.add_sources = {js.at(0).get<std::uint32_t>(), js.at(1).get<std::uint32_t>()};
        }
        m.layers.push_back(std::move(l));
    }
    if (blob_pos != weight_blob.size())
        throw InvariantError("weight blob length mismatch (too long)");
    validate_model(m);
    return m;
}

std::pair<std::string, std::vector<std::uint8_t>> dump_model(const Model& model) {
    json doc;
    doc["name"] = model.name;
    if (model.weight_seed) doc["seed"] = *model.weight_seed;
    doc["layers"] = json::array();
    std::vector<std::uint8_t> blob;
    for (const Layer& l : model.layers) {
        json jl;
        jl["kind"] = layer_kind_name(l.kind);
        jl["in"] = shape_to_json(l.shape_in);
        jl["out"] = shape_to_json(l.shape_out);
        if (l.kernel) {
            jl["kernel"] = json::array({l.kernel->kernel_h, l.kernel->kernel_w});
            for (float w : l.kernel->weights) append_f32_le(blob, w);
        }
        if (l.pool_window) jl["window"] = *l.pool_window;
        if (l.add_sources)
            jl["sources"] = json::array({l.add_sources->first, l.add_sources->second});
        doc["layers"].push_back(std::move(jl));
    }
    return {doc.dump(2), std::move(blob)};
}

const char* preset_name(Preset preset) {
    switch (preset) {
        case Preset::Vgg16Like: return "vgg16-like";
        case Preset::Resnet18Like: return "resnet18-like";
        case Preset::Resnet34Like: return "resnet34-like";
        case Preset::Toy: return "toy";
    }
    return "?";
}

Preset preset_from_name(const std::string& name) {
    if (name == "vgg16-like") return Preset::Vgg16Like;
    if (name == "resnet18-like") return Preset::Resnet18Like;
    if (name == "resnet34-like") return Preset::Resnet34Like;
    if (name == "toy") return Preset::Toy;
    throw InvariantError("unknown preset: " + name);
}

namespace {

// Incrementally builds a chain-with-skips layer list; shapes are derived,
// weights are filled in afterwards.
class ModelBuilder {
public:
    explicit ModelBuilder(TensorShape input) {
        Layer l;
        l.kind = LayerKind::Input;
        l.id = 0;
        l.shape_in = l.shape_out = input;
        layers_.push_back(l);
    }

    std::uint32_t conv(std::uint32_t out_channels, std::uint32_t ksize) {
        const TensorShape in = layers_.back().shape_out;
        Layer l;
        l.kind = LayerKind::Conv;
        l.shape_in = in;
        l.shape_out = {out_channels, in.height, in.width};
        l.kernel = KernelMatrix{in.channels, out_channels, ksize, ksize, {}};
        return push(std::move(l));
    }

    std::uint32_t fc(std::uint32_t out_features) {
        const TensorShape in = layers_.back().shape_out;
        Layer l;
        l.kind = LayerKind::FC;
        l.shape_in = in;
        l.shape_out = {out_features, 1, 1};
        l.kernel = KernelMatrix{in.channels, out_features, 1, 1, {}};
        return push(std::move(l));
    }

    std::uint32_t pool(std::uint32_t window) {
        const TensorShape in = layers_.back().shape_out;
        Layer l;
        l.kind = LayerKind::Pool;
        l.shape_in = in;
        l.shape_out = {in.channels, pool_out(in.height, window), pool_out(in.width, window)};
        l.pool_window = window;
        return push(std::move(l));
    }

    std::uint32_t global_pool() {
        const TensorShape in = layers_.back().shape_out;
        return pool(std::max(in.height, in.width));
    }

    std::uint32_t add(std::uint32_t skip_source) {
        const Layer& prev = layers_.back();
        Layer l;
        l.kind = LayerKind::Add;
        l.shape_in = l.shape_out = prev.shape_out;
        l.add_sources = {skip_source, prev.id};
        return push(std::move(l));
    }

    // Basic residual block: two convs with a skip around both.
    std::uint32_t block(std::uint32_t channels) {
        const std::uint32_t entry = layers_.back().id;
        conv(channels, 3);
        conv(channels, 3);
        return add(entry);
    }

    void finish() {
        Layer l;
        l.kind = LayerKind::Output;
        l.shape_in = l.shape_out = layers_.back().shape_out;
        push(std::move(l));
    }

    std::vector<Layer> take() { return std::move(layers_); }

private:
    std::uint32_t push(Layer l) {
        const auto id = static_cast<std::uint32_t>(layers_.size());
        l.id = id;
        layers_.push_back(std::move(l));
        return id;
    }

    std::vector<Layer> layers_;
};

}  // namespace

Model generate_synthetic(Preset preset, std::uint32_t scale, std::uint64_t seed) {
    if (scale == 0 || 224 % scale != 0)
        throw InvariantError("scale must divide 224");
    const std::uint32_t s = 224 / scale;

    ModelBuilder b({3, s, s});
    switch (preset) {
        case Preset::Vgg16Like: {
            const std::uint32_t stages[5] = {64, 128, 256, 512, 512};
            const std::uint32_t depth[5] = {2, 2, 3, 3, 3};
            for (int st = 0; st < 5; ++st) {
                for (std::uint32_t i = 0; i < depth[st]; ++i) b.conv(stages[st], 3);
                b.pool(2);
            }
            b.fc(1024);
            b.fc(1024);
            b.fc(1000);
            break;
        }
        case Preset::Resnet18Like:
        case Preset::Resnet34Like: {
            const bool deep = preset == Preset::Resnet34Like;
            const std::uint32_t stages[4] = {64, 128, 256, 512};
            const std::uint32_t blocks18[4] = {2, 2, 2, 2};
            const std::uint32_t blocks34[4] = {3, 4, 6, 3};
            const std::uint32_t* blocks = deep ? blocks34 : blocks18;
            b.conv(64, 3);
            b.pool(2);
            for (int st = 0; st < 4; ++st) {
                if (st > 0) {
                    b.pool(2);
                    b.conv(stages[st], 3);
                }
                for (std::uint32_t i = 0; i < blocks[st]; ++i) b.block(stages[st]);
            }
            b.global_pool();
            b.fc(1000);
            break;
        }
        case Preset::Toy: {
            b.conv(4, 3);
            b.conv(4, 3);
            break;
        }
    }
    b.finish();

    Model m;
    m.name = std::string(preset_name(preset)) + "-s" + std::to_string(scale);
    m.layers = b.take();
    m.weight_seed = seed;

    Rng rng(seed);
    for (Layer& l : m.layers) {
        if (!l.kernel) continue;
        l.kernel->weights.resize(l.kernel->element_count());
        for (float& w : l.kernel->weights)
            w = static_cast<float>(rng.next_signed_unit());
    }
    validate_model(m);
    return m;
}

}  // namespace seal
