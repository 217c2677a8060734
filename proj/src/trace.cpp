#include "seal/trace.hpp"

#include <fstream>

namespace seal {

namespace {

constexpr std::uint64_t kAddressSpaceBytes = std::uint64_t{1} << 40;

std::uint64_t lines_for(std::uint64_t bytes) {
    return (bytes + kLineBytes - 1) / kLineBytes;
}

}  // namespace

AddressMap layout_tensors(const Model& model, const EncryptionPlan& plan) {
    validate_model(model);
    if (plan.edges.empty() && model.layers.size() > 1)
        throw InvariantError("plan has no propagated channel sets");

    AddressMap map;
    std::uint64_t cursor = 0;

    auto place = [&](std::uint32_t units, std::uint64_t unit_bytes) {
        TensorRegion r;
        r.base = cursor;
        r.units = units;
        r.unit_lines = lines_for(unit_bytes);
        r.unit_encrypted.assign(units, false);
        cursor += r.bytes();
        if (cursor > kAddressSpaceBytes)
            throw InvariantError("address-space overflow (tensors exceed 2^40 bytes)");
        return r;
    };

    for (const Layer& l : model.layers) {
        if (l.kernel) {
            TensorRegion r = place(l.kernel->n_in, l.kernel->elements_per_row() * 4);
            for (std::uint32_t i = 0; i < r.units; ++i)
                r.unit_encrypted[i] = plan.row_encrypted(l.id, i);
            map.weights[l.id] = std::move(r);
        }
        if (l.kind != LayerKind::Output) {
            const TensorShape& s = l.shape_out;
            TensorRegion r = place(s.channels, std::uint64_t{s.height} * s.width * 4);
            for (std::uint32_t c = 0; c < r.units; ++c)
                r.unit_encrypted[c] = plan.channel_encrypted(l.id, c);
            map.feature_maps[l.id] = std::move(r);
        }
    }
    map.total_bytes = cursor;
    return map;
}

namespace {

class TraceBuilder {
public:
    explicit TraceBuilder(std::vector<MemoryRequest>& out) : out_(out) {}

    // All lines of [first_unit, last_unit) in unit-major order.
    void units(const TensorRegion& r, std::uint32_t first_unit, std::uint32_t last_unit,
               RequestOp op, RequestTag tag) {
        for (std::uint32_t u = first_unit; u < last_unit; ++u)
            lines(r, u, 0, r.unit_lines, op, tag);
    }

    void whole(const TensorRegion& r, RequestOp op, RequestTag tag) {
        units(r, 0, r.units, op, tag);
    }

    void lines(const TensorRegion& r, std::uint32_t unit, std::uint64_t first_line,
               std::uint64_t last_line, RequestOp op, RequestTag tag) {
        const std::uint64_t base = r.unit_base(unit);
        const bool enc = r.unit_encrypted[unit];
        for (std::uint64_t ln = first_line; ln < last_line; ++ln) {
            MemoryRequest q;
            q.address = base + ln * kLineBytes;
            q.op = op;
            q.tag = tag;
            q.encrypted = enc;
            q.issue_order = out_.size();
            out_.push_back(q);
        }
    }

private:
    std::vector<MemoryRequest>& out_;
};

const TensorRegion& region_at(const std::map<std::uint32_t, TensorRegion>& m,
                              std::uint32_t id, const char* what) {
    auto it = m.find(id);
    if (it == m.end())
        throw InvariantError(std::string("address map missing ") + what + " region " +
                             std::to_string(id));
    return it->second;
}

}  // namespace

LayerTrace gen_layer_trace(const Layer& layer, const AddressMap& map,
                           const TilingConfig& tiling) {
    if (tiling.ofm_tile_channels < 1) throw InvariantError("tile dims must be >= 1");

    LayerTrace lt;
    lt.layer_id = layer.id;
    lt.kind = layer.kind;
    TraceBuilder tb(lt.requests);

    switch (layer.kind) {
        case LayerKind::Input: {
            // Host upload of the input image.
            tb.whole(region_at(map.feature_maps, layer.id, "feature-map"),
                     RequestOp::Write, RequestTag::Ofm);
            break;
        }
        case LayerKind::Output: {
            // Result retrieval.
            tb.whole(region_at(map.feature_maps, layer.id - 1, "feature-map"),
                     RequestOp::Read, RequestTag::Ifm);
            break;
        }
        case LayerKind::Pool: {
            tb.whole(region_at(map.feature_maps, layer.id - 1, "feature-map"),
                     RequestOp::Read, RequestTag::Ifm);
            tb.whole(region_at(map.feature_maps, layer.id, "feature-map"),
                     RequestOp::Write, RequestTag::Ofm);
            break;
        }
        case LayerKind::Add: {
            const auto [a, b] = *layer.add_sources;
            tb.whole(region_at(map.feature_maps, a, "feature-map"), RequestOp::Read,
                     RequestTag::Ifm);
            tb.whole(region_at(map.feature_maps, b, "feature-map"), RequestOp::Read,
                     RequestTag::Ifm);
            tb.whole(region_at(map.feature_maps, layer.id, "feature-map"),
                     RequestOp::Write, RequestTag::Ofm);
            break;
        }
        case LayerKind::Conv: {
            const KernelMatrix& k = *layer.kernel;
            const TensorRegion& ifm = region_at(map.feature_maps, layer.id - 1, "feature-map");
            const TensorRegion& ofm = region_at(map.feature_maps, layer.id, "feature-map");
            const TensorRegion& w = region_at(map.weights, layer.id, "weight");
            const std::uint32_t out_h = layer.shape_out.height;
            const std::uint32_t out_w = layer.shape_out.width;
            if ((tiling.ofm_tile_height != 0 && tiling.ofm_tile_height > out_h) ||
                (tiling.ofm_tile_width != 0 && tiling.ofm_tile_width > out_w))
                throw InvariantError("tile larger than output tensor");
            if (tiling.ofm_tile_width != 0 && tiling.ofm_tile_width != out_w)
                throw InvariantError("width tiling is not supported");
            const std::uint32_t tile_c = tiling.ofm_tile_channels;
            const std::uint32_t tile_h =
                tiling.ofm_tile_height == 0 ? out_h : tiling.ofm_tile_height;
            const std::uint32_t halo = (k.kernel_h - 1) / 2;
            const std::uint64_t kernel_bytes = std::uint64_t{k.kernel_h} * k.kernel_w * 4;

            for (std::uint32_t c0 = 0; c0 < k.n_out; c0 += tile_c) {
                const std::uint32_t c1 = std::min(k.n_out, c0 + tile_c);
                for (std::uint32_t h0 = 0; h0 < out_h; h0 += tile_h) {
                    const std::uint32_t h1 = std::min(out_h, h0 + tile_h);
                    // Input rows feeding this tile, including the halo.
                    const std::uint32_t in_h0 = h0 > halo ? h0 - halo : 0;
                    const std::uint32_t in_h1 = std::min(out_h, h1 + halo);
                    const std::uint64_t in_first = (std::uint64_t{in_h0} * out_w * 4) / kLineBytes;
                    const std::uint64_t in_last = std::min(
                        ifm.unit_lines,
                        (std::uint64_t{in_h1} * out_w * 4 + kLineBytes - 1) / kLineBytes);
                    for (std::uint32_t c = 0; c < ifm.units; ++c)
                        tb.lines(ifm, c, in_first, in_last, RequestOp::Read, RequestTag::Ifm);

                    if (!tiling.weight_reuse) {
                        // Only the lines covering this tile's column range.
                        const std::uint64_t first = (c0 * kernel_bytes) / kLineBytes;
                        const std::uint64_t last = std::min(
                            w.unit_lines, (c1 * kernel_bytes + kLineBytes - 1) / kLineBytes);
                        for (std::uint32_t row = 0; row < w.units; ++row)
                            tb.lines(w, row, first, last, RequestOp::Read, RequestTag::Weight);
                    } else if (c0 == 0 && h0 == 0) {
                        tb.whole(w, RequestOp::Read, RequestTag::Weight);
                    }

                    const std::uint64_t out_first = (std::uint64_t{h0} * out_w * 4) / kLineBytes;
                    const std::uint64_t out_last = std::min(
                        ofm.unit_lines,
                        (std::uint64_t{h1} * out_w * 4 + kLineBytes - 1) / kLineBytes);
                    for (std::uint32_t c = c0; c < c1; ++c)
                        tb.lines(ofm, c, out_first, out_last, RequestOp::Write, RequestTag::Ofm);
                }
            }
            lt.compute_macs = layer_cost(layer).macs;
            break;
        }
        case LayerKind::FC: {
            // The input vector is tiny next to the weights; one tile reads
            // both exactly once.
            tb.whole(region_at(map.feature_maps, layer.id - 1, "feature-map"),
                     RequestOp::Read, RequestTag::Ifm);
            tb.whole(region_at(map.weights, layer.id, "weight"), RequestOp::Read,
                     RequestTag::Weight);
            tb.whole(region_at(map.feature_maps, layer.id, "feature-map"),
                     RequestOp::Write, RequestTag::Ofm);
            lt.compute_macs = layer_cost(layer).macs;
            break;
        }
    }
    return lt;
}

InferenceTrace gen_inference_trace(const Model& model, const EncryptionPlan& plan,
                                   const TilingConfig& tiling) {
    const AddressMap map = layout_tensors(model, plan);
    InferenceTrace trace;
    std::uint64_t order = 0;
    for (const Layer& l : model.layers) {
        LayerTrace lt = gen_layer_trace(l, map, tiling);
        for (MemoryRequest& q : lt.requests) q.issue_order = order++;
        trace.push_back(std::move(lt));
    }
    return trace;
}

std::uint64_t trace_request_count(const InferenceTrace& trace) {
    std::uint64_t n = 0;
    for (const LayerTrace& lt : trace) n += lt.requests.size();
    return n;
}

void write_trace_dump(const InferenceTrace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open trace dump for writing: " + path);
    for (const LayerTrace& lt : trace) {
        for (const MemoryRequest& q : lt.requests) {
            std::uint8_t rec[10];
            for (int i = 0; i < 8; ++i)
                rec[i] = static_cast<std::uint8_t>(q.address >> (8 * i));
            rec[8] = static_cast<std::uint8_t>((q.encrypted ? 1 : 0) |
                                               (q.op == RequestOp::Write ? 2 : 0));
            rec[9] = static_cast<std::uint8_t>(q.tag);
            f.write(reinterpret_cast<const char*>(rec), sizeof rec);
        }
    }
    if (!f) throw IoError("trace dump write failed: " + path);
}

std::vector<MemoryRequest> read_trace_dump(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open trace dump: " + path);
    std::vector<MemoryRequest> out;
    std::uint8_t rec[10];
    while (f.read(reinterpret_cast<char*>(rec), sizeof rec)) {
        MemoryRequest q;
        for (int i = 0; i < 8; ++i)
            q.address |= std::uint64_t{rec[i]} << (8 * i);
        q.encrypted = (rec[8] & 1) != 0;
        q.op = (rec[8] & 2) ? RequestOp::Write : RequestOp::Read;
        q.tag = static_cast<RequestTag>(rec[9]);
        q.issue_order = out.size();
        out.push_back(q);
    }
    return out;
}

}  // namespace seal
