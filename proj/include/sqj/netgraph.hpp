// Network description, the fire block, and the end-to-end executor wiring the
// first-layer engine, the streaming engine and the auxiliary layers.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sqj/accel.hpp"
#include "sqj/aux_layers.hpp"
#include "sqj/quant_oracle.hpp"

namespace sqj {

enum class LayerKind : std::uint8_t {
    conv = 0,
    fire = 1,
    maxpool = 2,
    global_avgpool = 3,
    softmax = 4,
    fixed2float = 5,
};

inline const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::fire: return "fire";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::global_avgpool: return "global_avgpool";
        case LayerKind::softmax: return "softmax";
        case LayerKind::fixed2float: return "fixed2float";
    }
    return "?";
}

// Channel counts of the squeeze 1x1 conv and the two parallel expand convs.
// Output channels are expand1 + expand3; all three convs run fused ReLU.
struct FireSpec {
    int squeeze = 0;
    int expand1 = 0;
    int expand3 = 0;
};

// One pipeline stage. conv geometry doubles as the pool geometry (kernel and
// stride) for maxpool nodes; param_base indexes the model's parameter slots
// for conv (one slot) and fire (three slots: squeeze, expand1x1, expand3x3).
struct LayerNode {
    LayerKind kind = LayerKind::conv;
    LayerParams conv;
    FireSpec fire;
    int param_base = -1;
};

struct NetworkSpec {
    int input_y = 0;
    int input_x = 0;
    int input_c = 0;
    std::vector<LayerNode> nodes;
};

// Resolved tensor dims between stages: shape[i] feeds node i, shape.back() is
// the final output.
struct ShapeChain {
    std::vector<Dims2> dims;
    std::vector<int> channels;
};

inline int conv_slots(LayerKind k) {
    return k == LayerKind::conv ? 1 : k == LayerKind::fire ? 3 : 0;
}

// The three conv layers inside a fire block, derived from the fire spec and
// the block's input geometry.
inline LayerParams fire_squeeze_params(const LayerNode& n) {
    return LayerParams{n.conv.y_in, n.conv.x_in, n.conv.c_in, n.fire.squeeze, 1, 1, 0, true};
}
inline LayerParams fire_expand1_params(const LayerNode& n) {
    return LayerParams{n.conv.y_in, n.conv.x_in, n.fire.squeeze, n.fire.expand1, 1, 1, 0, true};
}
inline LayerParams fire_expand3_params(const LayerNode& n) {
    return LayerParams{n.conv.y_in, n.conv.x_in, n.fire.squeeze, n.fire.expand3, 3, 1, 1, true};
}

// Walks the graph checking every stage's dims against its predecessor and
// filling the per-node input geometry. Throws naming the offending node.
inline ShapeChain resolve_shapes(NetworkSpec& net) {
    detail::require(net.input_y >= 1 && net.input_x >= 1 && net.input_c >= 1,
                    "network: empty input dims");
    ShapeChain chain;
    Dims2 d{net.input_y, net.input_x};
    int c = net.input_c;
    chain.dims.push_back(d);
    chain.channels.push_back(c);
    int slot = 0;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        LayerNode& n = net.nodes[i];
        const std::string where = "node " + std::to_string(i) + " (" + kind_name(n.kind) + ")";
        try {
            switch (n.kind) {
                case LayerKind::conv: {
                    detail::require(n.conv.c_in == c, "input channel mismatch");
                    n.conv.y_in = d.y;
                    n.conv.x_in = d.x;
                    d = output_dims(n.conv);
                    c = n.conv.c_out;
                    n.param_base = slot;
                    slot += 1;
                    break;
                }
                case LayerKind::fire: {
                    detail::require(n.conv.c_in == c, "input channel mismatch");
                    detail::require(n.fire.squeeze >= 1 && n.fire.expand1 >= 1 && n.fire.expand3 >= 1,
                                    "empty fire spec");
                    n.conv.y_in = d.y;
                    n.conv.x_in = d.x;
                    n.conv.c_out = n.fire.expand1 + n.fire.expand3;
                    // The 3x3 expand is the binding geometry check (pad 1 keeps dims).
                    (void)output_dims(fire_expand3_params(n));
                    c = n.conv.c_out;
                    n.param_base = slot;
                    slot += 3;
                    break;
                }
                case LayerKind::maxpool: {
                    n.conv.y_in = d.y;
                    n.conv.x_in = d.x;
                    n.conv.c_in = n.conv.c_out = c;
                    d = pool_output_dims(d.y, d.x, n.conv.kernel, n.conv.stride);
                    break;
                }
                case LayerKind::global_avgpool: {
                    n.conv.y_in = d.y;
                    n.conv.x_in = d.x;
                    n.conv.c_in = n.conv.c_out = c;
                    d = Dims2{1, 1};
                    break;
                }
                case LayerKind::softmax:
                case LayerKind::fixed2float: {
                    n.conv.y_in = d.y;
                    n.conv.x_in = d.x;
                    n.conv.c_in = n.conv.c_out = c;
                    break;
                }
            }
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(where + ": " + e.what());
        }
        chain.dims.push_back(d);
        chain.channels.push_back(c);
    }
    return chain;
}

// Const walk for already-resolved graphs: recomputes the chain and requires
// the stored per-node geometry to match, so executors never mutate a shared
// model.
inline ShapeChain check_shapes(const NetworkSpec& net) {
    NetworkSpec copy = net;
    ShapeChain chain = resolve_shapes(copy);
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        if (!(copy.nodes[i].conv == net.nodes[i].conv) ||
            copy.nodes[i].param_base != net.nodes[i].param_base)
            throw std::invalid_argument("node " + std::to_string(i) +
                                        ": stored dims disagree with the shape chain "
                                        "(run resolve_shapes after building a graph)");
    }
    return chain;
}

// Quantized model: graph plus one ConvParams per conv slot and the runtime
// activation format.
struct Model {
    NetworkSpec net;
    FixedFormat act_fmt{16, 3};
    std::vector<ConvParams> params;
};

struct FloatModel {
    NetworkSpec net;
    std::vector<FloatConvParams> params;
};

inline int total_conv_slots(const NetworkSpec& net) {
    int n = 0;
    for (const auto& node : net.nodes) n += conv_slots(node.kind);
    return n;
}

namespace detail {

inline void check_model_params(const Model& m) {
    require(static_cast<int>(m.params.size()) == total_conv_slots(m.net),
            "model: parameter slot count mismatch");
    require(m.act_fmt.valid(), "model: invalid activation format");
    int slot = 0;
    for (std::size_t i = 0; i < m.net.nodes.size(); ++i) {
        const LayerNode& n = m.net.nodes[i];
        std::vector<LayerParams> convs;
        if (n.kind == LayerKind::conv) convs.push_back(n.conv);
        if (n.kind == LayerKind::fire) {
            convs.push_back(fire_squeeze_params(n));
            convs.push_back(fire_expand1_params(n));
            convs.push_back(fire_expand3_params(n));
        }
        for (const auto& p : convs) {
            const auto& k = m.params[static_cast<std::size_t>(slot)];
            detail::require(k.weights.size() ==
                                static_cast<std::size_t>(p.c_out) * p.kernel * p.kernel * p.c_in,
                            "model: weight count mismatch");
            detail::require(k.bias.size() == static_cast<std::size_t>(p.c_out),
                            "model: bias count mismatch");
            ++slot;
        }
    }
}

}  // namespace detail

// Resolves the graph in place, then checks parameter slot sizes. Loaders and
// the quantizer run this, so their models come out resolved.
inline void validate_model(Model& m) {
    resolve_shapes(m.net);
    detail::check_model_params(m);
}

// Non-mutating variant for executors; the model must already be resolved.
inline void check_model(const Model& m) {
    check_shapes(m.net);
    detail::check_model_params(m);
}

// The published v1.1 pipeline: conv(64,3x3,S2) -> maxpool -> fire x2 ->
// maxpool -> fire x2 -> maxpool -> fire x4 -> conv(1000,1x1) -> fixed2float
// -> global avgpool -> softmax, for a 227x227x3 input.
inline NetworkSpec squeezenet_v11() {
    NetworkSpec net;
    net.input_y = 227;
    net.input_x = 227;
    net.input_c = 3;
    auto conv = [](int c_in, int c_out, int k, int s, int p) {
        LayerNode n;
        n.kind = LayerKind::conv;
        n.conv = LayerParams{0, 0, c_in, c_out, k, s, p, true};
        return n;
    };
    auto pool = []() {
        LayerNode n;
        n.kind = LayerKind::maxpool;
        n.conv.kernel = 3;
        n.conv.stride = 2;
        return n;
    };
    auto fire = [](int c_in, int s, int e) {
        LayerNode n;
        n.kind = LayerKind::fire;
        n.conv.c_in = c_in;
        n.fire = FireSpec{s, e, e};
        return n;
    };
    auto plain = [](LayerKind k) {
        LayerNode n;
        n.kind = k;
        return n;
    };
    net.nodes = {
        conv(3, 64, 3, 2, 0),
        pool(),
        fire(64, 16, 64),
        fire(128, 16, 64),
        pool(),
        fire(128, 32, 128),
        fire(256, 32, 128),
        pool(),
        fire(256, 48, 192),
        fire(384, 48, 192),
        fire(384, 64, 256),
        fire(512, 64, 256),
        conv(512, 1000, 1, 1, 0),
        plain(LayerKind::fixed2float),
        plain(LayerKind::global_avgpool),
        plain(LayerKind::softmax),
    };
    return net;
}

struct RunOptions {
    int parallel_n = 3;       // requested 2^n output-channel parallelism
    int ci_min = kDefaultCiMin;
};

// Per-conv stream accounting from one inference, for consumption checks.
struct ConvTraceEntry {
    std::string name;
    LayerParams params;
    std::size_t pixels_in_read = 0;
    std::size_t pixels_out_written = 0;
};

struct InferenceTrace {
    std::vector<ConvTraceEntry> convs;
    std::vector<FmapTensor> fmaps;    // filled only when keep_fmaps
    std::vector<std::string> fmap_names;
    bool keep_fmaps = false;
};

namespace detail {

// Largest exponent <= requested whose 2^n divides c_out.
inline int effective_parallel(int c_out, int requested) {
    int n = std::min(requested, 30);
    while (n > 0 && c_out % (1 << n) != 0) --n;
    return n;
}

inline FmapTensor run_conv_node(const LayerParams& p, const ConvParams& k, FixedFormat act_fmt,
                                const FmapTensor& in, const RunOptions& opt,
                                const std::string& name, InferenceTrace* trace) {
    const auto [y_out, x_out] = output_dims(p);
    PixelStream src = to_stream(in);
    const bool streamable = p.stride == 1 && p.c_in % opt.ci_min == 0;
    PixelStream dst = streamable
                          ? conv_stream(p, k, act_fmt, src,
                                        effective_parallel(p.c_out, opt.parallel_n), opt.ci_min)
                          : conv_l0(p, k, act_fmt, src, opt.ci_min);
    if (trace) {
        trace->convs.push_back(ConvTraceEntry{name, p, src.pixels_read(), dst.pixels_written()});
    }
    return to_tensor(dst, y_out, x_out, act_fmt);
}

inline void note_fmap(InferenceTrace* trace, const std::string& name, const FmapTensor& t) {
    if (trace && trace->keep_fmaps) {
        trace->fmap_names.push_back(name);
        trace->fmaps.push_back(t);
    }
}

}  // namespace detail

// Fire block: squeeze conv, then the two expand convs on the materialized
// squeeze output, channel-concatenated. All three convs run on the streaming
// engine with fused ReLU.
inline FmapTensor run_fire(const LayerNode& node, const FmapTensor& input,
                           std::span<const ConvParams> params, FixedFormat act_fmt,
                           const RunOptions& opt = {}, const std::string& name = "fire",
                           InferenceTrace* trace = nullptr) {
    detail::require(node.kind == LayerKind::fire, "run_fire: not a fire node");
    detail::require(params.size() == 3, "run_fire: expected 3 parameter slots");
    const FmapTensor squeezed = detail::run_conv_node(fire_squeeze_params(node), params[0],
                                                      act_fmt, input, opt, name + "/squeeze", trace);
    const FmapTensor e1 = detail::run_conv_node(fire_expand1_params(node), params[1], act_fmt,
                                                squeezed, opt, name + "/expand1x1", trace);
    const FmapTensor e3 = detail::run_conv_node(fire_expand3_params(node), params[2], act_fmt,
                                                squeezed, opt, name + "/expand3x3", trace);
    return concat_channels(e1, e3);
}

// Full fixed-point pipeline: quantize the input to the activation format,
// run every stage, return the class probabilities.
inline std::vector<double> run_inference(const Model& m, const FmapTensor& input,
                                         const RunOptions& opt = {},
                                         InferenceTrace* trace = nullptr) {
    check_model(m);
    detail::require(input.kind == ElemKind::real64, "run_inference: input must be real-valued");
    detail::require(input.y == m.net.input_y && input.x == m.net.input_x &&
                        input.c == m.net.input_c,
                    "run_inference: input dims mismatch");

    FmapTensor fmap = float2fixed(input, m.act_fmt);
    std::vector<double> vec;
    bool in_vector_stage = false;
    for (std::size_t i = 0; i < m.net.nodes.size(); ++i) {
        const LayerNode& n = m.net.nodes[i];
        const std::string name = std::to_string(i) + ":" + kind_name(n.kind);
        switch (n.kind) {
            case LayerKind::conv:
                fmap = detail::run_conv_node(n.conv,
                                             m.params[static_cast<std::size_t>(n.param_base)],
                                             m.act_fmt, fmap, opt, name, trace);
                break;
            case LayerKind::fire:
                fmap = run_fire(n, fmap, {m.params.data() + n.param_base, 3}, m.act_fmt, opt,
                                name, trace);
                break;
            case LayerKind::maxpool:
                fmap = maxpool(fmap, n.conv.kernel, n.conv.stride);
                break;
            case LayerKind::fixed2float:
                fmap = fixed2float(fmap);
                break;
            case LayerKind::global_avgpool:
                vec = global_avgpool(fmap);
                in_vector_stage = true;
                break;
            case LayerKind::softmax:
                detail::require(in_vector_stage, "run_inference: softmax before global_avgpool");
                vec = softmax(vec);
                break;
        }
        if (!in_vector_stage) detail::note_fmap(trace, name, fmap);
    }
    detail::require(in_vector_stage, "run_inference: network does not reduce to a vector");
    return vec;
}

// Float reference pipeline: every conv evaluated by the direct-form real
// oracle on dequantized parameters, pooling and the tail stages in doubles.
inline std::vector<double> run_inference_float(const Model& m, const FmapTensor& input,
                                               InferenceTrace* trace = nullptr) {
    check_model(m);
    detail::require(input.kind == ElemKind::real64, "run_inference_float: input must be real-valued");
    detail::require(input.y == m.net.input_y && input.x == m.net.input_x &&
                        input.c == m.net.input_c,
                    "run_inference_float: input dims mismatch");

    auto dequant_params = [&](int slot) {
        const ConvParams& k = m.params[static_cast<std::size_t>(slot)];
        FloatConvParams fp;
        fp.weights.resize(k.weights.size());
        fp.bias.resize(k.bias.size());
        for (std::size_t j = 0; j < k.weights.size(); ++j)
            fp.weights[j] = raw_to_real(k.weights[j], k.weight_fmt.frac_bits);
        for (std::size_t j = 0; j < k.bias.size(); ++j)
            fp.bias[j] = raw_to_real(k.bias[j], k.bias_fmt.frac_bits);
        return fp;
    };

    FmapTensor fmap = input;
    std::vector<double> vec;
    bool in_vector_stage = false;
    for (std::size_t i = 0; i < m.net.nodes.size(); ++i) {
        const LayerNode& n = m.net.nodes[i];
        const std::string name = std::to_string(i) + ":" + kind_name(n.kind);
        switch (n.kind) {
            case LayerKind::conv:
                fmap = reference_conv_float(n.conv, dequant_params(n.param_base), fmap);
                break;
            case LayerKind::fire: {
                const FmapTensor sq =
                    reference_conv_float(fire_squeeze_params(n), dequant_params(n.param_base), fmap);
                const FmapTensor e1 = reference_conv_float(fire_expand1_params(n),
                                                           dequant_params(n.param_base + 1), sq);
                const FmapTensor e3 = reference_conv_float(fire_expand3_params(n),
                                                           dequant_params(n.param_base + 2), sq);
                fmap = concat_channels(e1, e3);
                break;
            }
            case LayerKind::maxpool:
                fmap = maxpool(fmap, n.conv.kernel, n.conv.stride);
                break;
            case LayerKind::fixed2float:
                break;  // already real
            case LayerKind::global_avgpool:
                vec = global_avgpool(fmap);
                in_vector_stage = true;
                break;
            case LayerKind::softmax:
                vec = softmax(vec);
                break;
        }
        if (!in_vector_stage) detail::note_fmap(trace, name, fmap);
    }
    detail::require(in_vector_stage, "run_inference_float: network does not reduce to a vector");
    return vec;
}

}  // namespace sqj
