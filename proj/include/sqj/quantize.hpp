// Model quantization: applies fixed formats to float parameters and reports
// per-slot saturation counts. Format search is external; formats arrive as
// inputs.
#pragma once

#include "sqj/netgraph.hpp"

namespace sqj {

struct SlotQuantStats {
    std::string name;
    std::size_t weight_count = 0;
    std::size_t weight_saturated = 0;
    std::size_t bias_count = 0;
    std::size_t bias_saturated = 0;
};

struct QuantizeStats {
    std::vector<SlotQuantStats> slots;
};

namespace detail {

inline std::vector<std::string> conv_slot_names(const NetworkSpec& net) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        const auto& n = net.nodes[i];
        const std::string base = std::to_string(i) + ":" + kind_name(n.kind);
        if (n.kind == LayerKind::conv) names.push_back(base);
        if (n.kind == LayerKind::fire) {
            names.push_back(base + "/squeeze");
            names.push_back(base + "/expand1x1");
            names.push_back(base + "/expand3x3");
        }
    }
    return names;
}

}  // namespace detail

// Every weight and bias quantized with weight_fmt; act_fmt recorded for
// runtime. Saturating by design; a NaN parameter is an error.
inline Model quantize_model(const FloatModel& fm, FixedFormat weight_fmt, FixedFormat act_fmt,
                            QuantizeStats* stats = nullptr) {
    detail::require(weight_fmt.valid() && act_fmt.valid(), "quantize_model: invalid format");
    Model m;
    m.net = fm.net;
    m.act_fmt = act_fmt;
    m.params.reserve(fm.params.size());
    const auto names = detail::conv_slot_names(fm.net);
    detail::require(names.size() == fm.params.size(), "quantize_model: parameter slot count mismatch");
    const double wmin = weight_fmt.real_min(), wmax = weight_fmt.real_max();
    for (std::size_t s = 0; s < fm.params.size(); ++s) {
        const auto& fp = fm.params[s];
        ConvParams k;
        k.weight_fmt = weight_fmt;
        k.bias_fmt = weight_fmt;
        k.weights.resize(fp.weights.size());
        k.bias.resize(fp.bias.size());
        SlotQuantStats st;
        st.name = names[s];
        st.weight_count = fp.weights.size();
        st.bias_count = fp.bias.size();
        for (std::size_t i = 0; i < fp.weights.size(); ++i) {
            k.weights[i] = quantize(fp.weights[i], weight_fmt).raw;
            if (fp.weights[i] < wmin || fp.weights[i] > wmax) ++st.weight_saturated;
        }
        for (std::size_t i = 0; i < fp.bias.size(); ++i) {
            k.bias[i] = quantize(fp.bias[i], weight_fmt).raw;
            if (fp.bias[i] < wmin || fp.bias[i] > wmax) ++st.bias_saturated;
        }
        if (stats) stats->slots.push_back(std::move(st));
        m.params.push_back(std::move(k));
    }
    validate_model(m);
    return m;
}

}  // namespace sqj
