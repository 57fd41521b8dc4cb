// Analytic cycle and on-chip-memory model of an accelerator configuration.
// First-order: initiation-interval-1 MAC pipelines plus additive overheads
// that default to zero, so the model reports ranges rather than asserting any
// measured wall-clock figure.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sqj/netgraph.hpp"

namespace sqj {

struct HwConfig {
    int ci_min = 16;                    // lanes per MAC group
    int units = 8;                      // MAC groups; must be a power of two
    double clock_mhz = 100.0;
    std::int64_t pipeline_fill = 0;     // init cycles per layer
    std::int64_t row_overhead = 0;      // extra cycles per output row
    std::int64_t per_pixel_overhead = 0;
    std::int64_t bram_bits = 0;         // on-chip budget; 0 disables the check
};

inline bool is_pow2(int v) { return v >= 1 && (v & (v - 1)) == 0; }

inline void check_hw_config(const HwConfig& cfg) {
    detail::require(is_pow2(cfg.units), "perf: units must be a power of two");
    detail::require(cfg.ci_min >= 1, "perf: ci_min must be positive");
    detail::require(cfg.clock_mhz > 0.0, "perf: clock must be positive");
    detail::require(cfg.pipeline_fill >= 0 && cfg.row_overhead >= 0 && cfg.per_pixel_overhead >= 0,
                    "perf: negative overhead");
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

inline std::int64_t layer_macs(const LayerParams& p) {
    const auto [y_out, x_out] = output_dims(p);
    return static_cast<std::int64_t>(y_out) * x_out * p.c_out * p.kernel * p.kernel * p.c_in;
}

struct LayerCost {
    std::string name;
    LayerParams params;
    std::int64_t macs = 0;
    std::int64_t cycles = 0;
    std::int64_t ideal_cycles = 0;   // total MACs / (units * ci_min), rounded up
};

// cycles = fill + Y_o * (row_oh + X_o * (px_oh + ceil(C_o/units) * K^2 * ceil(C_i/ci_min)))
inline LayerCost estimate_layer(const LayerParams& p, const HwConfig& cfg,
                                std::string name = {}) {
    check_hw_config(cfg);
    const auto [y_out, x_out] = output_dims(p);
    LayerCost c;
    c.name = std::move(name);
    c.params = p;
    c.macs = layer_macs(p);
    const std::int64_t inner = ceil_div(p.c_out, cfg.units) *
                               static_cast<std::int64_t>(p.kernel) * p.kernel *
                               ceil_div(p.c_in, cfg.ci_min);
    c.cycles = cfg.pipeline_fill +
               static_cast<std::int64_t>(y_out) *
                   (cfg.row_overhead + static_cast<std::int64_t>(x_out) *
                                           (cfg.per_pixel_overhead + inner));
    c.ideal_cycles = ceil_div(c.macs, static_cast<std::int64_t>(cfg.units) * cfg.ci_min);
    return c;
}

// Per-buffer-class bit counts for one layer's on-chip working set.
struct BufferFootprint {
    std::string name;
    std::int64_t itb_bits = 0;            // K * X_i * C_i * act_bits
    std::int64_t itwb_bits_per_unit = 0;  // K * K * C_i * act_bits
    std::int64_t weight_bits_total = 0;   // C_o * K * K * C_i * w_bits
    std::int64_t weight_bits_per_unit = 0;
    std::int64_t bias_bits = 0;           // C_o * b_bits
    std::int64_t out_pixel_bits = 0;      // C_o * act_bits
    std::int64_t total_bits = 0;          // ITB + units * ITWB + weights + bias + out pixel
    bool exceeds_bram = false;
};

inline BufferFootprint footprint(const LayerParams& p, const HwConfig& cfg,
                                 int act_bits, int w_bits, int b_bits,
                                 std::string name = {}) {
    check_hw_config(cfg);
    detail::require(act_bits >= 1 && w_bits >= 1 && b_bits >= 1, "footprint: bad bit widths");
    BufferFootprint f;
    f.name = std::move(name);
    f.itb_bits = static_cast<std::int64_t>(p.kernel) * p.x_in * p.c_in * act_bits;
    f.itwb_bits_per_unit = static_cast<std::int64_t>(p.kernel) * p.kernel * p.c_in * act_bits;
    f.weight_bits_total = static_cast<std::int64_t>(p.c_out) * p.kernel * p.kernel * p.c_in * w_bits;
    f.weight_bits_per_unit = f.weight_bits_total / cfg.units;
    f.bias_bits = static_cast<std::int64_t>(p.c_out) * b_bits;
    f.out_pixel_bits = static_cast<std::int64_t>(p.c_out) * act_bits;
    f.total_bits = f.itb_bits + cfg.units * f.itwb_bits_per_unit + f.weight_bits_total +
                   f.bias_bits + f.out_pixel_bits;
    f.exceeds_bram = cfg.bram_bits > 0 && f.total_bits > cfg.bram_bits;
    return f;
}

struct PerfReport {
    std::vector<LayerCost> layers;
    std::vector<BufferFootprint> footprints;
    std::int64_t total_cycles = 0;
    std::int64_t total_ideal_cycles = 0;
    std::int64_t total_macs = 0;
    double total_ms = 0.0;
    double ideal_ms = 0.0;
    double modeled_gops = 0.0;    // MAC counted as 2 ops
    double ideal_gops = 0.0;
    double workload_gops = 0.0;   // total conv work, in G ops
};

// Every conv in the graph (fire blocks contribute their three convs) through
// the cycle and footprint models.
inline PerfReport estimate_network(NetworkSpec net, const HwConfig& cfg,
                                   int act_bits, int w_bits, int b_bits) {
    check_hw_config(cfg);
    resolve_shapes(net);
    PerfReport r;
    auto add = [&](const LayerParams& p, const std::string& name) {
        r.layers.push_back(estimate_layer(p, cfg, name));
        r.footprints.push_back(footprint(p, cfg, act_bits, w_bits, b_bits, name));
    };
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        const LayerNode& n = net.nodes[i];
        const std::string base = std::to_string(i) + ":" + kind_name(n.kind);
        if (n.kind == LayerKind::conv) add(n.conv, base);
        if (n.kind == LayerKind::fire) {
            add(fire_squeeze_params(n), base + "/squeeze");
            add(fire_expand1_params(n), base + "/expand1x1");
            add(fire_expand3_params(n), base + "/expand3x3");
        }
    }
    for (const auto& lc : r.layers) {
        r.total_cycles += lc.cycles;
        r.total_ideal_cycles += lc.ideal_cycles;
        r.total_macs += lc.macs;
    }
    const double cycles_per_ms = cfg.clock_mhz * 1e3;
    r.total_ms = static_cast<double>(r.total_cycles) / cycles_per_ms;
    r.ideal_ms = static_cast<double>(r.total_ideal_cycles) / cycles_per_ms;
    const double total_ops = 2.0 * static_cast<double>(r.total_macs);
    r.workload_gops = total_ops / 1e9;
    if (r.total_cycles > 0)
        r.modeled_gops = total_ops * cfg.clock_mhz * 1e6 / static_cast<double>(r.total_cycles) / 1e9;
    if (r.total_ideal_cycles > 0)
        r.ideal_gops = total_ops * cfg.clock_mhz * 1e6 / static_cast<double>(r.total_ideal_cycles) / 1e9;
    return r;
}

// Total conv workload in ops; ops_per_mac = 2 is the documented convention.
inline double network_gops(NetworkSpec net, int ops_per_mac = 2) {
    resolve_shapes(net);
    std::int64_t macs = 0;
    for (const auto& n : net.nodes) {
        if (n.kind == LayerKind::conv) macs += layer_macs(n.conv);
        if (n.kind == LayerKind::fire) {
            macs += layer_macs(fire_squeeze_params(n));
            macs += layer_macs(fire_expand1_params(n));
            macs += layer_macs(fire_expand3_params(n));
        }
    }
    return static_cast<double>(macs) * ops_per_mac / 1e9;
}

}  // namespace sqj
