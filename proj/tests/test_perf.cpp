#include "doctest.h"

#include "sqj/perf.hpp"

using namespace sqj;

TEST_CASE("estimate_layer reproduces the closed-form instance") {
    // one output pixel, 16 channels out over 4 units, 16 lanes: 4 cycles
    LayerParams p{1, 1, 16, 16, 1, 1, 0, false};
    HwConfig cfg;
    cfg.units = 4;
    cfg.ci_min = 16;
    const LayerCost c = estimate_layer(p, cfg);
    CHECK(c.cycles == 4);
    CHECK(c.ideal_cycles == 4);
    CHECK(c.macs == 256);
}

TEST_CASE("doubling units halves the inner-product term at zero overheads") {
    LayerParams p{8, 8, 32, 16, 3, 1, 1, false};
    HwConfig four;
    four.units = 4;
    HwConfig eight;
    eight.units = 8;
    CHECK(estimate_layer(p, four).cycles == 2 * estimate_layer(p, eight).cycles);
}

TEST_CASE("modeled cycles never beat the ideal bound") {
    NetworkSpec net = squeezenet_v11();
    for (int units : {1, 2, 4, 8, 16}) {
        for (int ci_min : {4, 8, 16, 32}) {
            HwConfig cfg;
            cfg.units = units;
            cfg.ci_min = ci_min;
            const PerfReport r = estimate_network(net, cfg, 16, 8, 8);
            for (const auto& lc : r.layers) CHECK(lc.cycles >= lc.ideal_cycles);
        }
    }
}

TEST_CASE("cycles are non-increasing in units and in ci_min") {
    NetworkSpec net = squeezenet_v11();
    std::int64_t last = -1;
    for (int units : {1, 2, 4, 8, 16, 32}) {
        HwConfig cfg;
        cfg.units = units;
        const PerfReport r = estimate_network(net, cfg, 16, 8, 8);
        if (last >= 0) CHECK(r.total_cycles <= last);
        last = r.total_cycles;
    }
    last = -1;
    for (int ci_min : {2, 4, 8, 16, 32, 64}) {
        HwConfig cfg;
        cfg.ci_min = ci_min;
        const PerfReport r = estimate_network(net, cfg, 16, 8, 8);
        if (last >= 0) CHECK(r.total_cycles <= last);
        last = r.total_cycles;
    }
}

TEST_CASE("overheads add where the formula says") {
    LayerParams p{5, 5, 16, 8, 3, 1, 1, false};
    const auto d = output_dims(p);
    HwConfig zero;
    HwConfig loaded;
    loaded.pipeline_fill = 100;
    loaded.row_overhead = 7;
    loaded.per_pixel_overhead = 2;
    const std::int64_t base = estimate_layer(p, zero).cycles;
    const std::int64_t with = estimate_layer(p, loaded).cycles;
    CHECK(with == base + 100 + static_cast<std::int64_t>(d.y) * (7 + static_cast<std::int64_t>(d.x) * 2));
}

TEST_CASE("footprint reproduces the published buffer sizes") {
    HwConfig cfg;  // units = 8
    // 56 x 128 input lines at 16-bit words under a 3x3 kernel
    LayerParams itb_layer{56, 56, 128, 64, 3, 1, 1, false};
    CHECK(footprint(itb_layer, cfg, 16, 8, 8).itb_bits == 344064);

    // 512-channel window buffer
    LayerParams itwb_layer{13, 13, 512, 64, 3, 1, 1, false};
    CHECK(footprint(itwb_layer, cfg, 16, 8, 8).itwb_bits_per_unit == 73728);

    // largest streaming-layer weight buffer: 256 kernels of 3x3x64 at 8 bits
    HwConfig four;
    four.units = 4;
    LayerParams w_layer{13, 13, 64, 256, 3, 1, 1, false};
    const auto f = footprint(w_layer, four, 16, 8, 8);
    CHECK(f.weight_bits_total == 1179648);
    CHECK(f.weight_bits_per_unit == 1179648 / 4);
    CHECK(f.bias_bits == 256 * 8);
    CHECK(f.out_pixel_bits == 256 * 16);
}

TEST_CASE("1x1 layers collapse the line buffer to a single row") {
    HwConfig cfg;
    LayerParams p{10, 12, 32, 8, 1, 1, 0, false};
    CHECK(footprint(p, cfg, 16, 8, 8).itb_bits == 12 * 32 * 16);
}

TEST_CASE("bram budget flagging") {
    HwConfig cfg;
    cfg.bram_bits = 1000;
    LayerParams p{56, 56, 128, 64, 3, 1, 1, false};
    CHECK(footprint(p, cfg, 16, 8, 8).exceeds_bram);
    cfg.bram_bits = 0;
    CHECK_FALSE(footprint(p, cfg, 16, 8, 8).exceeds_bram);
}

TEST_CASE("illegal configurations are rejected") {
    LayerParams p{8, 8, 16, 8, 3, 1, 1, false};
    HwConfig bad;
    bad.units = 3;
    CHECK_THROWS_AS(estimate_layer(p, bad), std::invalid_argument);
    HwConfig neg;
    neg.per_pixel_overhead = -1;
    CHECK_THROWS_AS(estimate_layer(p, neg), std::invalid_argument);
}

TEST_CASE("network report aggregates all 26 conv modules") {
    HwConfig cfg;
    const PerfReport r = estimate_network(squeezenet_v11(), cfg, 16, 8, 8);
    CHECK(r.layers.size() == 26);  // 2 standalone convs + 8 fires x 3
    CHECK(r.total_cycles > 0);
    CHECK(r.total_ms > 0.0);
    CHECK(r.modeled_gops > 0.0);
    CHECK(r.workload_gops == doctest::Approx(network_gops(squeezenet_v11())));
}
