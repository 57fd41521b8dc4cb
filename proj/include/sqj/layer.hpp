// Convolution layer geometry and the quantized parameter bundle.
#pragma once

#include <cstdint>
#include <vector>

#include "sqj/fixed.hpp"

namespace sqj {

// One conv layer's geometry. Kernel is square; pad is pixels added per side.
struct LayerParams {
    int y_in = 0;
    int x_in = 0;
    int c_in = 0;
    int c_out = 0;
    int kernel = 1;
    int stride = 1;
    int pad = 0;
    bool fused_relu = false;

    friend constexpr bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct Dims2 {
    int y = 0;
    int x = 0;
    friend constexpr bool operator==(const Dims2&, const Dims2&) = default;
};

// Output spatial dims: (in - kernel + 2*pad)/stride + 1 per axis. The window
// sweep must tile exactly; a non-divisible geometry is an error.
inline Dims2 output_dims(const LayerParams& p) {
    detail::require(p.y_in >= 1 && p.x_in >= 1 && p.c_in >= 1 && p.c_out >= 1,
                    "output_dims: empty geometry");
    detail::require(p.kernel >= 1 && p.stride >= 1 && p.pad >= 0, "output_dims: bad kernel/stride/pad");
    const int ny = p.y_in - p.kernel + 2 * p.pad;
    const int nx = p.x_in - p.kernel + 2 * p.pad;
    detail::require(ny >= 0 && nx >= 0, "output_dims: kernel larger than padded input");
    detail::require(ny % p.stride == 0 && nx % p.stride == 0, "output_dims: non-divisible geometry");
    return Dims2{ny / p.stride + 1, nx / p.stride + 1};
}

// Pooling windows drop the incomplete tail instead of erroring, which is what
// the v1.1 chain needs at the 56 -> 27 stage.
inline Dims2 pool_output_dims(int y_in, int x_in, int kernel, int stride) {
    detail::require(y_in >= kernel && x_in >= kernel, "pool_output_dims: window larger than input");
    detail::require(kernel >= 1 && stride >= 1, "pool_output_dims: bad kernel/stride");
    return Dims2{(y_in - kernel) / stride + 1, (x_in - kernel) / stride + 1};
}

// Quantized parameters of one conv layer. Weights are raw words laid out
// (c_out, ky, kx, c_in) row-major; bias is c_out raw words.
struct ConvParams {
    std::vector<std::int32_t> weights;
    std::vector<std::int32_t> bias;
    FixedFormat weight_fmt{8, 7};
    FixedFormat bias_fmt{8, 7};
};

// Float-valued parameters, same layout; input to quantization.
struct FloatConvParams {
    std::vector<double> weights;
    std::vector<double> bias;
};

}  // namespace sqj
