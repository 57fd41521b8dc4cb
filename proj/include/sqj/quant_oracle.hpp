// Direct-form reference convolutions: the real-arithmetic reference and the
// fixed-point bit-exactness oracle for the streaming engines. No tiling, no
// buffering -- just the literal triple sum.
#pragma once

#include "sqj/fixed.hpp"
#include "sqj/layer.hpp"
#include "sqj/tensor.hpp"

namespace sqj {

// Literal real-arithmetic evaluation of the conv sum plus bias and optional
// fused ReLU.
inline FmapTensor reference_conv_float(const LayerParams& p, const FloatConvParams& k,
                                       const FmapTensor& in) {
    detail::require(in.kind == ElemKind::real64, "reference_conv_float: real tensor required");
    detail::require(in.y == p.y_in && in.x == p.x_in && in.c == p.c_in,
                    "reference_conv_float: input dims mismatch");
    detail::require(k.weights.size() ==
                        static_cast<std::size_t>(p.c_out) * p.kernel * p.kernel * p.c_in,
                    "reference_conv_float: weight count mismatch");
    detail::require(k.bias.size() == static_cast<std::size_t>(p.c_out),
                    "reference_conv_float: bias count mismatch");
    const auto [y_out, x_out] = output_dims(p);
    FmapTensor out = FmapTensor::real(y_out, x_out, p.c_out);
    for (int yo = 0; yo < y_out; ++yo)
        for (int xo = 0; xo < x_out; ++xo)
            for (int co = 0; co < p.c_out; ++co) {
                double sum = 0.0;
                for (int ky = 0; ky < p.kernel; ++ky)
                    for (int kx = 0; kx < p.kernel; ++kx) {
                        const int iy = yo * p.stride + ky - p.pad;
                        const int ix = xo * p.stride + kx - p.pad;
                        if (!in.in_bounds(iy, ix)) continue;   // padding contributes zero
                        for (int ci = 0; ci < p.c_in; ++ci) {
                            const std::size_t wi =
                                ((static_cast<std::size_t>(co) * p.kernel + ky) * p.kernel + kx) *
                                    p.c_in + ci;
                            sum += in.at_real(iy, ix, ci) * k.weights[wi];
                        }
                    }
                sum += k.bias[static_cast<std::size_t>(co)];
                if (p.fused_relu && sum < 0.0) sum = 0.0;
                out.at_real(yo, xo, co) = sum;
            }
    return out;
}

// Same triple sum with exact 64-bit accumulation and the shared finalize
// path, so an engine-vs-oracle mismatch isolates dataflow bugs (buffering,
// rotation, streaming) rather than arithmetic policy. Output format equals
// the input activation format.
inline FmapTensor reference_conv_fixed(const LayerParams& p, const ConvParams& k,
                                       const FmapTensor& in) {
    detail::require(in.kind == ElemKind::fixed, "reference_conv_fixed: fixed tensor required");
    detail::require(in.y == p.y_in && in.x == p.x_in && in.c == p.c_in,
                    "reference_conv_fixed: input dims mismatch");
    detail::require(k.weights.size() ==
                        static_cast<std::size_t>(p.c_out) * p.kernel * p.kernel * p.c_in,
                    "reference_conv_fixed: weight count mismatch");
    detail::require(k.bias.size() == static_cast<std::size_t>(p.c_out),
                    "reference_conv_fixed: bias count mismatch");
    const auto [y_out, x_out] = output_dims(p);
    const FixedFormat act_fmt = in.fmt;
    const int acc_frac = k.weight_fmt.frac_bits + act_fmt.frac_bits;
    FmapTensor out = FmapTensor::fixed(y_out, x_out, p.c_out, act_fmt);
    for (int yo = 0; yo < y_out; ++yo)
        for (int xo = 0; xo < x_out; ++xo)
            for (int co = 0; co < p.c_out; ++co) {
                std::int64_t acc = 0;
                for (int ky = 0; ky < p.kernel; ++ky)
                    for (int kx = 0; kx < p.kernel; ++kx) {
                        const int iy = yo * p.stride + ky - p.pad;
                        const int ix = xo * p.stride + kx - p.pad;
                        if (!in.in_bounds(iy, ix)) continue;
                        for (int ci = 0; ci < p.c_in; ++ci) {
                            const std::size_t wi =
                                ((static_cast<std::size_t>(co) * p.kernel + ky) * p.kernel + kx) *
                                    p.c_in + ci;
                            acc += static_cast<std::int64_t>(in.at_raw(iy, ix, ci)) *
                                   static_cast<std::int64_t>(k.weights[wi]);
                        }
                    }
                out.at_raw(yo, xo, co) =
                    finalize(Accumulator{acc, acc_frac},
                             FixedWord{k.bias[static_cast<std::size_t>(co)], k.bias_fmt},
                             act_fmt, p.fused_relu).raw;
            }
    return out;
}

}  // namespace sqj
