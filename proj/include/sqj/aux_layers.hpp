// Non-convolution pipeline stages: maxpool, global average pool, softmax,
// channel concatenation, and fixed<->float conversion.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sqj/layer.hpp"
#include "sqj/tensor.hpp"

namespace sqj {

// Per-channel window maximum; incomplete tail windows are dropped. Fixed
// words compare by raw value, which is monotone in real value for a shared
// format; a real-valued tensor pools on the doubles directly.
inline FmapTensor maxpool(const FmapTensor& t, int kernel, int stride) {
    const auto [y_out, x_out] = pool_output_dims(t.y, t.x, kernel, stride);
    if (t.kind == ElemKind::fixed) {
        FmapTensor out = FmapTensor::fixed(y_out, x_out, t.c, t.fmt);
        for (int yo = 0; yo < y_out; ++yo)
            for (int xo = 0; xo < x_out; ++xo)
                for (int c = 0; c < t.c; ++c) {
                    std::int32_t m = t.at_raw(yo * stride, xo * stride, c);
                    for (int ky = 0; ky < kernel; ++ky)
                        for (int kx = 0; kx < kernel; ++kx)
                            m = std::max(m, t.at_raw(yo * stride + ky, xo * stride + kx, c));
                    out.at_raw(yo, xo, c) = m;
                }
        return out;
    }
    FmapTensor out = FmapTensor::real(y_out, x_out, t.c);
    for (int yo = 0; yo < y_out; ++yo)
        for (int xo = 0; xo < x_out; ++xo)
            for (int c = 0; c < t.c; ++c) {
                double m = t.at_real(yo * stride, xo * stride, c);
                for (int ky = 0; ky < kernel; ++ky)
                    for (int kx = 0; kx < kernel; ++kx)
                        m = std::max(m, t.at_real(yo * stride + ky, xo * stride + kx, c));
                out.at_real(yo, xo, c) = m;
            }
    return out;
}

// Elementwise dequantize; exact, no rounding.
inline FmapTensor fixed2float(const FmapTensor& t) {
    detail::require(t.kind == ElemKind::fixed, "fixed2float: tensor must be fixed-valued");
    FmapTensor out = FmapTensor::real(t.y, t.x, t.c);
    for (std::size_t i = 0; i < t.size(); ++i)
        out.real_data[i] = raw_to_real(t.raw_data[i], t.fmt.frac_bits);
    return out;
}

// Elementwise quantize; saturating, NaN elements are an error.
inline FmapTensor float2fixed(const FmapTensor& t, FixedFormat fmt) {
    detail::require(t.kind == ElemKind::real64, "float2fixed: tensor must be real-valued");
    FmapTensor out = FmapTensor::fixed(t.y, t.x, t.c, fmt);
    for (std::size_t i = 0; i < t.size(); ++i)
        out.raw_data[i] = quantize(t.real_data[i], fmt).raw;
    return out;
}

// Mean over all (y, x) positions per channel.
inline std::vector<double> global_avgpool(const FmapTensor& t) {
    detail::require(t.kind == ElemKind::real64, "global_avgpool: tensor must be real-valued");
    detail::require(t.y >= 1 && t.x >= 1 && t.c >= 1, "global_avgpool: empty tensor");
    std::vector<double> out(static_cast<std::size_t>(t.c), 0.0);
    for (int iy = 0; iy < t.y; ++iy)
        for (int ix = 0; ix < t.x; ++ix)
            for (int c = 0; c < t.c; ++c) out[static_cast<std::size_t>(c)] += t.at_real(iy, ix, c);
    const double scale = 1.0 / (static_cast<double>(t.y) * t.x);
    for (double& v : out) v *= scale;
    return out;
}

// Max-subtracted softmax; invariant under additive shifts of the input.
inline std::vector<double> softmax(const std::vector<double>& v) {
    detail::require(!v.empty(), "softmax: empty input");
    const double m = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (double& e : out) e /= sum;
    return out;
}

// Channel concatenation: a's channels precede b's at every pixel.
inline FmapTensor concat_channels(const FmapTensor& a, const FmapTensor& b) {
    detail::require(a.y == b.y && a.x == b.x, "concat_channels: spatial dims mismatch");
    detail::require(a.kind == b.kind, "concat_channels: element kind mismatch");
    if (a.kind == ElemKind::fixed)
        detail::require(a.fmt == b.fmt, "concat_channels: format mismatch");
    FmapTensor out = a.kind == ElemKind::fixed
                         ? FmapTensor::fixed(a.y, a.x, a.c + b.c, a.fmt)
                         : FmapTensor::real(a.y, a.x, a.c + b.c);
    for (int iy = 0; iy < a.y; ++iy)
        for (int ix = 0; ix < a.x; ++ix) {
            if (a.kind == ElemKind::fixed) {
                auto dst = out.pixel(iy, ix);
                auto pa = a.pixel(iy, ix);
                auto pb = b.pixel(iy, ix);
                std::copy(pa.begin(), pa.end(), dst.begin());
                std::copy(pb.begin(), pb.end(), dst.begin() + a.c);
            } else {
                for (int c = 0; c < a.c; ++c) out.at_real(iy, ix, c) = a.at_real(iy, ix, c);
                for (int c = 0; c < b.c; ++c) out.at_real(iy, ix, a.c + c) = b.at_real(iy, ix, c);
            }
        }
    return out;
}

}  // namespace sqj
