// Streaming convolution engine: rotating line-buffer set, shifting window
// buffer, grouped MAC lanes with power-of-two output-channel parallelism, and
// the distinct first-layer engine that supports stride > 1 and small channel
// counts.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "sqj/fixed.hpp"
#include "sqj/layer.hpp"
#include "sqj/stream.hpp"

namespace sqj {

// Lanes per MAC group. A design parameter; 16 matches the input-channel GCD
// of every layer the streaming engine runs.
inline constexpr int kDefaultCiMin = 16;

// Set of `lines` row buffers addressed through a rotation index table. A
// shift retargets the table instead of moving data: the oldest line becomes
// the single writable line and the other contents stay put.
class LineBufferSet {
public:
    LineBufferSet(int lines, int width, int channels)
        : lines_(lines), width_(width), channels_(channels),
          data_(static_cast<std::size_t>(lines) * width * channels, 0),
          rot_(static_cast<std::size_t>(lines)) {
        detail::require(lines >= 1 && width >= 1 && channels >= 1, "LineBufferSet: empty geometry");
        std::iota(rot_.begin(), rot_.end(), 0);
    }

    int lines() const { return lines_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t capacity() const { return data_.size(); }

    // Window order: rot_[0] is the top line, rot_.back() the newest (and the
    // only write target).
    const std::vector<int>& rotation() const { return rot_; }

    void shift() { std::rotate(rot_.begin(), rot_.begin() + 1, rot_.end()); }

    void write_pixel(int x, std::span<const std::int32_t> px) {
        detail::require(x >= 0 && x < width_, "LineBufferSet: column out of range");
        detail::require(px.size() == static_cast<std::size_t>(channels_),
                        "LineBufferSet: channel count mismatch");
        std::int32_t* dst = line_ptr(rot_.back(), x);
        std::copy(px.begin(), px.end(), dst);
        ++writes_;
    }

    void write_zero_pixel(int x) {
        detail::require(x >= 0 && x < width_, "LineBufferSet: column out of range");
        std::int32_t* dst = line_ptr(rot_.back(), x);
        std::fill(dst, dst + channels_, 0);
        ++writes_;
        ++zero_writes_;
    }

    // line indexes in window order (0 = top) through the rotation table.
    std::int32_t at(int line, int x, int c) const {
        return data_[pos(line, x, c)];
    }

    std::span<const std::int32_t> pixel_span(int line, int x) const {
        return {data_.data() + pos(line, x, 0), static_cast<std::size_t>(channels_)};
    }

    // One full column across all lines, top to bottom: out[line*C + c].
    void read_column(int x, std::span<std::int32_t> out) const {
        detail::require(out.size() == static_cast<std::size_t>(lines_) * channels_,
                        "LineBufferSet: column buffer size mismatch");
        for (int l = 0; l < lines_; ++l) {
            const std::int32_t* src = data_.data() + pos(l, x, 0);
            std::copy(src, src + channels_, out.data() + static_cast<std::size_t>(l) * channels_);
        }
    }

    std::size_t pixel_writes() const { return writes_; }
    std::size_t zero_pixel_writes() const { return zero_writes_; }

private:
    std::size_t pos(int line, int x, int c) const {
        return (static_cast<std::size_t>(rot_[line]) * width_ + x) * channels_ + c;
    }
    std::int32_t* line_ptr(int physical_line, int x) {
        return data_.data() + (static_cast<std::size_t>(physical_line) * width_ + x) * channels_;
    }

    int lines_, width_, channels_;
    std::vector<std::int32_t> data_;
    std::vector<int> rot_;
    std::size_t writes_ = 0;
    std::size_t zero_writes_ = 0;
};

// K x K x C window fed to the MAC lanes. A horizontal step replaces exactly
// one column; the column rotation table keeps logical order without copies.
class WindowBuffer {
public:
    WindowBuffer(int kernel, int channels)
        : kernel_(kernel), channels_(channels),
          data_(static_cast<std::size_t>(kernel) * kernel * channels, 0),
          rot_(static_cast<std::size_t>(kernel)) {
        detail::require(kernel >= 1 && channels >= 1, "WindowBuffer: empty geometry");
        std::iota(rot_.begin(), rot_.end(), 0);
    }

    int kernel() const { return kernel_; }
    int channels() const { return channels_; }

    // col holds one full column, top to bottom: col[row*C + c]. The oldest
    // logical column is replaced and the order advances by one.
    void shift_column(std::span<const std::int32_t> col) {
        detail::require(col.size() == static_cast<std::size_t>(kernel_) * channels_,
                        "WindowBuffer: column size mismatch");
        std::rotate(rot_.begin(), rot_.begin() + 1, rot_.end());
        const int slot = rot_.back();
        for (int row = 0; row < kernel_; ++row) {
            std::int32_t* dst = data_.data() +
                (static_cast<std::size_t>(slot) * kernel_ + row) * channels_;
            const std::int32_t* src = col.data() + static_cast<std::size_t>(row) * channels_;
            std::copy(src, src + channels_, dst);
        }
    }

    std::int32_t at(int row, int col, int c) const {
        return channel_span(row, col)[static_cast<std::size_t>(c)];
    }

    // All channels at one (row, logical column), contiguous.
    std::span<const std::int32_t> channel_span(int row, int col) const {
        const int slot = rot_[col];
        return {data_.data() + (static_cast<std::size_t>(slot) * kernel_ + row) * channels_,
                static_cast<std::size_t>(channels_)};
    }

private:
    int kernel_, channels_;
    std::vector<std::int32_t> data_;
    std::vector<int> rot_;
};

// Contiguous slice of the weight buffer covering one group of 3D kernels.
struct WeightGroup {
    std::span<const std::int32_t> data;   // c_out_count * kernel * kernel * c_in raws
    int c_out_begin = 0;
    int c_out_count = 0;
};

// Splits the weight buffer into 2^n equal groups of kernels in output-channel
// order; concatenating the groups reproduces the original buffer.
inline std::vector<WeightGroup> split_weights(std::span<const std::int32_t> weights,
                                              int c_out, int kernel, int c_in, int n) {
    detail::require(n >= 0 && n < 31, "split_weights: bad parallelism exponent");
    const int groups = 1 << n;
    detail::require(c_out % groups == 0, "split_weights: c_out not divisible by 2^n");
    const std::size_t per_kernel = static_cast<std::size_t>(kernel) * kernel * c_in;
    detail::require(weights.size() == per_kernel * static_cast<std::size_t>(c_out),
                    "split_weights: weight buffer size mismatch");
    const int per_group = c_out / groups;
    std::vector<WeightGroup> out;
    out.reserve(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) {
        out.push_back(WeightGroup{
            weights.subspan(static_cast<std::size_t>(g) * per_group * per_kernel,
                            static_cast<std::size_t>(per_group) * per_kernel),
            g * per_group, per_group});
    }
    return out;
}

namespace detail {

// Reduction for one output channel over the window: c_in lanes in ci_min
// blocks innermost, then kx, then ky. Order is documented but numerically
// irrelevant (exact integer accumulation).
inline std::int64_t window_dot(const WindowBuffer& win, const std::int32_t* kernel_w,
                               int kernel, int c_in, int ci_min) {
    std::int64_t acc = 0;
    for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
            const auto lane = win.channel_span(ky, kx);
            const std::int32_t* wk = kernel_w + (static_cast<std::size_t>(ky) * kernel + kx) * c_in;
            for (int cb = 0; cb < c_in; cb += ci_min) {
                mac_group_raw(lane.subspan(static_cast<std::size_t>(cb),
                                           static_cast<std::size_t>(ci_min)),
                              {wk + cb, static_cast<std::size_t>(ci_min)}, acc);
            }
        }
    }
    return acc;
}

inline void check_conv_params(const LayerParams& p, const ConvParams& k) {
    require(k.weight_fmt.valid() && k.bias_fmt.valid(), "conv: invalid parameter format");
    require(k.weights.size() == static_cast<std::size_t>(p.c_out) * p.kernel * p.kernel * p.c_in,
            "conv: weight count mismatch");
    require(k.bias.size() == static_cast<std::size_t>(p.c_out), "conv: bias count mismatch");
}

}  // namespace detail

// Line-buffer accounting from one conv_stream run.
struct ConvStreamStats {
    std::size_t itb_capacity = 0;      // elements: lines * buffered width * channels
    std::size_t itb_pixel_writes = 0;  // every written pixel, padding included
    std::size_t itb_zero_writes = 0;   // injected padding pixels
};

// Streaming engine for the stride-1 layers. Walks the input once in raster
// order, caching K rows in the line-buffer set and feeding the window buffer
// one column per output pixel. Padding pixels are injected as exact zero
// words; the input stream carries only real feature-map pixels. Output is
// bit-identical for every legal parallelism exponent.
inline PixelStream conv_stream(const LayerParams& p, const ConvParams& k,
                               FixedFormat act_fmt, PixelStream& in,
                               int parallel_n, int ci_min = kDefaultCiMin,
                               ConvStreamStats* stats = nullptr) {
    detail::require(p.stride == 1, "conv_stream: stride must be 1");
    detail::require(p.kernel == 1 || p.kernel == 3, "conv_stream: kernel must be 1 or 3");
    detail::require(ci_min >= 1, "conv_stream: bad ci_min");
    detail::require(p.c_in % ci_min == 0, "conv_stream: c_in not divisible by ci_min");
    detail::require(act_fmt.valid(), "conv_stream: invalid activation format");
    detail::require(in.channels() == p.c_in, "conv_stream: input stream channel mismatch");
    detail::check_conv_params(p, k);

    const auto [y_out, x_out] = output_dims(p);
    const int K = p.kernel, C = p.c_in;
    const int x_buf = p.x_in + 2 * p.pad;
    const auto groups = split_weights(k.weights, p.c_out, K, C, parallel_n);
    const int acc_frac = k.weight_fmt.frac_bits + act_fmt.frac_bits;
    const std::size_t per_kernel = static_cast<std::size_t>(K) * K * C;

    LineBufferSet itb(K, x_buf, C);
    WindowBuffer window(K, C);
    PixelStream out(p.c_out);
    std::vector<std::int32_t> out_px(static_cast<std::size_t>(p.c_out));
    std::vector<std::int32_t> col(static_cast<std::size_t>(K) * C);
    std::vector<std::int32_t> px(static_cast<std::size_t>(C));

    auto feed = [&](int row, int xb) {
        const bool pad_px = row < p.pad || row >= p.pad + p.y_in ||
                            xb < p.pad || xb >= p.pad + p.x_in;
        if (pad_px) {
            itb.write_zero_pixel(xb);
        } else {
            in.pop(px);
            itb.write_pixel(xb, px);
        }
    };

    int row = 0;
    // Prime the first K-1 rows of the padded input.
    for (; row < K - 1; ++row) {
        itb.shift();
        for (int xb = 0; xb < x_buf; ++xb) feed(row, xb);
    }
    for (int yo = 0; yo < y_out; ++yo, ++row) {
        itb.shift();
        // Two pixels pre-load the fresh line (none for K=1), then the window
        // picks up its first K-1 columns.
        for (int xb = 0; xb < K - 1; ++xb) feed(row, xb);
        for (int kx = 0; kx < K - 1; ++kx) {
            itb.read_column(kx, col);
            window.shift_column(col);
        }
        for (int xo = 0; xo < x_out; ++xo) {
            const int xb = xo + K - 1;
            feed(row, xb);
            itb.read_column(xb, col);
            window.shift_column(col);
            for (const auto& g : groups) {
                for (int j = 0; j < g.c_out_count; ++j) {
                    const int co = g.c_out_begin + j;
                    const std::int64_t acc =
                        detail::window_dot(window, g.data.data() + static_cast<std::size_t>(j) * per_kernel,
                                           K, C, ci_min);
                    out_px[static_cast<std::size_t>(co)] =
                        finalize(Accumulator{acc, acc_frac},
                                 FixedWord{k.bias[static_cast<std::size_t>(co)], k.bias_fmt},
                                 act_fmt, p.fused_relu).raw;
                }
            }
            out.push(out_px);
        }
    }
    if (stats != nullptr) {
        stats->itb_capacity = itb.capacity();
        stats->itb_pixel_writes = itb.pixel_writes();
        stats->itb_zero_writes = itb.zero_pixel_writes();
    }
    return out;
}

// First-layer engine: arbitrary stride, no channel-divisibility requirement.
// Channels are zero-padded up to a ci_min multiple internally so the same MAC
// group datapath is reused; the zero lanes contribute nothing to the exact
// sum. Rows roll through a K-line buffer, each input pixel read exactly once.
inline PixelStream conv_l0(const LayerParams& p, const ConvParams& k,
                           FixedFormat act_fmt, PixelStream& in,
                           int ci_min = kDefaultCiMin) {
    detail::require(p.stride >= 1, "conv_l0: bad stride");
    detail::require(p.kernel == 1 || p.kernel == 3, "conv_l0: kernel must be 1 or 3");
    detail::require(ci_min >= 1, "conv_l0: bad ci_min");
    detail::require(act_fmt.valid(), "conv_l0: invalid activation format");
    detail::require(in.channels() == p.c_in, "conv_l0: input stream channel mismatch");
    detail::check_conv_params(p, k);

    const auto [y_out, x_out] = output_dims(p);
    const int K = p.kernel, C = p.c_in;
    const int c_pad = ((C + ci_min - 1) / ci_min) * ci_min;
    const int x_buf = p.x_in + 2 * p.pad;
    const int acc_frac = k.weight_fmt.frac_bits + act_fmt.frac_bits;

    // Channel-padded copy of the weights so lane counts line up.
    std::vector<std::int32_t> wpad(static_cast<std::size_t>(p.c_out) * K * K * c_pad, 0);
    for (int co = 0; co < p.c_out; ++co)
        for (int kk = 0; kk < K * K; ++kk)
            for (int ci = 0; ci < C; ++ci)
                wpad[(static_cast<std::size_t>(co) * K * K + kk) * c_pad + ci] =
                    k.weights[(static_cast<std::size_t>(co) * K * K + kk) * C + ci];

    LineBufferSet rows(K, x_buf, c_pad);
    PixelStream out(p.c_out);
    std::vector<std::int32_t> out_px(static_cast<std::size_t>(p.c_out));
    std::vector<std::int32_t> px(static_cast<std::size_t>(c_pad), 0);

    auto feed = [&](int row, int xb) {
        const bool pad_px = row < p.pad || row >= p.pad + p.y_in ||
                            xb < p.pad || xb >= p.pad + p.x_in;
        if (pad_px) {
            rows.write_zero_pixel(xb);
        } else {
            std::fill(px.begin() + C, px.end(), 0);
            in.pop({px.data(), static_cast<std::size_t>(C)});
            rows.write_pixel(xb, px);
        }
    };

    int next_row = 0;
    for (int yo = 0; yo < y_out; ++yo) {
        const int last_row = yo * p.stride + K - 1;
        while (next_row <= last_row) {
            rows.shift();
            for (int xb = 0; xb < x_buf; ++xb) feed(next_row, xb);
            ++next_row;
        }
        for (int xo = 0; xo < x_out; ++xo) {
            const int x0 = xo * p.stride;
            for (int co = 0; co < p.c_out; ++co) {
                std::int64_t acc = 0;
                const std::int32_t* wk = wpad.data() + static_cast<std::size_t>(co) * K * K * c_pad;
                for (int ky = 0; ky < K; ++ky) {
                    for (int kx = 0; kx < K; ++kx) {
                        const auto lane = rows.pixel_span(ky, x0 + kx);
                        const std::int32_t* w = wk + (static_cast<std::size_t>(ky) * K + kx) * c_pad;
                        for (int cb = 0; cb < c_pad; cb += ci_min) {
                            mac_group_raw(lane.subspan(static_cast<std::size_t>(cb),
                                                       static_cast<std::size_t>(ci_min)),
                                          {w + cb, static_cast<std::size_t>(ci_min)}, acc);
                        }
                    }
                }
                out_px[static_cast<std::size_t>(co)] =
                    finalize(Accumulator{acc, acc_frac},
                             FixedWord{k.bias[static_cast<std::size_t>(co)], k.bias_fmt},
                             act_fmt, p.fused_relu).raw;
            }
            out.push(out_px);
        }
    }
    return out;
}

}  // namespace sqj
