// Two's-complement fixed-point arithmetic: quantization, wide multiply-accumulate,
// bias alignment, rounding/saturation and fused ReLU.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace sqj {

namespace detail {
inline void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

// Signed Q-format with total_bits total width (sign counted inside the
// integer part) and frac_bits fractional bits. {8,7} and {16,3} are the
// parameter and activation formats used throughout the network.
struct FixedFormat {
    int total_bits = 16;
    int frac_bits = 0;

    friend constexpr bool operator==(const FixedFormat&, const FixedFormat&) = default;

    constexpr bool valid() const {
        return total_bits >= 1 && total_bits <= 32 && frac_bits >= 0 && frac_bits < total_bits;
    }
    constexpr std::int64_t raw_min() const { return -(std::int64_t{1} << (total_bits - 1)); }
    constexpr std::int64_t raw_max() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
    double real_min() const { return std::ldexp(static_cast<double>(raw_min()), -frac_bits); }
    double real_max() const { return std::ldexp(static_cast<double>(raw_max()), -frac_bits); }
    // Quantization step, 2^-frac_bits.
    double step() const { return std::ldexp(1.0, -frac_bits); }
};

// One quantized value: raw two's-complement integer plus its format.
struct FixedWord {
    std::int32_t raw = 0;
    FixedFormat fmt;
};

// Running sum of products. 64-bit raw never rounds or saturates; frac_bits is
// the scale of the products feeding it (weight frac + activation frac).
// Worst case over the network: 4608 products of 8x16-bit operands needs ~35
// bits, so 64 bits leaves ample headroom.
struct Accumulator {
    std::int64_t raw = 0;
    int frac_bits = 0;
};

// Round to nearest, ties away from zero (quantization and output rescale both
// use this mode).
inline std::int64_t round_half_away(double v) { return std::llround(v); }

inline std::int32_t saturate_raw(std::int64_t raw, FixedFormat fmt) {
    const std::int64_t lo = fmt.raw_min(), hi = fmt.raw_max();
    if (raw < lo) raw = lo;
    if (raw > hi) raw = hi;
    return static_cast<std::int32_t>(raw);
}

// Real value -> nearest representable word, saturating at the format range.
// NaN is rejected; infinities saturate like any out-of-range value.
inline FixedWord quantize(double value, FixedFormat fmt) {
    detail::require(fmt.valid(), "quantize: invalid format");
    detail::require(!std::isnan(value), "quantize: NaN input");
    const double scaled = std::ldexp(value, fmt.frac_bits);
    const std::int64_t lo = fmt.raw_min(), hi = fmt.raw_max();
    std::int64_t raw;
    if (scaled <= static_cast<double>(lo)) {
        raw = lo;
    } else if (scaled >= static_cast<double>(hi)) {
        raw = hi;
    } else {
        raw = round_half_away(scaled);
    }
    return FixedWord{saturate_raw(raw, fmt), fmt};
}

// Exact: raw * 2^-frac is always representable in a double for <=32-bit raws.
inline double dequantize(FixedWord w) {
    return std::ldexp(static_cast<double>(w.raw), -w.fmt.frac_bits);
}

inline double raw_to_real(std::int64_t raw, int frac_bits) {
    return std::ldexp(static_cast<double>(raw), -frac_bits);
}

// Dot-product kernel over raw values; exact 64-bit integer arithmetic with no
// intermediate rounding, so any accumulation order gives the same bits.
inline void mac_group_raw(std::span<const std::int32_t> acts,
                          std::span<const std::int32_t> wts,
                          std::int64_t& acc) {
    detail::require(acts.size() == wts.size(), "mac_group: length mismatch");
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < acts.size(); ++i) {
        sum += static_cast<std::int64_t>(acts[i]) * static_cast<std::int64_t>(wts[i]);
    }
    acc += sum;
}

// Typed wrapper: checks that activations and weights each share one format and
// that the accumulator sits at the product scale.
inline void mac_group(std::span<const FixedWord> acts,
                      std::span<const FixedWord> wts,
                      Accumulator& acc) {
    detail::require(acts.size() == wts.size(), "mac_group: length mismatch");
    if (acts.empty()) return;
    const FixedFormat afmt = acts.front().fmt, wfmt = wts.front().fmt;
    for (const auto& a : acts) detail::require(a.fmt == afmt, "mac_group: mixed activation formats");
    for (const auto& w : wts) detail::require(w.fmt == wfmt, "mac_group: mixed weight formats");
    detail::require(acc.frac_bits == afmt.frac_bits + wfmt.frac_bits,
                    "mac_group: accumulator scale mismatch");
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < acts.size(); ++i) {
        sum += static_cast<std::int64_t>(acts[i].raw) * static_cast<std::int64_t>(wts[i].raw);
    }
    acc.raw += sum;
}

// Arithmetic right shift with round-to-nearest, ties away from zero.
inline std::int64_t shift_round_half_away(std::int64_t v, int shift) {
    if (shift <= 0) return v;
    const std::int64_t half = std::int64_t{1} << (shift - 1);
    if (v >= 0) return (v + half) >> shift;
    return -((-v + half) >> shift);
}

// Close out one output value: align the bias up to the accumulator scale (an
// exact left shift), apply ReLU at full precision, then rescale to the output
// format with round-half-away and saturation.
inline FixedWord finalize(const Accumulator& acc, FixedWord bias,
                          FixedFormat out_fmt, bool apply_relu) {
    detail::require(out_fmt.valid(), "finalize: invalid output format");
    detail::require(acc.frac_bits >= bias.fmt.frac_bits, "finalize: bias scale above accumulator");
    detail::require(acc.frac_bits >= out_fmt.frac_bits, "finalize: output scale above accumulator");
    const int bias_shift = acc.frac_bits - bias.fmt.frac_bits;
    std::int64_t sum = acc.raw + (static_cast<std::int64_t>(bias.raw) << bias_shift);
    if (apply_relu && sum < 0) sum = 0;
    const std::int64_t rescaled = shift_round_half_away(sum, acc.frac_bits - out_fmt.frac_bits);
    return FixedWord{saturate_raw(rescaled, out_fmt), out_fmt};
}

// ReLU on a finished word; kept for layers that cannot fuse it into finalize.
inline FixedWord relu(FixedWord w) {
    return w.raw < 0 ? FixedWord{0, w.fmt} : w;
}

}  // namespace sqj
