// 3D feature map tensor in (y, x, c) order, fixed- or real-valued.
#pragma once

#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

#include "sqj/fixed.hpp"

namespace sqj {

enum class ElemKind : std::uint8_t { real64 = 0, fixed = 1 };

// All channels of one (y, x) location are contiguous; all fixed elements
// share one format.
struct FmapTensor {
    int y = 0;
    int x = 0;
    int c = 0;
    ElemKind kind = ElemKind::real64;
    FixedFormat fmt;                  // meaningful when kind == fixed
    std::vector<double> real_data;
    std::vector<std::int32_t> raw_data;

    static FmapTensor real(int y, int x, int c) {
        detail::require(y >= 0 && x >= 0 && c >= 0, "FmapTensor: negative dims");
        FmapTensor t;
        t.y = y; t.x = x; t.c = c;
        t.kind = ElemKind::real64;
        t.real_data.assign(static_cast<std::size_t>(y) * x * c, 0.0);
        return t;
    }

    static FmapTensor fixed(int y, int x, int c, FixedFormat fmt) {
        detail::require(y >= 0 && x >= 0 && c >= 0, "FmapTensor: negative dims");
        detail::require(fmt.valid(), "FmapTensor: invalid format");
        FmapTensor t;
        t.y = y; t.x = x; t.c = c;
        t.kind = ElemKind::fixed;
        t.fmt = fmt;
        t.raw_data.assign(static_cast<std::size_t>(y) * x * c, 0);
        return t;
    }

    std::size_t size() const { return static_cast<std::size_t>(y) * x * c; }

    std::size_t index(int iy, int ix, int ic) const {
        return (static_cast<std::size_t>(iy) * x + ix) * c + ic;
    }

    bool in_bounds(int iy, int ix) const { return iy >= 0 && iy < y && ix >= 0 && ix < x; }

    double& at_real(int iy, int ix, int ic) { return real_data[index(iy, ix, ic)]; }
    double at_real(int iy, int ix, int ic) const { return real_data[index(iy, ix, ic)]; }
    std::int32_t& at_raw(int iy, int ix, int ic) { return raw_data[index(iy, ix, ic)]; }
    std::int32_t at_raw(int iy, int ix, int ic) const { return raw_data[index(iy, ix, ic)]; }

    // All channels at one pixel, contiguous.
    std::span<const std::int32_t> pixel(int iy, int ix) const {
        return {raw_data.data() + index(iy, ix, 0), static_cast<std::size_t>(c)};
    }
    std::span<std::int32_t> pixel(int iy, int ix) {
        return {raw_data.data() + index(iy, ix, 0), static_cast<std::size_t>(c)};
    }

    bool same_dims(const FmapTensor& o) const { return y == o.y && x == o.x && c == o.c; }
};

}  // namespace sqj
