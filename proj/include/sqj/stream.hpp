// FIFO pixel stream: raster-order delivery, one pixel = all channels of one
// (y, x) location. Read/write counters let tests pin exact consumption.
#pragma once

#include <cstdint>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "sqj/tensor.hpp"

namespace sqj {

// Reading past the last buffered pixel.
struct StreamUnderrun : std::runtime_error {
    StreamUnderrun() : std::runtime_error("pixel stream underrun") {}
};

class PixelStream {
public:
    explicit PixelStream(int channels) : channels_(channels) {
        detail::require(channels >= 1, "PixelStream: channels must be positive");
    }

    int channels() const { return channels_; }

    void push(std::span<const std::int32_t> pixel) {
        detail::require(pixel.size() == static_cast<std::size_t>(channels_),
                        "PixelStream: pixel width mismatch");
        data_.insert(data_.end(), pixel.begin(), pixel.end());
        ++written_;
    }

    // Consumes the oldest pixel into out, which must span exactly one pixel.
    void pop(std::span<std::int32_t> out) {
        detail::require(out.size() == static_cast<std::size_t>(channels_),
                        "PixelStream: pixel width mismatch");
        if (read_ >= written_) throw StreamUnderrun{};
        const std::size_t base = read_pos_;
        for (int i = 0; i < channels_; ++i) out[i] = data_[base + i];
        read_pos_ += channels_;
        ++read_;
    }

    // Pixels currently buffered (written but not yet read).
    std::size_t size() const { return written_ - read_; }
    bool empty() const { return size() == 0; }

    std::size_t pixels_written() const { return written_; }
    std::size_t pixels_read() const { return read_; }

private:
    int channels_;
    std::size_t read_pos_ = 0;
    std::size_t written_ = 0;
    std::size_t read_ = 0;
    std::vector<std::int32_t> data_;
};

// Fills a stream with a fixed tensor's pixels in raster order.
inline PixelStream to_stream(const FmapTensor& t) {
    detail::require(t.kind == ElemKind::fixed, "to_stream: tensor must be fixed-valued");
    PixelStream s(t.c);
    for (int iy = 0; iy < t.y; ++iy)
        for (int ix = 0; ix < t.x; ++ix) s.push(t.pixel(iy, ix));
    return s;
}

// Drains y*x pixels into a fixed tensor of the given format.
inline FmapTensor to_tensor(PixelStream& s, int y, int x, FixedFormat fmt) {
    FmapTensor t = FmapTensor::fixed(y, x, s.channels(), fmt);
    for (int iy = 0; iy < y; ++iy)
        for (int ix = 0; ix < x; ++ix) s.pop(t.pixel(iy, ix));
    return t;
}

}  // namespace sqj
