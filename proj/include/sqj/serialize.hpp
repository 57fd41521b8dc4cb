// SQJM model files and SQJT tensor files. Little-endian throughout.
//
// SQJT: "SQJT" | u32 version=1 | u8 dtype (0 real64, 1 fixed16, 2 fixed8) |
//       u8 frac_bits (0 for real64) | u32 y | u32 x | u32 c | payload (y,x,c).
//
// SQJM: "SQJM" | u32 version=1 | u32 record count; per record:
//       u8 kind | u32 y_in,x_in,c_in,c_out,kernel,stride,pad,flags |
//       u8 wt_total | u8 wt_frac | u8 bias_total | u8 bias_frac |
//       weights (signed bytes, (c_out,ky,kx,c_in) row-major) | biases.
//   flags: bit0 fused ReLU; bits 1..2 fire role (0 none, 1 squeeze,
//   2 expand1x1, 3 expand3x3) -- a fire block is stored as its three conv
//   records and folded back on load; bits 16..23 / 24..31 carry the runtime
//   activation format (total/frac bits) on conv records. wt_total == 0 marks
//   the float variant, whose weight/bias payloads are f64 instead of bytes.
#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "sqj/netgraph.hpp"

namespace sqj {

struct io_error : std::runtime_error {
    enum class kind { bad_magic, bad_version, truncated, bad_layout, bad_value, io_fail };
    kind what_kind;
    io_error(kind k, const std::string& msg) : std::runtime_error(msg), what_kind(k) {}
};

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw io_error(io_error::kind::io_fail, "write failed");
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw io_error(io_error::kind::truncated, "unexpected end of file");
}

inline void put_u8(std::ostream& os, std::uint8_t v) { write_bytes(os, &v, 1); }
inline void put_i8(std::ostream& os, std::int8_t v) { write_bytes(os, &v, 1); }

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                               static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    write_bytes(os, b, 4);
}

inline void put_i16(std::ostream& os, std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    const std::uint8_t b[2] = {static_cast<std::uint8_t>(u), static_cast<std::uint8_t>(u >> 8)};
    write_bytes(os, b, 2);
}

inline void put_f64(std::ostream& os, double v) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(u >> (8 * i));
    write_bytes(os, b, 8);
}

inline std::uint8_t get_u8(std::istream& is) {
    std::uint8_t v;
    read_bytes(is, &v, 1);
    return v;
}

inline std::int8_t get_i8(std::istream& is) { return static_cast<std::int8_t>(get_u8(is)); }

inline std::uint32_t get_u32(std::istream& is) {
    std::uint8_t b[4];
    read_bytes(is, b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::int16_t get_i16(std::istream& is) {
    std::uint8_t b[2];
    read_bytes(is, b, 2);
    return static_cast<std::int16_t>(static_cast<std::uint16_t>(b[0]) |
                                     (static_cast<std::uint16_t>(b[1]) << 8));
}

inline double get_f64(std::istream& is) {
    std::uint8_t b[8];
    read_bytes(is, b, 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
}

inline void expect_magic(std::istream& is, const char expect[4], const char* what) {
    char m[4];
    read_bytes(is, m, 4);
    if (std::memcmp(m, expect, 4) != 0)
        throw io_error(io_error::kind::bad_magic, std::string("bad magic, not a ") + what + " file");
}

inline void expect_end(std::istream& is, const char* what) {
    char extra;
    is.read(&extra, 1);
    if (is.gcount() != 0)
        throw io_error(io_error::kind::truncated, std::string("trailing data in ") + what + " file");
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error(io_error::kind::io_fail, "cannot open " + path);
    return f;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error(io_error::kind::io_fail, "cannot open " + path + " for writing");
    return f;
}

}  // namespace detail

// ---------------------------------------------------------------- tensors --

inline void save_tensor(const FmapTensor& t, std::ostream& os) {
    using namespace detail;
    write_bytes(os, "SQJT", 4);
    put_u32(os, 1);
    if (t.kind == ElemKind::real64) {
        put_u8(os, 0);
        put_u8(os, 0);
    } else {
        if (t.fmt.total_bits == 16) put_u8(os, 1);
        else if (t.fmt.total_bits == 8) put_u8(os, 2);
        else throw io_error(io_error::kind::bad_value,
                            "SQJT stores 8- or 16-bit fixed words only");
        put_u8(os, static_cast<std::uint8_t>(t.fmt.frac_bits));
    }
    put_u32(os, static_cast<std::uint32_t>(t.y));
    put_u32(os, static_cast<std::uint32_t>(t.x));
    put_u32(os, static_cast<std::uint32_t>(t.c));
    if (t.kind == ElemKind::real64) {
        for (double v : t.real_data) put_f64(os, v);
    } else if (t.fmt.total_bits == 16) {
        for (std::int32_t r : t.raw_data) put_i16(os, static_cast<std::int16_t>(r));
    } else {
        for (std::int32_t r : t.raw_data) put_i8(os, static_cast<std::int8_t>(r));
    }
}

inline FmapTensor load_tensor(std::istream& is) {
    using namespace detail;
    expect_magic(is, "SQJT", "tensor");
    const std::uint32_t version = get_u32(is);
    if (version != 1)
        throw io_error(io_error::kind::bad_version,
                       "unsupported tensor version " + std::to_string(version));
    const std::uint8_t dtype = get_u8(is);
    const std::uint8_t frac = get_u8(is);
    const auto y = static_cast<int>(get_u32(is));
    const auto x = static_cast<int>(get_u32(is));
    const auto c = static_cast<int>(get_u32(is));
    if (y < 0 || x < 0 || c < 0 ||
        static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(x) *
                static_cast<std::uint64_t>(c) > (std::uint64_t{1} << 28))
        throw io_error(io_error::kind::bad_layout, "implausible tensor dims");
    FmapTensor t;
    switch (dtype) {
        case 0:
            t = FmapTensor::real(y, x, c);
            for (double& v : t.real_data) v = get_f64(is);
            break;
        case 1:
            if (frac >= 16) throw io_error(io_error::kind::bad_value, "bad tensor frac bits");
            t = FmapTensor::fixed(y, x, c, FixedFormat{16, frac});
            for (std::int32_t& r : t.raw_data) r = get_i16(is);
            break;
        case 2:
            if (frac >= 8) throw io_error(io_error::kind::bad_value, "bad tensor frac bits");
            t = FmapTensor::fixed(y, x, c, FixedFormat{8, frac});
            for (std::int32_t& r : t.raw_data) r = get_i8(is);
            break;
        default:
            throw io_error(io_error::kind::bad_value, "unknown tensor dtype tag");
    }
    expect_end(is, "tensor");
    return t;
}

inline void save_tensor(const FmapTensor& t, const std::string& path) {
    auto f = detail::open_out(path);
    save_tensor(t, f);
}

inline FmapTensor load_tensor(const std::string& path) {
    auto f = detail::open_in(path);
    return load_tensor(f);
}

// ----------------------------------------------------------------- models --

namespace detail {

constexpr std::uint32_t kFlagRelu = 1u;
constexpr std::uint32_t kFireRoleShift = 1;         // bits 1..2
constexpr std::uint32_t kActTotalShift = 16;        // bits 16..23
constexpr std::uint32_t kActFracShift = 24;         // bits 24..31

struct RawRecord {
    LayerKind kind = LayerKind::conv;
    LayerParams p;
    int fire_role = 0;
    FixedFormat act_fmt{0, 0};
    FixedFormat weight_fmt{0, 0};
    FixedFormat bias_fmt{0, 0};
    bool float_payload = false;
    ConvParams fixed_params;
    FloatConvParams float_params;
};

inline void put_record_header(std::ostream& os, LayerKind kind, const LayerParams& p,
                              std::uint32_t flags, FixedFormat wfmt, FixedFormat bfmt) {
    put_u8(os, static_cast<std::uint8_t>(kind));
    put_u32(os, static_cast<std::uint32_t>(p.y_in));
    put_u32(os, static_cast<std::uint32_t>(p.x_in));
    put_u32(os, static_cast<std::uint32_t>(p.c_in));
    put_u32(os, static_cast<std::uint32_t>(p.c_out));
    put_u32(os, static_cast<std::uint32_t>(p.kernel));
    put_u32(os, static_cast<std::uint32_t>(p.stride));
    put_u32(os, static_cast<std::uint32_t>(p.pad));
    put_u32(os, flags);
    put_u8(os, static_cast<std::uint8_t>(wfmt.total_bits));
    put_u8(os, static_cast<std::uint8_t>(wfmt.frac_bits));
    put_u8(os, static_cast<std::uint8_t>(bfmt.total_bits));
    put_u8(os, static_cast<std::uint8_t>(bfmt.frac_bits));
}

inline std::uint32_t conv_flags(const LayerParams& p, int fire_role, FixedFormat act_fmt) {
    std::uint32_t flags = p.fused_relu ? kFlagRelu : 0u;
    flags |= static_cast<std::uint32_t>(fire_role) << kFireRoleShift;
    flags |= static_cast<std::uint32_t>(act_fmt.total_bits) << kActTotalShift;
    flags |= static_cast<std::uint32_t>(act_fmt.frac_bits) << kActFracShift;
    return flags;
}

// Serializes the node list as flat records; emit_conv is called once per conv
// slot in order with (params-geometry, fire_role).
template <typename EmitConv>
inline void walk_records(const NetworkSpec& net, EmitConv&& emit_conv, std::ostream& os) {
    for (const auto& n : net.nodes) {
        switch (n.kind) {
            case LayerKind::conv:
                emit_conv(n.conv, 0);
                break;
            case LayerKind::fire:
                emit_conv(fire_squeeze_params(n), 1);
                emit_conv(fire_expand1_params(n), 2);
                emit_conv(fire_expand3_params(n), 3);
                break;
            default:
                put_record_header(os, n.kind, n.conv, 0, FixedFormat{0, 0}, FixedFormat{0, 0});
                break;
        }
    }
}

inline std::uint32_t record_count(const NetworkSpec& net) {
    std::uint32_t count = 0;
    for (const auto& n : net.nodes)
        count += n.kind == LayerKind::fire ? 3u : 1u;
    return count;
}

inline RawRecord read_record(std::istream& is) {
    RawRecord r;
    const std::uint8_t kind = get_u8(is);
    if (kind > 5 || kind == 1)
        throw io_error(io_error::kind::bad_value,
                       "unknown record kind " + std::to_string(kind));
    r.kind = static_cast<LayerKind>(kind);
    r.p.y_in = static_cast<int>(get_u32(is));
    r.p.x_in = static_cast<int>(get_u32(is));
    r.p.c_in = static_cast<int>(get_u32(is));
    r.p.c_out = static_cast<int>(get_u32(is));
    r.p.kernel = static_cast<int>(get_u32(is));
    r.p.stride = static_cast<int>(get_u32(is));
    r.p.pad = static_cast<int>(get_u32(is));
    const std::uint32_t flags = get_u32(is);
    r.p.fused_relu = (flags & kFlagRelu) != 0;
    r.fire_role = static_cast<int>((flags >> kFireRoleShift) & 3u);
    r.act_fmt = FixedFormat{static_cast<int>((flags >> kActTotalShift) & 0xffu),
                            static_cast<int>((flags >> kActFracShift) & 0xffu)};
    r.weight_fmt.total_bits = get_u8(is);
    r.weight_fmt.frac_bits = get_u8(is);
    r.bias_fmt.total_bits = get_u8(is);
    r.bias_fmt.frac_bits = get_u8(is);

    if (r.kind != LayerKind::conv) return r;

    if (r.p.c_in < 1 || r.p.c_out < 1 || r.p.kernel < 1 ||
        static_cast<std::uint64_t>(r.p.c_out) * r.p.kernel * r.p.kernel * r.p.c_in >
            (std::uint64_t{1} << 27))
        throw io_error(io_error::kind::bad_layout, "implausible conv geometry");
    const std::size_t n_weights =
        static_cast<std::size_t>(r.p.c_out) * r.p.kernel * r.p.kernel * r.p.c_in;
    const std::size_t n_bias = static_cast<std::size_t>(r.p.c_out);
    r.float_payload = r.weight_fmt.total_bits == 0;
    if (r.float_payload) {
        r.float_params.weights.resize(n_weights);
        r.float_params.bias.resize(n_bias);
        for (double& v : r.float_params.weights) v = get_f64(is);
        for (double& v : r.float_params.bias) v = get_f64(is);
    } else {
        if (!r.weight_fmt.valid() || r.weight_fmt.total_bits > 8)
            throw io_error(io_error::kind::bad_value, "bad weight format");
        if (!r.bias_fmt.valid() || r.bias_fmt.total_bits > 8)
            throw io_error(io_error::kind::bad_value, "bad bias format");
        if (!r.act_fmt.valid())
            throw io_error(io_error::kind::bad_value, "bad activation format");
        r.fixed_params.weight_fmt = r.weight_fmt;
        r.fixed_params.bias_fmt = r.bias_fmt;
        r.fixed_params.weights.resize(n_weights);
        r.fixed_params.bias.resize(n_bias);
        for (std::int32_t& w : r.fixed_params.weights) {
            w = get_i8(is);
            if (w < r.weight_fmt.raw_min() || w > r.weight_fmt.raw_max())
                throw io_error(io_error::kind::bad_value, "weight out of format range");
        }
        for (std::int32_t& b : r.fixed_params.bias) {
            b = get_i8(is);
            if (b < r.bias_fmt.raw_min() || b > r.bias_fmt.raw_max())
                throw io_error(io_error::kind::bad_value, "bias out of format range");
        }
    }
    return r;
}

// Rebuilds the node list from flat records, folding squeeze/expand triplets
// back into fire nodes. Returns per-record conv payload order matching the
// model's slot order.
inline NetworkSpec rebuild_net(const std::vector<RawRecord>& records, int input_y, int input_x,
                               int input_c) {
    NetworkSpec net;
    net.input_y = input_y;
    net.input_x = input_x;
    net.input_c = input_c;
    for (std::size_t i = 0; i < records.size();) {
        const RawRecord& r = records[i];
        if (r.kind != LayerKind::conv) {
            LayerNode n;
            n.kind = r.kind;
            n.conv = r.p;
            net.nodes.push_back(n);
            ++i;
            continue;
        }
        if (r.fire_role == 0) {
            LayerNode n;
            n.kind = LayerKind::conv;
            n.conv = r.p;
            net.nodes.push_back(n);
            ++i;
            continue;
        }
        if (r.fire_role != 1 || i + 2 >= records.size())
            throw io_error(io_error::kind::bad_layout, "dangling fire record at index " +
                                                           std::to_string(i));
        const RawRecord& e1 = records[i + 1];
        const RawRecord& e3 = records[i + 2];
        if (e1.kind != LayerKind::conv || e3.kind != LayerKind::conv || e1.fire_role != 2 ||
            e3.fire_role != 3)
            throw io_error(io_error::kind::bad_layout, "malformed fire triplet at index " +
                                                           std::to_string(i));
        if (e1.p.c_in != r.p.c_out || e3.p.c_in != r.p.c_out)
            throw io_error(io_error::kind::bad_layout, "fire squeeze/expand channel mismatch");
        LayerNode n;
        n.kind = LayerKind::fire;
        n.conv.y_in = r.p.y_in;
        n.conv.x_in = r.p.x_in;
        n.conv.c_in = r.p.c_in;
        n.conv.c_out = e1.p.c_out + e3.p.c_out;
        n.fire = FireSpec{r.p.c_out, e1.p.c_out, e3.p.c_out};
        net.nodes.push_back(n);
        i += 3;
    }
    return net;
}

inline void check_recorded_dims(const NetworkSpec& loaded, const std::vector<RawRecord>& records) {
    // Recorded per-record input dims must agree with the resolved chain.
    std::size_t rec = 0;
    for (const auto& n : loaded.nodes) {
        const int want_y = n.conv.y_in, want_x = n.conv.x_in;
        const std::size_t span = n.kind == LayerKind::fire ? 3 : 1;
        for (std::size_t j = 0; j < span; ++j, ++rec) {
            const auto& r = records[rec];
            if (r.p.y_in != want_y || r.p.x_in != want_x)
                throw io_error(io_error::kind::bad_layout,
                               "record " + std::to_string(rec) +
                                   ": recorded dims disagree with shape chain");
        }
    }
}

}  // namespace detail

inline void save_model(Model& m, std::ostream& os) {
    using namespace detail;
    validate_model(m);
    for (const auto& k : m.params) {
        if (k.weight_fmt.total_bits > 8 || k.bias_fmt.total_bits > 8)
            throw io_error(io_error::kind::bad_value,
                           "SQJM stores parameter formats of at most 8 bits");
    }
    write_bytes(os, "SQJM", 4);
    put_u32(os, 1);
    put_u32(os, record_count(m.net));
    int slot = 0;
    walk_records(
        m.net,
        [&](const LayerParams& p, int fire_role) {
            const ConvParams& k = m.params[static_cast<std::size_t>(slot++)];
            put_record_header(os, LayerKind::conv, p, conv_flags(p, fire_role, m.act_fmt),
                              k.weight_fmt, k.bias_fmt);
            for (std::int32_t w : k.weights) put_i8(os, static_cast<std::int8_t>(w));
            for (std::int32_t b : k.bias) put_i8(os, static_cast<std::int8_t>(b));
        },
        os);
}

inline void save_float_model(FloatModel& m, std::ostream& os) {
    using namespace detail;
    resolve_shapes(m.net);
    require(static_cast<int>(m.params.size()) == total_conv_slots(m.net),
            "save_float_model: parameter slot count mismatch");
    write_bytes(os, "SQJM", 4);
    put_u32(os, 1);
    put_u32(os, record_count(m.net));
    int slot = 0;
    walk_records(
        m.net,
        [&](const LayerParams& p, int fire_role) {
            const FloatConvParams& k = m.params[static_cast<std::size_t>(slot++)];
            require(k.weights.size() ==
                        static_cast<std::size_t>(p.c_out) * p.kernel * p.kernel * p.c_in,
                    "save_float_model: weight count mismatch");
            require(k.bias.size() == static_cast<std::size_t>(p.c_out),
                    "save_float_model: bias count mismatch");
            put_record_header(os, LayerKind::conv, p,
                              conv_flags(p, fire_role, FixedFormat{0, 0}), FixedFormat{0, 0},
                              FixedFormat{0, 0});
            for (double w : k.weights) put_f64(os, w);
            for (double b : k.bias) put_f64(os, b);
        },
        os);
}

// A loaded model is either quantized or float-parameterized.
struct LoadedModel {
    bool is_float = false;
    Model fixed;
    FloatModel floating;
};

inline LoadedModel load_model_any(std::istream& is) {
    using namespace detail;
    expect_magic(is, "SQJM", "model");
    const std::uint32_t version = get_u32(is);
    if (version != 1)
        throw io_error(io_error::kind::bad_version,
                       "unsupported model version " + std::to_string(version));
    const std::uint32_t count = get_u32(is);
    if (count == 0) throw io_error(io_error::kind::bad_layout, "model has no layers");
    if (count > 100000) throw io_error(io_error::kind::bad_layout, "implausible layer count");
    std::vector<RawRecord> records;
    records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) records.push_back(read_record(is));
    expect_end(is, "model");

    bool any_float = false, any_fixed = false;
    for (const auto& r : records) {
        if (r.kind != LayerKind::conv) continue;
        (r.float_payload ? any_float : any_fixed) = true;
    }
    if (any_float && any_fixed)
        throw io_error(io_error::kind::bad_layout, "model mixes float and quantized records");
    if (!any_float && !any_fixed)
        throw io_error(io_error::kind::bad_layout, "model has no conv layers");

    const auto& first = records.front();
    NetworkSpec net = rebuild_net(records, first.p.y_in, first.p.x_in, first.p.c_in);

    LoadedModel out;
    out.is_float = any_float;
    try {
        if (any_float) {
            out.floating.net = net;
            for (const auto& r : records)
                if (r.kind == LayerKind::conv) out.floating.params.push_back(r.float_params);
            resolve_shapes(out.floating.net);
            require(static_cast<int>(out.floating.params.size()) ==
                        total_conv_slots(out.floating.net),
                    "parameter slot count mismatch");
            check_recorded_dims(out.floating.net, records);
        } else {
            out.fixed.net = net;
            FixedFormat act{0, 0};
            for (const auto& r : records) {
                if (r.kind != LayerKind::conv) continue;
                if (act == FixedFormat{0, 0}) act = r.act_fmt;
                if (!(r.act_fmt == act))
                    throw io_error(io_error::kind::bad_value,
                                   "conv records disagree on activation format");
                out.fixed.params.push_back(r.fixed_params);
            }
            out.fixed.act_fmt = act;
            validate_model(out.fixed);
            check_recorded_dims(out.fixed.net, records);
        }
    } catch (const std::invalid_argument& e) {
        throw io_error(io_error::kind::bad_layout, e.what());
    }
    return out;
}

inline Model load_model(std::istream& is) {
    LoadedModel lm = load_model_any(is);
    if (lm.is_float)
        throw io_error(io_error::kind::bad_layout,
                       "model holds float parameters; quantize it first");
    return std::move(lm.fixed);
}

inline void save_model(Model& m, const std::string& path) {
    auto f = detail::open_out(path);
    save_model(m, f);
}

inline void save_float_model(FloatModel& m, const std::string& path) {
    auto f = detail::open_out(path);
    save_float_model(m, f);
}

inline LoadedModel load_model_any(const std::string& path) {
    auto f = detail::open_in(path);
    return load_model_any(f);
}

inline Model load_model(const std::string& path) {
    auto f = detail::open_in(path);
    return load_model(f);
}

}  // namespace sqj
