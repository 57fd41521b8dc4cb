#include "doctest.h"

#include <random>
#include <sstream>

#include "sqj/serialize.hpp"
#include "test_util.hpp"

using namespace sqj;
using namespace sqj::testutil;

namespace {

constexpr FixedFormat kActFmt{16, 3};

NetworkSpec fire_net() {
    NetworkSpec net;
    net.input_y = 8;
    net.input_x = 8;
    net.input_c = 16;
    LayerNode fire;
    fire.kind = LayerKind::fire;
    fire.conv.c_in = 16;
    fire.fire = FireSpec{16, 4, 4};
    LayerNode conv;
    conv.kind = LayerKind::conv;
    conv.conv = LayerParams{0, 0, 8, 4, 1, 1, 0, true};
    LayerNode pool;
    pool.kind = LayerKind::maxpool;
    pool.conv.kernel = 3;
    pool.conv.stride = 2;
    LayerNode f2f;
    f2f.kind = LayerKind::fixed2float;
    LayerNode gap;
    gap.kind = LayerKind::global_avgpool;
    LayerNode sm;
    sm.kind = LayerKind::softmax;
    net.nodes = {fire, conv, pool, f2f, gap, sm};
    return net;
}

Model fire_model(std::mt19937& rng) {
    Model m;
    m.net = fire_net();
    m.act_fmt = kActFmt;
    resolve_shapes(m.net);
    for (const auto& n : m.net.nodes) {
        std::vector<LayerParams> convs;
        if (n.kind == LayerKind::conv) convs.push_back(n.conv);
        if (n.kind == LayerKind::fire) {
            convs.push_back(fire_squeeze_params(n));
            convs.push_back(fire_expand1_params(n));
            convs.push_back(fire_expand3_params(n));
        }
        for (const auto& p : convs) m.params.push_back(random_conv_params(rng, p));
    }
    return m;
}

std::string to_bytes(Model& m) {
    std::ostringstream os(std::ios::binary);
    save_model(m, os);
    return os.str();
}

}  // namespace

TEST_CASE("tensor round trip is lossless for every dtype") {
    std::mt19937 rng(51);
    for (int variant = 0; variant < 3; ++variant) {
        FmapTensor t;
        if (variant == 0) t = random_real_tensor(rng, 3, 5, 2, -10.0, 10.0);
        if (variant == 1) t = random_fixed_tensor(rng, 4, 2, 7, kActFmt);
        if (variant == 2) t = random_fixed_tensor(rng, 2, 2, 3, FixedFormat{8, 7});
        std::ostringstream os(std::ios::binary);
        save_tensor(t, os);
        std::istringstream is(os.str(), std::ios::binary);
        FmapTensor back = load_tensor(is);
        CHECK(tensors_bit_equal(t, back));
        CHECK(back.kind == t.kind);
    }
}

TEST_CASE("tensor loader reports distinct failures") {
    std::mt19937 rng(52);
    FmapTensor t = random_fixed_tensor(rng, 2, 2, 2, kActFmt);
    std::ostringstream os(std::ios::binary);
    save_tensor(t, os);
    const std::string bytes = os.str();

    SUBCASE("wrong magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        std::istringstream is(bad, std::ios::binary);
        CHECK_THROWS_AS(load_tensor(is), io_error);
        try {
            std::istringstream is2(bad, std::ios::binary);
            load_tensor(is2);
        } catch (const io_error& e) {
            CHECK(e.what_kind == io_error::kind::bad_magic);
        }
    }
    SUBCASE("bad version") {
        std::string bad = bytes;
        bad[4] = 9;
        std::istringstream is(bad, std::ios::binary);
        try {
            load_tensor(is);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind == io_error::kind::bad_version);
        }
    }
    SUBCASE("truncation") {
        std::istringstream is(bytes.substr(0, bytes.size() - 3), std::ios::binary);
        try {
            load_tensor(is);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind == io_error::kind::truncated);
        }
    }
    SUBCASE("trailing data") {
        std::istringstream is(bytes + "zz", std::ios::binary);
        try {
            load_tensor(is);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind == io_error::kind::truncated);
        }
    }
    SUBCASE("unknown dtype") {
        std::string bad = bytes;
        bad[8] = 7;
        std::istringstream is(bad, std::ios::binary);
        try {
            load_tensor(is);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind == io_error::kind::bad_value);
        }
    }
}

TEST_CASE("model round trip preserves graph, parameters and formats") {
    std::mt19937 rng(53);
    Model m = fire_model(rng);
    const std::string bytes = to_bytes(m);

    std::istringstream is(bytes, std::ios::binary);
    Model back = load_model(is);

    REQUIRE(back.net.nodes.size() == m.net.nodes.size());
    CHECK(back.act_fmt == m.act_fmt);
    CHECK(back.net.input_y == m.net.input_y);
    for (std::size_t i = 0; i < m.net.nodes.size(); ++i) {
        CHECK(back.net.nodes[i].kind == m.net.nodes[i].kind);
        CHECK(back.net.nodes[i].conv == m.net.nodes[i].conv);
        CHECK(back.net.nodes[i].fire.squeeze == m.net.nodes[i].fire.squeeze);
        CHECK(back.net.nodes[i].fire.expand1 == m.net.nodes[i].fire.expand1);
        CHECK(back.net.nodes[i].fire.expand3 == m.net.nodes[i].fire.expand3);
    }
    REQUIRE(back.params.size() == m.params.size());
    for (std::size_t s = 0; s < m.params.size(); ++s) {
        CHECK(back.params[s].weights == m.params[s].weights);
        CHECK(back.params[s].bias == m.params[s].bias);
        CHECK(back.params[s].weight_fmt == m.params[s].weight_fmt);
        CHECK(back.params[s].bias_fmt == m.params[s].bias_fmt);
    }

    // byte-identical when re-saved
    CHECK(to_bytes(back) == bytes);
}

TEST_CASE("float model round trip and the quantize-first guard") {
    std::mt19937 rng(54);
    FloatModel fm;
    fm.net = fire_net();
    resolve_shapes(fm.net);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (const auto& n : fm.net.nodes) {
        std::vector<LayerParams> convs;
        if (n.kind == LayerKind::conv) convs.push_back(n.conv);
        if (n.kind == LayerKind::fire) {
            convs.push_back(fire_squeeze_params(n));
            convs.push_back(fire_expand1_params(n));
            convs.push_back(fire_expand3_params(n));
        }
        for (const auto& p : convs) {
            FloatConvParams fp;
            fp.weights.resize(static_cast<std::size_t>(p.c_out) * p.kernel * p.kernel * p.c_in);
            fp.bias.resize(static_cast<std::size_t>(p.c_out));
            for (auto& w : fp.weights) w = dist(rng);
            for (auto& b : fp.bias) b = dist(rng);
            fm.params.push_back(std::move(fp));
        }
    }
    std::ostringstream os(std::ios::binary);
    save_float_model(fm, os);

    std::istringstream is(os.str(), std::ios::binary);
    LoadedModel lm = load_model_any(is);
    REQUIRE(lm.is_float);
    REQUIRE(lm.floating.params.size() == fm.params.size());
    for (std::size_t s = 0; s < fm.params.size(); ++s) {
        CHECK(lm.floating.params[s].weights == fm.params[s].weights);
        CHECK(lm.floating.params[s].bias == fm.params[s].bias);
    }

    std::istringstream is2(os.str(), std::ios::binary);
    CHECK_THROWS_AS(load_model(is2), io_error);
}

TEST_CASE("every strict prefix of a file fails to load cleanly") {
    std::mt19937 rng(56);
    Model m = fire_model(rng);
    const std::string model_bytes = to_bytes(m);
    for (std::size_t len = 0; len < model_bytes.size(); ++len) {
        std::istringstream is(model_bytes.substr(0, len), std::ios::binary);
        CHECK_THROWS_AS(load_model(is), io_error);
    }

    FmapTensor t = random_fixed_tensor(rng, 3, 3, 4, kActFmt);
    std::ostringstream os(std::ios::binary);
    save_tensor(t, os);
    const std::string tensor_bytes = os.str();
    for (std::size_t len = 0; len < tensor_bytes.size(); ++len) {
        std::istringstream is(tensor_bytes.substr(0, len), std::ios::binary);
        CHECK_THROWS_AS(load_tensor(is), io_error);
    }
}

TEST_CASE("random garbage after a valid magic never crashes the loaders") {
    std::mt19937 rng(57);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 300);
    for (int trial = 0; trial < 500; ++trial) {
        std::string junk(trial % 2 ? "SQJM" : "SQJT");
        const int n = len(rng);
        for (int i = 0; i < n; ++i) junk.push_back(static_cast<char>(byte(rng)));
        std::istringstream is(junk, std::ios::binary);
        try {
            if (trial % 2) (void)load_model_any(is);
            else (void)load_tensor(is);
        } catch (const io_error&) {
            // any io_error kind is acceptable; crashing or hanging is not
        }
    }
    CHECK(true);
}

TEST_CASE("model loader reports distinct failures") {
    std::mt19937 rng(55);
    Model m = fire_model(rng);
    const std::string bytes = to_bytes(m);

    SUBCASE("wrong magic") {
        std::string bad = bytes;
        bad[0] = 'Q';
        std::istringstream is(bad, std::ios::binary);
        try {
            load_model(is);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind == io_error::kind::bad_magic);
        }
    }
    SUBCASE("truncated payload") {
        std::istringstream is(bytes.substr(0, bytes.size() / 2), std::ios::binary);
        try {
            load_model(is);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind == io_error::kind::truncated);
        }
    }
    SUBCASE("weight out of format range") {
        // Shrink the first conv record's weight format to {4,3}; existing
        // bytes then fall outside the declared range.
        std::string bad = bytes;
        // header: magic(4) version(4) count(4); record: kind(1) + 8*u32(32)
        const std::size_t fmt_off = 12 + 1 + 32;
        bad[fmt_off] = 4;      // wt_total
        bad[fmt_off + 1] = 3;  // wt_frac
        std::istringstream is(bad, std::ios::binary);
        try {
            load_model(is);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind == io_error::kind::bad_value);
        }
    }
    SUBCASE("broken fire triplet") {
        // Flip the squeeze record's fire role to expand1x1.
        std::string bad = bytes;
        const std::size_t flags_off = 12 + 1 + 7 * 4;  // flags is the 8th u32
        bad[flags_off] = static_cast<char>((static_cast<unsigned char>(bad[flags_off]) & ~0x06u) |
                                           (2u << 1));
        std::istringstream is(bad, std::ios::binary);
        try {
            load_model(is);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(e.what_kind == io_error::kind::bad_layout);
        }
    }
}
