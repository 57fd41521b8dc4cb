#include "doctest.h"

#include <random>

#include "sqj/aux_layers.hpp"
#include "test_util.hpp"

using namespace sqj;
using namespace sqj::testutil;

namespace {
constexpr FixedFormat kActFmt{16, 3};
}

TEST_CASE("maxpool picks the window maximum per channel") {
    FmapTensor t = FmapTensor::fixed(3, 3, 1, kActFmt);
    for (int iy = 0; iy < 3; ++iy)
        for (int ix = 0; ix < 3; ++ix) t.at_raw(iy, ix, 0) = iy * 3 + ix + 1;  // 1..9
    FmapTensor out = maxpool(t, 3, 2);
    CHECK(out.y == 1);
    CHECK(out.x == 1);
    CHECK(out.at_raw(0, 0, 0) == 9);
}

TEST_CASE("maxpool of an all-equal tensor is all-equal") {
    FmapTensor t = FmapTensor::fixed(6, 6, 3, kActFmt);
    for (auto& r : t.raw_data) r = -7;
    FmapTensor out = maxpool(t, 3, 2);
    for (auto r : out.raw_data) CHECK(r == -7);
}

TEST_CASE("maxpool dims follow the chain geometry") {
    FmapTensor t = FmapTensor::fixed(56, 56, 64, kActFmt);
    FmapTensor out = maxpool(t, 3, 2);
    CHECK(out.y == 27);
    CHECK(out.x == 27);
    CHECK(out.c == 64);
    CHECK_THROWS_AS(maxpool(FmapTensor::fixed(2, 2, 1, kActFmt), 3, 2), std::invalid_argument);
}

TEST_CASE("maxpool output stays inside the input range per channel") {
    std::mt19937 rng(21);
    FmapTensor t = random_fixed_tensor(rng, 9, 11, 4, kActFmt);
    FmapTensor out = maxpool(t, 3, 2);
    for (int c = 0; c < t.c; ++c) {
        std::int32_t lo = t.at_raw(0, 0, c), hi = lo;
        for (int iy = 0; iy < t.y; ++iy)
            for (int ix = 0; ix < t.x; ++ix) {
                lo = std::min(lo, t.at_raw(iy, ix, c));
                hi = std::max(hi, t.at_raw(iy, ix, c));
            }
        for (int iy = 0; iy < out.y; ++iy)
            for (int ix = 0; ix < out.x; ++ix) {
                CHECK(out.at_raw(iy, ix, c) >= lo);
                CHECK(out.at_raw(iy, ix, c) <= hi);
            }
    }
}

TEST_CASE("fixed2float dequantizes exactly") {
    FmapTensor t = FmapTensor::fixed(1, 1, 2, kActFmt);
    t.at_raw(0, 0, 0) = 8;
    t.at_raw(0, 0, 1) = -1;
    FmapTensor f = fixed2float(t);
    CHECK(f.at_real(0, 0, 0) == 1.0);
    CHECK(f.at_real(0, 0, 1) == -0.125);
}

TEST_CASE("float2fixed quantizes elementwise with saturation") {
    FmapTensor t = FmapTensor::real(1, 1, 3);
    t.at_real(0, 0, 0) = 0.5;
    t.at_real(0, 0, 1) = 10000.0;
    t.at_real(0, 0, 2) = 0.0;
    FmapTensor q = float2fixed(t, kActFmt);
    CHECK(q.at_raw(0, 0, 0) == 4);
    CHECK(q.at_raw(0, 0, 1) == 32767);
    CHECK(q.at_raw(0, 0, 2) == 0);

    t.at_real(0, 0, 1) = std::nan("");
    CHECK_THROWS_AS(float2fixed(t, kActFmt), std::invalid_argument);
}

TEST_CASE("fixed/float conversion round trips representable values") {
    std::mt19937 rng(22);
    FmapTensor t = random_fixed_tensor(rng, 4, 5, 6, kActFmt);
    FmapTensor back = float2fixed(fixed2float(t), kActFmt);
    CHECK(tensors_bit_equal(t, back));
}

TEST_CASE("global_avgpool means over the spatial extent") {
    FmapTensor ones = FmapTensor::real(13, 13, 5);
    for (auto& v : ones.real_data) v = 1.0;
    for (double v : global_avgpool(ones)) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    FmapTensor single = FmapTensor::real(1, 1, 3);
    single.at_real(0, 0, 0) = -2.5;
    single.at_real(0, 0, 1) = 0.0;
    single.at_real(0, 0, 2) = 7.0;
    const auto v = global_avgpool(single);
    CHECK(v[0] == -2.5);
    CHECK(v[2] == 7.0);

    FmapTensor half = FmapTensor::real(1, 2, 1);
    half.at_real(0, 0, 0) = 0.0;
    half.at_real(0, 1, 0) = 2.0;
    CHECK(global_avgpool(half)[0] == doctest::Approx(1.0));

    CHECK_THROWS_AS(global_avgpool(FmapTensor::real(0, 0, 0)), std::invalid_argument);
}

TEST_CASE("softmax basics") {
    const auto two = softmax({0.0, 0.0});
    CHECK(two[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(two[1] == doctest::Approx(0.5).epsilon(1e-12));

    const auto uniform = softmax({3.25, 3.25, 3.25, 3.25});
    for (double v : uniform) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    CHECK_THROWS_AS(softmax({}), std::invalid_argument);
}

TEST_CASE("softmax sums to one and is shift-invariant") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> dist(-50.0, 50.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(40);
        for (auto& e : v) e = dist(rng);
        const auto s = softmax(v);
        double sum = 0.0;
        std::size_t argmax_in = 0, argmax_out = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            sum += s[i];
            if (v[i] > v[argmax_in]) argmax_in = i;
            if (s[i] > s[argmax_out]) argmax_out = i;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        CHECK(argmax_in == argmax_out);

        std::vector<double> shifted = v;
        for (auto& e : shifted) e += 123.456;
        const auto s2 = softmax(shifted);
        for (std::size_t i = 0; i < v.size(); ++i)
            CHECK(s2[i] == doctest::Approx(s[i]).epsilon(1e-12));
    }
}

TEST_CASE("concat_channels keeps a's channels first at every pixel") {
    std::mt19937 rng(24);
    FmapTensor a = random_fixed_tensor(rng, 3, 4, 8, kActFmt);
    FmapTensor b = random_fixed_tensor(rng, 3, 4, 8, kActFmt);
    FmapTensor ab = concat_channels(a, b);
    CHECK(ab.c == 16);
    for (int iy = 0; iy < 3; ++iy)
        for (int ix = 0; ix < 4; ++ix) {
            for (int c = 0; c < 8; ++c) {
                CHECK(ab.at_raw(iy, ix, c) == a.at_raw(iy, ix, c));
                CHECK(ab.at_raw(iy, ix, 8 + c) == b.at_raw(iy, ix, c));
            }
        }
}

TEST_CASE("concat with an empty-channel tensor is the identity") {
    std::mt19937 rng(25);
    FmapTensor a = random_fixed_tensor(rng, 2, 2, 4, kActFmt);
    FmapTensor empty = FmapTensor::fixed(2, 2, 0, kActFmt);
    CHECK(tensors_bit_equal(concat_channels(a, empty), a));
    CHECK(tensors_bit_equal(concat_channels(empty, a), a));
}

TEST_CASE("concat is associative bit-exactly") {
    std::mt19937 rng(26);
    FmapTensor a = random_fixed_tensor(rng, 3, 3, 2, kActFmt);
    FmapTensor b = random_fixed_tensor(rng, 3, 3, 5, kActFmt);
    FmapTensor c = random_fixed_tensor(rng, 3, 3, 3, kActFmt);
    CHECK(tensors_bit_equal(concat_channels(concat_channels(a, b), c),
                            concat_channels(a, concat_channels(b, c))));
}

TEST_CASE("concat rejects mismatched inputs") {
    FmapTensor a = FmapTensor::fixed(2, 2, 1, kActFmt);
    FmapTensor wrong_dims = FmapTensor::fixed(2, 3, 1, kActFmt);
    FmapTensor wrong_fmt = FmapTensor::fixed(2, 2, 1, FixedFormat{8, 7});
    FmapTensor wrong_kind = FmapTensor::real(2, 2, 1);
    CHECK_THROWS_AS(concat_channels(a, wrong_dims), std::invalid_argument);
    CHECK_THROWS_AS(concat_channels(a, wrong_fmt), std::invalid_argument);
    CHECK_THROWS_AS(concat_channels(a, wrong_kind), std::invalid_argument);
}
