#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "moft/io.hpp"
#include "moft/random.hpp"
#include "moft/tensor.hpp"

using namespace moft;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "moft_unit";
    fs::create_directories(dir);
    return dir / name;
}

Tensor4 random_f32_tensor(Rng& rng, Shape s) {
    Tensor4 t(s);
    for (double& v : t.values()) v = static_cast<float>(rng.normal());
    return t;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

} // namespace

TEST_CASE("minimal tensor loads") {
    const fs::path p = temp_path("one.mft");
    save_tensor(Tensor4(Shape{1, 1, 1, 1}, 0.0), p);
    const Tensor4 t = load_tensor(p);
    CHECK(t.shape() == Shape{1, 1, 1, 1});
    CHECK(t.values()[0] == 0.0);
    CHECK(fs::file_size(p) == 24 + 4);
}

TEST_CASE("header layout is little-endian MFT1") {
    Tensor4 t(Shape{2, 3, 4, 5}, 1.5);
    const auto bytes = encode_tensor(t);
    REQUIRE(bytes.size() == 24 + 4 * t.size());
    CHECK(std::memcmp(bytes.data(), "MFT1", 4) == 0);
    const std::uint8_t dims[20] = {1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0, 5, 0, 0, 0};
    CHECK(std::memcmp(bytes.data() + 4, dims, 20) == 0);
    float first;
    std::memcpy(&first, bytes.data() + 24, 4);
    CHECK(first == 1.5f);
}

TEST_CASE("full-size tensor round-trips byte for byte") {
    Rng rng(11);
    const Tensor4 t = random_f32_tensor(rng, Shape{16, 32, 32, 64});
    const fs::path a = temp_path("big_a.mft"), b = temp_path("big_b.mft");
    save_tensor(t, a);
    const Tensor4 back = load_tensor(a);
    CHECK(back == t);
    save_tensor(back, b);
    CHECK(file_bytes(a) == file_bytes(b));
}

TEST_CASE("1000 random tensors round-trip bit-exactly") {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const Shape s{1 + rng.index(3), 1 + rng.index(5), 1 + rng.index(5), 1 + rng.index(4)};
        const Tensor4 t = random_f32_tensor(rng, s);
        const Tensor4 back = decode_tensor(encode_tensor(t));
        REQUIRE(back.shape() == s);
        for (std::size_t k = 0; k < t.size(); ++k) REQUIRE(std::memcmp(&back.values()[k], &t.values()[k], sizeof(double)) == 0);
    }
}

TEST_CASE("load errors") {
    SUBCASE("bad magic") {
        auto bytes = encode_tensor(Tensor4(Shape{1, 1, 1, 1}));
        bytes[0] = 'X';
        const fs::path p = temp_path("magic.mft");
        write_bytes(p, bytes);
        CHECK_THROWS_AS(load_tensor(p), FormatError);
    }
    SUBCASE("header claims more frames than the payload holds") {
        auto bytes = encode_tensor(Tensor4(Shape{1, 2, 2, 1}));
        bytes[8] = 2;
        const fs::path p = temp_path("short.mft");
        write_bytes(p, bytes);
        CHECK_THROWS_AS(load_tensor(p), CorruptFileError);
    }
    SUBCASE("non-finite payload names the index") {
        auto bytes = encode_tensor(Tensor4(Shape{1, 1, 1, 3}));
        const float nan = std::numeric_limits<float>::quiet_NaN();
        std::memcpy(bytes.data() + 24 + 8, &nan, 4);
        const fs::path p = temp_path("nan.mft");
        write_bytes(p, bytes);
        try {
            load_tensor(p);
            FAIL("expected a data error");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find('2') != std::string::npos);
        }
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_tensor(temp_path("absent.mft")), IoError); }
}

TEST_CASE("saving NaN writes nothing") {
    const fs::path p = temp_path("nan_save.mft");
    fs::remove(p);
    Tensor4 t(Shape{1, 1, 1, 2});
    t.values()[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(save_tensor(t, p), DataError);
    CHECK_FALSE(fs::exists(p));
}

TEST_CASE("unwritable path") {
    CHECK_THROWS_AS(save_tensor(Tensor4(Shape{1, 1, 1, 1}), "/nonexistent_dir_xyz/t.mft"), IoError);
}

TEST_CASE("frame_mean") {
    Rng rng(3);
    SUBCASE("identical frames") {
        Tensor4 t(Shape{5, 3, 2, 4});
        const Tensor4 frame = random_f32_tensor(rng, Shape{1, 3, 2, 4});
        for (std::size_t f = 0; f < 5; ++f)
            for (std::size_t i = 0; i < frame.size(); ++i) t.frame(f)[i] = frame.values()[i];
        CHECK(max_abs_diff(frame_mean(t), frame) < 1e-15);
    }
    SUBCASE("v and -v") {
        Tensor4 t = random_f32_tensor(rng, Shape{2, 4, 4, 3});
        for (std::size_t i = 0; i < t.shape().frame_size(); ++i) t.frame(1)[i] = -t.frame(0)[i];
        const Tensor4 m = frame_mean(t);
        for (double v : m.values()) CHECK(v == 0.0);
    }
    SUBCASE("scalar loop oracle") {
        const Tensor4 t = random_f32_tensor(rng, Shape{16, 8, 8, 5});
        const Tensor4 m = frame_mean(t);
        CHECK(m.frames() == 1);
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < 8; ++c)
                for (std::size_t ch = 0; ch < 5; ++ch) {
                    long double s = 0;
                    for (std::size_t f = 0; f < 16; ++f) s += t.at(f, r, c, ch);
                    const double want = static_cast<double>(s / 16);
                    CHECK(std::abs(m.at(0, r, c, ch) - want) <= 1e-6 * std::max(1.0, std::abs(want)));
                }
    }
    SUBCASE("linearity") {
        const Tensor4 a = random_f32_tensor(rng, Shape{7, 4, 3, 2});
        const Tensor4 b = random_f32_tensor(rng, Shape{7, 4, 3, 2});
        const Tensor4 lhs = frame_mean(2.5 * a + (-0.75) * b);
        const Tensor4 rhs = 2.5 * frame_mean(a) + (-0.75) * frame_mean(b);
        for (std::size_t i = 0; i < lhs.size(); ++i)
            CHECK(std::abs(lhs.values()[i] - rhs.values()[i]) <= 1e-6 * std::max(1.0, std::abs(rhs.values()[i])));
    }
    SUBCASE("long clips stay accurate") {
        Tensor4 t(Shape{205, 1, 1, 1});
        for (std::size_t f = 0; f < 205; ++f) t.values()[f] = 1e8 + (f % 2 ? 0.1 : -0.1);
        CHECK(std::abs(frame_mean(t).values()[0] - (1e8 - 0.1 / 205)) < 1e-6);
    }
}

TEST_CASE("tensor construction validates") {
    CHECK_THROWS_AS(Tensor4(Shape{0, 1, 1, 1}), ArgumentError);
    CHECK_THROWS_AS(Tensor4(Shape{1, 1, 1, 2}, std::vector<double>(3)), ShapeError);
    Tensor4 t(Shape{1, 1, 1, 1});
    t.values()[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(require_finite(t, "t"), DataError);
}

TEST_CASE("PGM mask round trip") {
    RegionMask m;
    m.height = 3;
    m.width = 4;
    m.inside = {1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 1};
    const fs::path p = temp_path("mask.pgm");
    save_mask_pgm(m, p);
    const RegionMask back = load_mask_pgm(p, 5);
    CHECK(back.inside == m.inside);
    CHECK(back.frame_set.size() == 5);
    CHECK(back.count() == 8);
}
