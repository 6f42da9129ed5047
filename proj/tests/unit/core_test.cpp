#include <gtest/gtest.h>

#include <filesystem>

#include "weaver/core.hpp"
#include "weaver/image.hpp"
#include "weaver/rng.hpp"

using namespace weaver;

TEST(Core, PerfectSquare)
{
    std::size_t r = 0;
    EXPECT_TRUE(is_perfect_square(576, &r));
    EXPECT_EQ(r, 24u);
    EXPECT_TRUE(is_perfect_square(1));
    EXPECT_FALSE(is_perfect_square(15));
    EXPECT_FALSE(is_perfect_square(17));
    for (std::size_t n = 0; n < 2000; ++n) {
        bool brute = false;
        for (std::size_t k = 0; k * k <= n; ++k)
            brute |= k * k == n;
        EXPECT_EQ(is_perfect_square(n), brute) << n;
    }
}

TEST(Core, ParseErrorCarriesLine)
{
    const ParseError e(7, "bad");
    EXPECT_EQ(e.line(), 7u);
    EXPECT_STREQ(e.what(), "line 7: bad");
    EXPECT_STREQ(ParseError(0, "x").what(), "x");
}

TEST(Core, Fnv1aKnownValues)
{
    // Reference values of 64-bit FNV-1a.
    EXPECT_EQ(fnv1a(std::string()), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a(std::string("a")), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(fnv1a(std::string("foobar")), 0x85944171f73967e8ull);
}

TEST(Rng, UniformRangeAndDeterminism)
{
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_EQ(u, b.uniform());
    }
    Rng c(1);
    for (int i = 0; i < 1000; ++i)
        EXPECT_LT(c.below(7), 7u);
}

TEST(Rng, NormalMoments)
{
    Rng r(3);
    double s = 0, s2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.05);
    EXPECT_NEAR(s2 / n, 1.0, 0.05);
}

TEST(Image, RawRoundTrip)
{
    ImageGrid img(3, 2, 3);
    Rng r(5);
    for (std::uint32_t y = 0; y < 2; ++y)
        for (std::uint32_t x = 0; x < 3; ++x)
            for (std::uint32_t c = 0; c < 3; ++c)
                img.at(x, y, c) = static_cast<float>(r.uniform());
    const auto bytes = encode_raw(img);
    EXPECT_EQ(bytes.size(), 12u + 3 * 2 * 3 * 4);
    EXPECT_EQ(decode_raw(bytes), img);

    const auto path = std::filesystem::temp_directory_path() / "weaver_core_test.raw";
    save_raw(img, path);
    EXPECT_EQ(load_raw(path), img);
    std::filesystem::remove(path);
}

TEST(Image, Validation)
{
    EXPECT_THROW(ImageGrid(2, 2, 1, std::vector<float>(3)), Error);
    ImageGrid img(2, 2, 1);
    img.at(0, 0, 0) = 1.5f;
    EXPECT_THROW(img.validate(), Error);
    img.at(0, 0, 0) = std::nanf("");
    EXPECT_THROW(img.validate(), Error);
    auto bytes = encode_raw(ImageGrid(2, 2, 1));
    bytes.pop_back();
    EXPECT_THROW(decode_raw(bytes), Error);
}

TEST(Image, ChecksumSensitiveToPixels)
{
    ImageGrid a(4, 4, 3, 0.5f), b = a;
    EXPECT_EQ(a.checksum(), b.checksum());
    b.at(3, 3, 2) = 0.25f;
    EXPECT_NE(a.checksum(), b.checksum());
}
