#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "weaver/experts.hpp"
#include "weaver/scene.hpp"

using namespace weaver;

namespace
{
    FeatureMapd random_map(std::size_t tokens, std::size_t dim, std::uint64_t seed)
    {
        Rng r(seed);
        matXd v(static_cast<Eigen::Index>(tokens), static_cast<Eigen::Index>(dim));
        for (Eigen::Index i = 0; i < v.size(); ++i)
            v.data()[i] = r.uniform(-1, 1);
        return {v, "test"};
    }

    // Half-pixel-centre bilinear weights along one axis, written independently of the library.
    double lerp_axis(const std::vector<double>& src, std::size_t dst, std::size_t i)
    {
        const double x = (static_cast<double>(i) + 0.5) * static_cast<double>(src.size()) / static_cast<double>(dst) - 0.5;
        const double cx = std::clamp(x, 0.0, static_cast<double>(src.size() - 1));
        const auto lo = static_cast<std::size_t>(std::floor(cx));
        const auto hi = std::min(lo + 1, src.size() - 1);
        const double t = cx - static_cast<double>(lo);
        return (1 - t) * src[lo] + t * src[hi];
    }
}

TEST(Experts, ZeroImageColorHistogramIsZero)
{
    const ImageGrid img(48, 48, 3, 0.0f);
    const ToyExpertSpec spec{0, Persona::ColorHistogram, 1, 16, 32};
    const auto fm = encode_toy_expert(img, spec);
    EXPECT_EQ(fm.tokens(), 16u);
    EXPECT_EQ(fm.dim(), 32u);
    EXPECT_TRUE((fm.values.array() == 0.0).all());
}

TEST(Experts, Deterministic)
{
    const auto scene = synth_scene(9);
    for (Persona p : kAllPersonas) {
        const ToyExpertSpec spec{1, p, 77, 16, 24};
        const auto a = encode_toy_expert(scene.image, spec);
        const auto b = encode_toy_expert(scene.image, spec);
        EXPECT_TRUE(a.values == b.values) << to_string(p);
        EXPECT_TRUE(a.values.allFinite());
    }
}

TEST(Experts, PatchStatisticsSingleToken)
{
    // 2x2 image, every channel carries {0, 0.5, 0.5, 1}.
    std::vector<float> px;
    for (float v : {0.0f, 0.5f, 0.5f, 1.0f})
        for (int c = 0; c < 3; ++c)
            px.push_back(v);
    const ImageGrid img(2, 2, 3, px);
    const auto fm = encode_toy_expert(img, {0, Persona::PatchStatistics, 0, 1, 6});
    ASSERT_EQ(fm.tokens(), 1u);
    for (int c = 0; c < 3; ++c) {
        EXPECT_DOUBLE_EQ(fm.values(0, c), 0.5);
        EXPECT_DOUBLE_EQ(fm.values(0, 3 + c), 0.125); // (0.25 + 0 + 0 + 0.25) / 4
    }
}

TEST(Experts, DescriptorPadsAndTruncates)
{
    const auto scene = synth_scene(4);
    const auto wide = encode_toy_expert(scene.image, {0, Persona::PatchStatistics, 0, 16, 10});
    EXPECT_TRUE((wide.values.rightCols(4).array() == 0.0).all());
    const auto narrow = encode_toy_expert(scene.image, {0, Persona::PatchStatistics, 0, 16, 4});
    EXPECT_TRUE(narrow.values == wide.values.leftCols(4));
}

TEST(Experts, PersonasDiffer)
{
    const auto scene = synth_scene(12);
    const auto a = encode_toy_expert(scene.image, {0, Persona::ColorHistogram, 0, 16, 32});
    const auto b = encode_toy_expert(scene.image, {1, Persona::EdgeShape, 0, 16, 32});
    EXPECT_FALSE(a.values == b.values);
}

TEST(Experts, SpecAndGridErrors)
{
    const ImageGrid img(48, 48, 3, 0.2f);
    EXPECT_THROW(encode_toy_expert(img, {0, Persona::EdgeShape, 0, 15, 8}), Error);
    EXPECT_THROW(encode_toy_expert(img, {0, Persona::EdgeShape, 0, 16, 0}), Error);
    EXPECT_THROW(encode_toy_expert(img, {0, Persona::EdgeShape, 0, 25, 8}), Error); // 48 is not divisible by 5
    EXPECT_THROW(parse_persona("colour-histogram"), Error);
    for (Persona p : kAllPersonas)
        EXPECT_EQ(parse_persona(to_string(p)), p);
}

TEST(Resample, IdentityAtSameSize)
{
    const auto fm = random_map(576, 3, 1);
    EXPECT_TRUE(resample_tokens(fm, 576).values == fm.values);
}

TEST(Resample, FourToOneAverages)
{
    FeatureMapd fm(matXd(4, 1), "x");
    fm.values << 1, 3, 5, 7;
    const auto out = resample_tokens(fm, 1);
    ASSERT_EQ(out.tokens(), 1u);
    EXPECT_DOUBLE_EQ(out.values(0, 0), 4.0);
}

TEST(Resample, ConstantsExact)
{
    const std::pair<std::size_t, std::size_t> cases[] = {{4, 576}, {576, 16}, {9, 4}, {16, 25}, {1, 36}, {49, 9}};
    for (auto [src, dst] : cases) {
        FeatureMapd fm(matXd::Constant(static_cast<Eigen::Index>(src), 3, 0.1), "c");
        const auto out = resample_tokens(fm, dst);
        EXPECT_EQ(out.tokens(), dst);
        EXPECT_TRUE((out.values.array() == 0.1).all()) << src << "->" << dst;
    }
}

TEST(Resample, IntegerDownscalePreservesMean)
{
    const std::pair<std::size_t, std::size_t> cases[] = {{16, 4}, {36, 9}, {576, 144}, {576, 64}, {64, 1}};
    for (auto [src, dst] : cases) {
        const auto fm = random_map(src, 5, src * 31 + dst);
        const auto out = resample_tokens(fm, dst);
        EXPECT_NEAR(out.values.mean(), fm.values.mean(), 1e-12);
        // also per column
        EXPECT_LE((out.values.colwise().mean() - fm.values.colwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Resample, BilinearMatchesSeparableOracle)
{
    const std::size_t src = 3, dst = 5;
    const auto fm = random_map(src * src, 1, 8);
    const auto out = resample_tokens(fm, dst * dst);
    for (std::size_t i = 0; i < dst; ++i)
        for (std::size_t j = 0; j < dst; ++j) {
            std::vector<double> col;
            for (std::size_t r = 0; r < src; ++r) {
                std::vector<double> row;
                for (std::size_t c = 0; c < src; ++c)
                    row.push_back(fm.values(static_cast<Eigen::Index>(r * src + c), 0));
                col.push_back(lerp_axis(row, dst, j));
            }
            EXPECT_NEAR(out.values(static_cast<Eigen::Index>(i * dst + j), 0), lerp_axis(col, dst, i), 1e-12);
        }
}

TEST(Resample, NonSquareRejected)
{
    const auto fm = random_map(12, 2, 0);
    EXPECT_THROW(resample_tokens(fm, 4), Error);
    EXPECT_THROW(resample_tokens(random_map(16, 2, 0), 10), Error);
}

TEST(AdaptDim, IdentityAndZero)
{
    const auto fm = random_map(9, 4, 2);
    EXPECT_TRUE(adapt_dim(fm, LinearAdapterd::identity(4)).values == fm.values);
    EXPECT_TRUE((adapt_dim(fm, LinearAdapterd::zero(4, 7)).values.array() == 0.0).all());
}

TEST(AdaptDim, HandExample)
{
    LinearAdapterd a{matXd(2, 3), vecXd(3)};
    a.weights << 1, 0, 1, 0, 1, 1;
    a.bias << 0, 0, 1;
    FeatureMapd fm(matXd(1, 2), "x");
    fm.values << 2, 3;
    const auto out = adapt_dim(fm, a);
    EXPECT_EQ(out.values(0, 0), 2.0);
    EXPECT_EQ(out.values(0, 1), 3.0);
    EXPECT_EQ(out.values(0, 2), 6.0);
}

TEST(AdaptDim, AffineLinearity)
{
    Rng r(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto adapter = make_seeded_adapter(6, 4, 100 + trial);
        LinearAdapterd biased = adapter;
        for (Eigen::Index i = 0; i < biased.bias.size(); ++i)
            biased.bias(i) = r.uniform(-1, 1);
        const auto x = random_map(4, 6, 2 * trial), y = random_map(4, 6, 2 * trial + 1);
        const double a = r.uniform(-3, 3), b = r.uniform(-3, 3);
        const FeatureMapd mix(a * x.values + b * y.values, "mix");
        const matXd lhs = adapt_dim(mix, biased).values;
        matXd rhs = a * adapt_dim(x, biased).values + b * adapt_dim(y, biased).values;
        rhs.rowwise() -= (a + b - 1) * biased.bias.transpose();
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(AdaptDim, MismatchNamesBothDims)
{
    try {
        adapt_dim(random_map(4, 3, 0), LinearAdapterd::identity(5));
        FAIL();
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find('3'), std::string::npos);
        EXPECT_NE(msg.find('5'), std::string::npos);
    }
}

TEST(AdaptDim, SeededAdapterRange)
{
    const auto a = make_seeded_adapter(16, 8, 3);
    EXPECT_LE(a.weights.cwiseAbs().maxCoeff(), 0.25);
    EXPECT_TRUE((a.bias.array() == 0.0).all());
    EXPECT_TRUE(make_seeded_adapter(16, 8, 3).weights == a.weights);
}
