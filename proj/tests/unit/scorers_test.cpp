#include <gtest/gtest.h>

#include <algorithm>

#include "weaver/captions.hpp"
#include "weaver/scorers.hpp"

using namespace weaver;

namespace
{
    PipelineConfig reference_pipeline()
    {
        PipelineShape s;
        s.canonical_tokens = 64;
        s.canonical_dim = 128;
        s.projector_hidden = 128;
        s.projector_out = 128;
        return make_pipeline(s, 21);
    }

    // Router pinned to the colour-histogram expert.
    PipelineConfig color_favoured(PipelineConfig cfg)
    {
        cfg.router.weights.setZero();
        cfg.router.bias.setZero();
        for (std::size_t i = 0; i < cfg.experts.size(); ++i)
            if (cfg.experts[i].spec.persona == Persona::ColorHistogram)
                cfg.router.bias(static_cast<Eigen::Index>(i)) = 8.0;
        return cfg;
    }

    const AffinityScorer& shared_scorer()
    {
        static const AffinityScorer scorer({}, reference_pipeline());
        return scorer;
    }

    FeatureMapd features_of(const SceneDescriptor& d, const PipelineConfig& cfg)
    {
        return run_pipeline(rasterize(d), cfg).output;
    }

    double ppl(const CaptionScorer& s, const FeatureMapd& f, const std::string& caption)
    {
        return perplexity(s.score(f, caption));
    }
}

TEST(Oracle, NeedsContextAndRewardsTruth)
{
    const auto ds = build_synthetic_dataset(1, 4);
    const OracleScorer oracle;
    const FeatureMapd none(matXd::Zero(1, 1), "none");
    EXPECT_THROW(oracle.score(none, "a b"), Error);
    const ScoringContext ctx{&ds[0]};
    const auto r = oracle.score(none, ds[0].real, ctx);
    EXPECT_EQ(r.size(), split_tokens(ds[0].real).size());
    EXPECT_EQ(r.front(), 0.1);
    EXPECT_EQ(oracle.score(none, ds[0].hallucinated, ctx).front(), 1.0);
    EXPECT_EQ(OracleScorer(true).score(none, ds[0].real, ctx).front(), 1.0);
    EXPECT_THROW(OracleScorer(false, 1.0, 0.5), Error);

    // File images fall back to the sample's own real caption.
    auto file = ds[0];
    file.image = ImageRef{ImageRef::Kind::File, "x.raw", {}};
    file.real = "just this";
    EXPECT_EQ(oracle.score(none, "just this", {&file}).front(), 0.1);
}

TEST(CoinFlip, DeterministicImageBlindInRange)
{
    const CoinFlipScorer a(3), b(3), c(4);
    const FeatureMapd f1(matXd::Zero(2, 2), "x"), f2(matXd::Ones(5, 3), "y");
    const auto s = a.score(f1, "one two three");
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s, b.score(f2, "one two three"));
    EXPECT_NE(s, c.score(f1, "one two three"));
    EXPECT_GE(s[0], 0.0);
    EXPECT_LT(s[0], 2.0);
    EXPECT_THROW(a.score(f1, "   "), Error);
}

TEST(Reader, PinsRoutingToPersonas)
{
    const auto ref = reference_pipeline();
    const auto reader = make_reader_pipeline(ref, {"color-histogram", "edge-shape"});
    EXPECT_EQ(reader.strategy.kind, FusionKind::Routed);
    EXPECT_TRUE((reader.router.weights.array() == 0.0).all());
    for (std::size_t i = 0; i < reader.experts.size(); ++i) {
        const auto p = reader.experts[i].spec.persona;
        const bool on = p == Persona::ColorHistogram || p == Persona::EdgeShape;
        EXPECT_EQ(reader.router.bias(static_cast<Eigen::Index>(i)), on ? 0.0 : -1e3);
    }
    EXPECT_THROW(make_reader_pipeline(ref, {"colour"}), Error);
    EXPECT_THROW(make_reader_pipeline(ref, {}), Error);

    PipelineShape two;
    two.personas = {Persona::EdgeShape, Persona::TextStripe};
    two.canonical_tokens = 16;
    two.canonical_dim = 8;
    EXPECT_THROW(make_reader_pipeline(make_pipeline(two, 1), {"color-histogram"}), Error);
    two.strategy.kind = FusionKind::Concat;
    EXPECT_THROW(make_reader_pipeline(make_pipeline(two, 1), {"edge-shape"}), Error);
}

TEST(Affinity, UnknownPersonaRejected)
{
    AffinityConfig cfg;
    cfg.personas = {"x-ray"};
    EXPECT_THROW(AffinityScorer(cfg, reference_pipeline()), Error);
    EXPECT_THROW(make_scorer("psychic", 0, reference_pipeline()), Error);
}

TEST(Affinity, TrueColourHasLowerPerplexity)
{
    const auto& scorer = shared_scorer();
    const auto favoured = color_favoured(reference_pipeline());
    for (ColorName truth : kAllColors) {
        SceneDescriptor d;
        d.objects.push_back({ShapeKind::Circle, truth, 1, 2, 0, false, {}});
        const auto f = features_of(d, favoured);
        const std::string right = std::string(to_string(truth)) + " circle";
        for (ColorName other : kAllColors) {
            if (other == truth)
                continue;
            const std::string wrong = std::string(to_string(other)) + " circle";
            EXPECT_LT(ppl(scorer, f, right), ppl(scorer, f, wrong)) << right << " vs " << wrong;
        }
    }
}

TEST(Affinity, CellBoundCaptionsPreferTheTruth)
{
    const auto& scorer = shared_scorer();
    const auto favoured = color_favoured(reference_pipeline());
    int wins = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto scene = synth_scene(seed).descriptor;
        const auto pair = synth_caption_pair(scene, HallucinationCategory::Color, seed);
        if (!pair)
            continue;
        const auto f = features_of(scene, favoured);
        ++total;
        wins += ppl(scorer, f, pair->real) < ppl(scorer, f, pair->hallucinated);
    }
    EXPECT_GE(wins * 10, total * 8) << wins << "/" << total;
}

TEST(Affinity, ZeroAlphaIgnoresImage)
{
    AffinityConfig cfg;
    cfg.alpha = 0.0;
    const AffinityScorer flat(cfg, reference_pipeline());
    SceneDescriptor d;
    d.objects.push_back({ShapeKind::Square, ColorName::Green, 0, 0, 0, false, {}});
    const auto f = features_of(d, reference_pipeline());
    const auto r = flat.score(f, "One green square resting at (0,0).");
    const auto h = flat.score(f, "One blue square resting at (0,0).");
    EXPECT_EQ(r, h);
    for (double v : r)
        EXPECT_EQ(v, cfg.base);
    BenchmarkSample s;
    s.id = "z";
    s.real = "One green square resting at (0,0).";
    s.hallucinated = "One blue square resting at (0,0).";
    EXPECT_FALSE(judge_sample(flat, f, s).is_error);
}

TEST(Affinity, ClampsAndRanges)
{
    AffinityConfig cfg;
    cfg.alpha = 40.0;
    cfg.base = 3.0;
    cfg.nll_min = 0.5;
    cfg.nll_max = 2.5;
    const AffinityScorer steep(cfg, reference_pipeline());
    const auto ds = build_synthetic_dataset(2, 6);
    for (const auto& s : ds) {
        const auto f = features_of(*s.image.scene, reference_pipeline());
        for (const auto* caption : {&s.real, &s.hallucinated}) {
            const auto nll = steep.score(f, *caption);
            EXPECT_EQ(nll.size(), split_tokens(*caption).size());
            for (double v : nll) {
                EXPECT_GE(v, cfg.nll_min);
                EXPECT_LE(v, cfg.nll_max);
            }
            for (double a : steep.affinities(f, *caption)) {
                EXPECT_GE(a, 0.0);
                EXPECT_LE(a, 1.0);
            }
        }
    }
}

TEST(Affinity, FeatureWidthMismatch)
{
    const FeatureMapd narrow(matXd::Zero(16, 4), "x");
    EXPECT_THROW(shared_scorer().score(narrow, "red circle"), Error);
    const FeatureMapd ragged(matXd::Zero(15, 128), "x");
    EXPECT_THROW(shared_scorer().score(ragged, "red circle"), Error);
}

TEST(Affinity, DeterministicAcrossInstances)
{
    const AffinityScorer again({}, reference_pipeline());
    const auto scene = synth_scene(3).descriptor;
    const auto f = features_of(scene, reference_pipeline());
    const std::string caption = describe_scene(scene);
    EXPECT_EQ(again.score(f, caption), shared_scorer().score(f, caption));
}

TEST(MakeScorer, Kinds)
{
    const auto ref = reference_pipeline();
    EXPECT_EQ(make_scorer("oracle", 0, ref)->name(), "oracle");
    EXPECT_EQ(make_scorer("negated-oracle", 0, ref)->name(), "negated-oracle");
    EXPECT_EQ(make_scorer("coin-flip", 0, ref)->name(), "coin-flip");
    EXPECT_EQ(make_scorer("affinity", 0, ref)->name(), "affinity");
}
