#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "weaver/evaluator.hpp"

namespace weaver
{
    /// Knows the ground truth: describe_scene for scene images, the sample's R
    /// for file images. Matching captions get `low` per token, others `high`.
    class OracleScorer : public CaptionScorer
    {
    public:
        explicit OracleScorer(bool negated = false, double low = 0.1, double high = 1.0);
        std::vector<double> score(const FeatureMapd& features, std::string_view caption,
                                  const ScoringContext& ctx = {}) const override;
        std::string name() const override { return negated_ ? "negated-oracle" : "oracle"; }

    private:
        bool negated_;
        double low_;
        double high_;
    };

    /// Constant per-token NLL drawn from hash(seed, caption) in [0, 2). Image-blind.
    class CoinFlipScorer : public CaptionScorer
    {
    public:
        explicit CoinFlipScorer(std::uint64_t seed) : seed_(seed) {}
        std::vector<double> score(const FeatureMapd& features, std::string_view caption,
                                  const ScoringContext& ctx = {}) const override;
        std::string name() const override { return "coin-flip"; }

    private:
        std::uint64_t seed_;
    };

    struct AffinityConfig
    {
        std::vector<std::string> personas = {"color-histogram"};
        double base = 2.0;
        double alpha = 1.5;
        double nll_min = 0.05;
        double nll_max = 4.0;
        std::size_t calibration_scenes = 48;
        std::uint64_t calibration_seed = 0xca11b;
    };

    /// Reads captions against attribute prototypes. The prototypes come from a
    /// reader: the reference pipeline with routing pinned to the named personas,
    /// run over calibration scenes. A token's NLL is base - alpha * affinity,
    /// clamped to [nll_min, nll_max]; affinity is in [0, 1] and is evaluated
    /// at the grid cells the caption binds the word to.
    class AffinityScorer : public CaptionScorer
    {
    public:
        AffinityScorer(const AffinityConfig& config, const PipelineConfig& reference);
        ~AffinityScorer() override;
        AffinityScorer(AffinityScorer&&) noexcept;

        std::vector<double> score(const FeatureMapd& features, std::string_view caption,
                                  const ScoringContext& ctx = {}) const override;
        std::string name() const override { return "affinity"; }

        /// Per-token affinity before the NLL map; exposed for diagnostics.
        std::vector<double> affinities(const FeatureMapd& features, std::string_view caption) const;

        const PipelineConfig& reader() const;

    private:
        struct Impl;
        std::unique_ptr<Impl> impl_;
    };

    /// Reference pipeline with routing pinned to the given personas.
    PipelineConfig make_reader_pipeline(const PipelineConfig& reference, const std::vector<std::string>& personas);

    /// "oracle", "negated-oracle", "coin-flip" or "affinity" (which needs the reference pipeline).
    std::unique_ptr<CaptionScorer> make_scorer(const std::string& kind, std::uint64_t seed,
                                               const PipelineConfig& reference, const AffinityConfig& affinity = {});
}
