#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "weaver/experts.hpp"
#include "weaver/fusion.hpp"
#include "weaver/router.hpp"

namespace weaver
{
    /// One expert plus the adapter that maps its native width to the canonical width.
    struct ExpertSlot
    {
        ToyExpertSpec spec;
        LinearAdapterd adapter;
    };

    struct PipelineConfig
    {
        std::vector<ExpertSlot> experts;
        ToyClipParams clip;
        RouterParamsd router;
        FusionStrategy strategy;
        ProjectorParamsd projector;
        std::size_t canonical_tokens = 576;
        std::size_t canonical_dim = 1024;

        std::size_t n_experts() const noexcept { return experts.size(); }

        /// Cross-checks every shape the stages will rely on.
        void validate() const;
    };

    /// Knobs for make_pipeline; every parameter tensor is derived from `seed`.
    struct PipelineShape
    {
        std::vector<Persona> personas = {kAllPersonas[0], kAllPersonas[1], kAllPersonas[2],
                                         kAllPersonas[3], kAllPersonas[4], kAllPersonas[5]};
        std::size_t expert_tokens = 16;
        std::size_t expert_dim = 32;
        std::size_t clip_tokens = 4; // coarse: one token spans a 2x2 block of scene cells
        std::size_t canonical_tokens = 576;
        std::size_t canonical_dim = 1024;
        std::size_t projector_hidden = 256;
        std::size_t projector_out = 256;
        FusionStrategy strategy;
    };

    PipelineConfig make_pipeline(const PipelineShape& shape, std::uint64_t seed);

    enum class Stage
    {
        Encode,
        Align,
        Route,
        Fuse,
        Project,
    };

    inline constexpr Stage kAllStages[] = {Stage::Encode, Stage::Align, Stage::Route, Stage::Fuse, Stage::Project};

    std::string_view to_string(Stage s);

    struct StageTimes
    {
        std::map<Stage, double> ms;
        double total_ms = 0.0;
    };

    struct PipelineResult
    {
        FeatureMapd output;
        RoutingWeightsd routing; // uniform over experts for add/concat
        vecXd logits;
        ClipOutputd clip;
        std::vector<FeatureMapd> aligned; // per expert, canonical shape
        FeatureMapd merged;               // projector input
    };

    /// encode -> align -> base encode + route -> fuse -> (residual) -> project.
    /// Stage errors are rethrown prefixed with the stage name.
    PipelineResult run_pipeline(const ImageGrid& image, const PipelineConfig& config, StageTimes* times = nullptr);

    /// Experts are encoded and aligned in expert-id order.
    std::vector<FeatureMapd> encode_and_align(const ImageGrid& image, const PipelineConfig& config);
}
