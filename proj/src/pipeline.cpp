#include "weaver/pipeline.hpp"

#include <chrono>

namespace weaver
{
    ClipOutputd clip_encode(const ImageGrid& image, const ToyClipParams& params)
    {
        ToyExpertSpec spec;
        spec.id = -1;
        spec.persona = Persona::RandomProjection;
        spec.seed = params.seed;
        spec.native_tokens = params.native_tokens;
        spec.native_dim = params.dim;
        FeatureMapd patches = resample_tokens(encode_toy_expert(image, spec), params.canonical_tokens);
        patches.source = "clip-patch";
        vecXd cls = patches.values.colwise().mean().transpose();
        return {std::move(cls), std::move(patches)};
    }

    RouterParamsd make_seeded_router(std::size_t dim_in, std::size_t n_experts, std::uint64_t seed)
    {
        const LinearAdapterd a = make_seeded_adapter(dim_in, n_experts, seed);
        return {a.weights, a.bias};
    }

    ProjectorParamsd make_seeded_projector(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                                           std::uint64_t seed)
    {
        return {make_seeded_adapter(in_dim, hidden_dim, mix_seed(seed, 1)),
                make_seeded_adapter(hidden_dim, out_dim, mix_seed(seed, 2))};
    }

    std::string_view to_string(FusionKind k)
    {
        switch (k) {
        case FusionKind::Routed: return "routed";
        case FusionKind::Add: return "add";
        case FusionKind::Concat: return "concat";
        }
        return "?";
    }

    FusionKind parse_fusion_kind(std::string_view name)
    {
        if (name == "routed")
            return FusionKind::Routed;
        if (name == "add")
            return FusionKind::Add;
        if (name == "concat")
            return FusionKind::Concat;
        throw Error("unknown fusion strategy '" + std::string(name) + "' (expected routed, add or concat)");
    }

    std::string_view to_string(Stage s)
    {
        switch (s) {
        case Stage::Encode: return "encode";
        case Stage::Align: return "align";
        case Stage::Route: return "route";
        case Stage::Fuse: return "fuse";
        case Stage::Project: return "project";
        }
        return "?";
    }

    void PipelineConfig::validate() const
    {
        if (experts.empty())
            throw Error("pipeline: at least one expert is required");
        if (!is_perfect_square(canonical_tokens))
            throw Error("pipeline: canonical_tokens " + std::to_string(canonical_tokens) + " is not a perfect square");
        for (std::size_t i = 0; i < experts.size(); ++i) {
            const auto& e = experts[i];
            e.spec.validate();
            e.adapter.validate();
            if (e.spec.id != static_cast<int>(i))
                throw Error("pipeline: expert at position " + std::to_string(i) + " has id " + std::to_string(e.spec.id));
            if (e.adapter.in_dim() != e.spec.native_dim || e.adapter.out_dim() != canonical_dim)
                throw Error("pipeline: adapter of expert " + std::to_string(i) + " maps " +
                            std::to_string(e.adapter.in_dim()) + "->" + std::to_string(e.adapter.out_dim()) +
                            ", expected " + std::to_string(e.spec.native_dim) + "->" + std::to_string(canonical_dim));
        }
        if (clip.dim != canonical_dim || clip.canonical_tokens != canonical_tokens)
            throw Error("pipeline: base encoder must emit the canonical grid");
        strategy.validate();
        if (strategy.kind == FusionKind::Routed) {
            router.validate();
            if (router.dim_in() != canonical_dim || router.n_experts() != experts.size())
                throw Error("pipeline: router maps " + std::to_string(router.dim_in()) + "->" +
                            std::to_string(router.n_experts()) + ", expected " + std::to_string(canonical_dim) +
                            "->" + std::to_string(experts.size()));
            if (strategy.k && (*strategy.k < 1 || *strategy.k > experts.size()))
                throw Error("pipeline: top-k " + std::to_string(*strategy.k) + " outside [1, " +
                            std::to_string(experts.size()) + "]");
        }
        projector.validate();
        const std::size_t fused_dim =
            strategy.kind == FusionKind::Concat ? canonical_dim * experts.size() : canonical_dim;
        if (projector.stage1.in_dim() != fused_dim)
            throw Error("pipeline: projector expects dim " + std::to_string(projector.stage1.in_dim()) +
                        " but the " + std::string(to_string(strategy.kind)) + " strategy produces " +
                        std::to_string(fused_dim));
    }

    PipelineConfig make_pipeline(const PipelineShape& shape, std::uint64_t seed)
    {
        PipelineConfig cfg;
        cfg.canonical_tokens = shape.canonical_tokens;
        cfg.canonical_dim = shape.canonical_dim;
        cfg.strategy = shape.strategy;
        int id = 0;
        for (Persona p : shape.personas) {
            ExpertSlot slot;
            slot.spec.id = id;
            slot.spec.persona = p;
            slot.spec.seed = mix_seed(seed, 100 + static_cast<std::uint64_t>(id));
            slot.spec.native_tokens = shape.expert_tokens;
            slot.spec.native_dim = shape.expert_dim;
            slot.adapter = make_seeded_adapter(shape.expert_dim, shape.canonical_dim, mix_seed(slot.spec.seed, 7));
            cfg.experts.push_back(std::move(slot));
            ++id;
        }
        cfg.clip = {mix_seed(seed, 1), shape.clip_tokens, shape.canonical_tokens, shape.canonical_dim};
        cfg.router = make_seeded_router(shape.canonical_dim, cfg.experts.size(), mix_seed(seed, 2));
        const std::size_t fused_dim =
            shape.strategy.kind == FusionKind::Concat ? shape.canonical_dim * cfg.experts.size() : shape.canonical_dim;
        cfg.projector = make_seeded_projector(fused_dim, shape.projector_hidden, shape.projector_out, mix_seed(seed, 3));
        cfg.validate();
        return cfg;
    }

    namespace
    {
        using Clock = std::chrono::steady_clock;

        class StageTimer
        {
        public:
            StageTimer(StageTimes* times, Stage stage) : times_(times), stage_(stage), start_(Clock::now()) {}
            ~StageTimer()
            {
                if (times_)
                    times_->ms[stage_] += std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
            }

        private:
            StageTimes* times_;
            Stage stage_;
            Clock::time_point start_;
        };

        template <class Fn>
        auto in_stage(Stage stage, StageTimes* times, Fn&& fn)
        {
            StageTimer timer(times, stage);
            try {
                return fn();
            } catch (const Error& e) {
                throw Error(std::string(to_string(stage)) + ": " + e.what());
            }
        }
    }

    std::vector<FeatureMapd> encode_and_align(const ImageGrid& image, const PipelineConfig& config)
    {
        std::vector<FeatureMapd> aligned;
        aligned.reserve(config.experts.size());
        for (const auto& slot : config.experts)
            aligned.push_back(
                adapt_dim(resample_tokens(encode_toy_expert(image, slot.spec), config.canonical_tokens), slot.adapter));
        return aligned;
    }

    PipelineResult run_pipeline(const ImageGrid& image, const PipelineConfig& config, StageTimes* times)
    {
        const auto start = Clock::now();
        if (times)
            for (Stage s : kAllStages)
                times->ms[s] = 0.0;
        in_stage(Stage::Encode, nullptr, [&] {
            config.validate();
            return 0;
        });

        PipelineResult result;
        auto native = in_stage(Stage::Encode, times, [&] {
            std::vector<FeatureMapd> maps;
            maps.reserve(config.experts.size());
            for (const auto& slot : config.experts)
                maps.push_back(encode_toy_expert(image, slot.spec));
            return maps;
        });
        result.aligned = in_stage(Stage::Align, times, [&] {
            std::vector<FeatureMapd> maps;
            maps.reserve(native.size());
            for (std::size_t i = 0; i < native.size(); ++i)
                maps.push_back(adapt_dim(resample_tokens(native[i], config.canonical_tokens), config.experts[i].adapter));
            return maps;
        });

        const auto n = static_cast<Eigen::Index>(config.experts.size());
        in_stage(Stage::Route, times, [&] {
            result.clip = clip_encode(image, config.clip);
            if (config.strategy.kind == FusionKind::Routed) {
                result.logits = route_logits<double>(result.clip.cls, config.router);
                result.routing = routing_weights<double>(result.logits);
                if (config.strategy.k)
                    result.routing = select_top_k(result.routing, *config.strategy.k);
            } else {
                result.routing = routing_weights<double>(vecXd::Zero(n));
            }
            return 0;
        });

        result.merged = in_stage(Stage::Fuse, times, [&] {
            const std::span<const FeatureMapd> maps(result.aligned);
            switch (config.strategy.kind) {
            case FusionKind::Routed: return residual_merge(result.clip.patches, weighted_fuse(result.routing, maps));
            case FusionKind::Add: return residual_merge(result.clip.patches, fuse_add(maps));
            case FusionKind::Concat: break;
            }
            return fuse_concat(maps);
        });

        result.output = in_stage(Stage::Project, times, [&] { return project(result.merged, config.projector); });
        if (times)
            times->total_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        return result;
    }
}
