#pragma once

#include <filesystem>

#include "json.hpp"
#include "weaver/benchmark.hpp"
#include "weaver/pipeline.hpp"

namespace weaver
{
    using Json = nlohmann::ordered_json;

    Json to_json(const SceneDescriptor& scene);
    SceneDescriptor scene_from_json(const Json& j);

    Json to_json(const ImageRef& ref);
    ImageRef image_ref_from_json(const Json& j);

    Json to_json(const BenchmarkSample& sample);
    /// Validates the schema: non-empty captions, R != H, known category, well-formed image reference.
    BenchmarkSample sample_from_json(const Json& j);

    Json to_json(const RouterParamsd& router);
    RouterParamsd router_from_json(const Json& j);

    Json to_json(const LinearAdapterd& adapter);
    LinearAdapterd adapter_from_json(const Json& j);

    Json to_json(const ProjectorParamsd& projector);
    ProjectorParamsd projector_from_json(const Json& j);

    Json to_json(const ToyExpertSpec& spec);
    ToyExpertSpec expert_spec_from_json(const Json& j);

    /// Fully inline form: every parameter tensor is written out.
    Json to_json(const PipelineConfig& config);

    /// Router and projector may be inline objects, {"path": file} references
    /// (relative to base_dir) or {"init_seed": n, ...} seeded initialisers.
    /// Expert adapters default to seeded initialisation when omitted.
    PipelineConfig pipeline_from_json(const Json& j, const std::filesystem::path& base_dir = {});
    PipelineConfig load_pipeline(const std::filesystem::path& path);

    Json read_json_file(const std::filesystem::path& path);
}
