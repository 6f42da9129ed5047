#include "weaver/json_codec.hpp"

#include <fstream>

namespace weaver
{
    namespace
    {
        const Json& require(const Json& j, const char* key)
        {
            if (!j.is_object() || !j.contains(key))
                throw Error(std::string("missing field '") + key + "'");
            return j.at(key);
        }

        std::string require_string(const Json& j, const char* key)
        {
            const Json& v = require(j, key);
            if (!v.is_string())
                throw Error(std::string("field '") + key + "' must be a string");
            return v.get<std::string>();
        }

        template <class T>
        T require_number(const Json& j, const char* key)
        {
            const Json& v = require(j, key);
            if (!v.is_number())
                throw Error(std::string("field '") + key + "' must be a number");
            return v.get<T>();
        }

        Json matrix_to_json(const matXd& m)
        {
            Json arr = Json::array();
            for (Eigen::Index i = 0; i < m.size(); ++i)
                arr.push_back(m.data()[i]);
            return arr;
        }

        matXd matrix_from_json(const Json& arr, std::size_t rows, std::size_t cols, const char* what)
        {
            if (!arr.is_array() || arr.size() != rows * cols)
                throw Error(std::string(what) + ": expected " + std::to_string(rows * cols) + " row-major values");
            matXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            for (std::size_t i = 0; i < arr.size(); ++i)
                m.data()[i] = arr[i].get<double>();
            return m;
        }

        vecXd vector_from_json(const Json& arr, std::size_t n, const char* what)
        {
            if (!arr.is_array() || arr.size() != n)
                throw Error(std::string(what) + ": expected " + std::to_string(n) + " values");
            vecXd v(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i)
                v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
            return v;
        }

        Json vector_to_json(const vecXd& v)
        {
            Json arr = Json::array();
            for (Eigen::Index i = 0; i < v.size(); ++i)
                arr.push_back(v(i));
            return arr;
        }
    }

    Json read_json_file(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error("cannot open " + path.string());
        try {
            return Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ": " + e.what());
        }
    }

    Json to_json(const SceneDescriptor& scene)
    {
        Json objects = Json::array();
        for (const auto& o : scene.objects) {
            Json jo;
            jo["shape"] = to_string(o.shape);
            jo["color"] = to_string(o.color);
            jo["cell"] = {o.row, o.col};
            jo["group"] = o.group;
            jo["occluded"] = o.occluded;
            if (o.label)
                jo["label"] = *o.label;
            objects.push_back(std::move(jo));
        }
        Json j;
        j["seed"] = scene.seed;
        j["objects"] = std::move(objects);
        return j;
    }

    SceneDescriptor scene_from_json(const Json& j)
    {
        SceneDescriptor s;
        s.seed = require_number<std::uint64_t>(j, "seed");
        const Json& objects = require(j, "objects");
        if (!objects.is_array())
            throw Error("scene: 'objects' must be an array");
        for (const auto& jo : objects) {
            SceneObject o;
            o.shape = parse_shape(require_string(jo, "shape"));
            o.color = parse_color(require_string(jo, "color"));
            const Json& cell = require(jo, "cell");
            if (!cell.is_array() || cell.size() != 2)
                throw Error("scene: 'cell' must be [row, col]");
            o.row = cell[0].get<int>();
            o.col = cell[1].get<int>();
            o.group = require_number<int>(jo, "group");
            o.occluded = require(jo, "occluded").get<bool>();
            if (jo.contains("label"))
                o.label = jo.at("label").get<std::string>();
            s.objects.push_back(std::move(o));
        }
        s.validate();
        return s;
    }

    Json to_json(const BenchmarkSample& sample)
    {
        Json j;
        j["id"] = sample.id;
        j["image"] = to_json(sample.image);
        j["real"] = sample.real;
        j["hallucinated"] = sample.hallucinated;
        j["category"] = to_string(sample.category);
        return j;
    }

    BenchmarkSample sample_from_json(const Json& j)
    {
        if (!j.is_object())
            throw Error("sample must be a JSON object");
        BenchmarkSample s;
        s.id = require_string(j, "id");
        if (s.id.empty())
            throw Error("sample id is empty");
        s.real = require_string(j, "real");
        s.hallucinated = require_string(j, "hallucinated");
        if (s.real.empty() || s.hallucinated.empty())
            throw Error("sample '" + s.id + "': captions must be non-empty");
        if (s.real == s.hallucinated)
            throw Error("sample '" + s.id + "': hallucinated caption equals the real caption");
        s.category = parse_category(require_string(j, "category"));
        try {
            s.image = image_ref_from_json(require(j, "image"));
        } catch (const Error& e) {
            throw Error("sample '" + s.id + "': " + e.what());
        }
        return s;
    }

    Json to_json(const ImageRef& ref)
    {
        Json image;
        if (ref.kind == ImageRef::Kind::File) {
            image["kind"] = "file";
            image["path"] = ref.path;
        } else {
            image["kind"] = "scene";
            image["scene"] = to_json(*ref.scene);
        }
        return image;
    }

    ImageRef image_ref_from_json(const Json& j)
    {
        ImageRef ref;
        const std::string kind = require_string(j, "kind");
        if (kind == "file") {
            ref.kind = ImageRef::Kind::File;
            ref.path = require_string(j, "path");
            if (ref.path.empty())
                throw Error("image path is empty");
        } else if (kind == "scene") {
            ref.kind = ImageRef::Kind::Scene;
            ref.scene = scene_from_json(require(j, "scene"));
        } else {
            throw Error("image kind must be 'file' or 'scene', got '" + kind + "'");
        }
        return ref;
    }

    Json to_json(const RouterParamsd& router)
    {
        Json j;
        j["dim_in"] = router.dim_in();
        j["n_experts"] = router.n_experts();
        j["weights"] = matrix_to_json(router.weights);
        j["bias"] = vector_to_json(router.bias);
        return j;
    }

    RouterParamsd router_from_json(const Json& j)
    {
        const auto d = require_number<std::size_t>(j, "dim_in");
        const auto n = require_number<std::size_t>(j, "n_experts");
        RouterParamsd r{matrix_from_json(require(j, "weights"), d, n, "router weights"),
                        vector_from_json(require(j, "bias"), n, "router bias")};
        r.validate();
        return r;
    }

    Json to_json(const LinearAdapterd& adapter)
    {
        Json j;
        j["in_dim"] = adapter.in_dim();
        j["out_dim"] = adapter.out_dim();
        j["weights"] = matrix_to_json(adapter.weights);
        j["bias"] = vector_to_json(adapter.bias);
        return j;
    }

    LinearAdapterd adapter_from_json(const Json& j)
    {
        const auto in = require_number<std::size_t>(j, "in_dim");
        const auto out = require_number<std::size_t>(j, "out_dim");
        LinearAdapterd a{matrix_from_json(require(j, "weights"), in, out, "adapter weights"),
                         vector_from_json(require(j, "bias"), out, "adapter bias")};
        a.validate();
        return a;
    }

    Json to_json(const ProjectorParamsd& projector)
    {
        Json j;
        j["stage1"] = to_json(projector.stage1);
        j["stage2"] = to_json(projector.stage2);
        return j;
    }

    ProjectorParamsd projector_from_json(const Json& j)
    {
        ProjectorParamsd p{adapter_from_json(require(j, "stage1")), adapter_from_json(require(j, "stage2"))};
        p.validate();
        return p;
    }

    Json to_json(const ToyExpertSpec& spec)
    {
        Json j;
        j["id"] = spec.id;
        j["persona"] = to_string(spec.persona);
        j["seed"] = spec.seed;
        j["native_tokens"] = spec.native_tokens;
        j["native_dim"] = spec.native_dim;
        return j;
    }

    ToyExpertSpec expert_spec_from_json(const Json& j)
    {
        ToyExpertSpec s;
        s.id = require_number<int>(j, "id");
        s.persona = parse_persona(require_string(j, "persona"));
        s.seed = require_number<std::uint64_t>(j, "seed");
        s.native_tokens = require_number<std::size_t>(j, "native_tokens");
        s.native_dim = require_number<std::size_t>(j, "native_dim");
        s.validate();
        return s;
    }

    Json to_json(const PipelineConfig& config)
    {
        Json experts = Json::array();
        for (const auto& slot : config.experts) {
            Json e = to_json(slot.spec);
            e["adapter"] = to_json(slot.adapter);
            experts.push_back(std::move(e));
        }
        Json strategy;
        strategy["kind"] = to_string(config.strategy.kind);
        if (config.strategy.k)
            strategy["k"] = *config.strategy.k;
        Json j;
        j["experts"] = std::move(experts);
        j["clip"] = {{"seed", config.clip.seed}, {"native_tokens", config.clip.native_tokens}};
        j["router"] = to_json(config.router);
        j["strategy"] = std::move(strategy);
        j["projector"] = to_json(config.projector);
        j["canonical_tokens"] = config.canonical_tokens;
        j["canonical_dim"] = config.canonical_dim;
        return j;
    }

    namespace
    {
        Json resolve_ref(const Json& j, const std::filesystem::path& base_dir)
        {
            if (j.is_object() && j.contains("path") && j.size() == 1) {
                std::filesystem::path p = j.at("path").get<std::string>();
                if (p.is_relative() && !base_dir.empty())
                    p = base_dir / p;
                return read_json_file(p);
            }
            return j;
        }
    }

    PipelineConfig pipeline_from_json(const Json& j, const std::filesystem::path& base_dir)
    {
        try {
            PipelineConfig cfg;
            cfg.canonical_tokens = j.value("canonical_tokens", std::size_t{576});
            cfg.canonical_dim = j.value("canonical_dim", std::size_t{1024});

            const Json& experts = require(j, "experts");
            if (!experts.is_array() || experts.empty())
                throw Error("'experts' must be a non-empty array");
            for (const auto& je : experts) {
                ExpertSlot slot;
                slot.spec = expert_spec_from_json(je);
                if (je.contains("adapter")) {
                    slot.adapter = adapter_from_json(resolve_ref(je.at("adapter"), base_dir));
                } else {
                    const auto seed = je.value("adapter_seed", mix_seed(slot.spec.seed, 7));
                    slot.adapter = make_seeded_adapter(slot.spec.native_dim, cfg.canonical_dim, seed);
                }
                cfg.experts.push_back(std::move(slot));
            }

            const Json& clip = require(j, "clip");
            cfg.clip = {require_number<std::uint64_t>(clip, "seed"), require_number<std::size_t>(clip, "native_tokens"),
                        cfg.canonical_tokens, cfg.canonical_dim};

            const Json& strategy = require(j, "strategy");
            cfg.strategy.kind = parse_fusion_kind(require_string(strategy, "kind"));
            if (strategy.contains("k") && !strategy.at("k").is_null())
                cfg.strategy.k = strategy.at("k").get<std::size_t>();

            const std::size_t n = cfg.experts.size();
            if (j.contains("router")) {
                const Json router = resolve_ref(j.at("router"), base_dir);
                if (router.contains("init_seed"))
                    cfg.router = make_seeded_router(cfg.canonical_dim, n, router.at("init_seed").get<std::uint64_t>());
                else
                    cfg.router = router_from_json(router);
            } else if (cfg.strategy.kind == FusionKind::Routed) {
                throw Error("missing field 'router'");
            } else {
                cfg.router = {matXd::Zero(static_cast<Eigen::Index>(cfg.canonical_dim), static_cast<Eigen::Index>(n)),
                              vecXd::Zero(static_cast<Eigen::Index>(n))};
            }

            const Json projector = resolve_ref(require(j, "projector"), base_dir);
            if (projector.contains("init_seed")) {
                const std::size_t fused = cfg.strategy.kind == FusionKind::Concat ? cfg.canonical_dim * n : cfg.canonical_dim;
                cfg.projector = make_seeded_projector(fused, require_number<std::size_t>(projector, "hidden_dim"),
                                                      require_number<std::size_t>(projector, "out_dim"),
                                                      projector.at("init_seed").get<std::uint64_t>());
            } else {
                cfg.projector = projector_from_json(projector);
            }
            cfg.validate();
            return cfg;
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("pipeline config: ") + e.what());
        } catch (const Error& e) {
            throw Error(std::string("pipeline config: ") + e.what());
        }
    }

    PipelineConfig load_pipeline(const std::filesystem::path& path)
    {
        return pipeline_from_json(read_json_file(path), path.parent_path());
    }
}
