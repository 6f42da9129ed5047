#include "weaver/benchmark.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "weaver/captions.hpp"
#include "weaver/json_codec.hpp"

namespace weaver
{
    std::string_view to_string(HallucinationCategory c)
    {
        using HC = HallucinationCategory;
        switch (c) {
        case HC::Category: return "Category";
        case HC::Counting: return "Counting";
        case HC::Occlusion: return "Occlusion";
        case HC::Text: return "Text";
        case HC::Shape: return "Shape";
        case HC::AbsolutePosition: return "AbsolutePosition";
        case HC::RelativePosition: return "RelativePosition";
        case HC::Color: return "Color";
        case HC::Action: return "Action";
        case HC::RelativeInteraction: return "RelativeInteraction";
        }
        return "?";
    }

    std::string_view to_string(CategoryGroup g)
    {
        switch (g) {
        case CategoryGroup::Detection: return "Detection";
        case CategoryGroup::Segmentation: return "Segmentation";
        case CategoryGroup::Localization: return "Localization";
        case CategoryGroup::Classification: return "Classification";
        }
        return "?";
    }

    CategoryGroup group_of(HallucinationCategory c)
    {
        using HC = HallucinationCategory;
        switch (c) {
        case HC::Category:
        case HC::Counting:
        case HC::Occlusion: return CategoryGroup::Detection;
        case HC::Text:
        case HC::Shape: return CategoryGroup::Segmentation;
        case HC::AbsolutePosition:
        case HC::RelativePosition: return CategoryGroup::Localization;
        case HC::Color:
        case HC::Action:
        case HC::RelativeInteraction: return CategoryGroup::Classification;
        }
        return CategoryGroup::Detection;
    }

    HallucinationCategory parse_category(std::string_view label)
    {
        for (auto c : kAllCategories)
            if (to_string(c) == label)
                return c;
        std::string valid;
        for (auto c : kAllCategories) {
            if (!valid.empty())
                valid += ", ";
            valid += to_string(c);
        }
        throw Error("unknown category '" + std::string(label) + "'; valid labels: " + valid);
    }

    std::size_t index_of(HallucinationCategory c) { return static_cast<std::size_t>(c); }

    Dataset parse_dataset(std::istream& in)
    {
        Dataset out;
        std::set<std::string> ids;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            try {
                BenchmarkSample s = sample_from_json(Json::parse(line));
                if (!ids.insert(s.id).second)
                    throw Error("duplicate sample id '" + s.id + "'");
                out.push_back(std::move(s));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
            } catch (const Error& e) {
                throw ParseError(lineno, e.what());
            }
        }
        return out;
    }

    Dataset load_dataset(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error("cannot open dataset " + path.string());
        return parse_dataset(in);
    }

    std::string serialize_sample(const BenchmarkSample& sample) { return to_json(sample).dump(); }

    std::string serialize_dataset(std::span<const BenchmarkSample> dataset)
    {
        std::string out;
        for (const auto& s : dataset) {
            out += serialize_sample(s);
            out += '\n';
        }
        return out;
    }

    void save_dataset(std::span<const BenchmarkSample> dataset, const std::filesystem::path& path)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error("cannot write dataset " + path.string());
        out << serialize_dataset(dataset);
    }

    std::map<HallucinationCategory, std::size_t> category_counts(std::span<const BenchmarkSample> dataset)
    {
        std::map<HallucinationCategory, std::size_t> counts;
        for (auto c : kAllCategories)
            counts[c] = 0;
        for (const auto& s : dataset)
            ++counts[s.category];
        return counts;
    }

    ImageGrid resolve_image(const ImageRef& ref, const std::filesystem::path& base_dir)
    {
        if (ref.kind == ImageRef::Kind::Scene) {
            if (!ref.scene)
                throw Error("image reference of kind 'scene' has no scene");
            return rasterize(*ref.scene);
        }
        std::filesystem::path p(ref.path);
        if (p.is_relative() && !base_dir.empty())
            p = base_dir / p;
        return load_raw(p);
    }

    Dataset build_synthetic_dataset(std::size_t n_per_category, std::uint64_t seed,
                                    std::span<const HallucinationCategory> categories)
    {
        if (n_per_category < 1)
            throw Error("build_synthetic_dataset: n_per_category must be at least 1");
        Dataset out;
        for (auto category : categories) {
            const std::size_t budget = 1000 * n_per_category;
            std::size_t produced = 0;
            for (std::size_t attempt = 0; produced < n_per_category; ++attempt) {
                if (attempt >= budget)
                    throw Error("build_synthetic_dataset: gave up on " + std::string(to_string(category)) + " after " +
                                std::to_string(budget) + " scenes");
                const std::uint64_t scene_seed = mix_seed(seed, index_of(category) * 1'000'003ull + attempt);
                const Scene scene = synth_scene(scene_seed);
                const auto pair = synth_caption_pair(scene.descriptor, category, scene_seed);
                if (!pair)
                    continue;
                std::ostringstream id;
                id << "synth-" << to_string(category) << '-' << produced;
                ImageRef ref;
                ref.kind = ImageRef::Kind::Scene;
                ref.scene = scene.descriptor;
                out.push_back({id.str(), std::move(ref), pair->real, pair->hallucinated, category});
                ++produced;
            }
        }
        return out;
    }
}
