#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weaver/scene.hpp"

namespace weaver
{
    enum class HallucinationCategory
    {
        Category,
        Counting,
        Occlusion,
        Text,
        Shape,
        AbsolutePosition,
        RelativePosition,
        Color,
        Action,
        RelativeInteraction,
    };

    inline constexpr std::array<HallucinationCategory, 10> kAllCategories = {
        HallucinationCategory::Category,         HallucinationCategory::Counting,
        HallucinationCategory::Occlusion,        HallucinationCategory::Text,
        HallucinationCategory::Shape,            HallucinationCategory::AbsolutePosition,
        HallucinationCategory::RelativePosition, HallucinationCategory::Color,
        HallucinationCategory::Action,           HallucinationCategory::RelativeInteraction,
    };

    enum class CategoryGroup
    {
        Detection,
        Segmentation,
        Localization,
        Classification,
    };

    std::string_view to_string(HallucinationCategory c);
    std::string_view to_string(CategoryGroup g);
    CategoryGroup group_of(HallucinationCategory c);
    /// Throws listing the ten valid labels.
    HallucinationCategory parse_category(std::string_view label);
    std::size_t index_of(HallucinationCategory c);

    struct ImageRef
    {
        enum class Kind
        {
            File,
            Scene,
        };
        Kind kind = Kind::Scene;
        std::string path;                     // Kind::File
        std::optional<SceneDescriptor> scene; // Kind::Scene

        bool operator==(const ImageRef&) const = default;
    };

    struct BenchmarkSample
    {
        std::string id;
        ImageRef image;
        std::string real;
        std::string hallucinated;
        HallucinationCategory category = HallucinationCategory::Category;

        bool operator==(const BenchmarkSample&) const = default;
    };

    using Dataset = std::vector<BenchmarkSample>;

    /// One JSON object per line, input order preserved. Malformed lines,
    /// duplicate ids and unknown categories raise ParseError with the line number.
    Dataset parse_dataset(std::istream& in);
    Dataset load_dataset(const std::filesystem::path& path);

    std::string serialize_sample(const BenchmarkSample& sample);
    std::string serialize_dataset(std::span<const BenchmarkSample> dataset);
    void save_dataset(std::span<const BenchmarkSample> dataset, const std::filesystem::path& path);

    std::map<HallucinationCategory, std::size_t> category_counts(std::span<const BenchmarkSample> dataset);

    /// Scenes are rasterized; file paths are resolved against base_dir when relative.
    ImageGrid resolve_image(const ImageRef& ref, const std::filesystem::path& base_dir = {});

    /// Generates scenes until every requested category has n valid pairs.
    /// Gives up after 1000 * n attempts for a category.
    Dataset build_synthetic_dataset(std::size_t n_per_category, std::uint64_t seed,
                                    std::span<const HallucinationCategory> categories = kAllCategories);
}
