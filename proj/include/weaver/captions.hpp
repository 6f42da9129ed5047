#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "weaver/benchmark.hpp"
#include "weaver/scene.hpp"

namespace weaver
{
    /// What the generator changed to turn R into H.
    struct Perturbation
    {
        HallucinationCategory category;
        std::size_t sentence = 0; // index into split_sentences(real)
        std::string from;
        std::string to;
    };

    struct CaptionPair
    {
        std::string real;
        std::string hallucinated;
        Perturbation perturbation;
    };

    /// Templated factual caption: group counts with colour, shape, action and
    /// cells; occlusion and label sentences; position and interaction
    /// relations between consecutive objects; absent shapes.
    std::string describe_scene(const SceneDescriptor& scene);

    /// R plus an H carrying exactly one perturbation of the requested
    /// category, or nullopt when the scene cannot support it.
    std::optional<CaptionPair> synth_caption_pair(const SceneDescriptor& scene, HallucinationCategory category,
                                                  std::uint64_t seed);

    std::vector<std::string> split_sentences(std::string_view caption);
    std::vector<std::string> split_tokens(std::string_view text);

    /// Rule-based reading of a caption edit: the category whose vocabulary
    /// the differing tokens belong to, or nullopt when the edit spans
    /// sentences or mixes vocabularies.
    std::optional<HallucinationCategory> classify_caption_edit(std::string_view real, std::string_view hallucinated);

    // Caption vocabulary shared with the scorers.
    std::string_view count_word(int n);
    std::optional<int> parse_count_word(std::string_view w);
    std::string_view action_of(ShapeKind s);
    std::optional<ShapeKind> shape_of_action(std::string_view verb);
    std::string cell_token(int row, int col);
    /// "(r,c)" inside the 4x4 grid, else nullopt.
    std::optional<std::pair<int, int>> parse_cell_token(std::string_view tok);
}
