#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "weaver/image.hpp"

namespace weaver
{
    enum class ShapeKind
    {
        Circle,
        Square,
        Triangle,
    };

    enum class ColorName
    {
        Red,
        Green,
        Blue,
        Yellow,
    };

    inline constexpr ShapeKind kAllShapes[] = {ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle};
    inline constexpr ColorName kAllColors[] = {ColorName::Red, ColorName::Green, ColorName::Blue, ColorName::Yellow};

    std::string_view to_string(ShapeKind s);
    std::string_view plural(ShapeKind s);
    std::string_view to_string(ColorName c);
    ShapeKind parse_shape(std::string_view s);
    ColorName parse_color(std::string_view s);

    inline constexpr int kSceneGrid = 4;
    inline constexpr int kCellPixels = 16;
    inline constexpr int kScenePixels = kSceneGrid * kCellPixels;
    inline constexpr std::size_t kMaxSceneObjects = 6;

    struct SceneObject
    {
        ShapeKind shape = ShapeKind::Circle;
        ColorName color = ColorName::Red;
        int row = 0;
        int col = 0;
        int group = 0; // objects counted together share shape and colour
        bool occluded = false;
        std::optional<std::string> label;

        bool operator==(const SceneObject&) const = default;
    };

    struct SceneDescriptor
    {
        std::uint64_t seed = 0;
        std::vector<SceneObject> objects;

        /// At most six objects on distinct cells of the 4x4 grid; a group id
        /// names exactly one (shape, colour) pair; labels are 1-4 letters A-Z.
        void validate() const;

        bool operator==(const SceneDescriptor&) const = default;
    };

    /// RGB palette entry used by the rasterizer.
    struct Rgb
    {
        float r, g, b;
    };

    Rgb palette(ColorName c);
    inline constexpr Rgb kBackground{0.55f, 0.55f, 0.55f};
    inline constexpr Rgb kOccluder{0.3f, 0.3f, 0.3f};

    /// Paints the scene onto a 64x64 RGB grid, one 16x16 cell per grid position.
    ImageGrid rasterize(const SceneDescriptor& scene);

    struct Scene
    {
        SceneDescriptor descriptor;
        ImageGrid image;
    };

    /// One to six objects, objects sorted by (row, col), deterministic per seed.
    Scene synth_scene(std::uint64_t seed);
}
