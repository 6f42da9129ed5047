#include "weaver/scene.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "weaver/rng.hpp"

namespace weaver
{
    std::string_view to_string(ShapeKind s)
    {
        switch (s) {
        case ShapeKind::Circle: return "circle";
        case ShapeKind::Square: return "square";
        case ShapeKind::Triangle: return "triangle";
        }
        return "?";
    }

    std::string_view plural(ShapeKind s)
    {
        switch (s) {
        case ShapeKind::Circle: return "circles";
        case ShapeKind::Square: return "squares";
        case ShapeKind::Triangle: return "triangles";
        }
        return "?";
    }

    std::string_view to_string(ColorName c)
    {
        switch (c) {
        case ColorName::Red: return "red";
        case ColorName::Green: return "green";
        case ColorName::Blue: return "blue";
        case ColorName::Yellow: return "yellow";
        }
        return "?";
    }

    ShapeKind parse_shape(std::string_view s)
    {
        for (ShapeKind k : kAllShapes)
            if (to_string(k) == s)
                return k;
        throw Error("unknown shape '" + std::string(s) + "'");
    }

    ColorName parse_color(std::string_view s)
    {
        for (ColorName c : kAllColors)
            if (to_string(c) == s)
                return c;
        throw Error("unknown colour '" + std::string(s) + "'");
    }

    Rgb palette(ColorName c)
    {
        switch (c) {
        case ColorName::Red: return {0.9f, 0.1f, 0.1f};
        case ColorName::Green: return {0.1f, 0.75f, 0.15f};
        case ColorName::Blue: return {0.1f, 0.2f, 0.9f};
        case ColorName::Yellow: return {0.95f, 0.85f, 0.1f};
        }
        return kBackground;
    }

    void SceneDescriptor::validate() const
    {
        if (objects.size() > kMaxSceneObjects)
            throw Error("scene: " + std::to_string(objects.size()) + " objects exceeds the limit of 6");
        std::map<int, std::pair<ShapeKind, ColorName>> groups;
        for (std::size_t i = 0; i < objects.size(); ++i) {
            const auto& o = objects[i];
            if (o.row < 0 || o.row >= kSceneGrid || o.col < 0 || o.col >= kSceneGrid)
                throw Error("scene: object " + std::to_string(i) + " lies outside the 4x4 grid");
            for (std::size_t j = 0; j < i; ++j)
                if (objects[j].row == o.row && objects[j].col == o.col)
                    throw Error("scene: objects " + std::to_string(j) + " and " + std::to_string(i) +
                                " share cell (" + std::to_string(o.row) + "," + std::to_string(o.col) + ")");
            auto [it, fresh] = groups.emplace(o.group, std::pair{o.shape, o.color});
            if (!fresh && it->second != std::pair{o.shape, o.color})
                throw Error("scene: group " + std::to_string(o.group) + " mixes different shapes or colours");
            if (o.label) {
                if (o.label->empty() || o.label->size() > 4 ||
                    !std::all_of(o.label->begin(), o.label->end(), [](char ch) { return ch >= 'A' && ch <= 'Z'; }))
                    throw Error("scene: label '" + *o.label + "' must be 1-4 letters A-Z");
            }
        }
        for (const auto& [g1, k1] : groups)
            for (const auto& [g2, k2] : groups)
                if (g1 < g2 && k1 == k2)
                    throw Error("scene: groups " + std::to_string(g1) + " and " + std::to_string(g2) +
                                " describe the same shape and colour");
    }

    namespace
    {
        void fill(ImageGrid& img, int x, int y, Rgb c)
        {
            img.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), 0) = c.r;
            img.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), 1) = c.g;
            img.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), 2) = c.b;
        }

        // Shape occupies local rows [1, 12) and columns [2, 14) of its cell.
        bool inside(ShapeKind s, int x, int y)
        {
            switch (s) {
            case ShapeKind::Circle: {
                const int dx = 2 * x - 16, dy = 2 * y - 12; // centre (8, 6), doubled coordinates
                return dx * dx + dy * dy <= 100;            // radius 5
            }
            case ShapeKind::Square: return x >= 3 && x < 13 && y >= 1 && y < 11;
            case ShapeKind::Triangle: {
                // Apex at (8, 1), base on row 11 spanning [3, 13].
                if (y < 1 || y >= 12)
                    return false;
                const int half = (y - 1) / 2;
                return x >= 8 - half && x <= 8 + half;
            }
            }
            return false;
        }
    }

    ImageGrid rasterize(const SceneDescriptor& scene)
    {
        scene.validate();
        ImageGrid img(kScenePixels, kScenePixels, 3);
        for (int y = 0; y < kScenePixels; ++y)
            for (int x = 0; x < kScenePixels; ++x)
                fill(img, x, y, kBackground);

        for (const auto& o : scene.objects) {
            const int ox = o.col * kCellPixels, oy = o.row * kCellPixels;
            const Rgb c = palette(o.color);
            for (int y = 0; y < kCellPixels; ++y)
                for (int x = 0; x < kCellPixels; ++x)
                    if (inside(o.shape, x, y))
                        fill(img, ox + x, oy + y, c);
            if (o.occluded)
                for (int y = 1; y < 12; ++y)
                    for (int x = 8; x < 14; ++x)
                        fill(img, ox + x, oy + y, kOccluder);
            if (o.label) {
                // Stripe block, three columns per character, phase set by the character bits.
                const std::string& text = *o.label;
                for (int k = 0; k < 12; ++k) {
                    const std::size_t ci = static_cast<std::size_t>(k / 3);
                    const int bits = ci < text.size() ? text[ci] - 'A' : 0;
                    const bool light = ((k + ((bits >> (k % 3)) & 1)) % 2) == 0;
                    for (int y = 12; y < 16; ++y)
                        fill(img, ox + 2 + k, oy + y, light ? Rgb{1.0f, 1.0f, 1.0f} : Rgb{0.0f, 0.0f, 0.0f});
                }
            }
        }
        return img;
    }

    namespace
    {
        constexpr std::string_view kLabels[] = {"SUN", "CAT", "MAP", "BOX", "TEA", "OWL", "CUP", "PEN",
                                                "SHOP", "MILK", "TAXI", "STOP", "OPEN", "BOOK", "FISH", "MOON"};
    }

    Scene synth_scene(std::uint64_t seed)
    {
        Rng rng(mix_seed(seed, 0x5343'454eull));
        const std::size_t n = 1 + rng.below(kMaxSceneObjects);
        std::vector<int> cells(kSceneGrid * kSceneGrid);
        std::iota(cells.begin(), cells.end(), 0);
        for (std::size_t i = 0; i < n; ++i)
            std::swap(cells[i], cells[i + rng.below(cells.size() - i)]);
        std::sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(n));

        SceneDescriptor d;
        d.seed = seed;
        for (std::size_t i = 0; i < n; ++i) {
            SceneObject o;
            o.row = cells[i] / kSceneGrid;
            o.col = cells[i] % kSceneGrid;
            if (i > 0 && rng.chance(0.35)) {
                const auto& twin = d.objects[rng.below(i)];
                o.shape = twin.shape;
                o.color = twin.color;
            } else {
                o.shape = kAllShapes[rng.below(std::size(kAllShapes))];
                o.color = kAllColors[rng.below(std::size(kAllColors))];
            }
            o.occluded = rng.chance(0.25);
            if (rng.chance(0.25))
                o.label = std::string(kLabels[rng.below(std::size(kLabels))]);
            d.objects.push_back(std::move(o));
        }
        // Group ids by first appearance of each (shape, colour) in row-major order.
        std::vector<std::pair<ShapeKind, ColorName>> seen;
        for (auto& o : d.objects) {
            auto it = std::find(seen.begin(), seen.end(), std::pair{o.shape, o.color});
            if (it == seen.end()) {
                seen.emplace_back(o.shape, o.color);
                it = seen.end() - 1;
            }
            o.group = static_cast<int>(it - seen.begin());
        }
        Scene s{d, rasterize(d)};
        return s;
    }
}
