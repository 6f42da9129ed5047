#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "weaver/core.hpp"

namespace weaver
{
    /// Row-major interleaved image, values in [0,1].
    class ImageGrid
    {
    public:
        ImageGrid() = default;
        ImageGrid(std::uint32_t width, std::uint32_t height, std::uint32_t channels, float fill = 0.0f);
        ImageGrid(std::uint32_t width, std::uint32_t height, std::uint32_t channels, std::vector<float> data);

        std::uint32_t width() const noexcept { return width_; }
        std::uint32_t height() const noexcept { return height_; }
        std::uint32_t channels() const noexcept { return channels_; }

        float at(std::uint32_t x, std::uint32_t y, std::uint32_t c) const
        {
            return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
        }
        float& at(std::uint32_t x, std::uint32_t y, std::uint32_t c)
        {
            return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
        }

        std::span<const float> data() const noexcept { return data_; }

        /// Throws when sizes disagree or a value is non-finite or outside [0,1].
        void validate() const;

        std::uint64_t checksum() const;

        bool operator==(const ImageGrid&) const = default;

    private:
        std::uint32_t width_ = 0;
        std::uint32_t height_ = 0;
        std::uint32_t channels_ = 0;
        std::vector<float> data_;
    };

    // Raw format: three little-endian u32 (width, height, channels), then
    // width*height*channels little-endian f32.
    std::vector<std::uint8_t> encode_raw(const ImageGrid& image);
    ImageGrid decode_raw(std::span<const std::uint8_t> bytes);
    ImageGrid load_raw(const std::filesystem::path& path);
    void save_raw(const ImageGrid& image, const std::filesystem::path& path);
}
