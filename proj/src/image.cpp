#include "weaver/image.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace weaver
{
    std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h)
    {
        const auto* p = static_cast<const std::uint8_t*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ull;
        }
        return h;
    }

    std::uint64_t fnv1a(const std::string& s, std::uint64_t h) { return fnv1a(s.data(), s.size(), h); }

    ImageGrid::ImageGrid(std::uint32_t width, std::uint32_t height, std::uint32_t channels, float fill)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill)
    {
    }

    ImageGrid::ImageGrid(std::uint32_t width, std::uint32_t height, std::uint32_t channels, std::vector<float> data)
        : width_(width), height_(height), channels_(channels), data_(std::move(data))
    {
        validate();
    }

    void ImageGrid::validate() const
    {
        if (width_ == 0 || height_ == 0 || channels_ == 0)
            throw Error("image: width, height and channels must be positive");
        const std::size_t expected = static_cast<std::size_t>(width_) * height_ * channels_;
        if (data_.size() != expected)
            throw Error("image: expected " + std::to_string(expected) + " values, got " + std::to_string(data_.size()));
        for (std::size_t i = 0; i < data_.size(); ++i) {
            const float v = data_[i];
            if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
                throw Error("image: value at index " + std::to_string(i) + " is outside [0,1]");
        }
    }

    std::uint64_t ImageGrid::checksum() const
    {
        std::uint64_t h = fnv1a(&width_, sizeof width_);
        h = fnv1a(&height_, sizeof height_, h);
        h = fnv1a(&channels_, sizeof channels_, h);
        return fnv1a(data_.data(), data_.size() * sizeof(float), h);
    }

    namespace
    {
        void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
        {
            for (int i = 0; i < 4; ++i)
                out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }

        std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset)
        {
            std::uint32_t v = 0;
            for (int i = 0; i < 4; ++i)
                v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
            return v;
        }
    }

    std::vector<std::uint8_t> encode_raw(const ImageGrid& image)
    {
        std::vector<std::uint8_t> out;
        out.reserve(12 + image.data().size() * 4);
        put_u32(out, image.width());
        put_u32(out, image.height());
        put_u32(out, image.channels());
        for (float f : image.data())
            put_u32(out, std::bit_cast<std::uint32_t>(f));
        return out;
    }

    ImageGrid decode_raw(std::span<const std::uint8_t> bytes)
    {
        if (bytes.size() < 12)
            throw Error("raw image: truncated header (" + std::to_string(bytes.size()) + " bytes)");
        const std::uint32_t w = get_u32(bytes, 0), h = get_u32(bytes, 4), c = get_u32(bytes, 8);
        const std::size_t n = static_cast<std::size_t>(w) * h * c;
        if (bytes.size() != 12 + 4 * n)
            throw Error("raw image: header declares " + std::to_string(n) + " floats but payload has " +
                        std::to_string((bytes.size() - 12) / 4));
        std::vector<float> data(n);
        for (std::size_t i = 0; i < n; ++i)
            data[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
        return ImageGrid(w, h, c, std::move(data));
    }

    ImageGrid load_raw(const std::filesystem::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw Error("cannot open image file " + path.string());
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return decode_raw(bytes);
    }

    void save_raw(const ImageGrid& image, const std::filesystem::path& path)
    {
        const auto bytes = encode_raw(image);
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error("cannot write image file " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
}
