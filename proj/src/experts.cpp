#include "weaver/experts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace weaver
{
    namespace detail
    {
        std::vector<std::vector<Tap>> area_taps(std::size_t src, std::size_t dst)
        {
            // Output cell i spans [i*src, (i+1)*src) and input cell j spans
            // [j*dst, (j+1)*dst) on a common integer axis of length src*dst.
            std::vector<std::vector<Tap>> taps(dst);
            for (std::size_t i = 0; i < dst; ++i) {
                const std::size_t lo = i * src, hi = (i + 1) * src;
                for (std::size_t j = lo / dst; j * dst < hi && j < src; ++j) {
                    const std::size_t a = std::max(lo, j * dst), b = std::min(hi, (j + 1) * dst);
                    if (b > a)
                        taps[i].push_back({j, static_cast<double>(b - a) / static_cast<double>(src)});
                }
            }
            return taps;
        }

        std::vector<std::vector<Tap>> bilinear_taps(std::size_t src, std::size_t dst)
        {
            std::vector<std::vector<Tap>> taps(dst);
            const double scale = static_cast<double>(src) / static_cast<double>(dst);
            for (std::size_t i = 0; i < dst; ++i) {
                double x = (static_cast<double>(i) + 0.5) * scale - 0.5;
                x = std::clamp(x, 0.0, static_cast<double>(src - 1));
                const auto lo = static_cast<std::size_t>(std::floor(x));
                const std::size_t hi = std::min(lo + 1, src - 1);
                const double frac = x - static_cast<double>(lo);
                taps[i].push_back({lo, 1.0 - frac});
                if (hi != lo && frac > 0.0)
                    taps[i].push_back({hi, frac});
            }
            return taps;
        }
    }

    LinearAdapterd make_seeded_adapter(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed)
    {
        if (in_dim == 0 || out_dim == 0)
            throw Error("adapter dimensions must be positive");
        Rng rng(seed);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
        LinearAdapterd a{matXd(in_dim, out_dim), vecXd::Zero(static_cast<Eigen::Index>(out_dim))};
        for (Eigen::Index r = 0; r < a.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < a.weights.cols(); ++c)
                a.weights(r, c) = rng.uniform(-bound, bound);
        return a;
    }

    std::string_view to_string(Persona p)
    {
        switch (p) {
        case Persona::GlobalContext: return "global-context";
        case Persona::ColorHistogram: return "color-histogram";
        case Persona::EdgeShape: return "edge-shape";
        case Persona::PatchStatistics: return "patch-statistics";
        case Persona::TextStripe: return "text-stripe";
        case Persona::RandomProjection: return "random-projection";
        }
        return "?";
    }

    Persona parse_persona(std::string_view name)
    {
        for (Persona p : kAllPersonas)
            if (to_string(p) == name)
                return p;
        throw Error("unknown expert persona '" + std::string(name) +
                    "' (expected global-context, color-histogram, edge-shape, patch-statistics, text-stripe or "
                    "random-projection)");
    }

    namespace
    {
        constexpr std::size_t kHistogramBins = 8;
        constexpr std::size_t kStripeBands = 4;

        // Regenerating the Gaussian matrix dominates encode time, so recent ones are kept.
        std::shared_ptr<const matXd> projection_matrix(std::uint64_t seed, std::size_t raw, std::size_t dim)
        {
            using Key = std::tuple<std::uint64_t, std::size_t, std::size_t>;
            static std::mutex mutex;
            static std::map<Key, std::shared_ptr<const matXd>> cache;
            const Key key{seed, raw, dim};
            {
                std::lock_guard lock(mutex);
                if (auto it = cache.find(key); it != cache.end())
                    return it->second;
            }
            Rng rng(mix_seed(seed, 0x5052'4f4aull));
            matXd m(static_cast<Eigen::Index>(raw), static_cast<Eigen::Index>(dim));
            const double scale = 1.0 / std::sqrt(static_cast<double>(raw));
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c)
                    m(r, c) = scale * rng.normal();
            auto ptr = std::make_shared<const matXd>(std::move(m));
            std::lock_guard lock(mutex);
            if (cache.size() >= 16)
                cache.clear();
            cache.emplace(key, ptr);
            return ptr;
        }

        std::size_t token_side(const ToyExpertSpec& spec)
        {
            std::size_t side = 0;
            is_perfect_square(spec.native_tokens, &side);
            return side;
        }

        struct Patch
        {
            const ImageGrid& img;
            std::uint32_t x0, y0, w, h;

            double gray(std::uint32_t x, std::uint32_t y) const
            {
                double s = 0.0;
                for (std::uint32_t c = 0; c < img.channels(); ++c)
                    s += img.at(x0 + x, y0 + y, c);
                return s / img.channels();
            }
        };

        double region_mean(const ImageGrid& img, std::uint32_t x0, std::uint32_t y0, std::uint32_t w, std::uint32_t h,
                           std::uint32_t c)
        {
            double s = 0.0;
            for (std::uint32_t y = y0; y < y0 + h; ++y)
                for (std::uint32_t x = x0; x < x0 + w; ++x)
                    s += img.at(x, y, c);
            return s / (static_cast<double>(w) * h);
        }

        void patch_statistics(const Patch& p, std::vector<double>& d)
        {
            const auto C = p.img.channels();
            const double n = static_cast<double>(p.w) * p.h;
            for (std::uint32_t c = 0; c < C; ++c)
                d.push_back(region_mean(p.img, p.x0, p.y0, p.w, p.h, c));
            for (std::uint32_t c = 0; c < C; ++c) {
                const double m = d[c];
                double s = 0.0;
                for (std::uint32_t y = 0; y < p.h; ++y)
                    for (std::uint32_t x = 0; x < p.w; ++x) {
                        const double v = p.img.at(p.x0 + x, p.y0 + y, c) - m;
                        s += v * v;
                    }
                d.push_back(s / n);
            }
        }

        void color_histogram(const Patch& p, std::vector<double>& d)
        {
            const auto C = p.img.channels();
            const double n = static_cast<double>(p.w) * p.h;
            for (std::uint32_t c = 0; c < C; ++c) {
                std::array<double, kHistogramBins> bins{};
                for (std::uint32_t y = 0; y < p.h; ++y)
                    for (std::uint32_t x = 0; x < p.w; ++x) {
                        const double v = p.img.at(p.x0 + x, p.y0 + y, c);
                        const auto b = std::min<std::size_t>(kHistogramBins - 1,
                                                             static_cast<std::size_t>(v * kHistogramBins));
                        bins[b] += 1.0;
                    }
                for (double b : bins)
                    d.push_back(b / n);
            }
        }

        void edge_shape(const Patch& p, std::vector<double>& d)
        {
            // Mean |dx| and |dy| of the gray image in each patch quadrant.
            const std::uint32_t mx = p.w / 2, my = p.h / 2;
            std::array<double, 8> sum{};
            std::array<double, 8> cnt{};
            for (std::uint32_t y = 0; y < p.h; ++y)
                for (std::uint32_t x = 0; x < p.w; ++x) {
                    const int q = (y >= my ? 2 : 0) + (x >= mx ? 1 : 0);
                    if (x + 1 < p.w) {
                        sum[2 * q] += std::abs(p.gray(x + 1, y) - p.gray(x, y));
                        cnt[2 * q] += 1.0;
                    }
                    if (y + 1 < p.h) {
                        sum[2 * q + 1] += std::abs(p.gray(x, y + 1) - p.gray(x, y));
                        cnt[2 * q + 1] += 1.0;
                    }
                }
            for (std::size_t i = 0; i < sum.size(); ++i)
                d.push_back(cnt[i] > 0 ? sum[i] / cnt[i] : 0.0);
        }

        void text_stripe(const Patch& p, std::vector<double>& d)
        {
            // Horizontal second difference responds to vertical stripes.
            std::array<double, kStripeBands> sum{};
            std::array<double, kStripeBands> cnt{};
            double total = 0.0, total_cnt = 0.0;
            for (std::uint32_t y = 0; y < p.h; ++y) {
                const std::size_t band = std::min<std::size_t>(kStripeBands - 1, y * kStripeBands / p.h);
                for (std::uint32_t x = 1; x + 1 < p.w; ++x) {
                    const double e = std::abs(p.gray(x - 1, y) - 2.0 * p.gray(x, y) + p.gray(x + 1, y));
                    sum[band] += e;
                    cnt[band] += 1.0;
                    total += e * e;
                    total_cnt += 1.0;
                }
            }
            for (std::size_t b = 0; b < kStripeBands; ++b)
                d.push_back(cnt[b] > 0 ? sum[b] / cnt[b] : 0.0);
            d.push_back(total_cnt > 0 ? total / total_cnt : 0.0);
        }

        void global_context(const Patch& p, std::vector<double>& d)
        {
            const auto& img = p.img;
            const auto C = img.channels();
            for (std::uint32_t c = 0; c < C; ++c)
                d.push_back(region_mean(img, 0, 0, img.width(), img.height(), c));
            const std::uint32_t qw = std::max(1u, img.width() / 2), qh = std::max(1u, img.height() / 2);
            const std::uint32_t cx = p.x0 + p.w / 2, cy = p.y0 + p.h / 2;
            const std::uint32_t qx = std::min(cx / qw, 1u) * qw, qy = std::min(cy / qh, 1u) * qh;
            for (std::uint32_t c = 0; c < C; ++c)
                d.push_back(region_mean(img, qx, qy, std::min(qw, img.width() - qx), std::min(qh, img.height() - qy), c));
            for (std::uint32_t c = 0; c < C; ++c)
                d.push_back(region_mean(img, p.x0, p.y0, p.w, p.h, c));
        }
    }

    std::size_t persona_descriptor_length(Persona p, std::uint32_t channels)
    {
        switch (p) {
        case Persona::GlobalContext: return 3 * channels;
        case Persona::ColorHistogram: return kHistogramBins * channels;
        case Persona::EdgeShape: return 8;
        case Persona::PatchStatistics: return 2 * channels;
        case Persona::TextStripe: return kStripeBands + 1;
        case Persona::RandomProjection: return 0;
        }
        return 0;
    }

    void ToyExpertSpec::validate() const
    {
        if (native_tokens == 0 || !is_perfect_square(native_tokens))
            throw Error("expert " + std::to_string(id) + ": native_tokens " + std::to_string(native_tokens) +
                        " is not a positive perfect square");
        if (native_dim == 0)
            throw Error("expert " + std::to_string(id) + ": native_dim must be positive");
    }

    FeatureMapd encode_toy_expert(const ImageGrid& image, const ToyExpertSpec& spec)
    {
        image.validate();
        spec.validate();
        const std::size_t side = token_side(spec);
        if (image.width() % side != 0 || image.height() % side != 0)
            throw Error("expert " + std::to_string(spec.id) + " (" + std::string(to_string(spec.persona)) + "): " +
                        std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                        " image cannot be divided into a " + std::to_string(side) + "x" + std::to_string(side) +
                        " token grid");

        const auto pw = static_cast<std::uint32_t>(image.width() / side);
        const auto ph = static_cast<std::uint32_t>(image.height() / side);
        const auto D = static_cast<Eigen::Index>(spec.native_dim);
        matXd values = matXd::Zero(static_cast<Eigen::Index>(spec.native_tokens), D);

        std::shared_ptr<const matXd> projection;
        if (spec.persona == Persona::RandomProjection)
            projection = projection_matrix(spec.seed, static_cast<std::size_t>(pw) * ph * image.channels(),
                                           spec.native_dim);

        std::vector<double> desc;
        rowXd pixels;
        for (std::size_t ty = 0; ty < side; ++ty) {
            for (std::size_t tx = 0; tx < side; ++tx) {
                const auto row = static_cast<Eigen::Index>(ty * side + tx);
                const Patch patch{image, static_cast<std::uint32_t>(tx) * pw, static_cast<std::uint32_t>(ty) * ph, pw, ph};
                if (spec.persona == Persona::RandomProjection) {
                    pixels.resize(projection->rows());
                    Eigen::Index k = 0;
                    for (std::uint32_t y = 0; y < ph; ++y)
                        for (std::uint32_t x = 0; x < pw; ++x)
                            for (std::uint32_t c = 0; c < image.channels(); ++c)
                                pixels(k++) = image.at(patch.x0 + x, patch.y0 + y, c);
                    values.row(row) = pixels * *projection;
                    continue;
                }
                desc.clear();
                switch (spec.persona) {
                case Persona::GlobalContext: global_context(patch, desc); break;
                case Persona::ColorHistogram: color_histogram(patch, desc); break;
                case Persona::EdgeShape: edge_shape(patch, desc); break;
                case Persona::PatchStatistics: patch_statistics(patch, desc); break;
                case Persona::TextStripe: text_stripe(patch, desc); break;
                case Persona::RandomProjection: break;
                }
                const auto n = std::min<Eigen::Index>(D, static_cast<Eigen::Index>(desc.size()));
                for (Eigen::Index k = 0; k < n; ++k)
                    values(row, k) = desc[static_cast<std::size_t>(k)];
            }
        }

        if (spec.persona == Persona::ColorHistogram) {
            // Centre each histogram bin across tokens so shared background mass cancels.
            const rowXd mean = values.colwise().mean();
            values.rowwise() -= mean;
        }
        return {std::move(values), "expert:" + std::to_string(spec.id)};
    }
}
