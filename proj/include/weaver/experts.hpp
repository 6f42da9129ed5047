#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "weaver/core.hpp"
#include "weaver/image.hpp"
#include "weaver/rng.hpp"

namespace weaver
{
    /// Token grid (tokens x dim) produced by one encoder stage.
    template <class Scalar>
    struct FeatureMap
    {
        MatX<Scalar> values;
        std::string source;

        FeatureMap() = default;
        FeatureMap(MatX<Scalar> v, std::string src) : values(std::move(v)), source(std::move(src)) {}

        std::size_t tokens() const noexcept { return static_cast<std::size_t>(values.rows()); }
        std::size_t dim() const noexcept { return static_cast<std::size_t>(values.cols()); }

        void validate() const
        {
            if (values.rows() == 0 || values.cols() == 0)
                throw Error("feature map '" + source + "' is empty");
            if (!values.allFinite())
                throw Error("feature map '" + source + "' has non-finite entries");
        }
    };

    using FeatureMapd = FeatureMap<double>;

    /// Row-vector affine map: out = row * weights + bias.
    template <class Scalar>
    struct LinearAdapter
    {
        MatX<Scalar> weights; // in_dim x out_dim
        VecX<Scalar> bias;    // out_dim

        std::size_t in_dim() const noexcept { return static_cast<std::size_t>(weights.rows()); }
        std::size_t out_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }

        void validate() const
        {
            if (bias.size() != weights.cols())
                throw Error("linear adapter: bias length " + std::to_string(bias.size()) + " != out_dim " +
                            std::to_string(weights.cols()));
            if (!weights.allFinite() || !bias.allFinite())
                throw Error("linear adapter has non-finite entries");
        }

        static LinearAdapter identity(std::size_t n)
        {
            return {MatX<Scalar>::Identity(n, n), VecX<Scalar>::Zero(n)};
        }
        static LinearAdapter zero(std::size_t in, std::size_t out)
        {
            return {MatX<Scalar>::Zero(in, out), VecX<Scalar>::Zero(out)};
        }
    };

    using LinearAdapterd = LinearAdapter<double>;

    /// Weights uniform in [-1/sqrt(in), 1/sqrt(in)], zero bias.
    LinearAdapterd make_seeded_adapter(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

    enum class Persona
    {
        GlobalContext,
        ColorHistogram,
        EdgeShape,
        PatchStatistics,
        TextStripe,
        RandomProjection,
    };

    inline constexpr Persona kAllPersonas[] = {Persona::GlobalContext,   Persona::ColorHistogram,
                                               Persona::EdgeShape,       Persona::PatchStatistics,
                                               Persona::TextStripe,      Persona::RandomProjection};

    std::string_view to_string(Persona p);
    Persona parse_persona(std::string_view name);

    /// Length of the per-token descriptor a persona computes before it is
    /// placed into native_dim columns. Random projection has no intrinsic length.
    std::size_t persona_descriptor_length(Persona p, std::uint32_t channels);

    struct ToyExpertSpec
    {
        int id = 0;
        Persona persona = Persona::RandomProjection;
        std::uint64_t seed = 0;
        std::size_t native_tokens = 16;
        std::size_t native_dim = 16;

        void validate() const;
    };

    /// Deterministic toy encoder. The per-token descriptor fills the first
    /// native_dim columns; unused columns stay zero, surplus entries are dropped.
    FeatureMapd encode_toy_expert(const ImageGrid& image, const ToyExpertSpec& spec);

    /// Area-average pooling when shrinking the square grid, bilinear
    /// interpolation (half-pixel centres, clamped edges) when growing it.
    /// Every output is written as ref + sum w_k (v_k - ref), so constant
    /// fields come back bit-identical.
    template <class Scalar>
    FeatureMap<Scalar> resample_tokens(const FeatureMap<Scalar>& fm, std::size_t target_tokens);

    template <class Scalar>
    FeatureMap<Scalar> adapt_dim(const FeatureMap<Scalar>& fm, const LinearAdapter<Scalar>& adapter)
    {
        if (fm.dim() != adapter.in_dim())
            throw Error("adapt_dim: feature dim " + std::to_string(fm.dim()) + " does not match adapter in_dim " +
                        std::to_string(adapter.in_dim()));
        MatX<Scalar> out = fm.values * adapter.weights;
        out.rowwise() += adapter.bias.transpose();
        return {std::move(out), fm.source};
    }

    namespace detail
    {
        struct Tap
        {
            std::size_t index;
            double weight;
        };

        std::vector<std::vector<Tap>> area_taps(std::size_t src, std::size_t dst);
        std::vector<std::vector<Tap>> bilinear_taps(std::size_t src, std::size_t dst);
    }

    template <class Scalar>
    FeatureMap<Scalar> resample_tokens(const FeatureMap<Scalar>& fm, std::size_t target_tokens)
    {
        std::size_t src_side = 0, dst_side = 0;
        if (!is_perfect_square(fm.tokens(), &src_side) || src_side == 0)
            throw Error("resample_tokens: source token count " + std::to_string(fm.tokens()) +
                        " is not a perfect square");
        if (!is_perfect_square(target_tokens, &dst_side) || dst_side == 0)
            throw Error("resample_tokens: target token count " + std::to_string(target_tokens) +
                        " is not a perfect square");
        if (src_side == dst_side)
            return fm;

        const auto taps = dst_side < src_side ? detail::area_taps(src_side, dst_side)
                                              : detail::bilinear_taps(src_side, dst_side);
        MatX<Scalar> out(static_cast<Eigen::Index>(target_tokens), fm.values.cols());
        for (std::size_t i = 0; i < dst_side; ++i) {
            for (std::size_t j = 0; j < dst_side; ++j) {
                const auto& ty = taps[i];
                const auto& tx = taps[j];
                const auto ref = fm.values.row(static_cast<Eigen::Index>(ty.front().index * src_side + tx.front().index));
                RowVecX<Scalar> acc = ref;
                for (const auto& a : ty)
                    for (const auto& b : tx) {
                        const auto row = fm.values.row(static_cast<Eigen::Index>(a.index * src_side + b.index));
                        acc += static_cast<Scalar>(a.weight * b.weight) * (row - ref);
                    }
                out.row(static_cast<Eigen::Index>(i * dst_side + j)) = acc;
            }
        }
        return {std::move(out), fm.source};
    }
}
