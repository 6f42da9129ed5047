#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weaver/core.hpp"
#include "weaver/experts.hpp"
#include "weaver/router.hpp"

namespace weaver
{
    enum class FusionKind
    {
        Routed,
        Add,
        Concat,
    };

    std::string_view to_string(FusionKind k);
    FusionKind parse_fusion_kind(std::string_view name);

    struct FusionStrategy
    {
        FusionKind kind = FusionKind::Routed;
        std::optional<std::size_t> k; // routed only

        void validate() const
        {
            if (k && kind != FusionKind::Routed)
                throw Error("fusion strategy: k is only meaningful for the routed strategy");
        }
    };

    namespace detail
    {
        template <class Scalar>
        void check_same_shape(std::span<const FeatureMap<Scalar>> experts, const char* op)
        {
            if (experts.empty())
                throw Error(std::string(op) + ": no expert feature maps");
            const auto t = experts[0].tokens(), d = experts[0].dim();
            for (std::size_t i = 1; i < experts.size(); ++i)
                if (experts[i].tokens() != t || experts[i].dim() != d)
                    throw Error(std::string(op) + ": expert " + std::to_string(i) + " has shape " +
                                std::to_string(experts[i].tokens()) + "x" + std::to_string(experts[i].dim()) +
                                ", expected " + std::to_string(t) + "x" + std::to_string(d));
        }
    }

    /// Y = sum_i w_i Z_i, accumulated in expert-id order. Experts whose
    /// weight is exactly zero are skipped.
    template <class Scalar>
    FeatureMap<Scalar> weighted_fuse(const RoutingWeights<Scalar>& w, std::span<const FeatureMap<Scalar>> experts)
    {
        detail::check_same_shape(experts, "weighted_fuse");
        if (w.size() != experts.size())
            throw Error("weighted_fuse: " + std::to_string(w.size()) + " weights for " +
                        std::to_string(experts.size()) + " experts");
        MatX<Scalar> y = MatX<Scalar>::Zero(experts[0].values.rows(), experts[0].values.cols());
        for (std::size_t i = 0; i < experts.size(); ++i) {
            const Scalar wi = w.weights(static_cast<Eigen::Index>(i));
            if (wi != Scalar(0))
                y.noalias() += wi * experts[i].values;
        }
        return {std::move(y), "routed"};
    }

    template <class Scalar>
    FeatureMap<Scalar> residual_merge(const FeatureMap<Scalar>& patches, const FeatureMap<Scalar>& y)
    {
        if (patches.tokens() != y.tokens() || patches.dim() != y.dim())
            throw Error("residual_merge: patch grid " + std::to_string(patches.tokens()) + "x" +
                        std::to_string(patches.dim()) + " vs fused " + std::to_string(y.tokens()) + "x" +
                        std::to_string(y.dim()));
        return {patches.values + y.values, "fused"};
    }

    template <class Scalar>
    FeatureMap<Scalar> fuse_add(std::span<const FeatureMap<Scalar>> experts)
    {
        detail::check_same_shape(experts, "fuse_add");
        MatX<Scalar> y = experts[0].values;
        for (std::size_t i = 1; i < experts.size(); ++i)
            y += experts[i].values;
        return {std::move(y), "add"};
    }

    /// Per-token concatenation; expert i occupies columns [i*D, (i+1)*D).
    template <class Scalar>
    FeatureMap<Scalar> fuse_concat(std::span<const FeatureMap<Scalar>> experts)
    {
        detail::check_same_shape(experts, "fuse_concat");
        const auto T = experts[0].values.rows(), D = experts[0].values.cols();
        MatX<Scalar> y(T, D * static_cast<Eigen::Index>(experts.size()));
        for (std::size_t i = 0; i < experts.size(); ++i)
            y.middleCols(static_cast<Eigen::Index>(i) * D, D) = experts[i].values;
        return {std::move(y), "concat"};
    }

    // Tanh approximation of x * Phi(x).
    inline constexpr double kGeluCubic = 0.044715;
    inline const double kGeluScale = std::sqrt(2.0 / std::numbers::pi);

    template <class Scalar>
    Scalar gelu(Scalar x)
    {
        const Scalar u = Scalar(kGeluScale) * (x + Scalar(kGeluCubic) * x * x * x);
        return Scalar(0.5) * x * (Scalar(1) + std::tanh(u));
    }

    template <class Scalar>
    Scalar gelu_derivative(Scalar x)
    {
        const Scalar u = Scalar(kGeluScale) * (x + Scalar(kGeluCubic) * x * x * x);
        const Scalar t = std::tanh(u);
        const Scalar du = Scalar(kGeluScale) * (Scalar(1) + Scalar(3 * kGeluCubic) * x * x);
        return Scalar(0.5) * (Scalar(1) + t) + Scalar(0.5) * x * (Scalar(1) - t * t) * du;
    }

    /// Two-layer MLP mapping fused features into the language model's embedding space.
    template <class Scalar>
    struct ProjectorParams
    {
        LinearAdapter<Scalar> stage1;
        LinearAdapter<Scalar> stage2;

        void validate() const
        {
            stage1.validate();
            stage2.validate();
            if (stage1.out_dim() != stage2.in_dim())
                throw Error("projector: stage1 out_dim " + std::to_string(stage1.out_dim()) + " != stage2 in_dim " +
                            std::to_string(stage2.in_dim()));
        }
    };

    using ProjectorParamsd = ProjectorParams<double>;

    ProjectorParamsd make_seeded_projector(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                                           std::uint64_t seed);

    template <class Scalar>
    FeatureMap<Scalar> project(const FeatureMap<Scalar>& fm, const ProjectorParams<Scalar>& p)
    {
        if (fm.dim() != p.stage1.in_dim())
            throw Error("project: feature dim " + std::to_string(fm.dim()) + " != projector in_dim " +
                        std::to_string(p.stage1.in_dim()));
        FeatureMap<Scalar> hidden = adapt_dim(fm, p.stage1);
        hidden.values = hidden.values.unaryExpr([](Scalar x) { return gelu(x); });
        FeatureMap<Scalar> out = adapt_dim(hidden, p.stage2);
        out.source = "projected";
        return out;
    }
}
