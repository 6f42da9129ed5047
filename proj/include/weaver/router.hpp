#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "weaver/core.hpp"
#include "weaver/experts.hpp"

namespace weaver
{
    /// Global summary token plus the patch grid of the base encoder.
    template <class Scalar>
    struct ClipOutput
    {
        VecX<Scalar> cls;
        FeatureMap<Scalar> patches;
    };

    using ClipOutputd = ClipOutput<double>;

    /// Stand-in for the base encoder: random-projection features on a
    /// native grid, resampled to the canonical grid.
    struct ToyClipParams
    {
        std::uint64_t seed = 0;
        std::size_t native_tokens = 16;
        std::size_t canonical_tokens = 576;
        std::size_t dim = 1024;
    };

    ClipOutputd clip_encode(const ImageGrid& image, const ToyClipParams& params);

    template <class Scalar>
    struct RouterParams
    {
        MatX<Scalar> weights; // dim_in x n_experts
        VecX<Scalar> bias;    // n_experts

        std::size_t dim_in() const noexcept { return static_cast<std::size_t>(weights.rows()); }
        std::size_t n_experts() const noexcept { return static_cast<std::size_t>(weights.cols()); }

        void validate() const
        {
            if (weights.cols() < 1)
                throw Error("router: at least one expert is required");
            if (bias.size() != weights.cols())
                throw Error("router: bias length " + std::to_string(bias.size()) + " != n_experts " +
                            std::to_string(weights.cols()));
            if (!weights.allFinite() || !bias.allFinite())
                throw Error("router: non-finite parameters");
        }
    };

    using RouterParamsd = RouterParams<double>;

    RouterParamsd make_seeded_router(std::size_t dim_in, std::size_t n_experts, std::uint64_t seed);

    /// Probability vector over experts; entries outside `active` are exactly zero.
    template <class Scalar>
    struct RoutingWeights
    {
        VecX<Scalar> weights;
        std::vector<int> active; // ascending expert ids

        std::size_t size() const noexcept { return static_cast<std::size_t>(weights.size()); }
    };

    using RoutingWeightsd = RoutingWeights<double>;

    template <class Scalar>
    VecX<Scalar> route_logits(const Eigen::Ref<const VecX<Scalar>>& cls, const RouterParams<Scalar>& params)
    {
        if (static_cast<std::size_t>(cls.size()) != params.dim_in())
            throw Error("route_logits: cls length " + std::to_string(cls.size()) + " != router dim_in " +
                        std::to_string(params.dim_in()));
        VecX<Scalar> logits = params.weights.transpose() * cls + params.bias;
        return logits;
    }

    /// Max-subtracted softmax over all experts.
    template <class Scalar>
    RoutingWeights<Scalar> routing_weights(const Eigen::Ref<const VecX<Scalar>>& logits)
    {
        if (logits.size() == 0)
            throw Error("routing_weights: empty logits");
        if (!logits.allFinite())
            throw Error("routing_weights: non-finite logits");
        const Scalar peak = logits.maxCoeff();
        VecX<Scalar> e = (logits.array() - peak).exp().matrix();
        const Scalar total = e.sum();
        RoutingWeights<Scalar> w{e / total, std::vector<int>(static_cast<std::size_t>(logits.size()))};
        std::iota(w.active.begin(), w.active.end(), 0);
        return w;
    }

    /// Keep the k largest weights (lowest id wins ties), zero the rest and
    /// renormalise the survivors. k == N returns the input untouched.
    template <class Scalar>
    RoutingWeights<Scalar> select_top_k(const RoutingWeights<Scalar>& w, std::size_t k)
    {
        const std::size_t n = w.size();
        if (k < 1 || k > n)
            throw Error("select_top_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
        if (k == n)
            return w;
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w.weights(a) > w.weights(b); });
        std::vector<int> kept(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(kept.begin(), kept.end());

        Scalar mass = 0;
        for (int i : kept)
            mass += w.weights(i);
        RoutingWeights<Scalar> out{VecX<Scalar>::Zero(static_cast<Eigen::Index>(n)), kept};
        for (int i : kept)
            out.weights(i) = mass > 0 ? w.weights(i) / mass : Scalar(1) / static_cast<Scalar>(k);
        return out;
    }
}
