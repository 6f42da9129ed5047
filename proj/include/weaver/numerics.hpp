#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "weaver/pipeline.hpp"

namespace weaver
{
    /// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
    vecXd finite_diff_gradient(const std::function<double(const vecXd&)>& fn, const vecXd& point, double eps);

    /// diag(w) - w w^T
    template <class Scalar>
    MatX<Scalar> softmax_jacobian(const VecX<Scalar>& w)
    {
        MatX<Scalar> j = -w * w.transpose();
        j.diagonal() += w;
        return j;
    }

    /// |a - f| / max(1, |a|, |f|)
    double gradient_rel_error(double analytic, double numeric);

    enum class GradStatus
    {
        Checked,
        Degenerate, // parameter cannot influence the loss; gradient is identically zero
        Unchecked,  // no analytic gradient for this parameter under the configured strategy
    };

    std::string_view to_string(GradStatus s);

    struct GradCheckReport
    {
        std::string parameter_name;
        double max_rel_error = 0.0;
        double mean_rel_error = 0.0;
        std::size_t n_coordinates = 0;
        bool pass = false;
        GradStatus status = GradStatus::Checked;
    };

    struct GradCheckOptions
    {
        double eps = 1e-5;
        double threshold = 1e-6;
        std::size_t max_coordinates = 256; // per tensor; sampled with the seed beyond this
    };

    /// Loss = sum of squared entries of the pipeline output. Compares the
    /// hand-derived chain rule (projector, residual, weighted sum, softmax,
    /// router) against central differences. One report per parameter tensor:
    /// router.weights, router.bias, projector.stage{1,2}.{weights,bias}.
    std::vector<GradCheckReport> check_router_fusion_gradients(const PipelineConfig& config, const ImageGrid& image,
                                                               std::uint64_t seed, const GradCheckOptions& options = {});

    /// Analytic gradients of the sum-of-squares loss, exposed for tests and the descent demo.
    struct PipelineGradients
    {
        double loss = 0.0;
        matXd router_weights;
        vecXd router_bias;
        matXd stage1_weights;
        vecXd stage1_bias;
        matXd stage2_weights;
        vecXd stage2_bias;
    };

    PipelineGradients pipeline_gradients(const PipelineConfig& config, const ImageGrid& image);

    /// Loss ||softmax(cls^T W + b) - onehot(target)||^2, plain gradient descent.
    /// Returns the loss before each step and after the last (steps + 1 values).
    std::vector<double> router_descent_demo(const vecXd& cls, RouterParamsd router, int target, int steps,
                                            double learning_rate);

    struct LatencyReport
    {
        FusionKind strategy = FusionKind::Routed;
        double prefill_ms = 0.0;
        std::map<Stage, double> per_stage_ms; // medians
        std::size_t repeats = 0;
        std::vector<double> total_samples_ms;
    };

    LatencyReport measure_fusion_latency(const PipelineConfig& config, const ImageGrid& image, std::size_t repeats);

    /// Small pipeline satisfying the gradient-check size limits (T <= 16, D <= 8, N <= 4).
    PipelineConfig make_gradcheck_pipeline(std::uint64_t seed);
}
