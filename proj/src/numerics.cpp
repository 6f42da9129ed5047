#include "weaver/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace weaver
{
    vecXd finite_diff_gradient(const std::function<double(const vecXd&)>& fn, const vecXd& point, double eps)
    {
        if (!(eps > 0.0))
            throw Error("finite_diff_gradient: eps must be positive");
        vecXd grad(point.size());
        vecXd x = point;
        for (Eigen::Index i = 0; i < point.size(); ++i) {
            x(i) = point(i) + eps;
            const double up = fn(x);
            x(i) = point(i) - eps;
            const double down = fn(x);
            x(i) = point(i);
            if (!std::isfinite(up) || !std::isfinite(down))
                throw Error("finite_diff_gradient: non-finite function value at coordinate " + std::to_string(i));
            grad(i) = (up - down) / (2.0 * eps);
        }
        return grad;
    }

    double gradient_rel_error(double analytic, double numeric)
    {
        return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
    }

    std::string_view to_string(GradStatus s)
    {
        switch (s) {
        case GradStatus::Checked: return "checked";
        case GradStatus::Degenerate: return "degenerate";
        case GradStatus::Unchecked: return "unchecked";
        }
        return "?";
    }

    namespace
    {
        // Everything upstream of the router and projector parameters, computed once.
        struct Graph
        {
            vecXd cls;
            matXd patches;
            std::vector<matXd> experts;
            FusionStrategy strategy;
        };

        Graph build_graph(const PipelineConfig& config, const ImageGrid& image)
        {
            config.validate();
            Graph g;
            ClipOutputd clip = clip_encode(image, config.clip);
            g.cls = clip.cls;
            g.patches = clip.patches.values;
            for (auto& fm : encode_and_align(image, config))
                g.experts.push_back(std::move(fm.values));
            g.strategy = config.strategy;
            return g;
        }

        struct Forward
        {
            RoutingWeightsd routing;
            matXd fused; // projector input
            matXd hidden_pre;
            matXd hidden;
            matXd output;
        };

        Forward forward(const Graph& g, const RouterParamsd& router, const ProjectorParamsd& proj)
        {
            Forward f;
            const auto n = static_cast<Eigen::Index>(g.experts.size());
            switch (g.strategy.kind) {
            case FusionKind::Routed: {
                f.routing = routing_weights<double>(route_logits<double>(g.cls, router));
                if (g.strategy.k)
                    f.routing = select_top_k(f.routing, *g.strategy.k);
                f.fused = g.patches;
                for (Eigen::Index i = 0; i < n; ++i)
                    if (f.routing.weights(i) != 0.0)
                        f.fused += f.routing.weights(i) * g.experts[static_cast<std::size_t>(i)];
                break;
            }
            case FusionKind::Add:
                f.fused = g.patches;
                for (const auto& z : g.experts)
                    f.fused += z;
                break;
            case FusionKind::Concat: {
                const auto D = g.experts[0].cols();
                f.fused.resize(g.experts[0].rows(), D * n);
                for (Eigen::Index i = 0; i < n; ++i)
                    f.fused.middleCols(i * D, D) = g.experts[static_cast<std::size_t>(i)];
                break;
            }
            }
            f.hidden_pre = f.fused * proj.stage1.weights;
            f.hidden_pre.rowwise() += proj.stage1.bias.transpose();
            f.hidden = f.hidden_pre.unaryExpr([](double x) { return gelu(x); });
            f.output = f.hidden * proj.stage2.weights;
            f.output.rowwise() += proj.stage2.bias.transpose();
            return f;
        }

        double loss_of(const Graph& g, const RouterParamsd& router, const ProjectorParamsd& proj)
        {
            return forward(g, router, proj).output.squaredNorm();
        }

        PipelineGradients backward(const Graph& g, const RouterParamsd& router, const ProjectorParamsd& proj)
        {
            const Forward f = forward(g, router, proj);
            PipelineGradients out;
            out.loss = f.output.squaredNorm();

            const matXd d_out = 2.0 * f.output;
            out.stage2_weights = f.hidden.transpose() * d_out;
            out.stage2_bias = d_out.colwise().sum().transpose();
            const matXd d_hidden = d_out * proj.stage2.weights.transpose();
            const matXd d_pre =
                d_hidden.cwiseProduct(f.hidden_pre.unaryExpr([](double x) { return gelu_derivative(x); }));
            out.stage1_weights = f.fused.transpose() * d_pre;
            out.stage1_bias = d_pre.colwise().sum().transpose();

            out.router_weights = matXd::Zero(router.weights.rows(), router.weights.cols());
            out.router_bias = vecXd::Zero(router.bias.size());
            if (g.strategy.kind != FusionKind::Routed)
                return out;

            const matXd d_fused = d_pre * proj.stage1.weights.transpose();
            // dL/dw_i = <dF, Z_i>; softmax restricted to the active set.
            vecXd d_logits = vecXd::Zero(router.bias.size());
            double inner = 0.0;
            vecXd d_w(router.bias.size());
            for (int i : f.routing.active) {
                d_w(i) = d_fused.cwiseProduct(g.experts[static_cast<std::size_t>(i)]).sum();
                inner += f.routing.weights(i) * d_w(i);
            }
            for (int i : f.routing.active)
                d_logits(i) = f.routing.weights(i) * (d_w(i) - inner);
            out.router_weights = g.cls * d_logits.transpose();
            out.router_bias = d_logits;
            return out;
        }

        std::vector<Eigen::Index> pick_coordinates(Eigen::Index n, std::size_t max_coords, Rng& rng)
        {
            std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
            std::iota(idx.begin(), idx.end(), Eigen::Index{0});
            if (idx.size() <= max_coords)
                return idx;
            for (std::size_t i = 0; i < max_coords; ++i)
                std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
            idx.resize(max_coords);
            std::sort(idx.begin(), idx.end());
            return idx;
        }

        // `param` is a view of the tensor inside `router`/`proj` that gets perturbed.
        template <class Tensor>
        GradCheckReport check_tensor(const std::string& name, const Graph& g, RouterParamsd& router,
                                     ProjectorParamsd& proj, Tensor& param, const Tensor& analytic,
                                     const GradCheckOptions& opt, Rng& rng)
        {
            GradCheckReport r;
            r.parameter_name = name;
            const auto coords = pick_coordinates(param.size(), opt.max_coordinates, rng);
            double sum = 0.0;
            for (Eigen::Index c : coords) {
                const double saved = param.data()[c];
                const std::function<double(const vecXd&)> fn = [&](const vecXd& x) {
                    param.data()[c] = x(0);
                    return loss_of(g, router, proj);
                };
                const double numeric = finite_diff_gradient(fn, vecXd::Constant(1, saved), opt.eps)(0);
                param.data()[c] = saved;
                const double err = gradient_rel_error(analytic.data()[c], numeric);
                r.max_rel_error = std::max(r.max_rel_error, err);
                sum += err;
            }
            r.n_coordinates = coords.size();
            r.mean_rel_error = coords.empty() ? 0.0 : sum / static_cast<double>(coords.size());
            r.pass = r.max_rel_error < opt.threshold;
            return r;
        }
    }

    PipelineGradients pipeline_gradients(const PipelineConfig& config, const ImageGrid& image)
    {
        return backward(build_graph(config, image), config.router, config.projector);
    }

    std::vector<GradCheckReport> check_router_fusion_gradients(const PipelineConfig& config, const ImageGrid& image,
                                                               std::uint64_t seed, const GradCheckOptions& options)
    {
        const Graph g = build_graph(config, image);
        RouterParamsd router = config.router;
        ProjectorParamsd proj = config.projector;
        const PipelineGradients grads = backward(g, router, proj);
        Rng rng(mix_seed(seed, 0x4752'4144ull));

        std::vector<GradCheckReport> reports;
        if (g.strategy.kind == FusionKind::Routed) {
            const bool all_zero = std::all_of(g.experts.begin(), g.experts.end(),
                                              [](const matXd& z) { return (z.array() == 0.0).all(); });
            const Forward f = forward(g, router, proj);
            const bool degenerate = all_zero || f.routing.active.size() == 1;
            auto rw = check_tensor("router.weights", g, router, proj, router.weights, grads.router_weights, options, rng);
            auto rb = check_tensor("router.bias", g, router, proj, router.bias, grads.router_bias, options, rng);
            if (degenerate)
                rw.status = rb.status = GradStatus::Degenerate;
            reports.push_back(rw);
            reports.push_back(rb);
        } else {
            for (const char* name : {"router.weights", "router.bias"}) {
                GradCheckReport r;
                r.parameter_name = name;
                r.status = GradStatus::Unchecked;
                r.pass = false;
                reports.push_back(r);
            }
        }
        reports.push_back(check_tensor("projector.stage1.weights", g, router, proj, proj.stage1.weights,
                                       grads.stage1_weights, options, rng));
        reports.push_back(
            check_tensor("projector.stage1.bias", g, router, proj, proj.stage1.bias, grads.stage1_bias, options, rng));
        reports.push_back(check_tensor("projector.stage2.weights", g, router, proj, proj.stage2.weights,
                                       grads.stage2_weights, options, rng));
        reports.push_back(
            check_tensor("projector.stage2.bias", g, router, proj, proj.stage2.bias, grads.stage2_bias, options, rng));
        return reports;
    }

    std::vector<double> router_descent_demo(const vecXd& cls, RouterParamsd router, int target, int steps,
                                            double learning_rate)
    {
        router.validate();
        if (target < 0 || static_cast<std::size_t>(target) >= router.n_experts())
            throw Error("router_descent_demo: target expert out of range");
        vecXd onehot = vecXd::Zero(router.bias.size());
        onehot(target) = 1.0;
        std::vector<double> losses;
        for (int step = 0; step <= steps; ++step) {
            const vecXd w = routing_weights<double>(route_logits<double>(cls, router)).weights;
            const vecXd diff = w - onehot;
            losses.push_back(diff.squaredNorm());
            if (step == steps)
                break;
            const vecXd d_logits = softmax_jacobian<double>(w) * (2.0 * diff);
            router.weights -= learning_rate * cls * d_logits.transpose();
            router.bias -= learning_rate * d_logits;
        }
        return losses;
    }

    namespace
    {
        double median(std::vector<double> v)
        {
            std::sort(v.begin(), v.end());
            const std::size_t m = v.size() / 2;
            return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
        }
    }

    LatencyReport measure_fusion_latency(const PipelineConfig& config, const ImageGrid& image, std::size_t repeats)
    {
        if (repeats < 3)
            throw Error("measure_fusion_latency: repeats must be at least 3");
        LatencyReport report;
        report.strategy = config.strategy.kind;
        report.repeats = repeats;
        std::map<Stage, std::vector<double>> per_stage;
        for (std::size_t r = 0; r < repeats; ++r) {
            StageTimes times;
            run_pipeline(image, config, &times);
            for (const auto& [stage, ms] : times.ms)
                per_stage[stage].push_back(ms);
            report.total_samples_ms.push_back(times.total_ms);
        }
        for (auto& [stage, samples] : per_stage)
            report.per_stage_ms[stage] = median(samples);
        report.prefill_ms = median(report.total_samples_ms);
        return report;
    }

    PipelineConfig make_gradcheck_pipeline(std::uint64_t seed)
    {
        Rng rng(seed);
        PipelineShape shape;
        const std::size_t n = 2 + rng.below(3); // 2..4 experts
        shape.personas.clear();
        for (std::size_t i = 0; i < n; ++i)
            shape.personas.push_back(kAllPersonas[rng.below(std::size(kAllPersonas))]);
        shape.expert_tokens = 4;
        shape.expert_dim = 6;
        shape.clip_tokens = 4;
        shape.canonical_tokens = rng.chance(0.5) ? 16 : 9;
        shape.canonical_dim = 4 + rng.below(5); // 4..8
        shape.projector_hidden = 5;
        shape.projector_out = 3;
        PipelineConfig cfg = make_pipeline(shape, mix_seed(seed, 11));
        // Spread the logits so the softmax is away from uniform.
        cfg.router.weights *= 4.0;
        for (Eigen::Index i = 0; i < cfg.router.bias.size(); ++i)
            cfg.router.bias(i) = rng.uniform(-1.0, 1.0);
        return cfg;
    }
}
