#include "weaver/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "weaver/datagen.hpp"
#include "weaver/evaluator.hpp"
#include "weaver/json_codec.hpp"
#include "weaver/metrics.hpp"
#include "weaver/numerics.hpp"
#include "weaver/scorers.hpp"

namespace weaver
{
    namespace
    {
        void emit(const std::string& text, const std::string& path, std::ostream& out)
        {
            if (path.empty()) {
                out << text;
                return;
            }
            std::ofstream f(path, std::ios::binary);
            if (!f)
                throw Error("cannot write " + path);
            f << text;
        }

        std::ifstream open_in(const std::string& path)
        {
            std::ifstream in(path);
            if (!in)
                throw Error("cannot open " + path);
            return in;
        }

        std::vector<HallucinationCategory> parse_categories(const std::vector<std::string>& names)
        {
            if (names.empty())
                return {kAllCategories.begin(), kAllCategories.end()};
            std::vector<HallucinationCategory> out;
            for (const auto& n : names)
                out.push_back(parse_category(n));
            return out;
        }

        struct PipelineChoice
        {
            std::string path;
            std::string router;
            std::uint64_t seed = 0;
            std::string strategy = "routed";

            PipelineConfig resolve() const
            {
                PipelineConfig cfg;
                if (!path.empty()) {
                    cfg = load_pipeline(path);
                } else {
                    PipelineShape shape;
                    shape.strategy.kind = parse_fusion_kind(strategy);
                    cfg = make_pipeline(shape, seed);
                }
                if (!router.empty()) {
                    cfg.router = router_from_json(read_json_file(router));
                    cfg.validate();
                }
                return cfg;
            }
        };

        void add_pipeline_options(CLI::App* sub, PipelineChoice& p)
        {
            sub->add_option("--pipeline", p.path, "Pipeline config JSON (default: built-in seeded pipeline)")
                ->check(CLI::ExistingFile);
            sub->add_option("--router", p.router, "Router parameter JSON replacing the pipeline's router")
                ->check(CLI::ExistingFile);
            sub->add_option("--pipeline-seed", p.seed, "Seed of the built-in pipeline");
            sub->add_option("--strategy", p.strategy, "Fusion strategy of the built-in pipeline")
                ->check(CLI::IsMember({"routed", "add", "concat"}));
        }

        Json vector_json(const vecXd& v)
        {
            Json a = Json::array();
            for (Eigen::Index i = 0; i < v.size(); ++i)
                a.push_back(v(i));
            return a;
        }

        Json metrics_json(const MetricsRow& m)
        {
            Json o;
            o["accuracy"] = m.accuracy;
            o["precision"] = m.precision;
            o["recall"] = m.recall;
            o["f1"] = m.f1;
            Json flags = Json::array();
            if (m.precision_degenerate)
                flags.push_back("precision");
            if (m.recall_degenerate)
                flags.push_back("recall");
            if (m.f1_degenerate)
                flags.push_back("f1");
            if (!flags.empty())
                o["degenerate"] = std::move(flags);
            return o;
        }
    }

    int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
    {
        CLI::App app{"Routed multi-expert visual fusion and caption hallucination benchmark tools", "weaver"};
        app.set_config("--config", "", "Read option defaults from a TOML/INI file");
        app.require_subcommand(1);
        app.set_help_all_flag("--help-all", "Help for every subcommand");

        // route
        auto* route = app.add_subcommand("route", "Route and fuse one image, print routing and output summary");
        PipelineChoice route_pipe;
        std::string route_image, route_out;
        std::uint64_t route_scene_seed = 0;
        bool route_dump = false;
        add_pipeline_options(route, route_pipe);
        auto* img_opt = route->add_option("--image", route_image, "Raw image file")->check(CLI::ExistingFile);
        route->add_option("--scene-seed", route_scene_seed, "Synthesize the scene with this seed instead")
            ->excludes(img_opt);
        route->add_flag("--dump-features", route_dump, "Include the full output feature matrix");
        route->add_option("--out", route_out, "Output file (default stdout)");

        // gen-synth
        auto* synth = app.add_subcommand("gen-synth", "Build a synthetic benchmark dataset");
        std::size_t per_category = 0;
        std::uint64_t synth_seed = 0;
        std::vector<std::string> synth_cats;
        std::string synth_out;
        synth->add_option("--per-category", per_category, "Samples per category")->required()->check(CLI::PositiveNumber);
        synth->add_option("--seed", synth_seed, "Generator seed");
        synth->add_option("--categories", synth_cats, "Restrict to these categories")->delimiter(',');
        synth->add_option("--out", synth_out, "Output JSONL (default stdout)");

        // gen-llm
        auto* llm = app.add_subcommand("gen-llm", "Generate hallucinated captions with a chat-completion endpoint");
        std::string llm_items, llm_cfg, llm_out;
        std::vector<std::string> llm_cats;
        llm->add_option("--items", llm_items, "JSONL of {id?, image, caption}")->required()->check(CLI::ExistingFile);
        llm->add_option("--llm-config", llm_cfg, "key = value endpoint config")->required()->check(CLI::ExistingFile);
        llm->add_option("--categories", llm_cats, "Restrict to these categories")->delimiter(',');
        llm->add_option("--out", llm_out, "Output JSONL (default stdout)");

        // eval
        auto* eval = app.add_subcommand("eval", "Judge every sample by caption perplexity");
        std::string eval_dataset, eval_scorer = "affinity", eval_out, eval_judgements;
        PipelineChoice eval_pipe;
        std::uint64_t eval_seed = 0;
        std::size_t eval_parallel = 1;
        bool eval_lenient = false;
        AffinityConfig affinity;
        eval->add_option("--dataset", eval_dataset, "Benchmark JSONL")->required()->check(CLI::ExistingFile);
        add_pipeline_options(eval, eval_pipe);
        eval->add_option("--scorer", eval_scorer, "Caption scorer")
            ->check(CLI::IsMember({"oracle", "negated-oracle", "coin-flip", "affinity"}));
        eval->add_option("--seed", eval_seed, "Scorer seed (coin-flip)");
        eval->add_option("--parallelism", eval_parallel, "Worker threads")->check(CLI::PositiveNumber);
        eval->add_flag("--lenient", eval_lenient, "Report failed samples instead of failing the run");
        eval->add_option("--personas", affinity.personas, "Affinity reader personas")->delimiter(',');
        eval->add_option("--affinity-base", affinity.base);
        eval->add_option("--affinity-alpha", affinity.alpha);
        eval->add_option("--nll-min", affinity.nll_min);
        eval->add_option("--nll-max", affinity.nll_max);
        eval->add_option("--calibration-scenes", affinity.calibration_scenes);
        eval->add_option("--judgements", eval_judgements, "Write judgement JSONL here");
        eval->add_option("--out", eval_out, "Report JSON (default stdout)");

        // metrics
        auto* metrics = app.add_subcommand("metrics", "POPE / AutoHallusion metrics and their average");
        std::string pope_path, ah_path, metrics_out;
        bool scenario_mean = false;
        metrics->add_option("--pope", pope_path, "POPE outcome JSONL")->check(CLI::ExistingFile);
        metrics->add_option("--autohallusion", ah_path, "AutoHallusion result JSONL")->check(CLI::ExistingFile);
        metrics->add_flag("--scenario-mean", scenario_mean, "Overall = mean of the two scenario accuracies");
        metrics->add_option("--out", metrics_out, "Output JSON (default stdout)");

        // gradcheck
        auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the routing and projector gradients");
        std::uint64_t grad_seed = 0;
        std::size_t grad_configs = 20;
        GradCheckOptions grad_opts;
        std::string grad_out;
        grad->add_option("--seed", grad_seed, "Seed of the first config");
        grad->add_option("--configs", grad_configs, "Number of seeded small configs")->check(CLI::PositiveNumber);
        grad->add_option("--eps", grad_opts.eps, "Central difference step");
        grad->add_option("--threshold", grad_opts.threshold, "Max relative error");
        grad->add_option("--out", grad_out, "Output JSON (default stdout)");

        // bench
        auto* bench = app.add_subcommand("bench", "Prefill latency per fusion strategy");
        PipelineChoice bench_pipe;
        std::size_t bench_repeats = 10;
        std::uint64_t bench_scene_seed = 0;
        std::vector<std::string> bench_strategies;
        std::string bench_out;
        add_pipeline_options(bench, bench_pipe);
        bench->add_option("--repeats", bench_repeats, "Timed runs per strategy")->check(CLI::Range(std::size_t{3}, std::size_t{1000000}));
        bench->add_option("--scene-seed", bench_scene_seed, "Scene to encode");
        bench->add_option("--strategies", bench_strategies, "Built-in pipeline strategies to time")
            ->delimiter(',')
            ->check(CLI::IsMember({"routed", "add", "concat"}));
        bench->add_option("--out", bench_out, "Output JSON (default stdout)");

        // report
        auto* report = app.add_subcommand("report", "Judgement JSONL files to radar CSV");
        std::vector<std::string> runs;
        std::string report_out;
        report->add_option("--run", runs, "name=judgements.jsonl, repeatable")->required();
        report->add_option("--out", report_out, "Output CSV (default stdout)");

        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            app.exit(e, out, err);
            return 2;
        }

        try {
            if (*route) {
                const PipelineConfig cfg = route_pipe.resolve();
                const ImageGrid image = route_image.empty() ? synth_scene(route_scene_seed).image : load_raw(route_image);
                const PipelineResult res = run_pipeline(image, cfg);
                Json o;
                o["strategy"] = to_string(cfg.strategy.kind);
                o["routing"] = {{"weights", vector_json(res.routing.weights)}, {"active", res.routing.active}};
                o["logits"] = vector_json(res.logits);
                o["output"] = {{"tokens", res.output.tokens()},
                               {"dim", res.output.dim()},
                               {"checksum", fnv1a(res.output.values.data(),
                                                  static_cast<std::size_t>(res.output.values.size()) * sizeof(double))},
                               {"frobenius", res.output.values.norm()}};
                if (route_dump) {
                    Json rows = Json::array();
                    for (Eigen::Index r = 0; r < res.output.values.rows(); ++r)
                        rows.push_back(vector_json(res.output.values.row(r).transpose()));
                    o["output"]["values"] = std::move(rows);
                }
                emit(o.dump(2) + "\n", route_out, out);
            } else if (*synth) {
                const auto cats = parse_categories(synth_cats);
                emit(serialize_dataset(build_synthetic_dataset(per_category, synth_seed, cats)), synth_out, out);
            } else if (*llm) {
                const DatagenConfig cfg = load_datagen_config(llm_cfg);
                auto in = open_in(llm_items);
                const auto items = parse_caption_items(in);
                std::vector<CategorySpec> specs;
                const auto cats = parse_categories(llm_cats);
                for (const auto& s : default_category_specs())
                    if (std::find(cats.begin(), cats.end(), s.category) != cats.end())
                        specs.push_back(s);
                HttpCompletionClient client(cfg);
                std::size_t done = 0;
                const std::size_t total = items.size() * specs.size();
                const auto res = generate_dataset(client, items, specs, cfg, [&](const TaskLog& log) {
                    err << "[" << ++done << "/" << total << "] " << items[log.item].id << " "
                        << to_string(log.category) << ": " << to_string(log.outcome);
                    if (log.retries)
                        err << " (" << log.retries << " retries)";
                    if (!log.message.empty())
                        err << " - " << log.message;
                    err << "\n";
                });
                err << "produced " << res.report.produced << ", skipped " << res.report.skipped_no << " NO and "
                    << res.report.skipped_echo << " echoes, failed " << res.report.failed << ", retries "
                    << res.report.retries << "\n";
                emit(serialize_dataset(res.dataset), llm_out, out);
            } else if (*eval) {
                const PipelineConfig cfg = eval_pipe.resolve();
                const Dataset ds = load_dataset(eval_dataset);
                const auto scorer = make_scorer(eval_scorer, eval_seed, cfg, affinity);
                EvalOptions opts;
                opts.parallelism = eval_parallel;
                opts.lenient = eval_lenient;
                opts.base_dir = std::filesystem::path(eval_dataset).parent_path();
                const EvalResult res = evaluate_dataset(*scorer, cfg, ds, opts);
                for (const auto& f : res.failures)
                    err << "sample " << f.sample_id << " failed: " << f.message << "\n";
                if (!eval_judgements.empty()) {
                    std::string text;
                    for (const auto& j : res.judgements)
                        text += serialize_judgement(j) + "\n";
                    emit(text, eval_judgements, out);
                }
                Json o = Json::parse(report_json(res.report));
                o["scorer"] = scorer->name();
                if (!res.failures.empty())
                    o["failed_samples"] = res.failures.size();
                emit(o.dump(2) + "\n", eval_out, out);
            } else if (*metrics) {
                if (pope_path.empty() && ah_path.empty())
                    throw CLI::RequiredError("--pope or --autohallusion");
                Json o;
                std::optional<double> f1, overall;
                if (!pope_path.empty()) {
                    auto in = open_in(pope_path);
                    const MetricsRow m = pope_metrics(parse_pope_outcomes(in));
                    o["pope"] = metrics_json(m);
                    f1 = m.f1;
                }
                if (!ah_path.empty()) {
                    auto in = open_in(ah_path);
                    const auto s = autohallusion_aggregate(parse_autohallusion_results(in),
                                                           scenario_mean ? OverallMode::ScenarioMean
                                                                         : OverallMode::ItemWeighted);
                    Json a;
                    a["overall"] = s.overall;
                    a["synthetic"] = s.synthetic ? Json(*s.synthetic) : Json(nullptr);
                    a["real"] = s.real ? Json(*s.real) : Json(nullptr);
                    a["overall_mode"] = scenario_mean ? "scenario-mean" : "item-weighted";
                    o["autohallusion"] = std::move(a);
                    overall = s.overall;
                }
                if (f1 && overall)
                    o["avg"] = avg_metric(*f1, *overall);
                emit(o.dump(2) + "\n", metrics_out, out);
            } else if (*grad) {
                Json arr = Json::array();
                bool ok = true;
                for (std::size_t i = 0; i < grad_configs; ++i) {
                    const std::uint64_t seed = grad_seed + i;
                    const PipelineConfig cfg = make_gradcheck_pipeline(seed);
                    const ImageGrid image = synth_scene(seed).image;
                    for (const auto& r : check_router_fusion_gradients(cfg, image, seed, grad_opts)) {
                        arr.push_back({{"config_seed", seed},
                                       {"parameter", r.parameter_name},
                                       {"status", to_string(r.status)},
                                       {"coordinates", r.n_coordinates},
                                       {"max_rel_error", r.max_rel_error},
                                       {"mean_rel_error", r.mean_rel_error},
                                       {"pass", r.pass}});
                        ok = ok && r.pass;
                    }
                }
                emit(arr.dump(2) + "\n", grad_out, out);
                if (!ok) {
                    err << "gradient check failed\n";
                    return 1;
                }
            } else if (*bench) {
                std::vector<PipelineConfig> configs;
                if (!bench_pipe.path.empty() || bench_strategies.empty()) {
                    configs.push_back(bench_pipe.resolve());
                } else {
                    for (const auto& s : bench_strategies) {
                        PipelineChoice p = bench_pipe;
                        p.strategy = s;
                        configs.push_back(p.resolve());
                    }
                }
                const ImageGrid image = synth_scene(bench_scene_seed).image;
                Json arr = Json::array();
                for (const auto& cfg : configs) {
                    const LatencyReport r = measure_fusion_latency(cfg, image, bench_repeats);
                    Json stages;
                    for (const auto& [stage, ms] : r.per_stage_ms)
                        stages[std::string(to_string(stage))] = ms;
                    arr.push_back({{"strategy", to_string(r.strategy)},
                                   {"prefill_ms", r.prefill_ms},
                                   {"per_stage_ms", std::move(stages)},
                                   {"repeats", r.repeats}});
                }
                emit(arr.dump(2) + "\n", bench_out, out);
            } else if (*report) {
                std::map<std::string, CategoryReport> reports;
                for (const auto& spec : runs) {
                    const auto eq = spec.find('=');
                    if (eq == std::string::npos || eq == 0)
                        throw CLI::ValidationError("--run", "expected name=path, got '" + spec + "'");
                    auto in = open_in(spec.substr(eq + 1));
                    const auto judgements = parse_judgements(in);
                    if (!reports.emplace(spec.substr(0, eq), error_rates(judgements)).second)
                        throw CLI::ValidationError("--run", "duplicate run name '" + spec.substr(0, eq) + "'");
                }
                emit(radar_csv(radar_rows(reports)), report_out, out);
            }
        } catch (const CLI::ParseError& e) {
            app.exit(e, out, err);
            return 2;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return 1;
        }
        return 0;
    }
}
