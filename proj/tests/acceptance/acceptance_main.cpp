// One PASS/FAIL line per acceptance criterion. Exit status is non-zero if any fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "weaver/benchmark.hpp"
#include "weaver/datagen.hpp"
#include "weaver/evaluator.hpp"
#include "weaver/metrics.hpp"
#include "weaver/numerics.hpp"
#include "weaver/rng.hpp"
#include "weaver/scorers.hpp"

using namespace weaver;

namespace
{
    struct Outcome
    {
        bool pass = true;
        std::string detail;
    };

    // Records the first violation and keeps counting the rest.
    struct Check
    {
        Outcome out;
        std::size_t violations = 0;

        void require(bool ok, const std::string& what)
        {
            if (ok)
                return;
            if (violations++ == 0)
                out.detail = what;
            out.pass = false;
        }

        Outcome finish(const std::string& summary)
        {
            if (out.pass)
                out.detail = summary;
            else
                out.detail += " (" + std::to_string(violations) + " violations)";
            return out;
        }
    };

    std::string fmt(double v, int prec = 3)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        return buf;
    }

    vecXd random_logits(Rng& r, int n)
    {
        vecXd a(n);
        for (int i = 0; i < n; ++i)
            a(i) = r.uniform(-10, 10);
        return a;
    }

    // ---- 1 -----------------------------------------------------------------
    Outcome avg_metric_table()
    {
        struct Row
        {
            double f1, overall, avg;
        };
        const Row rows[] = {{86.1, 44.5, 65.3}, {86.8, 44.3, 65.6}, {87.9, 47.6, 67.8}, {88.8, 48.2, 68.5},
                            {85.2, 53.2, 69.2}, {85.2, 53.9, 69.6}, {86.7, 54.3, 70.5}};
        Check c;
        double worst = 0.0;
        for (const auto& row : rows) {
            const double got = avg_metric(row.f1, row.overall);
            worst = std::max(worst, std::abs(got - row.avg));
            // reference averages are rounded to one decimal; 1e-9 absorbs the binary error of x.x5 values
            c.require(std::abs(got - row.avg) <= 0.05 + 1e-9,
                      "(" + fmt(row.f1) + "," + fmt(row.overall) + ") -> " + fmt(got, 6) + ", expected " + fmt(row.avg));
        }
        return c.finish("7 rows, max |diff| " + fmt(worst) + " <= 0.05");
    }

    // ---- 2 -----------------------------------------------------------------
    Outcome routing_simplex()
    {
        Check c;
        Rng r(2024);
        double max_sum_err = 0.0, max_shift_err = 0.0;
        for (int n = 2; n <= 8; ++n)
            for (int t = 0; t < 1000; ++t) {
                const vecXd a = random_logits(r, n);
                const auto w = routing_weights<double>(a);
                const double sum_err = std::abs(w.weights.sum() - 1.0);
                max_sum_err = std::max(max_sum_err, sum_err);
                c.require(sum_err <= 1e-9, "sum off by " + fmt(sum_err));
                c.require((w.weights.array() >= 0.0).all() && (w.weights.array() <= 1.0).all(), "entry outside [0,1]");

                const double shift = r.uniform(-50, 50);
                const auto ws = routing_weights<double>((a.array() + shift).matrix());
                const double shift_err = (ws.weights - w.weights).cwiseAbs().maxCoeff();
                max_shift_err = std::max(max_shift_err, shift_err);
                c.require(shift_err <= 1e-12, "shift changed weights by " + fmt(shift_err));

                Eigen::Index am_logit, am_weight;
                a.maxCoeff(&am_logit);
                w.weights.maxCoeff(&am_weight);
                c.require(am_logit == am_weight, "argmax moved");
            }
        return c.finish("7000 vectors, max sum err " + fmt(max_sum_err) + ", max shift err " + fmt(max_shift_err));
    }

    // ---- 3 -----------------------------------------------------------------
    RoutingWeightsd brute_top_k(const RoutingWeightsd& w, std::size_t k)
    {
        const auto n = static_cast<int>(w.size());
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        // Descending weight, lower id first on ties.
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            return w.weights(a) != w.weights(b) ? w.weights(a) > w.weights(b) : a < b;
        });
        std::vector<int> kept(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(kept.begin(), kept.end());
        if (k == static_cast<std::size_t>(n))
            return w;
        double mass = 0;
        for (int i : kept)
            mass += w.weights(i);
        RoutingWeightsd out{vecXd::Zero(n), kept};
        for (int i : kept)
            out.weights(i) = mass > 0 ? w.weights(i) / mass : 1.0 / static_cast<double>(k);
        return out;
    }

    Outcome top_k_oracle()
    {
        Check c;
        Rng r(77);
        std::size_t cases = 0, tie_cases = 0;
        for (int n = 1; n <= 8; ++n)
            for (int k = 1; k <= n; ++k)
                for (int t = 0; t < 200; ++t) {
                    vecXd a = random_logits(r, n);
                    // Every fourth vector gets duplicated logits so ties are exercised.
                    if (t % 4 == 0 && n > 1) {
                        const auto src = static_cast<Eigen::Index>(r.below(static_cast<std::uint64_t>(n)));
                        for (int i = 0; i < n; ++i)
                            if (r.chance(0.5))
                                a(i) = a(src);
                    }
                    const auto w = routing_weights<double>(a);
                    tie_cases += std::set<double>(w.weights.data(), w.weights.data() + n).size() <
                                 static_cast<std::size_t>(n);
                    const auto got = select_top_k(w, static_cast<std::size_t>(k));
                    const auto want = brute_top_k(w, static_cast<std::size_t>(k));
                    c.require(got.active == want.active && got.weights == want.weights,
                              "mismatch at N=" + std::to_string(n) + " k=" + std::to_string(k));
                    ++cases;
                }
        return c.finish(std::to_string(cases) + " cases (" + std::to_string(tie_cases) + " with ties), exact");
    }

    // ---- 4 -----------------------------------------------------------------
    Outcome residual_identity()
    {
        Check c;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            PipelineShape s;
            s.canonical_tokens = (seed % 3 + 4) * (seed % 3 + 4); // 16, 25, 36
            s.canonical_dim = 8 << (seed % 3);
            s.expert_dim = 8;
            s.projector_hidden = 12;
            s.projector_out = 10;
            if (seed % 2)
                s.strategy.k = 1 + seed % 6;
            auto cfg = make_pipeline(s, seed);
            for (auto& e : cfg.experts)
                e.adapter = LinearAdapterd::zero(e.spec.native_dim, cfg.canonical_dim);
            const auto img = synth_scene(seed).image;
            const auto res = run_pipeline(img, cfg);
            for (const auto& z : res.aligned)
                c.require(z.values.isZero(0.0), "expert output not zero, seed " + std::to_string(seed));
            const auto expect = project(clip_encode(img, cfg.clip).patches, cfg.projector);
            c.require(res.output.values == expect.values, "output != project(I_P), seed " + std::to_string(seed));
        }
        return c.finish("20 configs bit-exact");
    }

    // ---- 5 -----------------------------------------------------------------
    Outcome gradient_check()
    {
        Check c;
        double worst = 0.0;
        std::size_t checked = 0;
        GradCheckOptions opts;
        opts.eps = 1e-5;
        opts.threshold = 1e-6;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto cfg = make_gradcheck_pipeline(seed);
            const std::string tag = "seed " + std::to_string(seed);
            c.require(cfg.canonical_tokens <= 16 && cfg.canonical_dim <= 8 && cfg.n_experts() <= 4,
                      tag + " exceeds T<=16, D<=8, N<=4");
            for (const auto& rep : check_router_fusion_gradients(cfg, synth_scene(seed).image, seed, opts)) {
                const bool required = rep.parameter_name == "router.weights" || rep.parameter_name == "router.bias" ||
                                      rep.parameter_name.ends_with(".weights");
                if (!required)
                    continue;
                c.require(rep.status == GradStatus::Checked, tag + " " + rep.parameter_name + " not checked");
                c.require(rep.pass && rep.max_rel_error < 1e-6,
                          tag + " " + rep.parameter_name + " rel err " + fmt(rep.max_rel_error));
                worst = std::max(worst, rep.max_rel_error);
                ++checked;
            }
        }
        c.require(checked == 20 * 4, "expected 4 weight tensors per config, got " + std::to_string(checked));
        return c.finish(std::to_string(checked) + " tensors, max rel err " + fmt(worst) + " < 1e-6");
    }

    EvalOptions parallel(std::size_t n)
    {
        EvalOptions o;
        o.parallelism = n;
        return o;
    }

    // ---- 6 -----------------------------------------------------------------
    PipelineConfig small_eval_pipeline()
    {
        PipelineShape s;
        s.canonical_tokens = 16;
        s.canonical_dim = 16;
        s.projector_hidden = 16;
        s.projector_out = 16;
        return make_pipeline(s, 6);
    }

    Outcome evaluation_protocol()
    {
        Check c;
        const auto ds = build_synthetic_dataset(50, 500);
        c.require(ds.size() == 500, "dataset has " + std::to_string(ds.size()) + " samples");
        const auto cfg = small_eval_pipeline();
        const OracleScorer oracle(false), negated(true);

        const auto o1 = evaluate_dataset(oracle, cfg, ds, parallel(1));
        const auto o8 = evaluate_dataset(oracle, cfg, ds, parallel(8));
        const auto n1 = evaluate_dataset(negated, cfg, ds, parallel(1));
        const auto n8 = evaluate_dataset(negated, cfg, ds, parallel(8));
        c.require(o1.report.overall.error_rate == 0.0, "oracle error rate " + fmt(o1.report.overall.error_rate));
        c.require(n1.report.overall.error_rate == 1.0, "negated error rate " + fmt(n1.report.overall.error_rate));
        c.require(o1.judgements == o8.judgements && o1.report == o8.report, "oracle differs at parallelism 8");
        c.require(n1.judgements == n8.judgements && n1.report == n8.report, "negated differs at parallelism 8");

        // Swapping R and H must flip every strict judgement.
        std::size_t flipped = 0;
        for (const auto& s : ds) {
            auto sw = s;
            std::swap(sw.real, sw.hallucinated);
            const auto f = run_pipeline(resolve_image(s.image), cfg).output;
            const auto a = judge_sample(oracle, f, s), b = judge_sample(oracle, f, sw);
            c.require(a.ppl_real == b.ppl_hall && a.ppl_hall == b.ppl_real, "swap did not exchange PPLs, " + s.id);
            c.require(a.ppl_real != a.ppl_hall && a.is_error != b.is_error, "antisymmetry broken, " + s.id);
            flipped += a.is_error != b.is_error;
        }
        return c.finish("500 samples: oracle 0.0, negated 1.0, " + std::to_string(flipped) +
                        "/500 antisymmetric, parallelism 1 == 8");
    }

    // ---- 7 -----------------------------------------------------------------
    Outcome routing_consequence()
    {
        Check c;
        const std::uint64_t seed = 11;
        const auto base = make_pipeline(PipelineShape{}, seed);
        auto favoured = base, uniform = base;
        favoured.router.weights.setZero();
        favoured.router.bias.setZero();
        uniform.router.weights.setZero();
        uniform.router.bias.setZero();
        for (std::size_t i = 0; i < base.experts.size(); ++i)
            if (base.experts[i].spec.persona == Persona::ColorHistogram)
                favoured.router.bias(static_cast<Eigen::Index>(i)) = 8.0;

        std::vector<HallucinationCategory> others;
        for (auto cat : kAllCategories)
            if (cat != HallucinationCategory::Color)
                others.push_back(cat);
        const std::vector<HallucinationCategory> color_only{HallucinationCategory::Color};
        Dataset ds = build_synthetic_dataset(155, seed, color_only);
        const Dataset rest = build_synthetic_dataset(5, seed, others);
        ds.insert(ds.end(), rest.begin(), rest.end());
        c.require(ds.size() == 200, "dataset has " + std::to_string(ds.size()) + " samples");

        const AffinityScorer scorer({}, base);
        const std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
        const auto fav = evaluate_dataset(scorer, favoured, ds, parallel(threads));
        const auto uni = evaluate_dataset(scorer, uniform, ds, parallel(threads));
        const double f = fav.report.per_category.at(HallucinationCategory::Color).error_rate;
        const double u = uni.report.per_category.at(HallucinationCategory::Color).error_rate;
        c.require(u - f >= 0.05, "Color error favoured " + fmt(100 * f) + "% vs uniform " + fmt(100 * u) +
                                     "%, margin below 5 points");
        return c.finish("Color error favoured " + fmt(100 * f) + "% vs uniform " + fmt(100 * u) + "% (margin " +
                        fmt(100 * (u - f)) + " points >= 5)");
    }

    // ---- 8 -----------------------------------------------------------------
    Outcome fusion_contracts()
    {
        Check c;
        Rng r(8);
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            const auto T = static_cast<Eigen::Index>(1 + r.below(20));
            const auto D = static_cast<Eigen::Index>(1 + r.below(12));
            const auto N = static_cast<std::size_t>(1 + r.below(8));
            std::vector<FeatureMapd> z;
            for (std::size_t i = 0; i < N; ++i) {
                matXd m(T, D);
                for (Eigen::Index k = 0; k < m.size(); ++k)
                    m.data()[k] = r.uniform(-5, 5);
                z.emplace_back(std::move(m), "z" + std::to_string(i));
            }
            const std::span<const FeatureMapd> zs(z);

            const auto add = fuse_add(zs);
            c.require(add.values.rows() == T && add.values.cols() == D, "add changed the shape");

            const auto cat = fuse_concat(zs);
            c.require(cat.values.rows() == T && cat.values.cols() == D * static_cast<Eigen::Index>(N),
                      "concat shape is not (T, N*D)");
            for (std::size_t i = 0; i < N; ++i)
                c.require(cat.values.middleCols(static_cast<Eigen::Index>(i) * D, D) == z[i].values,
                          "concat block " + std::to_string(i) + " is not expert " + std::to_string(i));

            const RoutingWeightsd uniform_w = routing_weights<double>(vecXd::Zero(static_cast<Eigen::Index>(N)));
            const matXd scaled = static_cast<double>(N) * weighted_fuse(uniform_w, zs).values;
            const double err = (scaled - add.values).cwiseAbs().maxCoeff();
            worst = std::max(worst, err);
            c.require(err <= 1e-9, "add vs N*weighted_fuse(uniform) differs by " + fmt(err));
        }
        return c.finish("100 random stacks, max |add - N*uniform| " + fmt(worst));
    }

    // ---- 9 -----------------------------------------------------------------
    template <class F>
    std::size_t parse_error_line(F&& f)
    {
        try {
            f();
        } catch (const ParseError& e) {
            return e.line();
        } catch (const std::exception&) {
            return 0;
        }
        return 0;
    }

    Outcome dataset_round_trip()
    {
        Check c;
        Rng r(9);
        for (int t = 0; t < 100; ++t) {
            std::vector<HallucinationCategory> cats;
            for (auto cat : kAllCategories)
                if (r.chance(0.6))
                    cats.push_back(cat);
            if (cats.empty())
                cats.push_back(kAllCategories[r.below(kAllCategories.size())]);
            const auto ds = build_synthetic_dataset(1 + r.below(4), r.next(), cats);
            const std::string text = serialize_dataset(ds);
            std::istringstream in(text);
            const auto back = parse_dataset(in);
            c.require(back == ds, "parsed dataset differs, trial " + std::to_string(t));
            c.require(serialize_dataset(back) == text, "bytes differ, trial " + std::to_string(t));
        }

        const auto ds = build_synthetic_dataset(1, 3);
        std::vector<std::string> lines;
        {
            std::istringstream in(serialize_dataset(ds));
            for (std::string l; std::getline(in, l);)
                lines.push_back(l);
        }
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (const auto& l : v)
                s += l + "\n";
            return s;
        };
        auto bad_cat = lines;
        const auto pos = bad_cat[3].find("\"category\":\"");
        bad_cat[3].replace(pos, bad_cat[3].find('"', pos + 12) - pos + 1, "\"category\":\"Colour\"");
        const std::size_t l1 = parse_error_line([&] {
            std::istringstream in(join(bad_cat));
            parse_dataset(in);
        });
        c.require(l1 == 4, "invalid category reported at line " + std::to_string(l1) + ", expected 4");

        auto dup = lines;
        dup.insert(dup.begin() + 6, lines[2]);
        const std::size_t l2 = parse_error_line([&] {
            std::istringstream in(join(dup));
            parse_dataset(in);
        });
        c.require(l2 == 7, "duplicate id reported at line " + std::to_string(l2) + ", expected 7");
        return c.finish("100 datasets byte-identical; bad category -> line 4, duplicate id -> line 7");
    }

    // ---- 10 ----------------------------------------------------------------
    Outcome pope_oracle()
    {
        Check c;
        Rng r(10);
        double worst_f1 = 0.0;
        for (int t = 0; t < 500; ++t) {
            std::vector<BinaryOutcome> v(1 + r.below(300));
            const double bias = r.uniform();
            for (auto& o : v) {
                o.label = r.chance(0.5);
                o.pred = r.chance(bias);
            }
            std::size_t cell[2][2] = {{0, 0}, {0, 0}}; // [pred][label]
            for (const auto& o : v)
                ++cell[o.pred][o.label];
            const auto tp = cell[1][1], fp = cell[1][0], fn = cell[0][1], tn = cell[0][0];
            const auto cc = confusion(v);
            c.require(cc.tp == tp && cc.fp == fp && cc.fn == fn && cc.tn == tn, "confusion counts differ");

            const auto m = pope_metrics(v);
            const double n = static_cast<double>(v.size());
            c.require(m.accuracy == 100.0 * static_cast<double>(tp + tn) / n, "accuracy differs");
            if (tp + fp)
                c.require(m.precision == 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp), "precision differs");
            else
                c.require(m.precision == 0.0 && m.precision_degenerate, "undefined precision not flagged");
            if (tp + fn)
                c.require(m.recall == 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn), "recall differs");
            else
                c.require(m.recall == 0.0 && m.recall_degenerate, "undefined recall not flagged");
            if (m.precision + m.recall > 0) {
                const double err = std::abs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall));
                worst_f1 = std::max(worst_f1, err);
                c.require(err <= 1e-9, "F1 identity off by " + fmt(err));
            }
        }
        return c.finish("500 outcome sets exact, max F1 identity err " + fmt(worst_f1));
    }

    // ---- 11 ----------------------------------------------------------------
    struct ScriptedClient : CompletionClient
    {
        std::function<std::string(const CompletionRequest&, std::size_t)> reply;
        std::mutex m;
        std::map<std::string, std::size_t> attempts;
        std::atomic<int> in_flight{0};
        std::atomic<int> peak{0};

        CompletionResponse complete(const CompletionRequest& req) override
        {
            const int now = ++in_flight;
            struct Leave
            {
                std::atomic<int>& c;
                ~Leave() { --c; }
            } leave{in_flight};
            for (int p = peak.load(); now > p && !peak.compare_exchange_weak(p, now);) {
            }
            std::size_t n;
            {
                std::lock_guard lock(m);
                n = attempts[req.prompt]++;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
            return {reply(req, n), "stop", 0, 0};
        }
    };

    Outcome datagen_robustness()
    {
        Check c;
        std::vector<CaptionItem> items;
        for (int i = 0; i < 6; ++i)
            items.push_back({"img" + std::to_string(i), ImageRef{ImageRef::Kind::File, "img.ppm", std::nullopt},
                             "a red car beside a green tree, number " + std::to_string(i)});
        const auto specs = default_category_specs();
        DatagenConfig cfg;
        cfg.backoff_base = std::chrono::milliseconds(0);
        cfg.max_retries = 3;

        {
            ScriptedClient client;
            client.reply = [](const CompletionRequest&, std::size_t n) -> std::string {
                if (n < 2)
                    throw Error("HTTP 503");
                return "a blue car beside a green tree";
            };
            const std::vector<CategorySpec> color{specs[7]};
            const std::vector<CaptionItem> one{items[0]};
            const auto r = generate_dataset(client, one, color, cfg);
            c.require(r.dataset.size() == 1, "fail-fail-succeed produced " + std::to_string(r.dataset.size()) + " samples");
            c.require(r.report.retries == 2 && r.report.tasks[0].retries == 2,
                      "retry count " + std::to_string(r.report.retries) + ", expected 2");
        }
        {
            ScriptedClient client;
            client.reply = [](const CompletionRequest& req, std::size_t) -> std::string {
                // Odd items answer NO, even items echo their caption back with padding.
                const auto start = req.prompt.find("# Input\n") + 8;
                const std::string caption = req.prompt.substr(start, req.prompt.find("\n\n# Output", start) - start);
                return caption.back() % 2 ? " no\n" : "\n" + caption + "  ";
            };
            const auto r = generate_dataset(client, items, specs, cfg);
            c.require(r.dataset.empty(), "NO/echo responses produced samples");
            c.require(r.report.skipped_no == 30 && r.report.skipped_echo == 30,
                      "skipped " + std::to_string(r.report.skipped_no) + " NO and " +
                          std::to_string(r.report.skipped_echo) + " echoes, expected 30 and 30");
        }
        for (std::size_t bound : {1u, 2u, 3u, 8u}) {
            ScriptedClient client;
            client.reply = [](const CompletionRequest&, std::size_t) -> std::string { return "a blue car"; };
            cfg.max_in_flight = bound;
            const auto r = generate_dataset(client, items, specs, cfg);
            c.require(r.dataset.size() == 60, "bound " + std::to_string(bound) + " produced " +
                                                  std::to_string(r.dataset.size()));
            c.require(client.peak <= static_cast<int>(bound), "in-flight peak " + std::to_string(client.peak) +
                                                                  " exceeds bound " + std::to_string(bound));
        }
        return c.finish("retries == 2; 30 NO + 30 echoes skipped; in-flight peak <= bound for 1, 2, 3, 8");
    }

    struct Criterion
    {
        int id;
        const char* name;
        Outcome (*run)();
        double max_seconds; // 0: no runtime limit
    };
}

int main()
{
    const Criterion criteria[] = {
        {1, "avg metric matches reference averages", avg_metric_table, 1.0},
        {2, "routing weights lie in the simplex", routing_simplex, 5.0},
        {3, "top-k equals brute-force oracle", top_k_oracle, 5.0},
        {4, "zero experts give project(patches)", residual_identity, 0.0},
        {5, "router and projector gradients", gradient_check, 30.0},
        {6, "evaluation protocol", evaluation_protocol, 60.0},
        {7, "colour-favoured routing lowers Color error", routing_consequence, 0.0},
        {8, "fusion strategy contracts", fusion_contracts, 0.0},
        {9, "dataset round trip and errors", dataset_round_trip, 0.0},
        {10, "POPE metrics match brute-force counts", pope_oracle, 0.0},
        {11, "datagen retries, skips and concurrency", datagen_robustness, 0.0},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.pass && c.max_seconds > 0 && secs >= c.max_seconds) {
            o.pass = false;
            o.detail += "; took " + fmt(secs) + " s, limit " + fmt(c.max_seconds) + " s";
        }
        failed += !o.pass;
        std::printf("%s %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed ? 1 : 0;
}
