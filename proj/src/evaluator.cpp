#include "weaver/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "weaver/json_codec.hpp"

namespace weaver
{
    double perplexity(std::span<const double> nlls)
    {
        if (nlls.empty())
            throw Error("perplexity: empty NLL list");
        double sum = 0.0;
        for (double v : nlls) {
            if (!std::isfinite(v) || v < 0.0)
                throw Error("perplexity: NLL values must be finite and non-negative");
            sum += v;
        }
        return std::exp(sum / static_cast<double>(nlls.size()));
    }

    namespace
    {
        double caption_ppl(const CaptionScorer& scorer, const FeatureMapd& features, std::string_view caption,
                           const ScoringContext& ctx, const char* which)
        {
            std::vector<double> nlls;
            try {
                nlls = scorer.score(features, caption, ctx);
            } catch (const std::exception& e) {
                throw Error(std::string(which) + " caption: " + e.what());
            }
            if (nlls.empty())
                throw Error(std::string(which) + " caption: scorer " + scorer.name() + " returned no tokens");
            return perplexity(nlls);
        }
    }

    Judgement judge_sample(const CaptionScorer& scorer, const FeatureMapd& features, const BenchmarkSample& sample)
    {
        const ScoringContext ctx{&sample};
        try {
            Judgement j;
            j.sample_id = sample.id;
            j.category = sample.category;
            j.ppl_real = caption_ppl(scorer, features, sample.real, ctx, "real");
            j.ppl_hall = caption_ppl(scorer, features, sample.hallucinated, ctx, "hallucinated");
            j.is_error = j.ppl_real > j.ppl_hall;
            return j;
        } catch (const std::exception& e) {
            throw Error("sample '" + sample.id + "': " + e.what());
        }
    }

    std::string_view to_string(Normalization n) { return n == Normalization::Raw ? "raw" : "minmax"; }

    namespace
    {
        void finish(RateCell& c)
        {
            c.empty = c.n == 0;
            c.error_rate = c.n ? static_cast<double>(c.errors) / static_cast<double>(c.n) : 0.0;
        }
    }

    CategoryReport error_rates(std::span<const Judgement> judgements)
    {
        CategoryReport r;
        for (auto c : kAllCategories)
            r.per_category[c] = {};
        for (const auto& j : judgements) {
            auto& cell = r.per_category[j.category];
            ++cell.n;
            ++r.overall.n;
            if (j.is_error) {
                ++cell.errors;
                ++r.overall.errors;
            }
        }
        for (auto& [_, cell] : r.per_category)
            finish(cell);
        finish(r.overall);
        return r;
    }

    std::vector<RadarRow> radar_rows(const std::map<std::string, CategoryReport>& runs)
    {
        std::vector<std::string> labels;
        for (auto c : kAllCategories)
            labels.emplace_back(to_string(c));
        labels.emplace_back("overall");

        auto rate_of = [](const CategoryReport& r, std::size_t i) {
            return i < kAllCategories.size() ? r.per_category.at(kAllCategories[i]).error_rate : r.overall.error_rate;
        };

        std::vector<RadarRow> rows;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& [_, report] : runs) {
                lo = std::min(lo, rate_of(report, i));
                hi = std::max(hi, rate_of(report, i));
            }
            for (const auto& [name, report] : runs) {
                const double v = rate_of(report, i);
                rows.push_back({labels[i], name, v, hi > lo ? (v - lo) / (hi - lo) : 0.0});
            }
        }
        return rows;
    }

    std::string radar_csv(std::span<const RadarRow> rows)
    {
        std::ostringstream out;
        out << "category,run,error_rate,normalized\n";
        out << std::setprecision(17);
        for (const auto& r : rows)
            out << r.category << ',' << r.run << ',' << r.error_rate << ',' << r.normalized << '\n';
        return out.str();
    }

    EvalResult evaluate_dataset(const CaptionScorer& scorer, const PipelineConfig& config,
                                std::span<const BenchmarkSample> dataset, const EvalOptions& options)
    {
        config.validate();
        const std::size_t n = dataset.size();
        std::vector<std::optional<Judgement>> slots(n);
        std::vector<std::string> errors(n);
        std::atomic<std::size_t> next{0};

        auto worker = [&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    const ImageGrid image = resolve_image(dataset[i].image, options.base_dir);
                    const PipelineResult res = run_pipeline(image, config);
                    slots[i] = judge_sample(scorer, res.output, dataset[i]);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        };

        const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(n, 1));
        if (threads == 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t t = 0; t < threads; ++t)
                pool.emplace_back(worker);
        }

        EvalResult result;
        for (std::size_t i = 0; i < n; ++i) {
            if (slots[i])
                result.judgements.push_back(std::move(*slots[i]));
            else
                result.failures.push_back({dataset[i].id, errors[i]});
        }
        if (!result.failures.empty() && !options.lenient) {
            std::string msg = std::to_string(result.failures.size()) + " of " + std::to_string(n) +
                              " samples failed; first: " + result.failures.front().message;
            throw Error(msg);
        }
        result.report = error_rates(result.judgements);
        return result;
    }

    std::string serialize_judgement(const Judgement& j)
    {
        Json o;
        o["sample_id"] = j.sample_id;
        o["ppl_real"] = j.ppl_real;
        o["ppl_hall"] = j.ppl_hall;
        o["is_error"] = j.is_error;
        o["category"] = to_string(j.category);
        return o.dump();
    }

    std::vector<Judgement> parse_judgements(std::istream& in)
    {
        std::vector<Judgement> out;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            try {
                const Json o = Json::parse(line);
                Judgement j;
                j.sample_id = o.at("sample_id").get<std::string>();
                j.ppl_real = o.at("ppl_real").get<double>();
                j.ppl_hall = o.at("ppl_hall").get<double>();
                j.is_error = o.at("is_error").get<bool>();
                j.category = parse_category(o.at("category").get<std::string>());
                if (j.is_error != (j.ppl_real > j.ppl_hall))
                    throw Error("is_error disagrees with ppl_real > ppl_hall");
                out.push_back(std::move(j));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(lineno, std::string("malformed judgement: ") + e.what());
            } catch (const Error& e) {
                throw ParseError(lineno, e.what());
            }
        }
        return out;
    }

    namespace
    {
        Json cell_json(const RateCell& c)
        {
            Json o;
            o["n"] = c.n;
            o["errors"] = c.errors;
            o["error_rate"] = c.error_rate;
            if (c.empty)
                o["empty"] = true;
            return o;
        }
    }

    std::string report_json(const CategoryReport& report, int indent)
    {
        Json o;
        o["mode"] = to_string(report.mode);
        Json per = Json::object();
        for (const auto& [c, cell] : report.per_category)
            per[std::string(to_string(c))] = cell_json(cell);
        o["categories"] = std::move(per);
        o["overall"] = cell_json(report.overall);
        return o.dump(indent);
    }
}
