#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weaver/benchmark.hpp"
#include "weaver/experts.hpp"
#include "weaver/pipeline.hpp"

namespace weaver
{
    /// Extra knowledge a scorer may consult. Toy oracles read the sample;
    /// image-grounded scorers ignore it.
    struct ScoringContext
    {
        const BenchmarkSample* sample = nullptr;
    };

    class CaptionScorer
    {
    public:
        virtual ~CaptionScorer() = default;

        /// Per-token natural-log NLLs, one per whitespace token. Every value is
        /// finite and >= 0.
        virtual std::vector<double> score(const FeatureMapd& features, std::string_view caption,
                                          const ScoringContext& ctx = {}) const = 0;

        virtual std::string name() const = 0;
    };

    /// exp(mean NLL).
    double perplexity(std::span<const double> nlls);

    inline constexpr std::string_view kPromptFraming = "<image>\nDescribe the image: ";

    struct Judgement
    {
        std::string sample_id;
        double ppl_real = 0.0;
        double ppl_hall = 0.0;
        bool is_error = false;
        HallucinationCategory category = HallucinationCategory::Category;
        std::string prompt{kPromptFraming}; // carried along, not interpreted

        bool operator==(const Judgement&) const = default;
    };

    /// Strict rule: an error only when ppl_real > ppl_hall.
    Judgement judge_sample(const CaptionScorer& scorer, const FeatureMapd& features, const BenchmarkSample& sample);

    enum class Normalization
    {
        Raw,
        MinMax,
    };

    std::string_view to_string(Normalization n);

    struct RateCell
    {
        std::size_t n = 0;
        std::size_t errors = 0;
        double error_rate = 0.0;
        bool empty = true;

        bool operator==(const RateCell&) const = default;
    };

    struct CategoryReport
    {
        std::map<HallucinationCategory, RateCell> per_category; // all ten present
        RateCell overall;
        Normalization mode = Normalization::Raw;

        bool operator==(const CategoryReport&) const = default;
    };

    CategoryReport error_rates(std::span<const Judgement> judgements);

    struct RadarRow
    {
        std::string category; // category label or "overall"
        std::string run;
        double error_rate = 0.0;
        double normalized = 0.0;
    };

    /// Min-max normalisation per category across named runs. A category whose
    /// rates are all equal normalises to 0.
    std::vector<RadarRow> radar_rows(const std::map<std::string, CategoryReport>& runs);
    std::string radar_csv(std::span<const RadarRow> rows);

    struct EvalOptions
    {
        std::size_t parallelism = 1;
        bool lenient = false; // collect failures instead of failing the run
        std::filesystem::path base_dir;
    };

    struct SampleFailure
    {
        std::string sample_id;
        std::string message;
    };

    struct EvalResult
    {
        std::vector<Judgement> judgements; // dataset order
        CategoryReport report;
        std::vector<SampleFailure> failures;
    };

    /// resolve image -> run_pipeline -> judge_sample, per sample. Results are
    /// independent of parallelism.
    EvalResult evaluate_dataset(const CaptionScorer& scorer, const PipelineConfig& config,
                                std::span<const BenchmarkSample> dataset, const EvalOptions& options = {});

    std::string serialize_judgement(const Judgement& j);
    std::vector<Judgement> parse_judgements(std::istream& in);
    std::string report_json(const CategoryReport& report, int indent = 2);
}
