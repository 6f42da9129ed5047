#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace weaver
{
    struct BinaryOutcome
    {
        bool pred = false; // "yes"
        bool label = false;
    };

    struct ConfusionCounts
    {
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    };

    ConfusionCounts confusion(std::span<const BinaryOutcome> outcomes);

    /// Percentages in [0, 100] at full precision; round only when formatting.
    struct MetricsRow
    {
        double accuracy = 0.0;
        double precision = 0.0;
        double recall = 0.0;
        double f1 = 0.0;
        // set when the quantity was undefined and reported as 0
        bool precision_degenerate = false;
        bool recall_degenerate = false;
        bool f1_degenerate = false;
    };

    /// "yes" is the positive class.
    MetricsRow pope_metrics(std::span<const BinaryOutcome> outcomes);

    enum class Scenario
    {
        Synthetic,
        Real,
    };

    struct ScenarioResult
    {
        Scenario scenario = Scenario::Synthetic;
        bool correct = false;
    };

    struct AutoHallusionSummary
    {
        double overall = 0.0;
        std::optional<double> synthetic; // absent when no items
        std::optional<double> real;
    };

    enum class OverallMode
    {
        ItemWeighted,
        ScenarioMean,
    };

    AutoHallusionSummary autohallusion_aggregate(std::span<const ScenarioResult> results,
                                                 OverallMode mode = OverallMode::ItemWeighted);

    /// Mean of POPE F1 and AutoHallusion overall accuracy; both in [0, 100].
    double avg_metric(double pope_f1, double autohallusion_overall);

    std::vector<BinaryOutcome> parse_pope_outcomes(std::istream& in);
    std::vector<ScenarioResult> parse_autohallusion_results(std::istream& in);

    /// One decimal place.
    std::string format_percent(double v);
}
