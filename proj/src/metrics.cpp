#include "weaver/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <istream>

#include "weaver/core.hpp"
#include "weaver/json_codec.hpp"

namespace weaver
{
    ConfusionCounts confusion(std::span<const BinaryOutcome> outcomes)
    {
        ConfusionCounts c;
        for (const auto& o : outcomes) {
            if (o.pred && o.label)
                ++c.tp;
            else if (o.pred)
                ++c.fp;
            else if (o.label)
                ++c.fn;
            else
                ++c.tn;
        }
        return c;
    }

    MetricsRow pope_metrics(std::span<const BinaryOutcome> outcomes)
    {
        if (outcomes.empty())
            throw Error("pope_metrics: no outcomes");
        const ConfusionCounts c = confusion(outcomes);
        const auto tp = static_cast<double>(c.tp);
        MetricsRow m;
        m.accuracy = 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(outcomes.size());
        if (c.tp + c.fp)
            m.precision = 100.0 * tp / static_cast<double>(c.tp + c.fp);
        else
            m.precision_degenerate = true;
        if (c.tp + c.fn)
            m.recall = 100.0 * tp / static_cast<double>(c.tp + c.fn);
        else
            m.recall_degenerate = true;
        if (m.precision + m.recall > 0.0)
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        else
            m.f1_degenerate = true;
        return m;
    }

    AutoHallusionSummary autohallusion_aggregate(std::span<const ScenarioResult> results, OverallMode mode)
    {
        if (results.empty())
            throw Error("autohallusion_aggregate: no results");
        std::size_t n[2] = {0, 0}, ok[2] = {0, 0};
        for (const auto& r : results) {
            const auto i = static_cast<std::size_t>(r.scenario);
            ++n[i];
            ok[i] += r.correct;
        }
        auto pct = [](std::size_t a, std::size_t b) { return 100.0 * static_cast<double>(a) / static_cast<double>(b); };
        AutoHallusionSummary s;
        if (n[0])
            s.synthetic = pct(ok[0], n[0]);
        if (n[1])
            s.real = pct(ok[1], n[1]);
        if (mode == OverallMode::ScenarioMean && s.synthetic && s.real)
            s.overall = (*s.synthetic + *s.real) / 2.0;
        else
            s.overall = pct(ok[0] + ok[1], n[0] + n[1]);
        return s;
    }

    double avg_metric(double pope_f1, double autohallusion_overall)
    {
        auto check = [](double v, const char* what) {
            if (!(v >= 0.0 && v <= 100.0))
                throw Error(std::string("avg_metric: ") + what + " must be a percentage in [0, 100]");
        };
        check(pope_f1, "POPE F1");
        check(autohallusion_overall, "AutoHallusion overall");
        return (pope_f1 + autohallusion_overall) / 2.0;
    }

    namespace
    {
        template <class F>
        void for_each_json_line(std::istream& in, F&& f)
        {
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.find_first_not_of(" \t\r") == std::string::npos)
                    continue;
                try {
                    f(Json::parse(line));
                } catch (const nlohmann::json::exception& e) {
                    throw ParseError(lineno, e.what());
                } catch (const Error& e) {
                    throw ParseError(lineno, e.what());
                }
            }
        }

        bool yes_no(const Json& j, const char* key)
        {
            const std::string v = j.at(key).get<std::string>();
            if (v == "yes")
                return true;
            if (v == "no")
                return false;
            throw Error(std::string("'") + key + "' must be \"yes\" or \"no\", got \"" + v + "\"");
        }
    }

    std::vector<BinaryOutcome> parse_pope_outcomes(std::istream& in)
    {
        std::vector<BinaryOutcome> out;
        for_each_json_line(in, [&](const Json& j) { out.push_back({yes_no(j, "pred"), yes_no(j, "label")}); });
        return out;
    }

    std::vector<ScenarioResult> parse_autohallusion_results(std::istream& in)
    {
        std::vector<ScenarioResult> out;
        for_each_json_line(in, [&](const Json& j) {
            const std::string s = j.at("scenario").get<std::string>();
            Scenario sc;
            if (s == "synthetic")
                sc = Scenario::Synthetic;
            else if (s == "real")
                sc = Scenario::Real;
            else
                throw Error("'scenario' must be \"synthetic\" or \"real\", got \"" + s + "\"");
            out.push_back({sc, j.at("correct").get<bool>()});
        });
        return out;
    }

    std::string format_percent(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", v);
        return buf;
    }
}
