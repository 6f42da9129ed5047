#include "weaver/scorers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <tuple>

#include "weaver/captions.hpp"

namespace weaver
{
    namespace
    {
        std::size_t token_count(std::string_view caption)
        {
            const auto n = split_tokens(caption).size();
            if (n == 0)
                throw Error("empty caption");
            return n;
        }
    }

    OracleScorer::OracleScorer(bool negated, double low, double high) : negated_(negated), low_(low), high_(high)
    {
        if (!(low >= 0.0) || !(high > low) || !std::isfinite(high))
            throw Error("oracle scorer: need 0 <= low < high");
    }

    std::vector<double> OracleScorer::score(const FeatureMapd&, std::string_view caption,
                                            const ScoringContext& ctx) const
    {
        if (!ctx.sample)
            throw Error("oracle scorer needs the sample as context");
        const auto& ref = ctx.sample->image;
        const std::string truth =
            ref.kind == ImageRef::Kind::Scene && ref.scene ? describe_scene(*ref.scene) : ctx.sample->real;
        const bool match = caption == truth;
        return std::vector<double>(token_count(caption), match != negated_ ? low_ : high_);
    }

    std::vector<double> CoinFlipScorer::score(const FeatureMapd&, std::string_view caption, const ScoringContext&) const
    {
        const std::uint64_t h = splitmix64(seed_ ^ fnv1a(std::string(caption)));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        return std::vector<double>(token_count(caption), 2.0 * u);
    }

    PipelineConfig make_reader_pipeline(const PipelineConfig& reference, const std::vector<std::string>& personas)
    {
        if (personas.empty())
            throw Error("affinity scorer: no personas named");
        std::set<Persona> wanted;
        for (const auto& name : personas)
            wanted.insert(parse_persona(name));
        if (reference.strategy.kind == FusionKind::Concat)
            throw Error("affinity scorer: the reference pipeline must use routed or add fusion");

        PipelineConfig reader = reference;
        reader.strategy = {FusionKind::Routed, std::nullopt};
        reader.router.weights.setZero();
        for (std::size_t i = 0; i < reader.experts.size(); ++i) {
            const bool on = wanted.count(reader.experts[i].spec.persona) > 0;
            reader.router.bias(static_cast<Eigen::Index>(i)) = on ? 0.0 : -1e3;
        }
        for (Persona p : wanted) {
            const bool present = std::any_of(reader.experts.begin(), reader.experts.end(),
                                             [&](const ExpertSlot& s) { return s.spec.persona == p; });
            if (!present)
                throw Error("affinity scorer: persona '" + std::string(to_string(p)) +
                            "' is not among the reference pipeline's experts");
        }
        return reader;
    }

    namespace
    {
        constexpr int kCells = kSceneGrid * kSceneGrid;

        // Mean output feature per scene grid cell. A token belongs to the cell
        // holding its centre; a cell without tokens takes the token nearest its centre.
        std::array<rowXd, kCells> cell_features(const FeatureMapd& fm)
        {
            std::size_t g = 0;
            if (!is_perfect_square(fm.tokens(), &g))
                throw Error("affinity scorer: feature map token count " + std::to_string(fm.tokens()) +
                            " is not a square grid");
            std::array<rowXd, kCells> out;
            std::array<int, kCells> counts{};
            for (auto& r : out)
                r = rowXd::Zero(fm.values.cols());
            const double step = static_cast<double>(kScenePixels) / static_cast<double>(g);
            auto cell_of = [&](std::size_t i) {
                return std::min(static_cast<int>((static_cast<double>(i) + 0.5) * step) / kCellPixels, kSceneGrid - 1);
            };
            for (std::size_t y = 0; y < g; ++y)
                for (std::size_t x = 0; x < g; ++x) {
                    const int c = cell_of(y) * kSceneGrid + cell_of(x);
                    out[static_cast<std::size_t>(c)] += fm.values.row(static_cast<Eigen::Index>(y * g + x));
                    ++counts[static_cast<std::size_t>(c)];
                }
            for (int c = 0; c < kCells; ++c) {
                if (counts[static_cast<std::size_t>(c)]) {
                    out[static_cast<std::size_t>(c)] /= counts[static_cast<std::size_t>(c)];
                    continue;
                }
                const double cy = (c / kSceneGrid + 0.5) * kCellPixels;
                const double cx = (c % kSceneGrid + 0.5) * kCellPixels;
                auto nearest = [&](double p) {
                    return std::min(static_cast<std::size_t>(p / step), g - 1);
                };
                out[static_cast<std::size_t>(c)] =
                    fm.values.row(static_cast<Eigen::Index>(nearest(cy) * g + nearest(cx)));
            }
            rowXd mean = rowXd::Zero(fm.values.cols());
            for (const auto& r : out)
                mean += r;
            mean /= static_cast<double>(kCells);
            for (auto& r : out)
                r -= mean;
            return out;
        }

        struct Family
        {
            std::vector<rowXd> protos;
            double tau = 1.0;

            // softmax over prototypes of -|x - p|^2 / tau
            std::vector<double> probs(const rowXd& x) const
            {
                std::vector<double> d(protos.size());
                double lo = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < protos.size(); ++k) {
                    d[k] = (x - protos[k]).squaredNorm() / tau;
                    lo = std::min(lo, d[k]);
                }
                double z = 0.0;
                for (auto& v : d) {
                    v = std::exp(lo - v);
                    z += v;
                }
                for (auto& v : d)
                    v /= z;
                return d;
            }
        };

        struct Accum
        {
            std::vector<rowXd> sum;
            std::vector<std::size_t> n;
            std::vector<std::pair<std::size_t, rowXd>> samples;

            explicit Accum(std::size_t k) : sum(k), n(k, 0) {}

            void add(std::size_t k, const rowXd& x)
            {
                if (n[k] == 0)
                    sum[k] = rowXd::Zero(x.size());
                sum[k] += x;
                ++n[k];
                samples.emplace_back(k, x);
            }

            bool complete() const
            {
                return std::all_of(n.begin(), n.end(), [](std::size_t v) { return v > 0; });
            }

            Family build() const
            {
                Family f;
                for (std::size_t k = 0; k < sum.size(); ++k)
                    f.protos.push_back(sum[k] / static_cast<double>(n[k]));
                double spread = 0.0;
                for (const auto& [k, x] : samples)
                    spread += (x - f.protos[k]).squaredNorm();
                f.tau = std::max(spread / static_cast<double>(samples.size()), 1e-12);
                return f;
            }
        };

        std::string normalize_word(std::string_view tok)
        {
            std::string s(tok);
            while (!s.empty() && (s.back() == '.' || s.back() == ','))
                s.pop_back();
            if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
                return s.substr(1, s.size() - 2); // label text keeps its case
            std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
            return s;
        }

        std::optional<ColorName> color_word(const std::string& w)
        {
            for (auto c : kAllColors)
                if (to_string(c) == w)
                    return c;
            return std::nullopt;
        }

        std::optional<ShapeKind> shape_word(const std::string& w)
        {
            for (auto s : kAllShapes)
                if (to_string(s) == w || plural(s) == w)
                    return s;
            return shape_of_action(w);
        }

        bool is_label(std::string_view tok)
        {
            std::string s(tok);
            while (!s.empty() && (s.back() == '.' || s.back() == ','))
                s.pop_back();
            return s.size() >= 2 && s.front() == '"' && s.back() == '"';
        }

        // Tokens of one sentence split into object phrases at colour words.
        struct Phrase
        {
            std::optional<ColorName> color;
            std::optional<ShapeKind> shape;
            std::vector<int> cells;
        };
    }

    struct AffinityScorer::Impl
    {
        AffinityConfig config;
        PipelineConfig reader;
        Family color, shape, occlusion, objectness;
        mutable std::mutex cache_mutex;
        mutable std::map<std::tuple<int, int, int, int, std::string>, rowXd> render_cache;

        rowXd render_cell(ColorName c, ShapeKind s, int cell, const std::optional<std::string>& label) const
        {
            const auto key = std::make_tuple(static_cast<int>(c), static_cast<int>(s), cell, label ? 1 : 0,
                                             label.value_or(""));
            {
                std::lock_guard lock(cache_mutex);
                if (auto it = render_cache.find(key); it != render_cache.end())
                    return it->second;
            }
            SceneDescriptor scene;
            scene.objects.push_back({s, c, cell / kSceneGrid, cell % kSceneGrid, 0, false, label});
            const auto cells = cell_features(run_pipeline(rasterize(scene), reader).output);
            rowXd f = cells[static_cast<std::size_t>(cell)];
            std::lock_guard lock(cache_mutex);
            render_cache.emplace(key, f);
            return f;
        }

        void calibrate()
        {
            Accum col(std::size(kAllColors)), shp(std::size(kAllShapes)), occ(2), obj(2);
            const std::size_t limit = config.calibration_scenes * 4;
            for (std::size_t i = 0; i < limit; ++i) {
                if (i >= config.calibration_scenes && col.complete() && shp.complete() && occ.complete() &&
                    obj.complete())
                    break;
                const Scene scene = synth_scene(mix_seed(config.calibration_seed, i));
                const auto cells = cell_features(run_pipeline(scene.image, reader).output);
                std::array<bool, kCells> used{};
                for (const auto& o : scene.descriptor.objects) {
                    const auto c = static_cast<std::size_t>(o.row * kSceneGrid + o.col);
                    used[c] = true;
                    col.add(static_cast<std::size_t>(o.color), cells[c]);
                    shp.add(static_cast<std::size_t>(o.shape), cells[c]);
                    occ.add(o.occluded ? 0 : 1, cells[c]);
                    obj.add(0, cells[c]);
                }
                for (std::size_t c = 0; c < kCells; ++c)
                    if (!used[c])
                        obj.add(1, cells[c]);
            }
            if (!(col.complete() && shp.complete() && occ.complete() && obj.complete()))
                throw Error("affinity scorer: calibration scenes did not cover every attribute");
            color = col.build();
            shape = shp.build();
            occlusion = occ.build();
            objectness = obj.build();
        }

        double p_object(const std::array<rowXd, kCells>& cells, int c) const
        {
            return objectness.probs(cells[static_cast<std::size_t>(c)])[0];
        }

        // Mean of f over the phrase's cells. A phrase that names no cell reads
        // as "there is such an object": the best cell, weighted by objectness.
        double mean_over(const std::array<rowXd, kCells>& grid, const std::vector<int>& cells, auto&& f) const
        {
            if (cells.empty()) {
                double best = 0.0;
                for (int c = 0; c < kCells; ++c)
                    best = std::max(best, p_object(grid, c) * f(c));
                return best;
            }
            double s = 0.0;
            for (int c : cells)
                s += f(c);
            return s / static_cast<double>(cells.size());
        }

        std::vector<double> sentence_affinities(const std::array<rowXd, kCells>& cells,
                                                const std::vector<std::string>& raw) const
        {
            std::vector<std::string> words;
            for (const auto& t : raw)
                words.push_back(normalize_word(t));

            // phrase index per token
            std::vector<Phrase> phrases(1);
            std::vector<std::size_t> owner(words.size());
            bool seen_color = false;
            for (std::size_t i = 0; i < words.size(); ++i) {
                if (auto c = color_word(words[i])) {
                    if (seen_color)
                        phrases.emplace_back();
                    seen_color = true;
                    phrases.back().color = c;
                } else if (auto s = shape_word(words[i]); s && !phrases.back().shape) {
                    phrases.back().shape = s;
                } else if (auto cell = parse_cell_token(words[i])) {
                    phrases.back().cells.push_back(cell->first * kSceneGrid + cell->second);
                }
                owner[i] = phrases.size() - 1;
            }

            auto relation = [&](const std::string& w) -> double {
                if (phrases.size() < 2 || phrases[0].cells.empty() || phrases[1].cells.empty())
                    return 0.0;
                const int a = phrases[0].cells.front();
                const int b = phrases[1].cells.front();
                const int ar = a / kSceneGrid, ac = a % kSceneGrid, br = b / kSceneGrid, bc = b % kSceneGrid;
                bool holds = false;
                if (w == "left")
                    holds = ac < bc;
                else if (w == "right")
                    holds = ac > bc;
                else if (w == "above")
                    holds = ar < br;
                else if (w == "below")
                    holds = ar > br;
                else if (w == "touches")
                    holds = std::max(std::abs(ar - br), std::abs(ac - bc)) == 1;
                else if (w == "avoids")
                    holds = std::max(std::abs(ar - br), std::abs(ac - bc)) > 1;
                return holds ? p_object(cells, a) * p_object(cells, b) : 0.0;
            };

            std::vector<double> out(words.size(), 0.0);
            for (std::size_t i = 0; i < words.size(); ++i) {
                const std::string& w = words[i];
                const Phrase& ph = phrases[owner[i]];
                if (auto c = color_word(w)) {
                    out[i] = mean_over(cells, ph.cells, [&](int cell) {
                        return color.probs(cells[static_cast<std::size_t>(cell)])[static_cast<std::size_t>(*c)];
                    });
                } else if (auto cell = parse_cell_token(w)) {
                    out[i] = p_object(cells, cell->first * kSceneGrid + cell->second);
                } else if (w == "partly" || w == "fully") {
                    const std::size_t k = w == "partly" ? 0 : 1;
                    out[i] = mean_over(cells, ph.cells, [&](int cell) {
                        return occlusion.probs(cells[static_cast<std::size_t>(cell)])[k];
                    });
                } else if (w == "no" || w == "some") {
                    const auto s = i + 1 < words.size() ? shape_word(words[i + 1]) : std::nullopt;
                    if (!s)
                        continue;
                    double presence = 0.0;
                    for (int c = 0; c < kCells; ++c)
                        presence = std::max(presence, p_object(cells, c) *
                                                          shape.probs(cells[static_cast<std::size_t>(c)])[static_cast<std::size_t>(*s)]);
                    out[i] = w == "some" ? presence : 1.0 - presence;
                } else if (auto n = parse_count_word(w); n && ph.color && ph.shape) {
                    double expected = 0.0;
                    for (int c = 0; c < kCells; ++c) {
                        const auto& x = cells[static_cast<std::size_t>(c)];
                        expected += p_object(cells, c) * color.probs(x)[static_cast<std::size_t>(*ph.color)] *
                                    shape.probs(x)[static_cast<std::size_t>(*ph.shape)];
                    }
                    out[i] = std::exp(-0.5 * (*n - expected) * (*n - expected));
                } else if (auto s = shape_word(w)) {
                    out[i] = mean_over(cells, ph.cells, [&](int cell) {
                        return shape.probs(cells[static_cast<std::size_t>(cell)])[static_cast<std::size_t>(*s)];
                    });
                } else if (w == "left" || w == "right" || w == "above" || w == "below" || w == "touches" ||
                           w == "avoids") {
                    out[i] = relation(w);
                } else if (is_label(raw[i]) && ph.color && ph.shape && ph.cells.size() == 1) {
                    out[i] = label_affinity(cells, ph, w);
                }
            }
            return out;
        }

        double label_affinity(const std::array<rowXd, kCells>& cells, const Phrase& ph, const std::string& text) const
        {
            if (text.empty() || text.size() > 4 ||
                !std::all_of(text.begin(), text.end(), [](char ch) { return ch >= 'A' && ch <= 'Z'; }))
                return 0.0;
            const int cell = ph.cells.front();
            const rowXd& x = cells[static_cast<std::size_t>(cell)];
            const rowXd with = render_cell(*ph.color, *ph.shape, cell, text);
            const rowXd without = render_cell(*ph.color, *ph.shape, cell, std::nullopt);
            const double dw = (x - with).squaredNorm() / color.tau;
            const double d0 = (x - without).squaredNorm() / color.tau;
            const double lo = std::min(dw, d0);
            const double ew = std::exp(lo - dw);
            return ew / (ew + std::exp(lo - d0));
        }
    };

    AffinityScorer::AffinityScorer(const AffinityConfig& config, const PipelineConfig& reference)
        : impl_(std::make_unique<Impl>())
    {
        if (!std::isfinite(config.base) || !std::isfinite(config.alpha) || config.alpha < 0.0)
            throw Error("affinity scorer: base and alpha must be finite, alpha >= 0");
        if (!(config.nll_min >= 0.0) || !(config.nll_max >= config.nll_min) || !std::isfinite(config.nll_max))
            throw Error("affinity scorer: need 0 <= nll_min <= nll_max");
        if (config.calibration_scenes < 1)
            throw Error("affinity scorer: calibration_scenes must be at least 1");
        impl_->config = config;
        impl_->reader = make_reader_pipeline(reference, config.personas);
        impl_->calibrate();
    }

    AffinityScorer::~AffinityScorer() = default;
    AffinityScorer::AffinityScorer(AffinityScorer&&) noexcept = default;

    const PipelineConfig& AffinityScorer::reader() const { return impl_->reader; }

    std::vector<double> AffinityScorer::affinities(const FeatureMapd& features, std::string_view caption) const
    {
        token_count(caption);
        features.validate();
        const auto cells = cell_features(features);
        if (cells[0].size() != impl_->color.protos.front().size())
            throw Error("affinity scorer: feature width " + std::to_string(cells[0].size()) +
                        " differs from the reader's " + std::to_string(impl_->color.protos.front().size()));
        std::vector<double> out;
        for (const auto& sentence : split_sentences(caption)) {
            const auto a = impl_->sentence_affinities(cells, split_tokens(sentence));
            out.insert(out.end(), a.begin(), a.end());
        }
        return out;
    }

    std::vector<double> AffinityScorer::score(const FeatureMapd& features, std::string_view caption,
                                              const ScoringContext&) const
    {
        const auto& cfg = impl_->config;
        std::vector<double> nll = affinities(features, caption);
        for (auto& v : nll)
            v = std::clamp(cfg.base - cfg.alpha * v, cfg.nll_min, cfg.nll_max);
        return nll;
    }

    std::unique_ptr<CaptionScorer> make_scorer(const std::string& kind, std::uint64_t seed,
                                               const PipelineConfig& reference, const AffinityConfig& affinity)
    {
        if (kind == "oracle")
            return std::make_unique<OracleScorer>(false);
        if (kind == "negated-oracle")
            return std::make_unique<OracleScorer>(true);
        if (kind == "coin-flip")
            return std::make_unique<CoinFlipScorer>(seed);
        if (kind == "affinity")
            return std::make_unique<AffinityScorer>(affinity, reference);
        throw Error("unknown scorer '" + kind + "'; valid: oracle, negated-oracle, coin-flip, affinity");
    }
}
