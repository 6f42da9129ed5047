#include "weaver/captions.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <numeric>

#include "weaver/rng.hpp"

namespace weaver
{
    namespace
    {
        constexpr std::array<std::string_view, 8> kCountWords = {"zero", "one", "two", "three",
                                                                 "four", "five", "six", "seven"};
        constexpr std::array<std::string_view, 4> kActions = {"rolling", "resting", "pointing", "spinning"};
    }

    std::string_view count_word(int n)
    {
        if (n < 0 || n >= static_cast<int>(kCountWords.size()))
            throw Error("count_word: unsupported count " + std::to_string(n));
        return kCountWords[static_cast<std::size_t>(n)];
    }

    std::optional<int> parse_count_word(std::string_view w)
    {
        for (std::size_t i = 0; i < kCountWords.size(); ++i)
            if (kCountWords[i] == w)
                return static_cast<int>(i);
        return std::nullopt;
    }

    std::string_view action_of(ShapeKind s)
    {
        switch (s) {
        case ShapeKind::Circle: return kActions[0];
        case ShapeKind::Square: return kActions[1];
        case ShapeKind::Triangle: return kActions[2];
        }
        return kActions[0];
    }

    std::optional<ShapeKind> shape_of_action(std::string_view verb)
    {
        for (ShapeKind s : kAllShapes)
            if (action_of(s) == verb)
                return s;
        return std::nullopt;
    }

    std::string cell_token(int row, int col)
    {
        return "(" + std::to_string(row) + "," + std::to_string(col) + ")";
    }

    std::optional<std::pair<int, int>> parse_cell_token(std::string_view tok)
    {
        if (tok.size() != 5 || tok[0] != '(' || tok[2] != ',' || tok[4] != ')')
            return std::nullopt;
        const int r = tok[1] - '0', c = tok[3] - '0';
        if (r < 0 || r >= kSceneGrid || c < 0 || c >= kSceneGrid)
            return std::nullopt;
        return std::pair{r, c};
    }

    std::vector<std::string> split_tokens(std::string_view text)
    {
        std::vector<std::string> out;
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
                ++i;
            std::size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
                ++j;
            if (j > i)
                out.emplace_back(text.substr(i, j - i));
            i = j;
        }
        return out;
    }

    std::vector<std::string> split_sentences(std::string_view caption)
    {
        std::vector<std::string> out;
        std::string current;
        for (const auto& tok : split_tokens(caption)) {
            if (!current.empty())
                current += ' ';
            current += tok;
            if (tok.back() == '.') {
                out.push_back(std::move(current));
                current.clear();
            }
        }
        if (!current.empty())
            out.push_back(std::move(current));
        return out;
    }

    namespace
    {
        enum class SentenceKind
        {
            Group,
            Occlusion,
            Label,
            Position,
            Interaction,
            Absent,
        };

        struct Sentence
        {
            SentenceKind kind;
            std::vector<std::string> tokens;
            int group = -1;            // Group sentences
            std::vector<int> objects;  // objects referenced, by sorted index
        };

        struct Model
        {
            std::vector<SceneObject> objects; // sorted row-major
            std::vector<Sentence> sentences;
        };

        void object_phrase_tokens(const SceneObject& o, std::vector<std::string>& t)
        {
            t.emplace_back(to_string(o.color));
            t.emplace_back(to_string(o.shape));
            t.emplace_back("at");
            t.push_back(cell_token(o.row, o.col));
        }

        Model build_model(const SceneDescriptor& scene)
        {
            scene.validate();
            Model m;
            m.objects = scene.objects;
            std::sort(m.objects.begin(), m.objects.end(),
                      [](const SceneObject& a, const SceneObject& b) { return std::pair{a.row, a.col} < std::pair{b.row, b.col}; });

            std::vector<int> group_order;
            for (const auto& o : m.objects)
                if (std::find(group_order.begin(), group_order.end(), o.group) == group_order.end())
                    group_order.push_back(o.group);
            for (int g : group_order) {
                Sentence s{SentenceKind::Group, {}, g, {}};
                std::vector<int> members;
                for (std::size_t i = 0; i < m.objects.size(); ++i)
                    if (m.objects[i].group == g)
                        members.push_back(static_cast<int>(i));
                const auto& first = m.objects[static_cast<std::size_t>(members.front())];
                const int n = static_cast<int>(members.size());
                s.tokens.emplace_back(count_word(n));
                s.tokens.emplace_back(to_string(first.color));
                s.tokens.emplace_back(n == 1 ? to_string(first.shape) : plural(first.shape));
                s.tokens.emplace_back(action_of(first.shape));
                s.tokens.emplace_back("at");
                for (std::size_t k = 0; k < members.size(); ++k) {
                    if (k)
                        s.tokens.emplace_back("and");
                    const auto& o = m.objects[static_cast<std::size_t>(members[k])];
                    s.tokens.push_back(cell_token(o.row, o.col));
                }
                s.objects = members;
                m.sentences.push_back(std::move(s));
            }
            for (std::size_t i = 0; i < m.objects.size(); ++i) {
                const auto& o = m.objects[i];
                if (!o.occluded)
                    continue;
                Sentence s{SentenceKind::Occlusion, {"the"}, -1, {static_cast<int>(i)}};
                object_phrase_tokens(o, s.tokens);
                for (const char* w : {"is", "partly", "visible"})
                    s.tokens.emplace_back(w);
                m.sentences.push_back(std::move(s));
            }
            for (std::size_t i = 0; i < m.objects.size(); ++i) {
                const auto& o = m.objects[i];
                if (!o.label)
                    continue;
                Sentence s{SentenceKind::Label, {"the"}, -1, {static_cast<int>(i)}};
                object_phrase_tokens(o, s.tokens);
                for (const char* w : {"bears", "the", "label"})
                    s.tokens.emplace_back(w);
                s.tokens.push_back("\"" + *o.label + "\"");
                m.sentences.push_back(std::move(s));
            }
            for (std::size_t i = 0; i + 1 < m.objects.size(); ++i) {
                const auto& a = m.objects[i];
                const auto& b = m.objects[i + 1];
                Sentence s{SentenceKind::Position, {"the"}, -1, {static_cast<int>(i), static_cast<int>(i + 1)}};
                object_phrase_tokens(a, s.tokens);
                s.tokens.emplace_back("is");
                if (a.col != b.col) {
                    s.tokens.emplace_back(a.col < b.col ? "left" : "right");
                    s.tokens.emplace_back("of");
                } else {
                    s.tokens.emplace_back(a.row < b.row ? "above" : "below");
                }
                s.tokens.emplace_back("the");
                object_phrase_tokens(b, s.tokens);
                m.sentences.push_back(std::move(s));
            }
            for (std::size_t i = 0; i + 1 < m.objects.size(); ++i) {
                const auto& a = m.objects[i];
                const auto& b = m.objects[i + 1];
                Sentence s{SentenceKind::Interaction, {"the"}, -1, {static_cast<int>(i), static_cast<int>(i + 1)}};
                object_phrase_tokens(a, s.tokens);
                const bool adjacent = std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)) == 1;
                s.tokens.emplace_back(adjacent ? "touches" : "avoids");
                s.tokens.emplace_back("the");
                object_phrase_tokens(b, s.tokens);
                m.sentences.push_back(std::move(s));
            }
            for (ShapeKind shape : kAllShapes) {
                const bool present = std::any_of(m.objects.begin(), m.objects.end(),
                                                 [&](const SceneObject& o) { return o.shape == shape; });
                if (present)
                    continue;
                m.sentences.push_back({SentenceKind::Absent, {"no", std::string(plural(shape)), "are", "present"}, -1, {}});
            }
            return m;
        }

        std::string render(const Model& m)
        {
            std::string out;
            for (const auto& s : m.sentences) {
                if (!out.empty())
                    out += ' ';
                std::string text;
                for (std::size_t i = 0; i < s.tokens.size(); ++i) {
                    if (i)
                        text += ' ';
                    text += s.tokens[i];
                }
                text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
                out += text;
                out += '.';
            }
            return out;
        }

        std::vector<std::size_t> sentences_of(const Model& m, SentenceKind kind)
        {
            std::vector<std::size_t> out;
            for (std::size_t i = 0; i < m.sentences.size(); ++i)
                if (m.sentences[i].kind == kind)
                    out.push_back(i);
            return out;
        }

        template <class T>
        const T& pick(std::span<const T> items, Rng& rng)
        {
            return items[rng.below(items.size())];
        }

        std::string similar_letter(char c, Rng& rng)
        {
            static const std::map<char, std::string_view> lookalikes = {
                {'O', "QDC"}, {'Q', "O"},  {'C', "GO"}, {'G', "C"},  {'E', "FB"}, {'F', "EP"}, {'I', "LT"},
                {'L', "I"},   {'M', "NW"}, {'N', "MH"}, {'U', "VO"}, {'V', "UY"}, {'P', "RF"}, {'R', "PB"},
                {'B', "RE"},  {'D', "O"},  {'T', "I"},  {'H', "N"},  {'W', "M"},  {'K', "X"},  {'X', "K"},
                {'S', "Z"},   {'Z', "S"},  {'A', "R"},  {'Y', "V"},  {'J', "I"}};
            const auto it = lookalikes.find(c);
            if (it == lookalikes.end())
                return std::string(1, static_cast<char>('A' + (c - 'A' + 1) % 26));
            return std::string(1, it->second[rng.below(it->second.size())]);
        }

        struct Edit
        {
            std::size_t sentence;
            std::size_t token;
            std::string to;
        };

        std::optional<std::vector<Edit>> choose_edit(const Model& m, HallucinationCategory category, Rng& rng)
        {
            using HC = HallucinationCategory;
            const auto groups = sentences_of(m, SentenceKind::Group);
            switch (category) {
            case HC::Color: {
                if (groups.empty())
                    return std::nullopt;
                const std::size_t s = pick<std::size_t>(groups, rng);
                const auto current = parse_color(m.sentences[s].tokens[1]);
                std::vector<ColorName> others;
                for (ColorName c : kAllColors)
                    if (c != current)
                        others.push_back(c);
                return std::vector<Edit>{{s, 1, std::string(to_string(pick<ColorName>(others, rng)))}};
            }
            case HC::Shape: {
                if (groups.empty())
                    return std::nullopt;
                const std::size_t s = pick<std::size_t>(groups, rng);
                const auto& obj = m.objects[static_cast<std::size_t>(m.sentences[s].objects.front())];
                std::vector<ShapeKind> others;
                for (ShapeKind k : kAllShapes)
                    if (k != obj.shape)
                        others.push_back(k);
                const ShapeKind to = pick<ShapeKind>(others, rng);
                const bool many = m.sentences[s].objects.size() > 1;
                return std::vector<Edit>{{s, 2, std::string(many ? plural(to) : to_string(to))}};
            }
            case HC::Category: {
                const auto absent = sentences_of(m, SentenceKind::Absent);
                if (absent.empty())
                    return std::nullopt;
                return std::vector<Edit>{{pick<std::size_t>(absent, rng), 0, "some"}};
            }
            case HC::Counting: {
                if (m.objects.size() < 2)
                    return std::nullopt;
                const std::size_t s = pick<std::size_t>(groups, rng);
                const auto& sent = m.sentences[s];
                const int n = static_cast<int>(sent.objects.size());
                const int to = (n == 1 || rng.chance(0.5)) ? n + 1 : n - 1;
                const ShapeKind shape = m.objects[static_cast<std::size_t>(sent.objects.front())].shape;
                std::vector<Edit> edits{{s, 0, std::string(count_word(to))}};
                const std::string noun(to == 1 ? to_string(shape) : plural(shape));
                if (noun != sent.tokens[2])
                    edits.push_back({s, 2, noun});
                return edits;
            }
            case HC::AbsolutePosition: {
                if (m.objects.empty())
                    return std::nullopt;
                const std::size_t obj = rng.below(m.objects.size());
                const auto& o = m.objects[obj];
                std::vector<std::pair<int, int>> free, any;
                for (auto [dr, dc] : {std::pair{-1, 0}, std::pair{1, 0}, std::pair{0, -1}, std::pair{0, 1}}) {
                    const int r = o.row + dr, c = o.col + dc;
                    if (r < 0 || r >= kSceneGrid || c < 0 || c >= kSceneGrid)
                        continue;
                    any.emplace_back(r, c);
                    if (std::none_of(m.objects.begin(), m.objects.end(),
                                     [&](const SceneObject& x) { return x.row == r && x.col == c; }))
                        free.emplace_back(r, c);
                }
                const auto& pool = free.empty() ? any : free;
                const auto [r, c] = pick<std::pair<int, int>>(pool, rng);
                for (std::size_t s : groups) {
                    auto& toks = m.sentences[s].tokens;
                    for (std::size_t t = 5; t < toks.size(); ++t)
                        if (toks[t] == cell_token(o.row, o.col))
                            return std::vector<Edit>{{s, t, cell_token(r, c)}};
                }
                return std::nullopt;
            }
            case HC::RelativePosition: {
                const auto rel = sentences_of(m, SentenceKind::Position);
                if (rel.empty())
                    return std::nullopt;
                const std::size_t s = pick<std::size_t>(rel, rng);
                const std::string& word = m.sentences[s].tokens[6];
                static const std::map<std::string, std::string> flip = {
                    {"left", "right"}, {"right", "left"}, {"above", "below"}, {"below", "above"}};
                return std::vector<Edit>{{s, 6, flip.at(word)}};
            }
            case HC::RelativeInteraction: {
                const auto rel = sentences_of(m, SentenceKind::Interaction);
                if (rel.empty())
                    return std::nullopt;
                const std::size_t s = pick<std::size_t>(rel, rng);
                const std::string& word = m.sentences[s].tokens[5];
                return std::vector<Edit>{{s, 5, word == "touches" ? "avoids" : "touches"}};
            }
            case HC::Action: {
                if (groups.empty())
                    return std::nullopt;
                const std::size_t s = pick<std::size_t>(groups, rng);
                std::vector<std::string_view> others;
                for (auto a : kActions)
                    if (a != m.sentences[s].tokens[3])
                        others.push_back(a);
                return std::vector<Edit>{{s, 3, std::string(pick<std::string_view>(others, rng))}};
            }
            case HC::Occlusion: {
                const auto occ = sentences_of(m, SentenceKind::Occlusion);
                if (occ.empty())
                    return std::nullopt;
                return std::vector<Edit>{{pick<std::size_t>(occ, rng), 6, "fully"}};
            }
            case HC::Text: {
                const auto lab = sentences_of(m, SentenceKind::Label);
                if (lab.empty())
                    return std::nullopt;
                const std::size_t s = pick<std::size_t>(lab, rng);
                std::string word = m.sentences[s].tokens[8];
                const std::size_t pos = 1 + rng.below(word.size() - 2);
                word.replace(pos, 1, similar_letter(word[pos], rng));
                return std::vector<Edit>{{s, 8, word}};
            }
            }
            return std::nullopt;
        }
    }

    std::string describe_scene(const SceneDescriptor& scene) { return render(build_model(scene)); }

    std::optional<CaptionPair> synth_caption_pair(const SceneDescriptor& scene, HallucinationCategory category,
                                                  std::uint64_t seed)
    {
        const Model model = build_model(scene);
        Rng rng(mix_seed(seed, 0x4341'5054ull + index_of(category)));
        const auto edits = choose_edit(model, category, rng);
        if (!edits)
            return std::nullopt;
        Model h = model;
        for (const auto& e : *edits)
            h.sentences[e.sentence].tokens[e.token] = e.to;
        const auto& first = edits->front();
        CaptionPair pair{render(model), render(h),
                         {category, first.sentence, model.sentences[first.sentence].tokens[first.token], first.to}};
        if (pair.real == pair.hallucinated)
            return std::nullopt;
        return pair;
    }

    namespace
    {
        std::string normalize(std::string_view tok)
        {
            std::string s(tok);
            while (!s.empty() && (s.back() == '.' || s.back() == ','))
                s.pop_back();
            std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
            return s;
        }

        bool is_color(const std::string& w)
        {
            return std::any_of(std::begin(kAllColors), std::end(kAllColors), [&](ColorName c) { return to_string(c) == w; });
        }

        bool is_shape_noun(const std::string& w)
        {
            return std::any_of(std::begin(kAllShapes), std::end(kAllShapes),
                               [&](ShapeKind s) { return to_string(s) == w || plural(s) == w; });
        }

        bool in(const std::string& w, std::initializer_list<std::string_view> set)
        {
            return std::find(set.begin(), set.end(), w) != set.end();
        }
    }

    std::optional<HallucinationCategory> classify_caption_edit(std::string_view real, std::string_view hallucinated)
    {
        using HC = HallucinationCategory;
        const auto r = split_tokens(real);
        const auto h = split_tokens(hallucinated);
        if (r.size() != h.size())
            return std::nullopt;

        std::vector<std::pair<std::string, std::string>> diffs;
        std::size_t sentence = 0;
        std::optional<std::size_t> diff_sentence;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i] != h[i]) {
                if (diff_sentence && *diff_sentence != sentence)
                    return std::nullopt;
                diff_sentence = sentence;
                diffs.emplace_back(normalize(r[i]), normalize(h[i]));
            }
            if (r[i].back() == '.')
                ++sentence;
        }
        if (diffs.empty())
            return std::nullopt;

        const auto& [a, b] = diffs.front();
        if (parse_count_word(a) && parse_count_word(b)) {
            for (std::size_t i = 1; i < diffs.size(); ++i)
                if (!is_shape_noun(diffs[i].first) || !is_shape_noun(diffs[i].second))
                    return std::nullopt;
            return HC::Counting;
        }
        if (diffs.size() != 1)
            return std::nullopt;
        if (is_color(a) && is_color(b))
            return HC::Color;
        if (is_shape_noun(a) && is_shape_noun(b))
            return HC::Shape;
        if (in(a, {"no", "some"}) && in(b, {"no", "some"}))
            return HC::Category;
        if (parse_cell_token(a) && parse_cell_token(b))
            return HC::AbsolutePosition;
        if (in(a, {"left", "right", "above", "below"}) && in(b, {"left", "right", "above", "below"}))
            return HC::RelativePosition;
        if (in(a, {"touches", "avoids"}) && in(b, {"touches", "avoids"}))
            return HC::RelativeInteraction;
        if (std::find(kActions.begin(), kActions.end(), a) != kActions.end() &&
            std::find(kActions.begin(), kActions.end(), b) != kActions.end())
            return HC::Action;
        if (in(a, {"partly", "fully"}) && in(b, {"partly", "fully"}))
            return HC::Occlusion;
        if (a.size() > 2 && a.front() == '"' && b.size() > 2 && b.front() == '"')
            return HC::Text;
        return std::nullopt;
    }
}
