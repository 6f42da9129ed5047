#include "weaver/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "weaver/json_codec.hpp"

namespace weaver
{
    namespace
    {
        constexpr std::string_view kTask = "{{MODIFICATION_TASK_SPECIFICS}}";
        constexpr std::string_view kExist = "{{EXISTENCE_CONDITION_DESCRIPTION}}";
        constexpr std::string_view kElements = "{{MODIFIED_ELEMENTS_NAME}}";
        constexpr std::string_view kUnchanged = "{{UNCHANGED_CONSTRAINT_TEXT}}";
        constexpr std::string_view kInput = "{input}";

        std::string_view trim(std::string_view s)
        {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
                s.remove_prefix(1);
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
                s.remove_suffix(1);
            return s;
        }

        std::size_t replace_all(std::string& s, std::string_view from, std::string_view to)
        {
            std::size_t n = 0;
            for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
                s.replace(pos, from.size(), to);
                ++n;
            }
            return n;
        }
    }

    PromptTemplate unified_template()
    {
        return {R"(# Task Description
Based on the input image description, determine if there are modifiable {{MODIFICATION_TASK_SPECIFICS}}.
If present, modify only the {{MODIFICATION_TASK_SPECIFICS}} while keeping other elements unchanged.

# Input Format
Image description text

# Output Format
If no {{EXISTENCE_CONDITION_DESCRIPTION}} exists, output: NO
If exists, output modified description

# Guidelines
- First determine if {{EXISTENCE_CONDITION_DESCRIPTION}} exist
- Modified {{MODIFIED_ELEMENTS_NAME}} must be logically consistent
- {{UNCHANGED_CONSTRAINT_TEXT}}
- Maintain original level of detail
- Context should remain plausible

# Input
{input}

# Output
)"};
    }

    std::vector<CategorySpec> default_category_specs()
    {
        using HC = HallucinationCategory;
        return {
            {HC::Category, "object categories (add one object category that is not actually in the scene)",
             "scene context that could plausibly host an additional object category", "object category",
             "Keep every object that is already described, with its attributes and position, unchanged"},
            {HC::Counting, "object quantities (change the stated number of one kind of object)",
             "explicitly counted or countable objects", "object count",
             "Keep the object kinds, attributes and positions unchanged; change exactly one quantity"},
            {HC::Occlusion, "statements about partially visible objects (describe one as fully visible or complete)",
             "partially visible or occluded objects", "visibility statement",
             "Keep all other objects and their visibility unchanged"},
            {HC::Text, "scene text (alter a few characters of one word into visually similar ones)",
             "visible text, signs or labels", "text content",
             "Keep the location and context of the text unchanged; modify only its characters"},
            {HC::Shape, "object shapes or contours (describe one object with a different geometric form)",
             "objects with a describable shape", "object shape",
             "Keep the object's identity, colour and position unchanged; modify only its shape"},
            {HC::AbsolutePosition, "absolute positions (move one object to a different location in the frame)",
             "objects with a stated location in the image", "object position",
             "Keep every other object's position and all attributes unchanged"},
            {HC::RelativePosition, "relative spatial relations (invert one relation such as left of / right of)",
             "spatial relations between two objects", "spatial relation",
             "Keep the objects involved and their attributes unchanged; modify only one relation"},
            {HC::Color, "object colours (describe one object with a different colour)", "objects with a stated colour",
             "object colour", "Keep the object's identity, shape and position unchanged; modify only one colour"},
            {HC::Action, "actions or states of objects (replace one action with a different one)",
             "objects performing a describable action or in a describable state", "action",
             "Keep the acting object and the rest of the scene unchanged; modify only one action"},
            {HC::RelativeInteraction, "interactions between objects (change how two objects relate or interact)",
             "interactions or contact between two objects", "interaction",
             "Keep both objects and their attributes unchanged; modify only the interaction"},
        };
    }

    std::string render_prompt(const PromptTemplate& tmpl, const CategorySpec& spec, std::string_view caption)
    {
        if (trim(caption).empty())
            throw Error("render_prompt: caption is empty");
        std::string out = tmpl.body;
        const std::pair<std::string_view, const std::string*> fields[] = {
            {kTask, &spec.modification_task},
            {kExist, &spec.existence_condition},
            {kElements, &spec.modified_elements},
            {kUnchanged, &spec.unchanged_constraint},
        };
        for (const auto& [placeholder, value] : fields) {
            if (value->empty())
                throw Error("render_prompt: spec text for " + std::string(placeholder) + " is empty");
            if (replace_all(out, placeholder, *value) == 0)
                throw Error("render_prompt: template is missing placeholder " + std::string(placeholder));
        }
        if (auto pos = out.find("{{"); pos != std::string::npos) {
            const auto end = out.find("}}", pos);
            throw Error("render_prompt: unknown placeholder " +
                        out.substr(pos, end == std::string::npos ? std::string::npos : end + 2 - pos));
        }
        const auto at = out.find(kInput);
        if (at == std::string::npos)
            throw Error("render_prompt: template is missing placeholder {input}");
        if (out.find(kInput, at + 1) != std::string::npos)
            throw Error("render_prompt: template has more than one {input}");
        out.replace(at, kInput.size(), caption);
        return out;
    }

    std::optional<std::string> parse_generation(std::string_view raw)
    {
        const auto t = trim(raw);
        if (t.empty())
            throw Error("empty generation");
        if (t.size() == 2 && std::toupper(static_cast<unsigned char>(t[0])) == 'N' &&
            std::toupper(static_cast<unsigned char>(t[1])) == 'O')
            return std::nullopt;
        return std::string(t);
    }

    DatagenConfig parse_datagen_config(std::istream& in)
    {
        DatagenConfig cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            const auto t = trim(line);
            if (t.empty())
                continue;
            const auto eq = t.find('=');
            if (eq == std::string_view::npos)
                throw ParseError(lineno, "expected key = value");
            const std::string key(trim(t.substr(0, eq)));
            const std::string value(trim(t.substr(eq + 1)));
            try {
                if (key == "endpoint")
                    cfg.endpoint = value;
                else if (key == "model")
                    cfg.model = value;
                else if (key == "temperature")
                    cfg.temperature = std::stod(value);
                else if (key == "max_tokens")
                    cfg.max_tokens = std::stoul(value);
                else if (key == "max_retries")
                    cfg.max_retries = std::stoul(value);
                else if (key == "backoff_base_ms")
                    cfg.backoff_base = std::chrono::milliseconds(std::stol(value));
                else if (key == "max_in_flight")
                    cfg.max_in_flight = std::stoul(value);
                else if (key == "max_failure_fraction")
                    cfg.max_failure_fraction = std::stod(value);
                else if (key == "auth_env")
                    cfg.auth_env = value;
                else if (key == "mapping")
                    cfg.mapping = value;
                else if (key == "timeout_s")
                    cfg.timeout_s = std::stod(value);
                else
                    throw ParseError(lineno, "unknown key '" + key + "'");
            } catch (const std::invalid_argument&) {
                throw ParseError(lineno, "bad value for '" + key + "': " + value);
            } catch (const std::out_of_range&) {
                throw ParseError(lineno, "value out of range for '" + key + "': " + value);
            }
        }
        if (cfg.max_in_flight < 1)
            throw Error("max_in_flight must be at least 1");
        if (!(cfg.max_failure_fraction >= 0.0 && cfg.max_failure_fraction <= 1.0))
            throw Error("max_failure_fraction must be in [0, 1]");
        return cfg;
    }

    DatagenConfig load_datagen_config(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error("cannot open " + path.string());
        DatagenConfig cfg = parse_datagen_config(in);
        if (!cfg.mapping.empty() && cfg.mapping.is_relative())
            cfg.mapping = path.parent_path() / cfg.mapping;
        return cfg;
    }

    std::vector<CaptionItem> parse_caption_items(std::istream& in)
    {
        std::vector<CaptionItem> out;
        std::set<std::string> ids;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty())
                continue;
            try {
                const Json j = Json::parse(line);
                CaptionItem item;
                item.id = j.contains("id") ? j.at("id").get<std::string>() : "item-" + std::to_string(lineno);
                item.image = image_ref_from_json(j.at("image"));
                item.caption = j.at("caption").get<std::string>();
                if (trim(item.caption).empty())
                    throw Error("caption is empty");
                if (!ids.insert(item.id).second)
                    throw Error("duplicate item id '" + item.id + "'");
                out.push_back(std::move(item));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(lineno, e.what());
            } catch (const Error& e) {
                throw ParseError(lineno, e.what());
            }
        }
        return out;
    }

    std::string_view to_string(TaskOutcome o)
    {
        switch (o) {
        case TaskOutcome::Produced: return "produced";
        case TaskOutcome::SkippedNo: return "skipped-no";
        case TaskOutcome::SkippedEcho: return "skipped-echo";
        case TaskOutcome::Failed: return "failed";
        case TaskOutcome::Cancelled: return "cancelled";
        }
        return "?";
    }

    GenerationResult generate_dataset(CompletionClient& client, std::span<const CaptionItem> items,
                                      std::span<const CategorySpec> specs, const DatagenConfig& config,
                                      const ProgressFn& progress)
    {
        if (items.empty())
            throw Error("generate_dataset: no items");
        if (specs.empty())
            throw Error("generate_dataset: no category specs");
        if (config.max_in_flight < 1)
            throw Error("generate_dataset: max_in_flight must be at least 1");

        const PromptTemplate tmpl = unified_template();
        const std::size_t total = items.size() * specs.size();
        const auto allowed_failures = static_cast<std::size_t>(config.max_failure_fraction * static_cast<double>(total));

        std::vector<TaskLog> logs(total);
        std::vector<std::optional<BenchmarkSample>> samples(total);
        std::atomic<std::size_t> next{0};
        std::atomic<std::size_t> failures{0};
        std::atomic<bool> abort{false};
        std::mutex progress_mutex;

        auto run_task = [&](std::size_t t) {
            const std::size_t i = t / specs.size();
            const CategorySpec& spec = specs[t % specs.size()];
            const CaptionItem& item = items[i];
            TaskLog& log = logs[t];
            log.item = i;
            log.category = spec.category;
            if (abort) {
                log.outcome = TaskOutcome::Cancelled;
                return;
            }

            CompletionRequest req{config.endpoint, config.model, config.temperature, config.max_tokens,
                                  render_prompt(tmpl, spec, item.caption), config.auth_env};
            std::optional<std::optional<std::string>> parsed;
            for (std::size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
                try {
                    parsed = parse_generation(client.complete(req).text);
                    break;
                } catch (const std::exception& e) {
                    log.message = e.what();
                    if (attempt == config.max_retries)
                        break;
                    ++log.retries;
                    if (config.backoff_base.count() > 0)
                        std::this_thread::sleep_for(config.backoff_base * (1LL << std::min<std::size_t>(attempt, 20)));
                }
            }

            if (!parsed) {
                log.outcome = TaskOutcome::Failed;
                if (++failures > allowed_failures)
                    abort = true;
                return;
            }
            log.message.clear();
            if (!*parsed) {
                log.outcome = TaskOutcome::SkippedNo;
                return;
            }
            const std::string& h = **parsed;
            if (h == trim(item.caption)) {
                log.outcome = TaskOutcome::SkippedEcho;
                return;
            }
            BenchmarkSample s{item.id + "-" + std::string(to_string(spec.category)), item.image, item.caption, h,
                              spec.category};
            try {
                samples[t] = sample_from_json(to_json(s));
                log.outcome = TaskOutcome::Produced;
            } catch (const Error& e) {
                log.outcome = TaskOutcome::Failed;
                log.message = e.what();
                if (++failures > allowed_failures)
                    abort = true;
            }
        };

        auto worker = [&] {
            for (std::size_t t = next++; t < total; t = next++) {
                run_task(t);
                if (progress) {
                    std::lock_guard lock(progress_mutex);
                    progress(logs[t]);
                }
            }
        };

        {
            const std::size_t n_workers = std::min(config.max_in_flight, total);
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w + 1 < n_workers; ++w)
                pool.emplace_back(worker);
            worker();
        }

        GenerationResult result;
        std::set<std::string> ids;
        for (std::size_t t = 0; t < total; ++t) {
            const TaskLog& log = logs[t];
            result.report.retries += log.retries;
            switch (log.outcome) {
            case TaskOutcome::Produced:
                if (!ids.insert(samples[t]->id).second)
                    throw Error("generate_dataset: duplicate sample id '" + samples[t]->id + "'");
                result.dataset.push_back(std::move(*samples[t]));
                ++result.report.produced;
                break;
            case TaskOutcome::SkippedNo: ++result.report.skipped_no; break;
            case TaskOutcome::SkippedEcho: ++result.report.skipped_echo; break;
            case TaskOutcome::Failed: ++result.report.failed; break;
            case TaskOutcome::Cancelled: break;
            }
        }
        result.report.tasks = std::move(logs);
        result.report.aborted = abort;
        if (abort) {
            std::ostringstream msg;
            msg << "generation aborted: " << result.report.failed << " of " << total
                << " requests failed (limit " << config.max_failure_fraction << "); produced "
                << result.report.produced << ", skipped " << result.report.skipped_no + result.report.skipped_echo;
            for (const auto& log : result.report.tasks)
                if (log.outcome == TaskOutcome::Failed) {
                    msg << "; first failure: " << log.message;
                    break;
                }
            throw GenerationAborted(msg.str(), std::move(result.report));
        }
        return result;
    }
}
