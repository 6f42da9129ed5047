#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weaver/benchmark.hpp"

namespace weaver
{
    struct PromptTemplate
    {
        std::string body;
    };

    /// The unified hallucination-generation prompt. Placeholders:
    /// {{MODIFICATION_TASK_SPECIFICS}} x2, {{EXISTENCE_CONDITION_DESCRIPTION}} x2,
    /// {{MODIFIED_ELEMENTS_NAME}} x1, {{UNCHANGED_CONSTRAINT_TEXT}} x1, {input} x1.
    PromptTemplate unified_template();

    struct CategorySpec
    {
        HallucinationCategory category;
        std::string modification_task;
        std::string existence_condition;
        std::string modified_elements;
        std::string unchanged_constraint;
    };

    /// One spec per category. The wording is a reconstruction from the
    /// category definitions.
    std::vector<CategorySpec> default_category_specs();

    /// Throws naming any placeholder that is missing from the template or
    /// left unsubstituted.
    std::string render_prompt(const PromptTemplate& tmpl, const CategorySpec& spec, std::string_view caption);

    /// Trimmed text, or nullopt for a case-insensitive "NO". Empty text throws.
    std::optional<std::string> parse_generation(std::string_view raw);

    struct CompletionRequest
    {
        std::string endpoint;
        std::string model;
        double temperature = 0.7;
        std::size_t max_tokens = 512;
        std::string prompt;
        std::string auth_env; // name of the environment variable holding the token
    };

    struct CompletionResponse
    {
        std::string text;
        std::string finish_reason;
        std::size_t prompt_tokens = 0;
        std::size_t completion_tokens = 0;
    };

    /// Must be safe to call from several threads at once. Transport or HTTP
    /// failures throw.
    class CompletionClient
    {
    public:
        virtual ~CompletionClient() = default;
        virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    };

    struct DatagenConfig
    {
        std::string endpoint;
        std::string model;
        double temperature = 0.7;
        std::size_t max_tokens = 512;
        std::size_t max_retries = 3;
        std::chrono::milliseconds backoff_base{500};
        std::size_t max_in_flight = 4;
        double max_failure_fraction = 0.2;
        std::string auth_env = "WEAVER_API_KEY";
        std::filesystem::path mapping; // optional request/response mapping file
        double timeout_s = 60.0;
    };

    /// `key = value` lines; `#` starts a comment. Unknown keys are errors.
    DatagenConfig parse_datagen_config(std::istream& in);
    DatagenConfig load_datagen_config(const std::filesystem::path& path);

    struct CaptionItem
    {
        std::string id;
        ImageRef image;
        std::string caption;
    };

    /// JSONL {"id"?, "image": {...}, "caption": str}. Ids default to item-<line>.
    std::vector<CaptionItem> parse_caption_items(std::istream& in);

    enum class TaskOutcome
    {
        Produced,
        SkippedNo,
        SkippedEcho,
        Failed,
        Cancelled,
    };

    std::string_view to_string(TaskOutcome o);

    struct TaskLog
    {
        std::size_t item = 0;
        HallucinationCategory category = HallucinationCategory::Category;
        std::size_t retries = 0;
        TaskOutcome outcome = TaskOutcome::Failed;
        std::string message;
    };

    struct GenerationReport
    {
        std::vector<TaskLog> tasks; // (item, spec) order
        std::size_t produced = 0;
        std::size_t skipped_no = 0;
        std::size_t skipped_echo = 0;
        std::size_t failed = 0;
        std::size_t retries = 0;
        bool aborted = false;
    };

    struct GenerationResult
    {
        Dataset dataset;
        GenerationReport report;
    };

    /// Thrown when failures exceed max_failure_fraction of all tasks.
    class GenerationAborted : public Error
    {
    public:
        GenerationAborted(const std::string& what, GenerationReport report)
            : Error(what), report_(std::move(report))
        {
        }
        const GenerationReport& report() const noexcept { return report_; }

    private:
        GenerationReport report_;
    };

    using ProgressFn = std::function<void(const TaskLog&)>;

    /// Every item x spec: render, request with retry and exponential backoff,
    /// parse. At most max_in_flight requests run at once; output order is
    /// (item, spec) regardless of completion order.
    GenerationResult generate_dataset(CompletionClient& client, std::span<const CaptionItem> items,
                                      std::span<const CategorySpec> specs, const DatagenConfig& config,
                                      const ProgressFn& progress = {});

    /// JSON-over-HTTPS chat completion client. The mapping file (JSON) sets
    /// "path", "auth_header", "auth_prefix", a "body" template whose string
    /// leaves "${model}", "${prompt}", "${temperature}", "${max_tokens}" are
    /// substituted, and JSON pointers "text", "finish_reason",
    /// "prompt_tokens", "completion_tokens" into the response. Defaults
    /// follow the common chat-completions shape.
    class HttpCompletionClient : public CompletionClient
    {
    public:
        explicit HttpCompletionClient(const DatagenConfig& config);
        ~HttpCompletionClient() override;
        CompletionResponse complete(const CompletionRequest& request) override;

    private:
        struct Impl;
        std::unique_ptr<Impl> impl_;
    };
}
