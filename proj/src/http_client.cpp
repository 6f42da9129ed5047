// Eigen (via json_codec) must precede httplib: <resolv.h> defines a `_res` macro.
#include "weaver/datagen.hpp"
#include "weaver/json_codec.hpp"

#include <cstdlib>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace weaver
{
    namespace
    {
        struct Mapping
        {
            std::string path = "/v1/chat/completions";
            std::string auth_header = "Authorization";
            std::string auth_prefix = "Bearer ";
            Json body = {{"model", "${model}"},
                         {"temperature", "${temperature}"},
                         {"max_tokens", "${max_tokens}"},
                         {"messages", Json::array({{{"role", "user"}, {"content", "${prompt}"}}})}};
            std::string text = "/choices/0/message/content";
            std::string finish_reason = "/choices/0/finish_reason";
            std::string prompt_tokens = "/usage/prompt_tokens";
            std::string completion_tokens = "/usage/completion_tokens";
        };

        Mapping load_mapping(const std::filesystem::path& path)
        {
            Mapping m;
            if (path.empty())
                return m;
            const Json j = read_json_file(path);
            auto str = [&](const char* key, std::string& dst) {
                if (j.contains(key))
                    dst = j.at(key).get<std::string>();
            };
            str("path", m.path);
            str("auth_header", m.auth_header);
            str("auth_prefix", m.auth_prefix);
            str("text", m.text);
            str("finish_reason", m.finish_reason);
            str("prompt_tokens", m.prompt_tokens);
            str("completion_tokens", m.completion_tokens);
            if (j.contains("body"))
                m.body = j.at("body");
            return m;
        }

        void substitute(Json& node, const CompletionRequest& req)
        {
            if (node.is_object() || node.is_array()) {
                for (auto& child : node)
                    substitute(child, req);
                return;
            }
            if (!node.is_string())
                return;
            const auto& s = node.get_ref<const std::string&>();
            if (s == "${model}")
                node = req.model;
            else if (s == "${prompt}")
                node = req.prompt;
            else if (s == "${temperature}")
                node = req.temperature;
            else if (s == "${max_tokens}")
                node = req.max_tokens;
        }

        struct Url
        {
            std::string host_port; // scheme://host[:port]
            std::string path;
        };

        Url split_url(const std::string& url)
        {
            constexpr std::string_view scheme = "https://";
            if (url.rfind(scheme, 0) != 0)
                throw Error("endpoint must be an https:// URL, got '" + url + "'");
            const auto slash = url.find('/', scheme.size());
            if (slash == std::string::npos)
                return {url, ""};
            return {url.substr(0, slash), url.substr(slash)};
        }
    }

    struct HttpCompletionClient::Impl
    {
        DatagenConfig config;
        Mapping mapping;
    };

    HttpCompletionClient::HttpCompletionClient(const DatagenConfig& config) : impl_(std::make_unique<Impl>())
    {
        split_url(config.endpoint);
        impl_->config = config;
        impl_->mapping = load_mapping(config.mapping);
    }

    HttpCompletionClient::~HttpCompletionClient() = default;

    CompletionResponse HttpCompletionClient::complete(const CompletionRequest& request)
    {
        const Mapping& m = impl_->mapping;
        const Url url = split_url(request.endpoint);
        const char* token = request.auth_env.empty() ? nullptr : std::getenv(request.auth_env.c_str());
        if (!request.auth_env.empty() && (!token || !*token))
            throw Error("environment variable " + request.auth_env + " is not set");

        Json body = m.body;
        substitute(body, request);

        // One client per call keeps concurrent requests independent.
        httplib::Client cli(url.host_port);
        const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
            std::chrono::duration<double>(impl_->config.timeout_s));
        cli.set_connection_timeout(timeout);
        cli.set_read_timeout(timeout);
        cli.enable_server_certificate_verification(true);
        httplib::Headers headers;
        if (token)
            headers.emplace(m.auth_header, m.auth_prefix + token);

        const std::string path = url.path.empty() ? m.path : url.path;
        auto res = cli.Post(path, headers, body.dump(), "application/json");
        if (!res)
            throw Error("request to " + url.host_port + path + " failed: " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300)
            throw Error("HTTP " + std::to_string(res->status) + " from " + url.host_port + path);

        Json reply;
        try {
            reply = Json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("response is not JSON: ") + e.what());
        }
        auto at = [&](const std::string& ptr) -> const Json* {
            const Json::json_pointer p(ptr);
            return reply.contains(p) ? &reply.at(p) : nullptr;
        };
        CompletionResponse out;
        const Json* text = at(m.text);
        if (!text || !text->is_string())
            throw Error("response has no text at " + m.text);
        out.text = text->get<std::string>();
        if (const Json* f = at(m.finish_reason); f && f->is_string())
            out.finish_reason = f->get<std::string>();
        if (const Json* u = at(m.prompt_tokens); u && u->is_number_unsigned())
            out.prompt_tokens = u->get<std::size_t>();
        if (const Json* u = at(m.completion_tokens); u && u->is_number_unsigned())
            out.completion_tokens = u->get<std::size_t>();
        return out;
    }
}
