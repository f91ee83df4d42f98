#include <httplib.h>

#include <cctype>
#include <cstdlib>

#include <json.hpp>

#include "liipa/llm.hpp"

namespace liipa {

namespace {

using nlohmann::json;

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_begin = url.find('/', host_begin);
    SplitUrl out;
    out.origin = url.substr(0, path_begin);
    if (path_begin != std::string::npos) out.prefix = url.substr(path_begin);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::string extract_text(ApiStyle api, const json& body) {
    std::string text;
    switch (api) {
        case ApiStyle::OpenAI:
            return body.at("choices").at(0).at("message").at("content").get<std::string>();
        case ApiStyle::Anthropic:
            for (const auto& block : body.at("content"))
                if (block.value("type", "") == "text") text += block.at("text").get<std::string>();
            return text;
        case ApiStyle::Gemini:
            for (const auto& part : body.at("candidates").at(0).at("content").at("parts"))
                if (part.contains("text")) text += part.at("text").get<std::string>();
            return text;
    }
    return text;
}

}  // namespace

std::optional<ApiStyle> parse_api_style(std::string_view s) {
    std::string lower;
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "openai") return ApiStyle::OpenAI;
    if (lower == "anthropic") return ApiStyle::Anthropic;
    if (lower == "gemini") return ApiStyle::Gemini;
    return std::nullopt;
}

EndpointConfig default_endpoint(Family family) {
    EndpointConfig c;
    switch (family) {
        case Family::FamilyA:
            c = {ApiStyle::OpenAI, "https://api.openai.com", "gpt-4o", "LIIPA_FAMILYA_KEY"};
            break;
        case Family::FamilyB:
            c = {ApiStyle::Anthropic, "https://api.anthropic.com", "claude-3-5-sonnet-latest",
                 "LIIPA_FAMILYB_KEY"};
            break;
        case Family::FamilyC:
            c = {ApiStyle::Gemini, "https://generativelanguage.googleapis.com", "gemini-1.5-pro",
                 "LIIPA_FAMILYC_KEY"};
            break;
        case Family::Mock:
            throw Error(ErrorKind::Configuration, "the mock family has no HTTP endpoint");
    }
    return c;
}

HttpBackend::HttpBackend(EndpointConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw Error(ErrorKind::Configuration, "endpoint base_url is empty");
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
    const char* key = config_.key_env.empty() ? nullptr : std::getenv(config_.key_env.c_str());
    if (key == nullptr || *key == '\0')
        throw Error(ErrorKind::Configuration,
                    "missing credentials: set " +
                        (config_.key_env.empty() ? std::string("a key variable") : config_.key_env));

    const auto url = split_url(config_.base_url);
    const std::string model = request.model_tag.empty() ? config_.model : request.model_tag;

    httplib::Headers headers;
    std::string path;
    json body;
    switch (config_.api) {
        case ApiStyle::OpenAI:
            path = url.prefix + "/v1/chat/completions";
            headers.emplace("Authorization", std::string("Bearer ") + key);
            body = {{"model", model},
                    {"messages",
                     json::array({{{"role", "system"}, {"content", request.system}},
                                  {{"role", "user"}, {"content", request.human}}})},
                    {"temperature", request.temperature},
                    {"max_tokens", request.max_tokens}};
            break;
        case ApiStyle::Anthropic:
            path = url.prefix + "/v1/messages";
            headers.emplace("x-api-key", key);
            headers.emplace("anthropic-version", "2023-06-01");
            body = {{"model", model},
                    {"system", request.system},
                    {"messages", json::array({{{"role", "user"}, {"content", request.human}}})},
                    {"temperature", request.temperature},
                    {"max_tokens", request.max_tokens}};
            break;
        case ApiStyle::Gemini:
            path = url.prefix + "/v1beta/models/" + model + ":generateContent";
            headers.emplace("x-goog-api-key", key);
            body = {{"systemInstruction", {{"parts", json::array({{{"text", request.system}}})}}},
                    {"contents", json::array({{{"role", "user"},
                                               {"parts", json::array({{{"text", request.human}}})}}})},
                    {"generationConfig",
                     {{"temperature", request.temperature},
                      {"maxOutputTokens", request.max_tokens}}}};
            break;
    }

    httplib::Client client(url.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);

    auto result = client.Post(path, headers, body.dump(), "application/json");
    if (!result)
        throw TransportFailure(true, "request to " + url.origin + path +
                                         " failed: " + httplib::to_string(result.error()));
    if (result->status != 200) {
        const std::string msg = "HTTP " + std::to_string(result->status) + " from " +
                                url.origin + path + ": " + result->body.substr(0, 300);
        throw TransportFailure(transient_status(result->status), msg);
    }
    try {
        return ChatResponse{extract_text(config_.api, json::parse(result->body)), false, 0};
    } catch (const json::exception& e) {
        throw TransportFailure(false, std::string("unexpected response shape: ") + e.what());
    }
}

}  // namespace liipa
