#include "trail/http_backend.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>

namespace trail {

using nlohmann::json;

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    const std::size_t scheme = base_url.find("://");
    if (scheme == std::string::npos) {
        throw Error(ErrorCode::Misconfiguration,
                    "base url '" + base_url + "' must start with http:// or https://");
    }
    const std::size_t path = base_url.find('/', scheme + 3);
    if (path == std::string::npos) {
        return {base_url, ""};
    }
    std::string prefix = base_url.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path), prefix};
}

std::string build_chat_body(const CompletionRequest& request, const std::string& model) {
    json body;
    body["model"] = model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output;
    body["n"] = request.sample_count;
    return body.dump();
}

std::string build_embeddings_body(const std::string& input, const std::string& model) {
    json body;
    body["model"] = model;
    body["input"] = json::array({input});
    return body.dump();
}

std::vector<std::string> parse_chat_response(const std::string& body, int expected_count) {
    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array()) {
        throw Error(ErrorCode::TransportFailure, "chat response has no 'choices' array");
    }
    struct Choice {
        int index;
        std::string content;
    };
    std::vector<Choice> choices;
    for (const auto& choice : parsed["choices"]) {
        if (!choice.contains("message") || !choice["message"].contains("content") ||
            !choice["message"]["content"].is_string()) {
            throw Error(ErrorCode::TransportFailure, "chat choice has no message content");
        }
        const int index = choice.value("index", static_cast<int>(choices.size()));
        choices.push_back({index, choice["message"]["content"].get<std::string>()});
    }
    if (static_cast<int>(choices.size()) < expected_count) {
        throw Error(ErrorCode::TransportFailure,
                    "chat response has " + std::to_string(choices.size()) +
                        " choices, expected " + std::to_string(expected_count));
    }
    // Order-stable by sample index regardless of arrival order.
    std::sort(choices.begin(), choices.end(),
              [](const Choice& a, const Choice& b) { return a.index < b.index; });
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(expected_count));
    for (int i = 0; i < expected_count; ++i) out.push_back(std::move(choices[i].content));
    return out;
}

std::string parse_embeddings_response(const std::string& body) {
    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array() ||
        parsed["data"].empty() || !parsed["data"][0].contains("embedding") ||
        !parsed["data"][0]["embedding"].is_array()) {
        throw Error(ErrorCode::TransportFailure, "embeddings response has no data[0].embedding");
    }
    return parsed["data"][0]["embedding"].dump();
}

HttpBackend::HttpBackend(Endpoint main, std::optional<Endpoint> judge, GatewayConfig models)
    : main_(std::move(main)), judge_(std::move(judge)), models_(std::move(models)) {
    if (main_.base_url.empty()) {
        throw Error(ErrorCode::Misconfiguration, "live backend requires a base url");
    }
    if (main_.api_key.empty()) {
        throw Error(ErrorCode::Misconfiguration, "live backend requires an api key");
    }
}

HttpBackend HttpBackend::from_env(GatewayConfig models) {
    const char* base = std::getenv("TRAIL_API_BASE");
    const char* key = std::getenv("TRAIL_API_KEY");
    if (!base || !*base) {
        throw Error(ErrorCode::Misconfiguration, "TRAIL_API_BASE is not set");
    }
    if (!key || !*key) {
        throw Error(ErrorCode::Misconfiguration, "TRAIL_API_KEY is not set");
    }
    Endpoint main{base, key};
    std::optional<Endpoint> judge;
    if (const char* judge_base = std::getenv("TRAIL_JUDGE_API_BASE");
        judge_base && *judge_base) {
        const char* judge_key = std::getenv("TRAIL_JUDGE_API_KEY");
        judge = Endpoint{judge_base, (judge_key && *judge_key) ? judge_key : key};
    }
    return HttpBackend(std::move(main), std::move(judge), std::move(models));
}

const HttpBackend::Endpoint& HttpBackend::endpoint_for(ModelRole role) const {
    if (role == ModelRole::Judge && judge_) return *judge_;
    return main_;
}

std::string HttpBackend::id() const {
    return "http:" + split_base_url(main_.base_url).first;
}

std::vector<std::string> HttpBackend::complete(const CompletionRequest& request) {
    const Endpoint& endpoint = endpoint_for(request.role);
    const auto [origin, prefix] = split_base_url(endpoint.base_url);
    const std::string model = [&] {
        switch (request.role) {
        case ModelRole::Reasoner: return models_.reasoner_model;
        case ModelRole::Judge: return models_.judge_model;
        case ModelRole::Aggregator: return models_.aggregator_model;
        case ModelRole::Embedder: return models_.embedder_model;
        }
        return std::string{};
    }();

    const bool embedding = request.role == ModelRole::Embedder;
    const std::string path = prefix + (embedding ? "/embeddings" : "/chat/completions");
    const std::string body = embedding ? build_embeddings_body(request.prompt, model)
                                       : build_chat_body(request, model);

    httplib::Client client(origin);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers{{"Authorization", "Bearer " + endpoint.api_key}};

    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
        throw Error(ErrorCode::TransportFailure,
                    "POST " + origin + path + ": " + httplib::to_string(result.error()));
    }
    if (result->status == 429 || result->status >= 500) {
        throw Error(ErrorCode::TransportFailure,
                    "POST " + origin + path + " returned " + std::to_string(result->status));
    }
    if (result->status < 200 || result->status >= 300) {
        throw Error(ErrorCode::Misconfiguration,
                    "POST " + origin + path + " returned " + std::to_string(result->status) +
                        ": " + result->body);
    }
    if (embedding) {
        return {parse_embeddings_response(result->body)};
    }
    return parse_chat_response(result->body, request.sample_count);
}

} // namespace trail
