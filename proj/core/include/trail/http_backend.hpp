#pragma once

#include "trail/llm_gateway.hpp"

#include <optional>
#include <string>
#include <vector>

namespace trail {

/// Chat-completions-style HTTP backend. The judge role may live on a
/// separate endpoint so the evaluation model can be hosted apart from the
/// reasoner. Connection errors, 429 and 5xx surface as TransportFailure
/// (retried by the gateway); other non-2xx statuses as Misconfiguration.
class HttpBackend : public ModelBackend {
public:
    struct Endpoint {
        std::string base_url; // e.g. https://api.example.com/v1
        std::string api_key;
    };

    HttpBackend(Endpoint main, std::optional<Endpoint> judge, GatewayConfig models);

    // Reads TRAIL_API_BASE / TRAIL_API_KEY and, when present,
    // TRAIL_JUDGE_API_BASE / TRAIL_JUDGE_API_KEY.
    static HttpBackend from_env(GatewayConfig models);

    std::vector<std::string> complete(const CompletionRequest& request) override;
    std::string id() const override;

private:
    const Endpoint& endpoint_for(ModelRole role) const;

    Endpoint main_;
    std::optional<Endpoint> judge_;
    GatewayConfig models_;
};

// Wire-format seams, pinned by the integration fixtures.
std::string build_chat_body(const CompletionRequest& request, const std::string& model);
std::string build_embeddings_body(const std::string& input, const std::string& model);
std::vector<std::string> parse_chat_response(const std::string& body, int expected_count);
std::string parse_embeddings_response(const std::string& body);

// Splits "https://host:port/v1" into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base_url);

} // namespace trail
