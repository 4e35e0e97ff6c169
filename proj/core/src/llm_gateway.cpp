#include "trail/llm_gateway.hpp"

#include "trail/prompts.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <thread>

namespace trail {

const char* role_name(ModelRole role) {
    switch (role) {
    case ModelRole::Reasoner: return "Reasoner";
    case ModelRole::Judge: return "Judge";
    case ModelRole::Aggregator: return "Aggregator";
    case ModelRole::Embedder: return "Embedder";
    }
    return "Unknown";
}

std::optional<ModelRole> role_from_name(std::string_view name) {
    if (name == "Reasoner") return ModelRole::Reasoner;
    if (name == "Judge") return ModelRole::Judge;
    if (name == "Aggregator") return ModelRole::Aggregator;
    if (name == "Embedder") return ModelRole::Embedder;
    return std::nullopt;
}

void GatewayConfig::validate() const {
    if (judge_model == reasoner_model && !allow_same_judge_model) {
        throw Error(ErrorCode::Misconfiguration,
                    "judge model '" + judge_model +
                        "' must differ from the reasoner model "
                        "(set model.allow_same_judge to override)");
    }
    if (max_attempts < 1) {
        throw Error(ErrorCode::Misconfiguration, "gateway.max_attempts must be >= 1");
    }
    if (max_output < 1) {
        throw Error(ErrorCode::Misconfiguration, "gateway.max_output must be >= 1");
    }
}

int clamp_score(int score) { return std::clamp(score, 0, 100); }

std::optional<int> parse_score_reply(const std::string& reply) {
    // First numeric token; tolerates "Score: 72", "72/100", "72.6".
    std::size_t i = 0;
    while (i < reply.size()) {
        if (std::isdigit(static_cast<unsigned char>(reply[i])) ||
            (reply[i] == '-' && i + 1 < reply.size() &&
             std::isdigit(static_cast<unsigned char>(reply[i + 1])))) {
            break;
        }
        ++i;
    }
    if (i == reply.size()) return std::nullopt;
    std::size_t end = i + (reply[i] == '-' ? 1 : 0);
    while (end < reply.size() && std::isdigit(static_cast<unsigned char>(reply[end]))) ++end;
    if (end < reply.size() && reply[end] == '.') {
        std::size_t frac = end + 1;
        while (frac < reply.size() && std::isdigit(static_cast<unsigned char>(reply[frac])))
            ++frac;
        if (frac > end + 1) end = frac;
    }
    const double value = std::stod(reply.substr(i, end - i));
    // Half-up rounding for fractional judgments.
    return static_cast<int>(std::floor(value + 0.5));
}

Gateway::Gateway(GatewayConfig config) : config_(std::move(config)) {
    config_.validate();
}

void Gateway::set_backend(ModelRole role, std::shared_ptr<ModelBackend> backend) {
    backends_[static_cast<int>(role)] = std::move(backend);
}

void Gateway::set_backend_all(std::shared_ptr<ModelBackend> backend) {
    for (auto& slot : backends_) slot = backend;
}

ModelBackend& Gateway::backend_for(ModelRole role) const {
    const auto& backend = backends_[static_cast<int>(role)];
    if (!backend) {
        throw Error(ErrorCode::Misconfiguration,
                    std::string("no backend configured for role ") + role_name(role));
    }
    return *backend;
}

std::string Gateway::model_for(ModelRole role) const {
    switch (role) {
    case ModelRole::Reasoner: return config_.reasoner_model;
    case ModelRole::Judge: return config_.judge_model;
    case ModelRole::Aggregator: return config_.aggregator_model;
    case ModelRole::Embedder: return config_.embedder_model;
    }
    return {};
}

std::vector<std::string> Gateway::complete(CompletionRequest request) {
    if (request.sample_count < 1) {
        throw Error(ErrorCode::InvariantViolation, "sample_count must be >= 1");
    }
    if (request.sample_count > 1 && request.role != ModelRole::Reasoner) {
        throw Error(ErrorCode::InvariantViolation,
                    "sample_count > 1 is only valid for Reasoner generation calls");
    }
    if (request.temperature < 0.0) {
        throw Error(ErrorCode::InvariantViolation, "temperature must be >= 0");
    }
    ModelBackend& backend = backend_for(request.role);

    const auto started = std::chrono::steady_clock::now();
    int attempt = 1;
    for (;; ++attempt) {
        try {
            std::vector<std::string> responses = backend.complete(request);
            if (static_cast<int>(responses.size()) != request.sample_count) {
                throw Error(ErrorCode::TransportFailure,
                            "backend returned " + std::to_string(responses.size()) +
                                " responses, expected " +
                                std::to_string(request.sample_count));
            }
            ModelExchange exchange;
            exchange.request = std::move(request);
            exchange.responses = responses;
            exchange.backend_id = backend.id();
            exchange.latency = std::chrono::duration_cast<std::chrono::microseconds>(
                std::chrono::steady_clock::now() - started);
            exchange.attempts = attempt;
            exchanges_.push_back(std::move(exchange));
            return responses;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::TransportFailure || attempt >= config_.max_attempts) {
                throw;
            }
            const auto delay = std::chrono::milliseconds(
                static_cast<long long>(config_.backoff_base_ms) * (1LL << (attempt - 1)));
            if (delay.count() > 0) std::this_thread::sleep_for(delay);
        }
    }
}

namespace {

constexpr const char* kStrictScoreSuffix =
    "\n\nReply with one integer between 0 and 100 only.";

// Extracts a <description>...</description> block, returning the reply with
// the block removed so score parsing cannot pick digits out of it.
std::optional<std::string> extract_description_tag(std::string& reply) {
    const std::string open = "<description>";
    const std::string close = "</description>";
    const std::size_t begin = reply.find(open);
    if (begin == std::string::npos) return std::nullopt;
    const std::size_t end = reply.find(close, begin + open.size());
    if (end == std::string::npos) return std::nullopt;
    std::string body = reply.substr(begin + open.size(), end - begin - open.size());
    reply.erase(begin, end + close.size() - begin);
    // Trim surrounding whitespace.
    const auto first = body.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return std::nullopt;
    const auto last = body.find_last_not_of(" \t\r\n");
    return body.substr(first, last - first + 1);
}

} // namespace

int Gateway::judge_score(const std::string& fact_context) {
    const std::string base_prompt =
        prompts::render(prompts::stringent_judging(), {{"fact", fact_context}});
    for (int ask = 0; ask < 3; ++ask) {
        CompletionRequest request;
        request.role = ModelRole::Judge;
        request.step = steps::judge;
        request.prompt = ask == 0 ? base_prompt : base_prompt + kStrictScoreSuffix;
        request.temperature = config_.judge_temperature;
        request.max_output = config_.max_output;
        const auto responses = complete(std::move(request));
        if (auto score = parse_score_reply(responses.front())) {
            return clamp_score(*score);
        }
    }
    throw Error(ErrorCode::UnparsableJudgeReply, "no numeric score after 2 re-asks");
}

JudgeVerdict Gateway::judge_reevaluate(const std::string& fact_context,
                                       const std::string& reasoning_context) {
    const std::string base_prompt = prompts::render(
        prompts::reevaluation(), {{"fact", fact_context}, {"context", reasoning_context}});
    for (int ask = 0; ask < 3; ++ask) {
        CompletionRequest request;
        request.role = ModelRole::Judge;
        request.step = steps::rejudge;
        request.prompt = ask == 0 ? base_prompt : base_prompt + kStrictScoreSuffix;
        request.temperature = config_.judge_temperature;
        request.max_output = config_.max_output;
        const auto responses = complete(std::move(request));
        std::string reply = responses.front();
        JudgeVerdict verdict;
        verdict.revised_description = extract_description_tag(reply);
        if (auto score = parse_score_reply(reply)) {
            verdict.score = clamp_score(*score);
            return verdict;
        }
    }
    throw Error(ErrorCode::UnparsableJudgeReply, "no numeric score after 2 re-asks");
}

std::string Gateway::aggregate(const std::vector<std::string>& candidates,
                               const std::string& query_context) {
    if (candidates.empty()) {
        throw Error(ErrorCode::PreconditionViolation, "aggregate requires >= 1 candidate");
    }
    std::string joined;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        joined += "--- candidate " + std::to_string(i + 1) + " ---\n";
        joined += candidates[i];
        joined += '\n';
    }
    CompletionRequest request;
    request.role = ModelRole::Aggregator;
    request.step = steps::aggregate;
    request.prompt = prompts::render(prompts::aggregation(),
                                     {{"context", query_context}, {"candidates", joined}});
    request.temperature = config_.aggregator_temperature;
    request.max_output = config_.max_output;
    return complete(std::move(request)).front();
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts,
                                            std::optional<std::size_t> expected_dim) {
    using nlohmann::json;
    std::vector<EmbeddingVector> vectors;
    vectors.reserve(texts.size());
    for (const auto& text : texts) {
        CompletionRequest request;
        request.role = ModelRole::Embedder;
        request.step = steps::embed;
        request.prompt = text;
        request.max_output = config_.max_output;
        const auto responses = complete(std::move(request));
        json parsed = json::parse(responses.front(), nullptr, false);
        if (parsed.is_discarded() || !parsed.is_array()) {
            throw Error(ErrorCode::DimensionMismatch,
                        "embedder reply is not a numeric array");
        }
        EmbeddingVector v;
        v.reserve(parsed.size());
        for (const auto& x : parsed) {
            if (!x.is_number()) {
                throw Error(ErrorCode::DimensionMismatch,
                            "embedder reply is not a numeric array");
            }
            v.push_back(x.get<double>());
        }
        const std::size_t want = expected_dim ? *expected_dim
                                              : (vectors.empty() ? v.size() : vectors.front().size());
        if (v.size() != want || v.empty()) {
            throw Error(ErrorCode::DimensionMismatch,
                        "embedder returned dimension " + std::to_string(v.size()) +
                            ", expected " + std::to_string(want));
        }
        vectors.push_back(std::move(v));
    }
    return vectors;
}

} // namespace trail
