#pragma once

#include "trail/embed_index.hpp"
#include "trail/error.hpp"

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trail {

enum class ModelRole { Reasoner, Judge, Aggregator, Embedder };

const char* role_name(ModelRole role);
std::optional<ModelRole> role_from_name(std::string_view name);

// Scenario step labels used by the engine. A scripted scenario file keys its
// canned responses on (step, role) and is consumed strictly in file order.
namespace steps {
inline constexpr const char* topics = "topics";
inline constexpr const char* embed = "embed";
inline constexpr const char* seed = "seed";
inline constexpr const char* decide = "decide";
inline constexpr const char* generate = "generate";
inline constexpr const char* aggregate = "aggregate";
inline constexpr const char* judge = "judge";
inline constexpr const char* rejudge = "rejudge";
inline constexpr const char* answer = "answer";
} // namespace steps

struct CompletionRequest {
    ModelRole role = ModelRole::Reasoner;
    std::string step; // scenario step label
    std::string prompt;
    double temperature = 0.0;
    int max_output = 1024;
    int sample_count = 1; // > 1 only for Reasoner generation sampling
};

// Audit record of one gateway call, kept in memory for tests and tracing.
struct ModelExchange {
    CompletionRequest request;
    std::vector<std::string> responses;
    std::string backend_id;
    std::chrono::microseconds latency{0};
    int attempts = 1;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    // Returns exactly request.sample_count responses or throws.
    virtual std::vector<std::string> complete(const CompletionRequest& request) = 0;
    virtual std::string id() const = 0;
};

struct GatewayConfig {
    std::string reasoner_model = "reasoner";
    std::string judge_model = "judge";
    std::string aggregator_model = "aggregator";
    std::string embedder_model = "embedder";
    // The judge must differ from the reasoner unless explicitly overridden.
    bool allow_same_judge_model = false;
    double reasoner_temperature = 0.0;
    double judge_temperature = 0.0;
    double aggregator_temperature = 0.0;
    int max_output = 1024;
    int max_attempts = 3; // total tries per request on TransportFailure
    int backoff_base_ms = 250;

    void validate() const;
};

struct JudgeVerdict {
    int score = 0;
    std::optional<std::string> revised_description;
};

/// Role-separated access to the models behind one contract. All calls are
/// synchronous; transport failures are retried with exponential backoff up
/// to max_attempts, and every completed call is recorded as a ModelExchange.
class Gateway {
public:
    explicit Gateway(GatewayConfig config);

    void set_backend(ModelRole role, std::shared_ptr<ModelBackend> backend);
    void set_backend_all(std::shared_ptr<ModelBackend> backend);

    std::vector<std::string> complete(CompletionRequest request);

    // Stringent single-fact judgment, 0..100. Re-asks up to twice on an
    // unparsable reply, then throws UnparsableJudgeReply.
    int judge_score(const std::string& fact_context);

    // Re-evaluation judgment; may carry a revised description when the judge
    // reply contains a tagged replacement block.
    JudgeVerdict judge_reevaluate(const std::string& fact_context,
                                  const std::string& reasoning_context);

    // Consensus over candidate generations. Invoked even for one candidate.
    std::string aggregate(const std::vector<std::string>& candidates,
                          const std::string& query_context);

    // One vector per input text, in input order.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       std::optional<std::size_t> expected_dim = {});

    const GatewayConfig& config() const { return config_; }
    std::string model_for(ModelRole role) const;

    const std::vector<ModelExchange>& exchanges() const { return exchanges_; }
    void clear_exchanges() { exchanges_.clear(); }

private:
    ModelBackend& backend_for(ModelRole role) const;

    GatewayConfig config_;
    std::shared_ptr<ModelBackend> backends_[4];
    std::vector<ModelExchange> exchanges_;
};

// Lenient numeric parse shared by the judge paths: first numeric token,
// rounded half-up when fractional. nullopt when no number is present.
std::optional<int> parse_score_reply(const std::string& reply);

int clamp_score(int score);

} // namespace trail
