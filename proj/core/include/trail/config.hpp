#pragma once

#include "trail/llm_gateway.hpp"

#include <string>

namespace trail {

struct SeedConfig {
    int top_k = 5;      // K retrieved per topic
    int max_topics = 5; // T_max
    int max_seeds = 3;  // S_max
};

struct RefineConfig {
    int tau = 60;             // confidence threshold
    double alpha = 0.5;       // weight of the new judgment when combining
    int samples = 3;          // candidate generations per dead-end
    double temperature = 0.2; // generation sampling temperature
};

struct AgentConfig {
    int max_hops = 6;
    int max_generates = 2;
};

/// Everything a session needs, parsed from a key = value config file.
/// Unknown keys and out-of-range values are rejected as Misconfiguration.
struct EngineConfig {
    SeedConfig seed;
    RefineConfig refine;
    AgentConfig agent;
    GatewayConfig gateway;

    static EngineConfig from_file(const std::string& path);

    void apply(const std::string& key, const std::string& value);
    void validate() const;
};

} // namespace trail
