#include "trail/config.hpp"

#include <charconv>
#include <fstream>

namespace trail {

namespace {

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw Error(ErrorCode::Misconfiguration, key + ": '" + value + "' is not an integer");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw Error(ErrorCode::Misconfiguration, key + ": '" + value + "' is not a number");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw Error(ErrorCode::Misconfiguration, key + ": '" + value + "' is not a boolean");
}

} // namespace

void EngineConfig::apply(const std::string& key, const std::string& value) {
    if (key == "seed.top_k") seed.top_k = parse_int(key, value);
    else if (key == "seed.max_topics") seed.max_topics = parse_int(key, value);
    else if (key == "seed.max_seeds") seed.max_seeds = parse_int(key, value);
    else if (key == "refine.tau") refine.tau = parse_int(key, value);
    else if (key == "refine.alpha") refine.alpha = parse_double(key, value);
    else if (key == "refine.samples") refine.samples = parse_int(key, value);
    else if (key == "refine.temperature") refine.temperature = parse_double(key, value);
    else if (key == "agent.max_hops") agent.max_hops = parse_int(key, value);
    else if (key == "agent.max_generates") agent.max_generates = parse_int(key, value);
    else if (key == "model.reasoner") gateway.reasoner_model = value;
    else if (key == "model.judge") gateway.judge_model = value;
    else if (key == "model.aggregator") gateway.aggregator_model = value;
    else if (key == "model.embedder") gateway.embedder_model = value;
    else if (key == "model.allow_same_judge") gateway.allow_same_judge_model = parse_bool(key, value);
    else if (key == "gateway.reasoner_temperature") gateway.reasoner_temperature = parse_double(key, value);
    else if (key == "gateway.judge_temperature") gateway.judge_temperature = parse_double(key, value);
    else if (key == "gateway.aggregator_temperature") gateway.aggregator_temperature = parse_double(key, value);
    else if (key == "gateway.max_output") gateway.max_output = parse_int(key, value);
    else if (key == "gateway.max_attempts") gateway.max_attempts = parse_int(key, value);
    else if (key == "gateway.backoff_ms") gateway.backoff_base_ms = parse_int(key, value);
    else {
        throw Error(ErrorCode::Misconfiguration, "unknown config key '" + key + "'");
    }
}

void EngineConfig::validate() const {
    if (seed.top_k < 1) throw Error(ErrorCode::Misconfiguration, "seed.top_k must be >= 1");
    if (seed.max_topics < 1) throw Error(ErrorCode::Misconfiguration, "seed.max_topics must be >= 1");
    if (seed.max_seeds < 1) throw Error(ErrorCode::Misconfiguration, "seed.max_seeds must be >= 1");
    if (refine.tau < 0 || refine.tau > 100) {
        throw Error(ErrorCode::Misconfiguration, "refine.tau must be in [0,100]");
    }
    if (refine.alpha < 0.0 || refine.alpha > 1.0) {
        throw Error(ErrorCode::Misconfiguration, "refine.alpha must be in [0,1]");
    }
    if (refine.samples < 1) throw Error(ErrorCode::Misconfiguration, "refine.samples must be >= 1");
    if (refine.temperature < 0.0) {
        throw Error(ErrorCode::Misconfiguration, "refine.temperature must be >= 0");
    }
    if (agent.max_hops < 1) throw Error(ErrorCode::Misconfiguration, "agent.max_hops must be >= 1");
    if (agent.max_generates < 0) {
        throw Error(ErrorCode::Misconfiguration, "agent.max_generates must be >= 0");
    }
    gateway.validate();
}

EngineConfig EngineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open config '" + path + "'");
    }
    EngineConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::Misconfiguration,
                        "line " + std::to_string(line_no) + ": expected key = value");
        }
        config.apply(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    config.validate();
    return config;
}

} // namespace trail
