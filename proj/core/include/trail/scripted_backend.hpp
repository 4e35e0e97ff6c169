#pragma once

#include "trail/llm_gateway.hpp"

#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace trail {

/// Deterministic backend replaying a scenario: per (step, role) label a
/// queue of canned responses, consumed strictly in order. Running past the
/// script throws ScriptExhausted, which is a test-scenario bug, never
/// retried.
class ScriptedBackend : public ModelBackend {
public:
    ScriptedBackend() = default;

    // Line-delimited records {"step": label, "role": name, "responses": [texts]}.
    static ScriptedBackend from_file(const std::string& path);

    void add(const std::string& step, ModelRole role, std::vector<std::string> responses);

    std::vector<std::string> complete(const CompletionRequest& request) override;
    std::string id() const override { return "scripted"; }

    std::size_t remaining(const std::string& step, ModelRole role) const;
    std::size_t remaining() const;

private:
    using Key = std::pair<std::string, ModelRole>;
    std::map<Key, std::deque<std::string>> script_;
};

} // namespace trail
