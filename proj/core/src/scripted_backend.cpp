#include "trail/scripted_backend.hpp"

#include <json.hpp>

#include <fstream>

namespace trail {

using nlohmann::json;

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open scenario '" + path + "'");
    }
    ScriptedBackend backend;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.empty()) continue;
        json record = json::parse(text, nullptr, false);
        if (record.is_discarded() || !record.is_object() || !record.contains("step") ||
            !record["step"].is_string() || !record.contains("role") ||
            !record["role"].is_string() || !record.contains("responses") ||
            !record["responses"].is_array()) {
            throw Error(ErrorCode::MalformedRecord,
                        "expected {\"step\", \"role\", \"responses\": [..]}", line_no);
        }
        const auto role = role_from_name(record["role"].get<std::string>());
        if (!role) {
            throw Error(ErrorCode::MalformedRecord,
                        "unknown role '" + record["role"].get<std::string>() + "'", line_no);
        }
        std::vector<std::string> responses;
        for (const auto& r : record["responses"]) {
            if (!r.is_string()) {
                throw Error(ErrorCode::MalformedRecord, "responses must be strings", line_no);
            }
            responses.push_back(r.get<std::string>());
        }
        backend.add(record["step"].get<std::string>(), *role, std::move(responses));
    }
    return backend;
}

void ScriptedBackend::add(const std::string& step, ModelRole role,
                          std::vector<std::string> responses) {
    auto& queue = script_[{step, role}];
    for (auto& response : responses) {
        queue.push_back(std::move(response));
    }
}

std::vector<std::string> ScriptedBackend::complete(const CompletionRequest& request) {
    auto it = script_.find({request.step, request.role});
    const std::size_t available = it == script_.end() ? 0 : it->second.size();
    if (available < static_cast<std::size_t>(request.sample_count)) {
        throw Error(ErrorCode::ScriptExhausted,
                    "step '" + request.step + "' role " + role_name(request.role) + " has " +
                        std::to_string(available) + " scripted responses, need " +
                        std::to_string(request.sample_count));
    }
    std::vector<std::string> responses;
    responses.reserve(static_cast<std::size_t>(request.sample_count));
    for (int i = 0; i < request.sample_count; ++i) {
        responses.push_back(std::move(it->second.front()));
        it->second.pop_front();
    }
    return responses;
}

std::size_t ScriptedBackend::remaining(const std::string& step, ModelRole role) const {
    auto it = script_.find({step, role});
    return it == script_.end() ? 0 : it->second.size();
}

std::size_t ScriptedBackend::remaining() const {
    std::size_t total = 0;
    for (const auto& [key, queue] : script_) total += queue.size();
    return total;
}

} // namespace trail
