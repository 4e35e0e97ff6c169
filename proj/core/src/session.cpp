#include "trail/session.hpp"

#include <filesystem>
#include <fstream>

namespace trail {

using nlohmann::json;

void SessionState::record(std::string kind, json payload) {
    TraceEvent event;
    event.kind = std::move(kind);
    event.step = trace.size();
    event.payload = std::move(payload);
    trace.push_back(std::move(event));
}

void SessionState::write_trace(const std::string& path) const {
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot open trace '" + path + "' for writing");
    }
    for (const auto& event : trace) {
        json record;
        record["session_id"] = session_id;
        record["step"] = event.step;
        record["event"] = event.kind;
        record["payload"] = event.payload;
        out << record.dump() << '\n';
    }
    if (!out.good()) {
        throw Error(ErrorCode::IoFailure, "write failed for trace '" + path + "'");
    }
}

std::string render_evidence(const SessionState& state) {
    if (state.evidence.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < state.evidence.size(); ++i) {
        out += "[" + std::to_string(i + 1) + "] " + state.evidence[i].text;
        if (i + 1 < state.evidence.size()) out += '\n';
    }
    return out;
}

} // namespace trail
