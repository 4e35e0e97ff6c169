#pragma once

#include "trail/kg_store.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace trail {

// Event kinds: seed, decide, search, generate, judge, insert, prune,
// cache_skip, answer. Payloads are deterministic (no clocks, no paths) so
// scripted traces compare byte-for-byte across runs.
struct TraceEvent {
    std::string kind;
    std::size_t step = 0;
    nlohmann::json payload;
};

// One gathered fact. Names are snapshotted at append time; the underlying
// elements may be pruned later in the session and the evidence still stands
// (flagged in the prune trace event, never retracted).
struct EvidenceItem {
    EdgeId edge_id;
    EntityId entity_id; // far endpoint entered through the edge
    std::string head_name;
    std::string predicate;
    std::string tail_name;
    std::string text; // rendered "head --predicate--> tail" line
};

/// Per-query reasoning state. Fresh at session start, discarded at session
/// end; nothing here outlives the query except the KG itself.
struct SessionState {
    std::string session_id;
    std::string query;
    std::set<EntityId> frontier;
    std::set<EntityId> visited_entities;
    std::set<EdgeId> traversed_edges;
    std::vector<EvidenceItem> evidence;
    std::set<std::string> rescore_cache; // entity and edge ids, once per session
    std::vector<TraceEvent> trace;
    int hop_count = 0;
    int generates_used = 0;

    void record(std::string kind, nlohmann::json payload);

    // Line-delimited {"session_id", "step", "event", "payload"} records.
    void write_trace(const std::string& path) const;
};

// Numbered evidence block for prompts; "(none)" when empty.
std::string render_evidence(const SessionState& state);

} // namespace trail
