#pragma once

#include "trail/kg_store.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>

namespace trail::testing {

// Full-rebuild integrity oracle: recomputes adjacency from the edge map and
// compares, checks endpoint existence and the truth-confidence rule.
// Returns a description of the first violation, or nullopt when clean.
inline std::optional<std::string> integrity_violation(const KnowledgeGraph& graph) {
    std::map<EntityId, std::set<EdgeId>> rebuilt;
    for (const auto& [id, entity] : graph.entities()) {
        rebuilt[id]; // isolated entities still get an (empty) adjacency slot
        if (entity.provenance.kind == ProvenanceKind::Truth && entity.confidence != 100) {
            return "truth entity '" + id + "' has confidence " +
                   std::to_string(entity.confidence);
        }
    }
    for (const auto& [id, edge] : graph.edges()) {
        if (!graph.has_entity(edge.head)) {
            return "edge '" + id + "' has dangling head '" + edge.head + "'";
        }
        if (!graph.has_entity(edge.tail)) {
            return "edge '" + id + "' has dangling tail '" + edge.tail + "'";
        }
        if (edge.provenance.kind == ProvenanceKind::Truth && edge.confidence != 100) {
            return "truth edge '" + id + "' has confidence " + std::to_string(edge.confidence);
        }
        rebuilt[edge.head].insert(id);
        rebuilt[edge.tail].insert(id);
    }
    if (rebuilt != graph.adjacency()) {
        return "adjacency differs from full rebuild";
    }
    return std::nullopt;
}

inline bool graphs_equal(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    if (a.entities().size() != b.entities().size()) return false;
    if (a.edges().size() != b.edges().size()) return false;
    for (const auto& [id, ea] : a.entities()) {
        if (!b.has_entity(id)) return false;
        if (KnowledgeGraph::entity_record(ea) !=
            KnowledgeGraph::entity_record(b.entity(id))) {
            return false;
        }
    }
    for (const auto& [id, ea] : a.edges()) {
        if (!b.has_edge(id)) return false;
        if (KnowledgeGraph::edge_record(ea) != KnowledgeGraph::edge_record(b.edge(id))) {
            return false;
        }
    }
    return a.adjacency() == b.adjacency();
}

} // namespace trail::testing
