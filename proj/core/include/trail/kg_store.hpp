#pragma once

#include "trail/error.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace trail {

// Ids are caller-supplied stable strings (slug of the display name plus a
// disambiguating suffix when needed); the store never invents ids.
using EntityId = std::string;
using EdgeId = std::string;

enum class ProvenanceKind { Truth, Generated };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::Truth;
    // none iff kind == Truth
    std::optional<std::string> origin_session;
    std::optional<std::string> last_eval_session;
};

struct Entity {
    EntityId id;
    std::string name;
    std::string description;
    Provenance provenance;
    int confidence = 100; // pinned at 100 for Truth, judge-assigned otherwise
};

// Edges are stored directed (head -> tail); adjacency indexes both endpoints
// and traversal treats them as bidirectional context.
struct Edge {
    EdgeId id;
    EntityId head;
    EntityId tail;
    std::string predicate;
    std::string description;
    Provenance provenance;
    int confidence = 100;
};

struct GraphStats {
    std::size_t entities = 0;
    std::size_t edges = 0;
    std::size_t generated_entities = 0;
    std::size_t generated_edges = 0;

    bool operator==(const GraphStats&) const = default;
};

/// Typed in-memory store for the graph with provenance and confidence on
/// every element. Mutations keep the adjacency index exactly consistent
/// with the edge map; no operation leaves a dangling edge behind.
///
/// Concurrency: single writer, multiple readers. Mutations must be
/// serialized by the caller; const reads may run concurrently between them.
class KnowledgeGraph {
public:
    EntityId add_entity(Entity entity);
    EdgeId add_edge(Edge edge);

    const Entity& entity(const EntityId& id) const;
    const Edge& edge(const EdgeId& id) const;
    bool has_entity(const EntityId& id) const { return entities_.count(id) != 0; }
    bool has_edge(const EdgeId& id) const { return edges_.count(id) != 0; }

    // True when the id is neither in use nor retired by a prior removal.
    bool id_available(const std::string& id) const {
        return !id.empty() && !entities_.count(id) && !edges_.count(id) &&
               !retired_ids_.count(id);
    }

    // Every incident edge paired with the opposite endpoint, ascending EdgeId.
    std::vector<std::pair<const Edge*, const Entity*>> neighbors(const EntityId& id) const;

    std::size_t degree(const EntityId& id) const;

    // Removes the entity and all incident edges; returns how many edges went.
    std::size_t remove_entity(const EntityId& id);
    void remove_edge(const EdgeId& id);

    // Generated elements only; Truth confidence is immutable.
    void set_confidence(const std::string& id, int value);

    void set_description(const std::string& id, const std::string& description);
    void set_last_eval_session(const std::string& id, const std::string& session_id);

    GraphStats stats() const;

    const std::map<EntityId, Entity>& entities() const { return entities_; }
    const std::map<EdgeId, Edge>& edges() const { return edges_; }
    const std::map<EntityId, std::set<EdgeId>>& adjacency() const { return adjacency_; }

    // Line-delimited record file, entities first, then edges (see save/load
    // format in the README). save() writes to a temp file and renames so a
    // failed write never clobbers the previous graph.
    void save(const std::string& path) const;
    static KnowledgeGraph load(const std::string& path);

    // Serialized record for one element, exactly as save() writes it.
    static std::string entity_record(const Entity& entity);
    static std::string edge_record(const Edge& edge);

private:
    void check_confidence_invariant(const Provenance& provenance, int confidence) const;
    void check_id_free(const std::string& id) const;

    std::map<EntityId, Entity> entities_;
    std::map<EdgeId, Edge> edges_;
    std::map<EntityId, std::set<EdgeId>> adjacency_;
    // Ids are never reused after removal within one process lifetime.
    std::set<std::string> retired_ids_;
};

// Lowercased alphanumeric slug; runs of other characters collapse to '-'.
std::string slugify(const std::string& text);

} // namespace trail
