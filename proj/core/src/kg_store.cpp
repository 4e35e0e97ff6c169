#include "trail/kg_store.hpp"

#include <json.hpp>

#include <cctype>
#include <filesystem>
#include <fstream>

namespace trail {

using nlohmann::json;

namespace {

const char* kind_name(ProvenanceKind kind) {
    return kind == ProvenanceKind::Truth ? "truth" : "generated";
}

json session_or_null(const std::optional<std::string>& session) {
    if (session) return *session;
    return nullptr;
}

json element_base(const std::string& id, const std::string& description,
                  const Provenance& provenance, int confidence) {
    json record;
    record["id"] = id;
    record["description"] = description;
    record["kind"] = kind_name(provenance.kind);
    record["confidence"] = confidence;
    record["origin_session"] = session_or_null(provenance.origin_session);
    record["last_eval_session"] = session_or_null(provenance.last_eval_session);
    return record;
}

} // namespace

void KnowledgeGraph::check_confidence_invariant(const Provenance& provenance,
                                                int confidence) const {
    if (confidence < 0 || confidence > 100) {
        throw Error(ErrorCode::InvariantViolation,
                    "confidence " + std::to_string(confidence) + " outside [0,100]");
    }
    if (provenance.kind == ProvenanceKind::Truth) {
        if (confidence != 100) {
            throw Error(ErrorCode::InvariantViolation,
                        "truth element must have confidence 100, got " +
                            std::to_string(confidence));
        }
        if (provenance.origin_session || provenance.last_eval_session) {
            throw Error(ErrorCode::InvariantViolation,
                        "truth element carries a session marker");
        }
    } else if (!provenance.origin_session) {
        throw Error(ErrorCode::InvariantViolation,
                    "generated element without an origin session");
    }
}

void KnowledgeGraph::check_id_free(const std::string& id) const {
    if (id.empty()) {
        throw Error(ErrorCode::InvariantViolation, "empty id");
    }
    if (entities_.count(id) || edges_.count(id)) {
        throw Error(ErrorCode::DuplicateId, "id '" + id + "' already present");
    }
    if (retired_ids_.count(id)) {
        throw Error(ErrorCode::DuplicateId, "id '" + id + "' was removed and may not be reused");
    }
}

EntityId KnowledgeGraph::add_entity(Entity entity) {
    check_id_free(entity.id);
    check_confidence_invariant(entity.provenance, entity.confidence);
    EntityId id = entity.id;
    adjacency_[id];
    entities_.emplace(id, std::move(entity));
    return id;
}

EdgeId KnowledgeGraph::add_edge(Edge edge) {
    check_id_free(edge.id);
    check_confidence_invariant(edge.provenance, edge.confidence);
    if (!entities_.count(edge.head)) {
        throw Error(ErrorCode::MissingEndpoint, "head '" + edge.head + "' not in graph");
    }
    if (!entities_.count(edge.tail)) {
        throw Error(ErrorCode::MissingEndpoint, "tail '" + edge.tail + "' not in graph");
    }
    EdgeId id = edge.id;
    adjacency_[edge.head].insert(id);
    adjacency_[edge.tail].insert(id);
    edges_.emplace(id, std::move(edge));
    return id;
}

const Entity& KnowledgeGraph::entity(const EntityId& id) const {
    auto it = entities_.find(id);
    if (it == entities_.end()) {
        throw Error(ErrorCode::UnknownEntity, "'" + id + "'");
    }
    return it->second;
}

const Edge& KnowledgeGraph::edge(const EdgeId& id) const {
    auto it = edges_.find(id);
    if (it == edges_.end()) {
        throw Error(ErrorCode::UnknownEdge, "'" + id + "'");
    }
    return it->second;
}

std::vector<std::pair<const Edge*, const Entity*>>
KnowledgeGraph::neighbors(const EntityId& id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) {
        throw Error(ErrorCode::UnknownEntity, "'" + id + "'");
    }
    std::vector<std::pair<const Edge*, const Entity*>> result;
    result.reserve(it->second.size());
    for (const EdgeId& edge_id : it->second) { // std::set: ascending EdgeId
        const Edge& e = edges_.at(edge_id);
        const EntityId& far = (e.head == id) ? e.tail : e.head;
        result.emplace_back(&e, &entities_.at(far));
    }
    return result;
}

std::size_t KnowledgeGraph::degree(const EntityId& id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) {
        throw Error(ErrorCode::UnknownEntity, "'" + id + "'");
    }
    return it->second.size();
}

std::size_t KnowledgeGraph::remove_entity(const EntityId& id) {
    auto it = entities_.find(id);
    if (it == entities_.end()) {
        throw Error(ErrorCode::UnknownEntity, "'" + id + "'");
    }
    // Copy: remove_edge mutates the adjacency set we iterate.
    std::set<EdgeId> incident = adjacency_.at(id);
    for (const EdgeId& edge_id : incident) {
        remove_edge(edge_id);
    }
    adjacency_.erase(id);
    entities_.erase(it);
    retired_ids_.insert(id);
    return incident.size();
}

void KnowledgeGraph::remove_edge(const EdgeId& id) {
    auto it = edges_.find(id);
    if (it == edges_.end()) {
        throw Error(ErrorCode::UnknownEdge, "'" + id + "'");
    }
    adjacency_.at(it->second.head).erase(id);
    adjacency_.at(it->second.tail).erase(id);
    edges_.erase(it);
    retired_ids_.insert(id);
}

void KnowledgeGraph::set_confidence(const std::string& id, int value) {
    if (value < 0 || value > 100) {
        throw Error(ErrorCode::InvariantViolation,
                    "confidence " + std::to_string(value) + " outside [0,100]");
    }
    if (auto it = entities_.find(id); it != entities_.end()) {
        if (it->second.provenance.kind == ProvenanceKind::Truth) {
            throw Error(ErrorCode::TruthImmutable, "entity '" + id + "'");
        }
        it->second.confidence = value;
        return;
    }
    if (auto it = edges_.find(id); it != edges_.end()) {
        if (it->second.provenance.kind == ProvenanceKind::Truth) {
            throw Error(ErrorCode::TruthImmutable, "edge '" + id + "'");
        }
        it->second.confidence = value;
        return;
    }
    throw Error(ErrorCode::UnknownElement, "'" + id + "'");
}

void KnowledgeGraph::set_description(const std::string& id, const std::string& description) {
    if (auto it = entities_.find(id); it != entities_.end()) {
        if (it->second.provenance.kind == ProvenanceKind::Truth) {
            throw Error(ErrorCode::TruthImmutable, "entity '" + id + "'");
        }
        it->second.description = description;
        return;
    }
    if (auto it = edges_.find(id); it != edges_.end()) {
        if (it->second.provenance.kind == ProvenanceKind::Truth) {
            throw Error(ErrorCode::TruthImmutable, "edge '" + id + "'");
        }
        it->second.description = description;
        return;
    }
    throw Error(ErrorCode::UnknownElement, "'" + id + "'");
}

void KnowledgeGraph::set_last_eval_session(const std::string& id, const std::string& session_id) {
    if (auto it = entities_.find(id); it != entities_.end()) {
        if (it->second.provenance.kind == ProvenanceKind::Truth) {
            throw Error(ErrorCode::TruthImmutable, "entity '" + id + "'");
        }
        it->second.provenance.last_eval_session = session_id;
        return;
    }
    if (auto it = edges_.find(id); it != edges_.end()) {
        if (it->second.provenance.kind == ProvenanceKind::Truth) {
            throw Error(ErrorCode::TruthImmutable, "edge '" + id + "'");
        }
        it->second.provenance.last_eval_session = session_id;
        return;
    }
    throw Error(ErrorCode::UnknownElement, "'" + id + "'");
}

GraphStats KnowledgeGraph::stats() const {
    GraphStats s;
    s.entities = entities_.size();
    s.edges = edges_.size();
    for (const auto& [id, e] : entities_) {
        if (e.provenance.kind == ProvenanceKind::Generated) ++s.generated_entities;
    }
    for (const auto& [id, e] : edges_) {
        if (e.provenance.kind == ProvenanceKind::Generated) ++s.generated_edges;
    }
    return s;
}

std::string KnowledgeGraph::entity_record(const Entity& entity) {
    json record = element_base(entity.id, entity.description, entity.provenance,
                               entity.confidence);
    record["type"] = "entity";
    record["name"] = entity.name;
    return record.dump();
}

std::string KnowledgeGraph::edge_record(const Edge& edge) {
    json record = element_base(edge.id, edge.description, edge.provenance, edge.confidence);
    record["type"] = "edge";
    record["predicate"] = edge.predicate;
    record["head"] = edge.head;
    record["tail"] = edge.tail;
    return record.dump();
}

void KnowledgeGraph::save(const std::string& path) const {
    namespace fs = std::filesystem;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::IoFailure, "cannot open '" + tmp + "' for writing");
        }
        for (const auto& [id, entity] : entities_) {
            out << entity_record(entity) << '\n';
        }
        for (const auto& [id, edge] : edges_) {
            out << edge_record(edge) << '\n';
        }
        if (!out.good()) {
            throw Error(ErrorCode::IoFailure, "write failed for '" + tmp + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw Error(ErrorCode::IoFailure,
                    "rename '" + tmp + "' -> '" + path + "': " + ec.message());
    }
}

namespace {

struct FieldSpec {
    const char* name;
    bool required;
};

void check_fields(const json& record, std::initializer_list<FieldSpec> fields,
                  std::size_t line) {
    for (const auto& field : fields) {
        if (field.required && !record.contains(field.name)) {
            throw Error(ErrorCode::MalformedRecord,
                        std::string("missing field '") + field.name + "'", line);
        }
    }
    for (const auto& [key, value] : record.items()) {
        bool known = false;
        for (const auto& field : fields) {
            if (key == field.name) { known = true; break; }
        }
        if (!known) {
            throw Error(ErrorCode::MalformedRecord, "unknown field '" + key + "'", line);
        }
    }
}

std::string require_string(const json& record, const char* field, std::size_t line) {
    const auto& value = record.at(field);
    if (!value.is_string()) {
        throw Error(ErrorCode::MalformedRecord,
                    std::string("field '") + field + "' must be a string", line);
    }
    return value.get<std::string>();
}

std::optional<std::string> optional_session(const json& record, const char* field,
                                            std::size_t line) {
    const auto& value = record.at(field);
    if (value.is_null()) return std::nullopt;
    if (!value.is_string()) {
        throw Error(ErrorCode::MalformedRecord,
                    std::string("field '") + field + "' must be a string or null", line);
    }
    return value.get<std::string>();
}

Provenance parse_provenance(const json& record, std::size_t line) {
    Provenance p;
    const std::string kind = require_string(record, "kind", line);
    if (kind == "truth") {
        p.kind = ProvenanceKind::Truth;
    } else if (kind == "generated") {
        p.kind = ProvenanceKind::Generated;
    } else {
        throw Error(ErrorCode::MalformedRecord, "kind must be 'truth' or 'generated'", line);
    }
    p.origin_session = optional_session(record, "origin_session", line);
    p.last_eval_session = optional_session(record, "last_eval_session", line);
    return p;
}

int parse_confidence(const json& record, std::size_t line) {
    const auto& value = record.at("confidence");
    if (!value.is_number_integer()) {
        throw Error(ErrorCode::MalformedRecord, "confidence must be an integer", line);
    }
    return value.get<int>();
}

} // namespace

KnowledgeGraph KnowledgeGraph::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
    }
    KnowledgeGraph graph;
    std::string text;
    std::size_t line_no = 0;
    bool seen_edge = false;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.empty()) {
            throw Error(ErrorCode::MalformedRecord, "blank line", line_no);
        }
        json record = json::parse(text, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            throw Error(ErrorCode::MalformedRecord, "not a record object", line_no);
        }
        if (!record.contains("type") || !record["type"].is_string()) {
            throw Error(ErrorCode::MalformedRecord, "missing 'type'", line_no);
        }
        const std::string type = record["type"].get<std::string>();
        try {
            if (type == "entity") {
                if (seen_edge) {
                    throw Error(ErrorCode::MalformedRecord,
                                "entity record after first edge record", line_no);
                }
                check_fields(record,
                             {{"type", true}, {"id", true}, {"name", true},
                              {"description", true}, {"kind", true}, {"confidence", true},
                              {"origin_session", true}, {"last_eval_session", true}},
                             line_no);
                Entity entity;
                entity.id = require_string(record, "id", line_no);
                entity.name = require_string(record, "name", line_no);
                entity.description = require_string(record, "description", line_no);
                entity.provenance = parse_provenance(record, line_no);
                entity.confidence = parse_confidence(record, line_no);
                graph.add_entity(std::move(entity));
            } else if (type == "edge") {
                seen_edge = true;
                check_fields(record,
                             {{"type", true}, {"id", true}, {"predicate", true},
                              {"head", true}, {"tail", true}, {"description", true},
                              {"kind", true}, {"confidence", true},
                              {"origin_session", true}, {"last_eval_session", true}},
                             line_no);
                Edge edge;
                edge.id = require_string(record, "id", line_no);
                edge.predicate = require_string(record, "predicate", line_no);
                edge.head = require_string(record, "head", line_no);
                edge.tail = require_string(record, "tail", line_no);
                edge.description = require_string(record, "description", line_no);
                edge.provenance = parse_provenance(record, line_no);
                edge.confidence = parse_confidence(record, line_no);
                graph.add_edge(std::move(edge));
            } else {
                throw Error(ErrorCode::MalformedRecord, "type must be 'entity' or 'edge'",
                            line_no);
            }
        } catch (const Error& e) {
            if (e.line()) throw;
            // Structural violations surface as malformed records with the line.
            throw Error(ErrorCode::MalformedRecord, e.what(), line_no);
        }
    }
    return graph;
}

std::string slugify(const std::string& text) {
    std::string slug;
    slug.reserve(text.size());
    bool pending_dash = false;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            if (pending_dash && !slug.empty()) slug.push_back('-');
            pending_dash = false;
            slug.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_dash = true;
        }
    }
    if (slug.empty()) slug = "unnamed";
    return slug;
}

} // namespace trail
