#include "trail/ingest.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace trail {

using nlohmann::json;

namespace {

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

FactRecord parse_fact(const json& record, std::size_t line_no) {
    static const char* kKnown[] = {"head",     "predicate",        "tail",
                                   "head_description", "tail_description", "edge_description"};
    for (const auto& [key, value] : record.items()) {
        bool known = false;
        for (const char* name : kKnown) {
            if (key == name) { known = true; break; }
        }
        if (!known) {
            throw Error(ErrorCode::MalformedRecord, "unknown field '" + key + "'", line_no);
        }
    }
    auto required = [&](const char* name) -> std::string {
        if (!record.contains(name) || !record[name].is_string()) {
            throw Error(ErrorCode::MalformedRecord,
                        std::string("missing field '") + name + "'", line_no);
        }
        const std::string value = trim(record[name].get<std::string>());
        if (value.empty()) {
            throw Error(ErrorCode::MalformedRecord, std::string("blank field '") + name + "'",
                        line_no);
        }
        return value;
    };
    auto optional = [&](const char* name) -> std::string {
        if (!record.contains(name)) return {};
        if (!record[name].is_string()) {
            throw Error(ErrorCode::MalformedRecord,
                        std::string("field '") + name + "' must be a string", line_no);
        }
        return record[name].get<std::string>();
    };
    FactRecord fact;
    fact.head_name = required("head");
    fact.predicate = required("predicate");
    fact.tail_name = required("tail");
    fact.head_description = optional("head_description");
    fact.tail_description = optional("tail_description");
    fact.edge_description = optional("edge_description");
    return fact;
}

} // namespace

IngestSummary build_truth_graph(const std::string& facts_path, KnowledgeGraph& graph) {
    std::ifstream in(facts_path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open facts file '" + facts_path + "'");
    }
    IngestSummary summary;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (trim(text).empty()) continue;
        json record = json::parse(text, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            throw Error(ErrorCode::MalformedRecord, "not a fact object", line_no);
        }
        const FactRecord fact = parse_fact(record, line_no);

        const EntityId head_id = slugify(fact.head_name);
        const EntityId tail_id = slugify(fact.tail_name);
        const EdgeId edge_id = head_id + "--" + slugify(fact.predicate) + "--" + tail_id;
        if (graph.has_edge(edge_id)) {
            ++summary.duplicates_skipped;
            continue;
        }
        auto ensure = [&](const EntityId& id, const std::string& name,
                          const std::string& description) {
            if (graph.has_entity(id)) return;
            Entity entity;
            entity.id = id;
            entity.name = name;
            entity.description = description;
            entity.provenance = {ProvenanceKind::Truth, std::nullopt, std::nullopt};
            entity.confidence = 100;
            graph.add_entity(std::move(entity));
            ++summary.entities;
        };
        ensure(head_id, fact.head_name, fact.head_description);
        ensure(tail_id, fact.tail_name, fact.tail_description);

        Edge edge;
        edge.id = edge_id;
        edge.head = head_id;
        edge.tail = tail_id;
        edge.predicate = fact.predicate;
        edge.description = fact.edge_description;
        edge.provenance = {ProvenanceKind::Truth, std::nullopt, std::nullopt};
        edge.confidence = 100;
        graph.add_edge(std::move(edge));
        ++summary.edges;
    }
    return summary;
}

std::string sidecar_path(const std::string& graph_path) { return graph_path + ".emb"; }

EmbedIndex load_sidecar_or_empty(const std::string& graph_path) {
    const std::string path = sidecar_path(graph_path);
    if (!std::filesystem::exists(path)) {
        return EmbedIndex(1);
    }
    return EmbedIndex::load(path);
}

IngestSummary ingest(const std::string& facts_path, const std::string& embeddings_path,
                     const std::string& out_graph_path) {
    KnowledgeGraph graph;
    IngestSummary summary = build_truth_graph(facts_path, graph);

    if (!embeddings_path.empty()) {
        const EmbedIndex raw = EmbedIndex::load(embeddings_path);
        EmbedIndex filtered(raw.dim());
        for (const auto& [id, vector] : raw.vectors()) {
            if (graph.has_entity(id)) {
                filtered.upsert(id, vector);
                ++summary.embeddings_attached;
            } else {
                ++summary.embeddings_skipped;
            }
        }
        filtered.save(sidecar_path(out_graph_path));
    }
    graph.save(out_graph_path);
    return summary;
}

} // namespace trail
