#pragma once

#include "trail/embed_index.hpp"
#include "trail/kg_store.hpp"

#include <optional>
#include <string>

namespace trail {

struct FactRecord {
    std::string head_name;
    std::string predicate;
    std::string tail_name;
    std::string head_description;
    std::string tail_description;
    std::string edge_description;
};

struct IngestSummary {
    std::size_t entities = 0;
    std::size_t edges = 0;
    std::size_t duplicates_skipped = 0;
    std::size_t embeddings_attached = 0;
    std::size_t embeddings_skipped = 0; // sidecar ids with no graph entity
};

// Builds a truth graph from a line-delimited fact file. Entities are
// deduplicated by name slug; duplicate triples are skipped with a warning
// count. Everything enters at confidence 100.
IngestSummary build_truth_graph(const std::string& facts_path, KnowledgeGraph& graph);

// Full ingest: facts -> graph file at out_graph_path, plus the embedding
// sidecar (filtered to graph entities) at out_graph_path + ".emb" when an
// embeddings file is given.
IngestSummary ingest(const std::string& facts_path, const std::string& embeddings_path,
                     const std::string& out_graph_path);

// Sidecar path convention for a graph file.
std::string sidecar_path(const std::string& graph_path);

// Loads the sidecar next to a graph file; empty index (dim 1) when absent.
EmbedIndex load_sidecar_or_empty(const std::string& graph_path);

} // namespace trail
