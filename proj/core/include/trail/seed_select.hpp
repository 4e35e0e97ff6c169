#pragma once

#include "trail/config.hpp"
#include "trail/embed_index.hpp"
#include "trail/kg_store.hpp"
#include "trail/llm_gateway.hpp"

#include <string>
#include <utility>
#include <vector>

namespace trail {

struct TopicSet {
    std::vector<std::string> topics; // non-blank, case-insensitively deduplicated
    bool fallback_used = false;      // raw query stood in for unparsable topics
};

struct PooledCandidate {
    EntityId id;
    double score = 0.0; // best cosine across topics
    std::size_t degree = 0;
};

struct CandidatePool {
    // Per-topic ranked retrievals, in topic order.
    std::vector<std::pair<std::string, std::vector<std::pair<EntityId, double>>>> per_topic;
    // Union in canonical order (topic order, then rank), deduplicated with
    // each id keeping its maximum score.
    std::vector<PooledCandidate> pool;

    bool contains(const EntityId& id) const;
};

struct SeedSet {
    std::vector<EntityId> seeds;
    bool fallback_used = false;
    std::string fallback_reason;
};

struct SeedOutcome {
    TopicSet topics;
    CandidatePool pool;
    SeedSet seeds;
};

/// Multi-stage seed point selection: topic identification, Top-K entity
/// anchoring, then model-guided final choice. Every stage degrades rather
/// than fails: a non-empty graph always yields at least one seed.
class SeedPipeline {
public:
    SeedPipeline(const KnowledgeGraph& graph, const EmbedIndex& index, Gateway& gateway,
                 SeedConfig config);

    TopicSet identify_topics(const std::string& query);
    CandidatePool anchor_entities(const TopicSet& topics, int k);
    SeedSet select_seeds(const CandidatePool& pool, const TopicSet& topics,
                         const std::string& query);

    // Full pipeline, including the empty-index fallback. Throws SeedFailure
    // only when the graph itself is empty.
    SeedOutcome run(const std::string& query);

private:
    const KnowledgeGraph& graph_;
    const EmbedIndex& index_;
    Gateway& gateway_;
    SeedConfig config_;
};

// Split on ';' and newlines, trim, drop blanks, dedup case-insensitively.
std::vector<std::string> parse_topic_list(const std::string& reply);

} // namespace trail
