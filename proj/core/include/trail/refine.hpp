#pragma once

#include "trail/config.hpp"
#include "trail/kg_store.hpp"
#include "trail/llm_gateway.hpp"
#include "trail/session.hpp"

#include <string>
#include <vector>

namespace trail {

struct CandidateTriple {
    std::string head_name;
    std::string predicate;
    std::string tail_name;
    std::string head_description;
    std::string tail_description;
    std::string edge_description;
    std::string source_step;
};

struct ParsedConsensus {
    std::vector<CandidateTriple> triples;
    std::vector<std::string> warnings; // one per dropped object
};

// Consensus reply grammar: a JSON array of {"head", "relation", "tail",
// optional descriptions}. Objects with blank required fields are dropped
// with a warning; text with no parseable array throws MalformedConsensus.
ParsedConsensus parse_consensus(const std::string& text);

// round(alpha * judged + (1 - alpha) * old), half-up.
int combine_confidence(int old_score, int judged_score, double alpha);

struct InsertedElement {
    std::string id;
    std::string kind; // "entity" | "edge"
    int score = 0;
};

struct RejectedCandidate {
    CandidateTriple triple;
    int score = 0;
    std::string reason; // "below-threshold" | "duplicate" | "judge-failure" | "id-retired"
};

struct PrunedElement {
    std::string id;
    std::string kind;
    std::size_t removed_edges = 0;
};

struct RescoredElement {
    std::string id;
    int old_score = 0;
    int new_score = 0;
};

struct RefineOutcome {
    std::vector<InsertedElement> inserted;
    std::vector<RejectedCandidate> rejected;
    std::vector<PrunedElement> pruned;
    std::vector<RescoredElement> rescored;

    void merge(RefineOutcome other);
};

enum class ReevalKind { Kept, Pruned, CacheSkip, JudgeFailed };

struct ReevalDecision {
    ReevalKind kind = ReevalKind::CacheSkip;
    std::string element_kind; // "entity" | "edge"
    int old_score = 0;
    int judged_score = 0;
    int new_score = 0;
    std::size_t removed_edges = 0; // Pruned entities: incident edges removed
};

// Deterministic id for the edge of a candidate triple; the refine layer
// rejects a candidate whose edge id already exists (duplicate triple).
EdgeId triple_edge_id(const CandidateTriple& triple);

/// Dead-end insertion and expansion-time refinement over one graph.
/// handle_dead_end only ever adds elements; reevaluate_node may prune.
class RefineEngine {
public:
    RefineEngine(KnowledgeGraph& graph, Gateway& gateway, RefineConfig config);

    // Generate -> aggregate -> parse -> judge -> gate -> insert. Candidates
    // scoring strictly above tau enter the graph; everything else is
    // recorded as rejected. A malformed consensus yields an empty outcome.
    RefineOutcome handle_dead_end(SessionState& session, const std::string& query_context);

    // Once-per-session re-scoring of a Generated element; prunes when the
    // combined score falls strictly below tau. Judge failures leave the
    // element untouched and uncached.
    ReevalDecision reevaluate_node(const std::string& id, SessionState& session);

    const RefineConfig& config() const { return config_; }

private:
    int judge_candidate(const CandidateTriple& triple, const std::string& query_context,
                        SessionState& session, bool& judge_failed);
    void insert_candidate(const CandidateTriple& triple, int score, SessionState& session,
                          RefineOutcome& outcome);

    KnowledgeGraph& graph_;
    Gateway& gateway_;
    RefineConfig config_;
};

} // namespace trail
