#pragma once

#include "trail/config.hpp"
#include "trail/embed_index.hpp"
#include "trail/kg_store.hpp"
#include "trail/llm_gateway.hpp"
#include "trail/refine.hpp"
#include "trail/seed_select.hpp"
#include "trail/session.hpp"

#include <array>
#include <string>
#include <vector>

namespace trail {

struct AgentAction {
    enum class Kind { Search, Generate, Answer };
    Kind kind = Kind::Answer;
    std::vector<EdgeId> selected; // Search only
    std::string draft;            // Answer: text after the keyword, if any
    bool forced = false;          // decided structurally, without a model call
};

struct AnswerResult {
    std::string answer; // "ABSTAIN" when the reply never parsed
    bool abstained = false;
    std::vector<std::size_t> citations; // 1-based indices into evidence
    std::vector<std::array<std::string, 3>> supporting_facts; // (head, predicate, tail)
    RefineOutcome kg_delta;
    std::string trace_path;
};

// One offered traversal: an edge from the frontier to an unvisited endpoint.
struct MenuEntry {
    EdgeId edge_id;
    EntityId far_id;
    std::string line; // rendered menu row
};

/// The per-query reasoning state machine: seed, then iterate
/// decide -> (search | generate) until an answer, re-evaluating Generated
/// elements on traversal and hypothesizing facts at dead-ends.
class AgentLoop {
public:
    AgentLoop(KnowledgeGraph& graph, const EmbedIndex& index, Gateway& gateway,
              EngineConfig config);

    // Runs the whole session. trace_dir may be empty to skip writing the
    // trace file (the in-memory trace is still returned via the session).
    AnswerResult run_query(const std::string& session_id, const std::string& query,
                           const std::string& trace_dir);

    // Steps below are public for direct exercise in tests.
    SessionState start_session(const std::string& session_id, const std::string& query);
    std::vector<MenuEntry> unvisited_menu(const SessionState& state) const;
    AgentAction decide_action(SessionState& state);
    void apply_search(SessionState& state, const std::vector<EdgeId>& selected,
                      RefineOutcome& delta);
    AnswerResult synthesize_answer(SessionState& state);

    RefineEngine& refine() { return refine_; }

private:
    AgentAction parse_decide_reply(const std::string& reply) const;
    std::string decide_prompt(const SessionState& state,
                              const std::vector<MenuEntry>& menu) const;

    KnowledgeGraph& graph_;
    const EmbedIndex& index_;
    Gateway& gateway_;
    EngineConfig config_;
    RefineEngine refine_;
};

// Answer reply parsing, exposed for tests: extracts the answer text and the
// cited evidence indices from replies like "B, citing [1,3]" or
// "Answer: aspirin [2]". Returns false when no answer text is present.
bool parse_answer_reply(const std::string& reply, std::string& answer,
                        std::vector<std::size_t>& citations);

} // namespace trail
