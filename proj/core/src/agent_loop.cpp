#include "trail/agent_loop.hpp"

#include "trail/prompts.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <sstream>

namespace trail {

using nlohmann::json;

namespace {

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

std::string upper(std::string text) {
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return text;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == ';') {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::string evidence_line(const KnowledgeGraph& graph, const Edge& edge) {
    std::string line = graph.entity(edge.head).name + " --" + edge.predicate + "--> " +
                       graph.entity(edge.tail).name;
    if (!edge.description.empty()) line += " (" + edge.description + ")";
    return line;
}

} // namespace

bool parse_answer_reply(const std::string& reply, std::string& answer,
                        std::vector<std::size_t>& citations) {
    std::string text = reply;

    // First bracket group holding only digits, commas and spaces = citations.
    citations.clear();
    std::size_t open = text.find('[');
    while (open != std::string::npos) {
        const std::size_t close = text.find(']', open + 1);
        if (close == std::string::npos) break;
        const std::string body = text.substr(open + 1, close - open - 1);
        if (body.find_first_not_of("0123456789, \t") == std::string::npos &&
            body.find_first_of("0123456789") != std::string::npos) {
            std::stringstream in(body);
            std::string piece;
            while (std::getline(in, piece, ',')) {
                const std::string digits = trim(piece);
                if (!digits.empty()) citations.push_back(std::stoull(digits));
            }
            text.erase(open, close - open + 1);
            break;
        }
        open = text.find('[', open + 1);
    }

    // Prefer the "Answer:" line; otherwise the first non-empty line.
    std::string candidate;
    {
        std::istringstream lines(text);
        std::string line;
        std::string first_nonempty;
        while (std::getline(lines, line)) {
            const std::string stripped = trim(line);
            if (stripped.empty()) continue;
            if (first_nonempty.empty()) first_nonempty = stripped;
            const std::string up = upper(stripped);
            if (up.rfind("ANSWER", 0) == 0) {
                const std::size_t colon = stripped.find(':');
                candidate = colon == std::string::npos ? "" : trim(stripped.substr(colon + 1));
                break;
            }
        }
        if (candidate.empty()) candidate = first_nonempty;
    }
    while (!candidate.empty() &&
           (candidate.back() == '.' || candidate.back() == ',' || candidate.back() == ':')) {
        candidate.pop_back();
    }
    candidate = trim(candidate);
    if (candidate.empty()) return false;

    // Single-letter first token wins: "B, citing" -> "B".
    const auto tokens = tokenize(candidate);
    if (!tokens.empty() && tokens.front().size() == 1 &&
        std::isalpha(static_cast<unsigned char>(tokens.front()[0]))) {
        answer = upper(tokens.front());
    } else {
        answer = candidate;
    }
    return true;
}

AgentLoop::AgentLoop(KnowledgeGraph& graph, const EmbedIndex& index, Gateway& gateway,
                     EngineConfig config)
    : graph_(graph),
      index_(index),
      gateway_(gateway),
      config_(std::move(config)),
      refine_(graph, gateway, config_.refine) {}

SessionState AgentLoop::start_session(const std::string& session_id,
                                      const std::string& query) {
    SessionState state;
    state.session_id = session_id;
    state.query = query;

    SeedPipeline pipeline(graph_, index_, gateway_, config_.seed);
    const SeedOutcome outcome = pipeline.run(query);

    json pool_ids = json::array();
    for (const auto& candidate : outcome.pool.pool) pool_ids.push_back(candidate.id);
    state.record("seed", json{{"topics", outcome.topics.topics},
                              {"topics_fallback", outcome.topics.fallback_used},
                              {"pool", pool_ids},
                              {"seeds", outcome.seeds.seeds},
                              {"seeds_fallback", outcome.seeds.fallback_used},
                              {"fallback_reason", outcome.seeds.fallback_reason}});

    for (const EntityId& seed : outcome.seeds.seeds) {
        state.frontier.insert(seed);
        state.visited_entities.insert(seed);
    }
    return state;
}

std::vector<MenuEntry> AgentLoop::unvisited_menu(const SessionState& state) const {
    std::vector<MenuEntry> menu;
    std::set<EdgeId> offered;
    for (const EntityId& id : state.frontier) {
        if (!graph_.has_entity(id)) continue; // pruned under our feet
        for (const auto& [edge, far] : graph_.neighbors(id)) {
            if (state.visited_entities.count(far->id)) continue;
            if (!offered.insert(edge->id).second) continue;
            MenuEntry entry;
            entry.edge_id = edge->id;
            entry.far_id = far->id;
            std::string snippet = far->description.substr(0, 80);
            entry.line = edge->id + " | " + graph_.entity(edge->head).name + " --" +
                         edge->predicate + "--> " + graph_.entity(edge->tail).name + " | " +
                         snippet;
            menu.push_back(std::move(entry));
        }
    }
    std::sort(menu.begin(), menu.end(),
              [](const MenuEntry& a, const MenuEntry& b) { return a.edge_id < b.edge_id; });
    return menu;
}

std::string AgentLoop::decide_prompt(const SessionState& state,
                                     const std::vector<MenuEntry>& menu) const {
    std::string menu_lines;
    for (const auto& entry : menu) menu_lines += entry.line + '\n';
    return prompts::render(prompts::next_edge_selection(),
                           {{"query", state.query},
                            {"evidence", render_evidence(state)},
                            {"menu", menu_lines}});
}

AgentAction AgentLoop::parse_decide_reply(const std::string& reply) const {
    const std::string up = upper(reply);
    const std::size_t search_pos = up.find("SEARCH");
    const std::size_t generate_pos = up.find("GENERATE");
    const std::size_t answer_pos = up.find("ANSWER");

    std::size_t best = std::string::npos;
    AgentAction action;
    auto consider = [&](std::size_t pos, AgentAction::Kind kind) {
        if (pos == std::string::npos) return;
        if (best == std::string::npos || pos < best) {
            best = pos;
            action.kind = kind;
        }
    };
    consider(search_pos, AgentAction::Kind::Search);
    consider(generate_pos, AgentAction::Kind::Generate);
    consider(answer_pos, AgentAction::Kind::Answer);
    if (best == std::string::npos) {
        throw Error(ErrorCode::UnparsableReply, "no SEARCH/GENERATE/ANSWER keyword");
    }
    if (action.kind == AgentAction::Kind::Search) {
        const auto tokens = tokenize(reply.substr(best + 6));
        for (const auto& token : tokens) {
            if (std::find(action.selected.begin(), action.selected.end(), token) ==
                action.selected.end()) {
                action.selected.push_back(token);
            }
        }
        if (action.selected.empty()) {
            throw Error(ErrorCode::UnparsableReply, "SEARCH without edge ids");
        }
    } else if (action.kind == AgentAction::Kind::Answer) {
        action.draft = trim(reply.substr(best + 6));
        if (!action.draft.empty() && action.draft.front() == ':') {
            action.draft = trim(action.draft.substr(1));
        }
    }
    return action;
}

AgentAction AgentLoop::decide_action(SessionState& state) {
    const auto menu = unvisited_menu(state);

    AgentAction action;
    if (state.hop_count >= config_.agent.max_hops) {
        action.kind = AgentAction::Kind::Answer;
        action.forced = true;
        state.record("decide", json{{"action", "answer"}, {"forced", true},
                                    {"reason", "hop-budget"}});
        return action;
    }
    if (menu.empty()) {
        if (state.generates_used < config_.agent.max_generates) {
            action.kind = AgentAction::Kind::Generate;
            action.forced = true;
            state.record("decide", json{{"action", "generate"}, {"forced", true},
                                        {"reason", "dead-end"}});
        } else {
            action.kind = AgentAction::Kind::Answer;
            action.forced = true;
            state.record("decide", json{{"action", "answer"}, {"forced", true},
                                        {"reason", "generate-budget"}});
        }
        return action;
    }

    const std::string base_prompt = decide_prompt(state, menu);
    for (int ask = 0; ask < 3; ++ask) {
        CompletionRequest request;
        request.role = ModelRole::Reasoner;
        request.step = steps::decide;
        request.prompt = ask == 0 ? base_prompt
                                  : base_prompt + "\n\nReply with SEARCH ids, GENERATE or "
                                                  "ANSWER only.";
        request.temperature = gateway_.config().reasoner_temperature;
        request.max_output = gateway_.config().max_output;
        const std::string reply = gateway_.complete(std::move(request)).front();
        try {
            action = parse_decide_reply(reply);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UnparsableReply) throw;
            continue;
        }
        if (action.kind == AgentAction::Kind::Generate &&
            state.generates_used >= config_.agent.max_generates) {
            // Volitional dead-end, but the generate budget is spent.
            action.kind = AgentAction::Kind::Answer;
            action.forced = true;
            state.record("decide", json{{"action", "answer"}, {"forced", true},
                                        {"reason", "generate-budget"}});
            return action;
        }
        const char* name = action.kind == AgentAction::Kind::Search ? "search"
                           : action.kind == AgentAction::Kind::Generate ? "generate"
                                                                        : "answer";
        state.record("decide", json{{"action", name}, {"forced", false},
                                    {"selected", action.selected}});
        return action;
    }

    // Decision-parse failure degrades to answering with current evidence.
    action.kind = AgentAction::Kind::Answer;
    action.forced = true;
    state.record("decide", json{{"action", "answer"}, {"forced", true},
                                {"reason", "unparsable-decision"}});
    return action;
}

void AgentLoop::apply_search(SessionState& state, const std::vector<EdgeId>& selected,
                             RefineOutcome& delta) {
    const auto menu = unvisited_menu(state);
    auto in_menu = [&](const EdgeId& id) {
        return std::any_of(menu.begin(), menu.end(),
                           [&](const MenuEntry& e) { return e.edge_id == id; });
    };

    std::vector<EdgeId> valid;
    std::vector<EdgeId> invalid;
    for (const EdgeId& id : selected) {
        (in_menu(id) ? valid : invalid).push_back(id);
    }
    if (!invalid.empty()) {
        // One re-ask pointing out the invalid picks, then drop what remains.
        std::string note = "\n\nInvalid selection:";
        for (const auto& id : invalid) note += " " + id;
        note += "\nChoose edge ids from the menu only. Reply: SEARCH id[, id]...";
        CompletionRequest request;
        request.role = ModelRole::Reasoner;
        request.step = steps::decide;
        request.prompt = decide_prompt(state, menu) + note;
        request.temperature = gateway_.config().reasoner_temperature;
        request.max_output = gateway_.config().max_output;
        const std::string reply = gateway_.complete(std::move(request)).front();
        std::vector<EdgeId> retry;
        for (const auto& token : tokenize(reply)) {
            if (in_menu(token) &&
                std::find(retry.begin(), retry.end(), token) == retry.end()) {
                retry.push_back(token);
            }
        }
        if (!retry.empty()) valid = std::move(retry);
    }

    json traversed = json::array();
    json dropped = json::array();
    for (const EdgeId& id : invalid) dropped.push_back(id);

    ++state.hop_count; // one hop per Search step, however many edges

    auto menu_far = [&](const EdgeId& id) -> EntityId {
        for (const auto& entry : menu) {
            if (entry.edge_id == id) return entry.far_id;
        }
        return {};
    };

    for (const EdgeId& edge_id : valid) {
        if (!graph_.has_edge(edge_id)) continue; // pruned earlier in this step
        const Edge& edge = graph_.edge(edge_id);
        const EntityId far_id = menu_far(edge_id);

        // Re-evaluate Generated elements before stepping onto them.
        if (edge.provenance.kind == ProvenanceKind::Generated) {
            const auto decision = refine_.reevaluate_node(edge_id, state);
            if (decision.kind == ReevalKind::Pruned) {
                delta.pruned.push_back({edge_id, "edge", decision.removed_edges});
                delta.rescored.push_back({edge_id, decision.old_score, decision.new_score});
                dropped.push_back(edge_id);
                continue;
            }
            if (decision.kind == ReevalKind::Kept) {
                delta.rescored.push_back({edge_id, decision.old_score, decision.new_score});
            }
        }
        if (graph_.has_entity(far_id) &&
            graph_.entity(far_id).provenance.kind == ProvenanceKind::Generated) {
            const auto decision = refine_.reevaluate_node(far_id, state);
            if (decision.kind == ReevalKind::Pruned) {
                delta.pruned.push_back({far_id, "entity", decision.removed_edges});
                delta.rescored.push_back({far_id, decision.old_score, decision.new_score});
                dropped.push_back(edge_id);
                continue;
            }
            if (decision.kind == ReevalKind::Kept) {
                delta.rescored.push_back({far_id, decision.old_score, decision.new_score});
            }
        }
        if (!graph_.has_edge(edge_id) || !graph_.has_entity(far_id)) continue;

        EvidenceItem item;
        item.edge_id = edge_id;
        item.entity_id = far_id;
        item.head_name = graph_.entity(edge.head).name;
        item.predicate = edge.predicate;
        item.tail_name = graph_.entity(edge.tail).name;
        item.text = evidence_line(graph_, edge);
        state.evidence.push_back(std::move(item));
        state.traversed_edges.insert(edge_id);
        state.frontier.insert(far_id);
        state.visited_entities.insert(far_id);
        traversed.push_back(json{{"edge", edge_id}, {"entity", far_id}});
    }

    state.record("search", json{{"traversed", traversed}, {"dropped", dropped},
                                {"hop", state.hop_count}});
}

AnswerResult AgentLoop::synthesize_answer(SessionState& state) {
    AnswerResult result;
    const std::string base_prompt =
        prompts::render(prompts::answer_synthesis(),
                        {{"query", state.query}, {"evidence", render_evidence(state)}});

    std::string answer;
    std::vector<std::size_t> citations;
    bool parsed = false;
    for (int ask = 0; ask < 3 && !parsed; ++ask) {
        CompletionRequest request;
        request.role = ModelRole::Reasoner;
        request.step = steps::answer;
        request.prompt = ask == 0
                             ? base_prompt
                             : base_prompt + "\n\nReply as: Answer: <letter or short answer> "
                                             "[evidence numbers]";
        request.temperature = gateway_.config().reasoner_temperature;
        request.max_output = gateway_.config().max_output;
        const std::string reply = gateway_.complete(std::move(request)).front();
        parsed = parse_answer_reply(reply, answer, citations);
    }

    if (!parsed) {
        result.answer = "ABSTAIN";
        result.abstained = true;
        state.record("answer", json{{"answer", result.answer}, {"abstain", true},
                                    {"citations", json::array()}});
        return result;
    }

    result.answer = answer;
    for (std::size_t index : citations) {
        if (index >= 1 && index <= state.evidence.size()) {
            result.citations.push_back(index);
            const EvidenceItem& item = state.evidence[index - 1];
            result.supporting_facts.push_back({item.head_name, item.predicate, item.tail_name});
        } // out-of-range citations are dropped, the answer stands
    }
    state.record("answer", json{{"answer", result.answer}, {"abstain", false},
                                {"citations", result.citations}});
    return result;
}

namespace {

json delta_json(const RefineOutcome& delta) {
    json inserted = json::array();
    for (const auto& element : delta.inserted) {
        inserted.push_back(json{{"id", element.id}, {"kind", element.kind},
                                {"score", element.score}});
    }
    json rejected = json::array();
    for (const auto& candidate : delta.rejected) {
        rejected.push_back(json{{"head", candidate.triple.head_name},
                                {"relation", candidate.triple.predicate},
                                {"tail", candidate.triple.tail_name},
                                {"score", candidate.score},
                                {"reason", candidate.reason}});
    }
    json pruned = json::array();
    for (const auto& element : delta.pruned) {
        pruned.push_back(json{{"id", element.id}, {"kind", element.kind},
                              {"removed_edges", element.removed_edges}});
    }
    json rescored = json::array();
    for (const auto& element : delta.rescored) {
        rescored.push_back(json{{"id", element.id}, {"old", element.old_score},
                                {"new", element.new_score}});
    }
    return json{{"inserted", inserted}, {"rejected", rejected}, {"pruned", pruned},
                {"rescored", rescored}};
}

} // namespace

AnswerResult AgentLoop::run_query(const std::string& session_id, const std::string& query,
                                  const std::string& trace_dir) {
    SessionState state = start_session(session_id, query);
    RefineOutcome delta;
    AnswerResult result;

    try {
        for (;;) {
            const AgentAction action = decide_action(state);
            if (action.kind == AgentAction::Kind::Answer) break;
            if (action.kind == AgentAction::Kind::Generate) {
                ++state.generates_used;
                delta.merge(refine_.handle_dead_end(state, query));
                continue;
            }
            apply_search(state, action.selected, delta);
        }
        result = synthesize_answer(state);
    } catch (...) {
        // An aborted query still leaves its partial trace behind.
        if (!trace_dir.empty()) {
            try {
                state.write_trace(trace_dir + "/" + session_id + ".jsonl");
            } catch (...) {
            }
        }
        throw;
    }
    result.kg_delta = std::move(delta);
    // The session's accumulated refine outcome rides on the answer event.
    if (!state.trace.empty() && state.trace.back().kind == "answer") {
        state.trace.back().payload["kg_delta"] = delta_json(result.kg_delta);
    }
    if (!trace_dir.empty()) {
        result.trace_path = trace_dir + "/" + session_id + ".jsonl";
        state.write_trace(result.trace_path);
    }
    return result;
}

} // namespace trail
