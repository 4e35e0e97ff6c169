#include "trail/refine.hpp"

#include "trail/prompts.hpp"

#include <json.hpp>

#include <cmath>

namespace trail {

using nlohmann::json;

namespace {

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

std::string render_triple(const CandidateTriple& triple) {
    std::string out = triple.head_name + " --" + triple.predicate + "--> " + triple.tail_name;
    if (!triple.head_description.empty()) out += "\nhead: " + triple.head_description;
    if (!triple.tail_description.empty()) out += "\ntail: " + triple.tail_description;
    if (!triple.edge_description.empty()) out += "\nfact: " + triple.edge_description;
    return out;
}

std::string render_element(const KnowledgeGraph& graph, const std::string& id,
                           bool is_entity) {
    if (is_entity) {
        const Entity& entity = graph.entity(id);
        return "entity: " + entity.name + "\ndescription: " + entity.description;
    }
    const Edge& edge = graph.edge(id);
    return "fact: " + graph.entity(edge.head).name + " --" + edge.predicate + "--> " +
           graph.entity(edge.tail).name + "\ndescription: " + edge.description;
}

json triple_json(const CandidateTriple& triple) {
    return json{{"head", triple.head_name},
                {"relation", triple.predicate},
                {"tail", triple.tail_name}};
}

} // namespace

ParsedConsensus parse_consensus(const std::string& text) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) {
        // Tolerate prose around the array (code fences and the like).
        const std::size_t open = text.find('[');
        const std::size_t close = text.rfind(']');
        if (open != std::string::npos && close != std::string::npos && close > open) {
            parsed = json::parse(text.substr(open, close - open + 1), nullptr, false);
        }
    }
    if (parsed.is_discarded() || !parsed.is_array()) {
        throw Error(ErrorCode::MalformedConsensus, "no JSON array of fact objects");
    }

    ParsedConsensus result;
    std::size_t position = 0;
    for (const auto& object : parsed) {
        ++position;
        if (!object.is_object()) {
            result.warnings.push_back("object " + std::to_string(position) +
                                      ": not a fact object");
            continue;
        }
        auto field = [&](const char* name) -> std::string {
            if (!object.contains(name) || !object[name].is_string()) return {};
            return trim(object[name].get<std::string>());
        };
        CandidateTriple triple;
        triple.head_name = field("head");
        triple.predicate = field("relation");
        triple.tail_name = field("tail");
        if (triple.head_name.empty() || triple.predicate.empty() || triple.tail_name.empty()) {
            result.warnings.push_back("object " + std::to_string(position) +
                                      ": blank head, relation or tail");
            continue;
        }
        triple.head_description = field("head_description");
        triple.tail_description = field("tail_description");
        triple.edge_description = field("edge_description");
        result.triples.push_back(std::move(triple));
    }
    return result;
}

int combine_confidence(int old_score, int judged_score, double alpha) {
    if (old_score < 0 || old_score > 100 || judged_score < 0 || judged_score > 100) {
        throw Error(ErrorCode::InvariantViolation, "confidence outside [0,100]");
    }
    if (alpha < 0.0 || alpha > 1.0) {
        throw Error(ErrorCode::InvariantViolation, "alpha outside [0,1]");
    }
    const double combined = alpha * judged_score + (1.0 - alpha) * old_score;
    return static_cast<int>(std::floor(combined + 0.5));
}

EdgeId triple_edge_id(const CandidateTriple& triple) {
    return slugify(triple.head_name) + "--" + slugify(triple.predicate) + "--" +
           slugify(triple.tail_name);
}

void RefineOutcome::merge(RefineOutcome other) {
    auto append = [](auto& into, auto& from) {
        into.insert(into.end(), std::make_move_iterator(from.begin()),
                    std::make_move_iterator(from.end()));
    };
    append(inserted, other.inserted);
    append(rejected, other.rejected);
    append(pruned, other.pruned);
    append(rescored, other.rescored);
}

RefineEngine::RefineEngine(KnowledgeGraph& graph, Gateway& gateway, RefineConfig config)
    : graph_(graph), gateway_(gateway), config_(config) {}

int RefineEngine::judge_candidate(const CandidateTriple& triple,
                                  const std::string& query_context, SessionState& session,
                                  bool& judge_failed) {
    judge_failed = false;
    const std::string fact =
        render_triple(triple) + "\nQuestion context: " + query_context;
    try {
        const int score = gateway_.judge_score(fact);
        session.record("judge", json{{"purpose", "insertion"},
                                     {"target", triple_edge_id(triple)},
                                     {"triple", triple_json(triple)},
                                     {"score", score}});
        return score;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::UnparsableJudgeReply) throw;
        judge_failed = true;
        session.record("judge", json{{"purpose", "insertion"},
                                     {"target", triple_edge_id(triple)},
                                     {"triple", triple_json(triple)},
                                     {"failed", true}});
        return 0; // gating value only, never stored
    }
}

void RefineEngine::insert_candidate(const CandidateTriple& triple, int score,
                                    SessionState& session, RefineOutcome& outcome) {
    const EntityId head_id = slugify(triple.head_name);
    const EntityId tail_id = slugify(triple.tail_name);
    const EdgeId edge_id = triple_edge_id(triple);

    auto ensure_entity = [&](const EntityId& id, const std::string& name,
                             const std::string& description) {
        if (graph_.has_entity(id)) return; // reuse, Truth or Generated
        Entity entity;
        entity.id = id;
        entity.name = name;
        entity.description = description;
        entity.provenance = {ProvenanceKind::Generated, session.session_id, std::nullopt};
        entity.confidence = score;
        graph_.add_entity(std::move(entity));
        outcome.inserted.push_back({id, "entity", score});
        // Just judged at insertion; the session cache stops an immediate
        // redundant re-scoring when reasoning expands onto it.
        session.rescore_cache.insert(id);
        session.record("insert", json{{"id", id}, {"kind", "entity"}, {"score", score}});
    };
    ensure_entity(head_id, triple.head_name, triple.head_description);
    ensure_entity(tail_id, triple.tail_name, triple.tail_description);

    Edge edge;
    edge.id = edge_id;
    edge.head = head_id;
    edge.tail = tail_id;
    edge.predicate = triple.predicate;
    edge.description = triple.edge_description;
    edge.provenance = {ProvenanceKind::Generated, session.session_id, std::nullopt};
    edge.confidence = score;
    graph_.add_edge(std::move(edge));
    outcome.inserted.push_back({edge_id, "edge", score});
    session.rescore_cache.insert(edge_id);
    session.record("insert", json{{"id", edge_id}, {"kind", "edge"}, {"score", score}});
}

RefineOutcome RefineEngine::handle_dead_end(SessionState& session,
                                            const std::string& query_context) {
    RefineOutcome outcome;

    std::string frontier_names;
    for (const EntityId& id : session.frontier) {
        if (!frontier_names.empty()) frontier_names += ", ";
        frontier_names += graph_.entity(id).name;
    }

    CompletionRequest request;
    request.role = ModelRole::Reasoner;
    request.step = steps::generate;
    request.prompt = prompts::render(prompts::candidate_generation(),
                                     {{"query", query_context},
                                      {"evidence", render_evidence(session)},
                                      {"frontier", frontier_names}});
    request.temperature = config_.temperature;
    request.max_output = gateway_.config().max_output;
    request.sample_count = config_.samples;
    const auto candidates = gateway_.complete(std::move(request));

    const std::string consensus = gateway_.aggregate(candidates, query_context);

    ParsedConsensus parsed;
    try {
        parsed = parse_consensus(consensus);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedConsensus) throw;
        session.record("generate", json{{"candidates", candidates.size()},
                                        {"malformed_consensus", true}});
        return outcome; // failed generation, not a failed query
    }
    const std::size_t generate_step = session.trace.size();
    session.record("generate", json{{"candidates", candidates.size()},
                                    {"triples", parsed.triples.size()},
                                    {"warnings", parsed.warnings}});

    for (CandidateTriple& triple : parsed.triples) {
        triple.source_step = "generate@" + std::to_string(generate_step);

        const EdgeId edge_id = triple_edge_id(triple);
        if (graph_.has_edge(edge_id)) {
            outcome.rejected.push_back({triple, 0, "duplicate"});
            continue;
        }

        bool judge_failed = false;
        const int score = judge_candidate(triple, query_context, session, judge_failed);
        if (judge_failed) {
            outcome.rejected.push_back({triple, 0, "judge-failure"});
            continue;
        }
        if (score <= config_.tau) { // strict gate: insert iff score > tau
            outcome.rejected.push_back({triple, score, "below-threshold"});
            continue;
        }

        // A retired id means this exact element was pruned earlier in the
        // process; it may not come back under the same id.
        const EntityId head_id = slugify(triple.head_name);
        const EntityId tail_id = slugify(triple.tail_name);
        const bool reusable = graph_.id_available(edge_id) &&
                              (graph_.has_entity(head_id) || graph_.id_available(head_id)) &&
                              (graph_.has_entity(tail_id) || graph_.id_available(tail_id));
        if (!reusable) {
            outcome.rejected.push_back({triple, score, "id-retired"});
            continue;
        }
        insert_candidate(triple, score, session, outcome);
    }
    return outcome;
}

ReevalDecision RefineEngine::reevaluate_node(const std::string& id, SessionState& session) {
    const bool is_entity = graph_.has_entity(id);
    if (!is_entity && !graph_.has_edge(id)) {
        throw Error(ErrorCode::UnknownElement, "'" + id + "'");
    }
    const Provenance& provenance =
        is_entity ? graph_.entity(id).provenance : graph_.edge(id).provenance;
    if (provenance.kind == ProvenanceKind::Truth) {
        throw Error(ErrorCode::TruthImmutable, "'" + id + "' is a truth element");
    }

    ReevalDecision decision;
    decision.element_kind = is_entity ? "entity" : "edge";

    if (session.rescore_cache.count(id)) {
        session.record("cache_skip", json{{"id", id}});
        decision.kind = ReevalKind::CacheSkip;
        return decision;
    }

    const std::string fact = render_element(graph_, id, is_entity);
    const std::string context =
        "question: " + session.query + "\nevidence:\n" + render_evidence(session);

    JudgeVerdict verdict;
    try {
        verdict = gateway_.judge_reevaluate(fact, context);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::UnparsableJudgeReply) throw;
        // Leave the element untouched and uncached so a later encounter can
        // retry within the same session.
        session.record("judge", json{{"purpose", "reevaluation"}, {"target", id},
                                     {"failed", true}});
        decision.kind = ReevalKind::JudgeFailed;
        return decision;
    }

    decision.old_score = is_entity ? graph_.entity(id).confidence : graph_.edge(id).confidence;
    decision.judged_score = verdict.score;

    if (verdict.revised_description) {
        graph_.set_description(id, *verdict.revised_description);
    }

    decision.new_score = combine_confidence(decision.old_score, verdict.score, config_.alpha);
    graph_.set_confidence(id, decision.new_score);
    graph_.set_last_eval_session(id, session.session_id);
    session.rescore_cache.insert(id);

    session.record("judge", json{{"purpose", "reevaluation"},
                                 {"target", id},
                                 {"old", decision.old_score},
                                 {"judged", decision.judged_score},
                                 {"combined", decision.new_score},
                                 {"description_revised", verdict.revised_description.has_value()}});

    if (decision.new_score < config_.tau) { // strict: prune iff score < tau
        std::vector<std::size_t> evidence_refs;
        std::set<std::string> doomed{id};
        if (is_entity) {
            for (const EdgeId& incident : graph_.adjacency().at(id)) doomed.insert(incident);
        }
        for (std::size_t i = 0; i < session.evidence.size(); ++i) {
            if (doomed.count(session.evidence[i].edge_id) ||
                doomed.count(session.evidence[i].entity_id)) {
                evidence_refs.push_back(i + 1); // kept but flagged, never retracted
            }
        }
        decision.removed_edges = is_entity ? graph_.remove_entity(id)
                                           : (graph_.remove_edge(id), 0);
        decision.kind = ReevalKind::Pruned;
        session.record("prune", json{{"id", id},
                                     {"kind", decision.element_kind},
                                     {"removed_edges", decision.removed_edges},
                                     {"evidence_refs", evidence_refs}});
        return decision;
    }

    decision.kind = ReevalKind::Kept;
    return decision;
}

} // namespace trail
