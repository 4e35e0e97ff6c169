#include <doctest.h>

#include "support/generators.hpp"
#include "support/graph_check.hpp"
#include "trail/refine.hpp"
#include "trail/scripted_backend.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <random>

using namespace trail;
using namespace trail::testing;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a trail::Error");
    return ErrorCode::InvariantViolation;
}

SessionState make_session(const std::string& id = "s1", const std::string& query = "q") {
    SessionState state;
    state.session_id = id;
    state.query = query;
    return state;
}

struct Rig {
    KnowledgeGraph graph;
    std::shared_ptr<ScriptedBackend> backend = std::make_shared<ScriptedBackend>();
    GatewayConfig gateway_config;

    Rig() { gateway_config.backoff_base_ms = 0; }

    Gateway gateway() {
        Gateway g{gateway_config};
        g.set_backend_all(backend);
        return g;
    }
};

std::size_t judge_calls(const Gateway& gateway) {
    std::size_t count = 0;
    for (const auto& exchange : gateway.exchanges()) {
        if (exchange.request.role == ModelRole::Judge) ++count;
    }
    return count;
}

} // namespace

TEST_CASE("parse_consensus accepts well-formed fact arrays") {
    const auto parsed = parse_consensus(
        R"([{"head":"aspirin","relation":"inhibits","tail":"cox-2",
             "edge_description":"irreversible"}])");
    REQUIRE(parsed.triples.size() == 1);
    CHECK(parsed.triples[0].head_name == "aspirin");
    CHECK(parsed.triples[0].predicate == "inhibits");
    CHECK(parsed.triples[0].tail_name == "cox-2");
    CHECK(parsed.triples[0].edge_description == "irreversible");
    CHECK(parsed.warnings.empty());
}

TEST_CASE("parse_consensus drops objects with blank required fields") {
    const auto parsed = parse_consensus(
        R"([{"head":"a","relation":"r","tail":"b"},{"head":"c","relation":"r"}])");
    CHECK(parsed.triples.size() == 1);
    REQUIRE(parsed.warnings.size() == 1);
    CHECK(parsed.warnings[0].find("object 2") != std::string::npos);
}

TEST_CASE("parse_consensus tolerates prose around the array") {
    const auto parsed = parse_consensus(
        "Here are the facts:\n[{\"head\":\"a\",\"relation\":\"r\",\"tail\":\"b\"}]\nDone.");
    CHECK(parsed.triples.size() == 1);
}

TEST_CASE("parse_consensus rejects free prose") {
    CHECK(code_of([] { parse_consensus("no facts to report"); }) ==
          ErrorCode::MalformedConsensus);
}

TEST_CASE("combine_confidence arithmetic") {
    CHECK(combine_confidence(80, 40, 0.5) == 60);
    CHECK(combine_confidence(80, 40, 1.0) == 40); // alpha=1 -> judged
    CHECK(combine_confidence(80, 40, 0.0) == 80); // alpha=0 -> old
    CHECK(combine_confidence(70, 90, 0.5) == 80);
    CHECK(combine_confidence(70, 30, 0.5) == 50);
    CHECK(combine_confidence(1, 0, 0.5) == 1); // 0.5 rounds half-up
}

TEST_CASE("combine_confidence stays within [min,max] of its inputs") {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> score(0, 100);
    std::uniform_real_distribution<double> alpha(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const int old_score = score(rng);
        const int judged = score(rng);
        const int combined = combine_confidence(old_score, judged, alpha(rng));
        CHECK(combined >= std::min(old_score, judged));
        CHECK(combined <= std::max(old_score, judged));
    }
}

TEST_CASE("combine_confidence rejects out-of-range inputs") {
    CHECK(code_of([] { combine_confidence(101, 50, 0.5); }) == ErrorCode::InvariantViolation);
    CHECK(code_of([] { combine_confidence(50, 50, 1.5); }) == ErrorCode::InvariantViolation);
}

TEST_CASE("handle_dead_end gates on the judge score") {
    Rig rig;
    rig.graph.add_entity(truth_entity("aspirin"));
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator,
                     {R"([{"head":"aspirin","relation":"suppresses","tail":"thromboxane"},
                          {"head":"aspirin","relation":"cures","tail":"baldness"}])"});
    rig.backend->add(steps::judge, ModelRole::Judge, {"Score: 85", "Score: 40"});
    Gateway gateway = rig.gateway();

    RefineConfig config;
    config.tau = 60;
    config.samples = 1;
    RefineEngine engine(rig.graph, gateway, config);
    SessionState session = make_session();

    const RefineOutcome outcome = engine.handle_dead_end(session, "q");

    REQUIRE(outcome.inserted.size() == 2); // thromboxane + its edge
    for (const auto& element : outcome.inserted) CHECK(element.score == 85);
    REQUIRE(outcome.rejected.size() == 1);
    CHECK(outcome.rejected[0].score == 40);
    CHECK(outcome.rejected[0].reason == "below-threshold");
    CHECK(rig.graph.has_entity("thromboxane"));
    CHECK(!rig.graph.has_entity("baldness"));
    CHECK(!integrity_violation(rig.graph));
}

TEST_CASE("handle_dead_end reuses existing entities by name slug") {
    Rig rig;
    rig.graph.add_entity(truth_entity("aspirin"));
    rig.graph.add_entity(truth_entity("cox-1", "COX-1"));
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator,
                     {R"([{"head":"Aspirin","relation":"inhibits","tail":"platelet"}])"});
    rig.backend->add(steps::judge, ModelRole::Judge, {"90"});
    Gateway gateway = rig.gateway();

    RefineConfig config;
    config.samples = 1;
    RefineEngine engine(rig.graph, gateway, config);
    SessionState session = make_session();
    const RefineOutcome outcome = engine.handle_dead_end(session, "q");

    // Truth head untouched; only the tail entity and the edge are new.
    REQUIRE(outcome.inserted.size() == 2);
    CHECK(outcome.inserted[0].id == "platelet");
    CHECK(outcome.inserted[1].kind == "edge");
    CHECK(rig.graph.entity("aspirin").provenance.kind == ProvenanceKind::Truth);
    CHECK(rig.graph.entity("aspirin").confidence == 100);
}

TEST_CASE("handle_dead_end rejects duplicate triples without judging them") {
    Rig rig;
    rig.graph.add_entity(truth_entity("aspirin"));
    rig.graph.add_entity(truth_entity("headache"));
    rig.graph.add_edge(truth_edge("aspirin--treats--headache", "aspirin", "headache",
                                  "treats"));
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator,
                     {R"([{"head":"aspirin","relation":"treats","tail":"headache"}])"});
    Gateway gateway = rig.gateway();

    RefineConfig config;
    config.samples = 1;
    RefineEngine engine(rig.graph, gateway, config);
    SessionState session = make_session();
    const auto before = rig.graph.stats();
    const RefineOutcome outcome = engine.handle_dead_end(session, "q");

    CHECK(outcome.inserted.empty());
    REQUIRE(outcome.rejected.size() == 1);
    CHECK(outcome.rejected[0].reason == "duplicate");
    CHECK(rig.graph.stats() == before);
    CHECK(judge_calls(gateway) == 0);
}

TEST_CASE("a malformed consensus yields an empty outcome, not a failure") {
    Rig rig;
    rig.graph.add_entity(truth_entity("aspirin"));
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator, {"I refuse to answer."});
    Gateway gateway = rig.gateway();

    RefineConfig config;
    config.samples = 1;
    RefineEngine engine(rig.graph, gateway, config);
    SessionState session = make_session();
    const RefineOutcome outcome = engine.handle_dead_end(session, "q");
    CHECK(outcome.inserted.empty());
    CHECK(outcome.rejected.empty());
    REQUIRE(!session.trace.empty());
    CHECK(session.trace.back().payload.value("malformed_consensus", false));
}

TEST_CASE("a judge failure rejects the candidate without storing a score") {
    Rig rig;
    rig.graph.add_entity(truth_entity("aspirin"));
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator,
                     {R"([{"head":"aspirin","relation":"r","tail":"new-node"}])"});
    rig.backend->add(steps::judge, ModelRole::Judge, {"no", "no", "no"});
    Gateway gateway = rig.gateway();

    RefineConfig config;
    config.samples = 1;
    RefineEngine engine(rig.graph, gateway, config);
    SessionState session = make_session();
    const RefineOutcome outcome = engine.handle_dead_end(session, "q");
    REQUIRE(outcome.rejected.size() == 1);
    CHECK(outcome.rejected[0].reason == "judge-failure");
    CHECK(!rig.graph.has_entity("new-node"));
}

TEST_CASE("handle_dead_end samples the configured candidate count") {
    Rig rig;
    rig.graph.add_entity(truth_entity("aspirin"));
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"c1", "c2", "c3"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator, {"[]"});
    Gateway gateway = rig.gateway();

    RefineConfig config; // samples = 3 by default
    RefineEngine engine(rig.graph, gateway, config);
    SessionState session = make_session();
    engine.handle_dead_end(session, "q");

    REQUIRE(gateway.exchanges().size() == 2);
    CHECK(gateway.exchanges()[0].request.sample_count == 3);
    CHECK(gateway.exchanges()[0].responses.size() == 3);
    CHECK(gateway.exchanges()[0].request.temperature == doctest::Approx(0.2));
    CHECK(rig.backend->remaining(steps::generate, ModelRole::Reasoner) == 0);
}

TEST_CASE("reevaluate_node combines, gates, and caches") {
    SUBCASE("pruned below tau") {
        // 70 old, 30 judged, alpha .5 -> 50 < 60 -> pruned
        Rig rig;
        rig.graph.add_entity(truth_entity("base"));
        rig.graph.add_entity(generated_entity("hypo", 70));
        rig.graph.add_edge(generated_edge("l1", "base", "hypo", 70));
        rig.backend->add(steps::rejudge, ModelRole::Judge, {"Score: 30"});
        Gateway gateway = rig.gateway();
        RefineEngine engine(rig.graph, gateway, RefineConfig{});
        SessionState session = make_session();

        const auto decision = engine.reevaluate_node("hypo", session);
        CHECK(decision.kind == ReevalKind::Pruned);
        CHECK(decision.new_score == 50);
        CHECK(decision.removed_edges == 1);
        CHECK(!rig.graph.has_entity("hypo"));
        CHECK(!rig.graph.has_edge("l1"));
        CHECK(!integrity_violation(rig.graph));
        CHECK(session.rescore_cache.count("hypo") == 1);
    }

    SUBCASE("kept above tau with the combined score stored") {
        Rig rig;
        rig.graph.add_entity(generated_entity("hypo", 70));
        rig.backend->add(steps::rejudge, ModelRole::Judge, {"Score: 90"});
        Gateway gateway = rig.gateway();
        RefineEngine engine(rig.graph, gateway, RefineConfig{});
        SessionState session = make_session("s9");

        const auto decision = engine.reevaluate_node("hypo", session);
        CHECK(decision.kind == ReevalKind::Kept);
        CHECK(decision.new_score == 80);
        CHECK(rig.graph.entity("hypo").confidence == 80);
        CHECK(rig.graph.entity("hypo").provenance.last_eval_session == "s9");
    }

    SUBCASE("second visit in one session is a cache skip with zero calls") {
        Rig rig;
        rig.graph.add_entity(generated_entity("hypo", 70));
        rig.backend->add(steps::rejudge, ModelRole::Judge, {"Score: 90"});
        Gateway gateway = rig.gateway();
        RefineEngine engine(rig.graph, gateway, RefineConfig{});
        SessionState session = make_session();

        engine.reevaluate_node("hypo", session);
        const std::size_t calls_before = judge_calls(gateway);
        const auto decision = engine.reevaluate_node("hypo", session);
        CHECK(decision.kind == ReevalKind::CacheSkip);
        CHECK(judge_calls(gateway) == calls_before);
        CHECK(session.trace.back().kind == "cache_skip");
    }

    SUBCASE("truth elements are never re-evaluated") {
        Rig rig;
        rig.graph.add_entity(truth_entity("truth"));
        Gateway gateway = rig.gateway();
        RefineEngine engine(rig.graph, gateway, RefineConfig{});
        SessionState session = make_session();
        CHECK(code_of([&] { engine.reevaluate_node("truth", session); }) ==
              ErrorCode::TruthImmutable);
    }

    SUBCASE("judge failure leaves the element untouched and uncached") {
        Rig rig;
        rig.graph.add_entity(generated_entity("hypo", 70));
        rig.backend->add(steps::rejudge, ModelRole::Judge, {"no", "no", "no"});
        Gateway gateway = rig.gateway();
        RefineEngine engine(rig.graph, gateway, RefineConfig{});
        SessionState session = make_session();

        const auto decision = engine.reevaluate_node("hypo", session);
        CHECK(decision.kind == ReevalKind::JudgeFailed);
        CHECK(rig.graph.entity("hypo").confidence == 70);
        CHECK(session.rescore_cache.count("hypo") == 0);

        // A later encounter in the same session can retry and succeed.
        rig.backend->add(steps::rejudge, ModelRole::Judge, {"Score: 90"});
        const auto retry = engine.reevaluate_node("hypo", session);
        CHECK(retry.kind == ReevalKind::Kept);
        CHECK(retry.new_score == 80);
    }

    SUBCASE("revised description applies before scoring") {
        Rig rig;
        rig.graph.add_entity(generated_entity("hypo", 70));
        rig.backend->add(steps::rejudge, ModelRole::Judge,
                         {"Score: 90 <description>refined wording</description>"});
        Gateway gateway = rig.gateway();
        RefineEngine engine(rig.graph, gateway, RefineConfig{});
        SessionState session = make_session();
        engine.reevaluate_node("hypo", session);
        CHECK(rig.graph.entity("hypo").description == "refined wording");
        CHECK(rig.graph.entity("hypo").confidence == 80);
    }

    SUBCASE("edges prune alone") {
        Rig rig;
        rig.graph.add_entity(truth_entity("a"));
        rig.graph.add_entity(truth_entity("b"));
        rig.graph.add_edge(generated_edge("ge", "a", "b", 65));
        rig.backend->add(steps::rejudge, ModelRole::Judge, {"Score: 10"});
        Gateway gateway = rig.gateway();
        RefineEngine engine(rig.graph, gateway, RefineConfig{});
        SessionState session = make_session();
        const auto decision = engine.reevaluate_node("ge", session);
        CHECK(decision.kind == ReevalKind::Pruned);
        CHECK(!rig.graph.has_edge("ge"));
        CHECK(rig.graph.has_entity("a"));
        CHECK(rig.graph.has_entity("b"));
    }
}

TEST_CASE("freshly inserted elements are session-cached, not immediately re-judged") {
    Rig rig;
    rig.graph.add_entity(truth_entity("aspirin"));
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator,
                     {R"([{"head":"aspirin","relation":"r","tail":"fresh"}])"});
    rig.backend->add(steps::judge, ModelRole::Judge, {"85"});
    Gateway gateway = rig.gateway();

    RefineConfig config;
    config.samples = 1;
    RefineEngine engine(rig.graph, gateway, config);
    SessionState session = make_session();
    engine.handle_dead_end(session, "q");

    // Same session: cache skip, zero further judge calls.
    const std::size_t calls = judge_calls(gateway);
    CHECK(engine.reevaluate_node("fresh", session).kind == ReevalKind::CacheSkip);
    CHECK(engine.reevaluate_node("aspirin--r--fresh", session).kind ==
          ReevalKind::CacheSkip);
    CHECK(judge_calls(gateway) == calls);

    // A later session re-evaluates normally.
    SessionState later = make_session("s2");
    rig.backend->add(steps::rejudge, ModelRole::Judge, {"95"});
    CHECK(engine.reevaluate_node("fresh", later).kind == ReevalKind::Kept);
}

TEST_CASE("score equal to tau keeps an element but does not admit a candidate") {
    // Insertion: score == tau -> rejected.
    Rig rig;
    rig.graph.add_entity(truth_entity("aspirin"));
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator,
                     {R"([{"head":"aspirin","relation":"r","tail":"x"}])"});
    rig.backend->add(steps::judge, ModelRole::Judge, {"60"});
    Gateway gateway = rig.gateway();
    RefineConfig config;
    config.samples = 1;
    RefineEngine engine(rig.graph, gateway, config);
    SessionState session = make_session();
    const auto outcome = engine.handle_dead_end(session, "q");
    CHECK(outcome.inserted.empty());
    REQUIRE(outcome.rejected.size() == 1);

    // Re-evaluation: combined == tau -> kept.
    rig.graph.add_entity(generated_entity("hypo", 70));
    rig.backend->add(steps::rejudge, ModelRole::Judge, {"Score: 50"}); // -> 60
    const auto decision = engine.reevaluate_node("hypo", session);
    CHECK(decision.kind == ReevalKind::Kept);
    CHECK(decision.new_score == 60);
}

TEST_CASE("a pruned fact re-proposed later is rejected, not resurrected") {
    Rig rig;
    rig.graph.add_entity(truth_entity("base"));
    rig.graph.add_entity(generated_entity("ghost", 70));
    rig.graph.add_edge(generated_edge("base--haunts--ghost", "base", "ghost", 70, "haunts"));
    Gateway gateway = rig.gateway();
    RefineConfig config;
    config.samples = 1;
    RefineEngine engine(rig.graph, gateway, config);

    // Session 1 prunes the entity (and with it the edge).
    SessionState first = make_session("s1");
    rig.backend->add(steps::rejudge, ModelRole::Judge, {"Score: 0"});
    CHECK(engine.reevaluate_node("ghost", first).kind == ReevalKind::Pruned);

    // Session 2 proposes the identical fact; the retired ids block it.
    SessionState second = make_session("s2");
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator,
                     {R"([{"head":"base","relation":"haunts","tail":"ghost"}])"});
    rig.backend->add(steps::judge, ModelRole::Judge, {"99"});
    const RefineOutcome outcome = engine.handle_dead_end(second, "q");
    CHECK(outcome.inserted.empty());
    REQUIRE(outcome.rejected.size() == 1);
    CHECK(outcome.rejected[0].reason == "id-retired");
    CHECK(!rig.graph.has_entity("ghost"));
}

TEST_CASE("self-referential triples insert as self-loops") {
    Rig rig;
    rig.graph.add_entity(truth_entity("ouroboros"));
    rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
    rig.backend->add(steps::aggregate, ModelRole::Aggregator,
                     {R"([{"head":"ouroboros","relation":"consumes","tail":"ouroboros"}])"});
    rig.backend->add(steps::judge, ModelRole::Judge, {"88"});
    Gateway gateway = rig.gateway();
    RefineConfig config;
    config.samples = 1;
    RefineEngine engine(rig.graph, gateway, config);
    SessionState session = make_session();

    const RefineOutcome outcome = engine.handle_dead_end(session, "q");
    REQUIRE(outcome.inserted.size() == 1); // just the edge; the entity is reused
    CHECK(outcome.inserted[0].kind == "edge");
    const auto pairs = rig.graph.neighbors("ouroboros");
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].second->id == "ouroboros");
    CHECK(!integrity_violation(rig.graph));
}

TEST_CASE("gate soundness and truth immunity over randomized dead-ends") {
    std::mt19937 rng(77);
    std::uniform_int_distribution<int> tau_dist(0, 100);
    std::uniform_int_distribution<int> score_dist(0, 100);
    std::uniform_int_distribution<int> triple_count(1, 4);

    for (int round = 0; round < 100; ++round) {
        Rig rig;
        rig.graph.add_entity(truth_entity("anchor"));
        const std::string truth_before =
            KnowledgeGraph::entity_record(rig.graph.entity("anchor"));

        const int tau = tau_dist(rng);
        const int count = triple_count(rng);
        nlohmann::json consensus = nlohmann::json::array();
        std::vector<std::string> judge_replies;
        std::vector<int> scores;
        for (int i = 0; i < count; ++i) {
            consensus.push_back(
                nlohmann::json{{"head", "anchor"},
                               {"relation", "r" + std::to_string(i)},
                               {"tail", "node" + std::to_string(round) + "-" +
                                            std::to_string(i)}});
            const int score = score_dist(rng);
            scores.push_back(score);
            judge_replies.push_back(std::to_string(score));
        }
        rig.backend->add(steps::generate, ModelRole::Reasoner, {"draft"});
        rig.backend->add(steps::aggregate, ModelRole::Aggregator, {consensus.dump()});
        rig.backend->add(steps::judge, ModelRole::Judge, judge_replies);
        Gateway gateway = rig.gateway();

        RefineConfig config;
        config.tau = tau;
        config.samples = 1;
        RefineEngine engine(rig.graph, gateway, config);
        SessionState session = make_session();

        const auto before = rig.graph.stats();
        const RefineOutcome outcome = engine.handle_dead_end(session, "q");

        // Gate soundness: inserted elements all above tau, in the graph.
        for (const auto& element : outcome.inserted) {
            CHECK(element.score > tau);
            const int stored = element.kind == "entity"
                                   ? rig.graph.entity(element.id).confidence
                                   : rig.graph.edge(element.id).confidence;
            CHECK(stored > tau);
        }
        // Rejected candidates are absent.
        for (const auto& rejected : outcome.rejected) {
            CHECK(!rig.graph.has_edge(triple_edge_id(rejected.triple)));
        }
        // Monotone growth: a dead-end never removes anything.
        const auto after = rig.graph.stats();
        CHECK(after.entities >= before.entities);
        CHECK(after.edges >= before.edges);
        // Truth immunity, byte-level.
        CHECK(KnowledgeGraph::entity_record(rig.graph.entity("anchor")) == truth_before);
        CHECK(!integrity_violation(rig.graph));
    }
}
