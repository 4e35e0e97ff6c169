#include <doctest.h>

#include "support/generators.hpp"
#include "trail/scripted_backend.hpp"
#include "trail/seed_select.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
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

struct Fixture {
    KnowledgeGraph graph;
    EmbedIndex index{3};
    std::shared_ptr<ScriptedBackend> backend = std::make_shared<ScriptedBackend>();
    GatewayConfig gateway_config;

    Fixture() {
        // Two clusters around the axes plus a bridge node.
        for (int i = 0; i < 4; ++i) {
            const std::string id = "heart" + std::to_string(i);
            graph.add_entity(truth_entity(id));
            index.upsert(id, {1.0, 0.1 * i, 0.0});
        }
        for (int i = 0; i < 4; ++i) {
            const std::string id = "kidney" + std::to_string(i);
            graph.add_entity(truth_entity(id));
            index.upsert(id, {0.0, 1.0, 0.1 * i});
        }
        graph.add_entity(truth_entity("bridge"));
        index.upsert("bridge", {0.7, 0.7, 0.0});
        graph.add_edge(truth_edge("b0", "bridge", "heart0"));
        graph.add_edge(truth_edge("b1", "bridge", "kidney0"));
        gateway_config.backoff_base_ms = 0;
    }

    Gateway gateway() {
        Gateway g{gateway_config};
        g.set_backend_all(backend);
        return g;
    }
};

} // namespace

TEST_CASE("parse_topic_list splits, trims, and dedups case-insensitively") {
    const auto topics = parse_topic_list("hypertension; beta blockers\nHypertension;  ;x");
    REQUIRE(topics.size() == 3);
    CHECK(topics[0] == "hypertension");
    CHECK(topics[1] == "beta blockers");
    CHECK(topics[2] == "x");
}

TEST_CASE("identify_topics parses the scripted reply") {
    Fixture fx;
    fx.backend->add(steps::topics, ModelRole::Reasoner, {"hypertension; beta blockers"});
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
    const TopicSet topics = pipeline.identify_topics("q");
    REQUIRE(topics.topics.size() == 2);
    CHECK(topics.topics[0] == "hypertension");
    CHECK(topics.topics[1] == "beta blockers");
    CHECK(!topics.fallback_used);
}

TEST_CASE("identify_topics truncates to max_topics") {
    Fixture fx;
    fx.backend->add(steps::topics, ModelRole::Reasoner, {"t1; t2; t3; t4; t5; t6; t7; t8"});
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
    const TopicSet topics = pipeline.identify_topics("q");
    CHECK(topics.topics.size() == 5);
    CHECK(topics.topics.back() == "t5");
}

TEST_CASE("identify_topics falls back to the raw query after two re-asks") {
    Fixture fx;
    fx.backend->add(steps::topics, ModelRole::Reasoner, {" ; ", "", ";"});
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
    const TopicSet topics = pipeline.identify_topics("  what treats migraine?  ");
    REQUIRE(topics.topics.size() == 1);
    CHECK(topics.topics[0] == "what treats migraine?");
    CHECK(topics.fallback_used);
}

TEST_CASE("identify_topics rejects a blank query") {
    Fixture fx;
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
    CHECK(code_of([&] { pipeline.identify_topics("   "); }) ==
          ErrorCode::PreconditionViolation);
}

TEST_CASE("anchor_entities unions disjoint retrievals") {
    Fixture fx;
    fx.backend->add(steps::embed, ModelRole::Embedder, {"[1,0,0]", "[0,1,0]"});
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
    const TopicSet topics{{"hearts", "kidneys"}, false};
    const CandidatePool pool = pipeline.anchor_entities(topics, 3);
    REQUIRE(pool.per_topic.size() == 2);
    CHECK(pool.per_topic[0].second.size() == 3);
    CHECK(pool.per_topic[1].second.size() == 3);
    CHECK(pool.pool.size() == 6);
    for (const auto& candidate : pool.pool) {
        CHECK(fx.graph.has_entity(candidate.id));
    }
}

TEST_CASE("anchor_entities dedups shared ids keeping the max score") {
    Fixture fx;
    // Both topics hit "bridge"; second topic scores it higher.
    fx.backend->add(steps::embed, ModelRole::Embedder, {"[1,0,0]", "[0.7,0.7,0]"});
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
    const CandidatePool pool = pipeline.anchor_entities(TopicSet{{"a", "b"}, false}, 9);
    std::size_t bridge_count = 0;
    double bridge_score = 0.0;
    for (const auto& candidate : pool.pool) {
        if (candidate.id == "bridge") {
            ++bridge_count;
            bridge_score = candidate.score;
        }
    }
    CHECK(bridge_count == 1);
    CHECK(bridge_score == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("anchor_entities matches a brute-force union oracle") {
    std::mt19937 rng(99);
    KnowledgeGraph graph;
    EmbedIndex index(4);
    for (int i = 0; i < 20; ++i) {
        const std::string id = "e" + std::to_string(i);
        graph.add_entity(truth_entity(id));
        index.upsert(id, random_vector(rng, 4));
    }
    const EmbeddingVector query = random_vector(rng, 4);

    // Oracle: full-sort cosine over all entries.
    std::vector<std::pair<EntityId, double>> all;
    for (const auto& [id, v] : index.vectors()) {
        all.emplace_back(id, cosine(query, v));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    all.resize(5);

    auto backend = std::make_shared<ScriptedBackend>();
    nlohmann::json vec = query;
    backend->add(steps::embed, ModelRole::Embedder, {vec.dump()});
    GatewayConfig gc;
    gc.backoff_base_ms = 0;
    Gateway gateway{gc};
    gateway.set_backend_all(backend);
    SeedPipeline pipeline(graph, index, gateway, SeedConfig{});
    const CandidatePool pool = pipeline.anchor_entities(TopicSet{{"t"}, false}, 5);
    REQUIRE(pool.pool.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(pool.pool[i].id == all[i].first);
    }
}

TEST_CASE("anchoring only returns entities present in the graph") {
    Fixture fx;
    // The index also covers an id the graph does not have.
    fx.index.upsert("phantom", {1.0, 0.0, 0.0});
    fx.backend->add(steps::embed, ModelRole::Embedder, {"[1,0,0]"});
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
    const CandidatePool pool = pipeline.anchor_entities(TopicSet{{"t"}, false}, 3);
    for (const auto& candidate : pool.pool) {
        CHECK(candidate.id != "phantom");
        CHECK(fx.graph.has_entity(candidate.id));
    }
}

TEST_CASE("anchor_entities requires a populated index") {
    Fixture fx;
    EmbedIndex empty(3);
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, empty, gateway, SeedConfig{});
    CHECK(code_of([&] { pipeline.anchor_entities(TopicSet{{"t"}, false}, 5); }) ==
          ErrorCode::EmptyIndex);
}

TEST_CASE("select_seeds keeps scripted valid picks and drops foreign ids") {
    Fixture fx;
    fx.backend->add(steps::embed, ModelRole::Embedder, {"[1,0,0]"});
    fx.backend->add(steps::seed, ModelRole::Reasoner, {"heart0, not-in-pool, heart1"});
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
    const TopicSet topics{{"hearts"}, false};
    const CandidatePool pool = pipeline.anchor_entities(topics, 4);
    const SeedSet seeds = pipeline.select_seeds(pool, topics, "q");
    REQUIRE(seeds.seeds.size() == 2);
    CHECK(seeds.seeds[0] == "heart0");
    CHECK(seeds.seeds[1] == "heart1");
    CHECK(!seeds.fallback_used);
}

TEST_CASE("select_seeds falls back to best-per-topic after re-asks") {
    Fixture fx;
    fx.backend->add(steps::embed, ModelRole::Embedder, {"[1,0,0]", "[0,1,0]", "[0.7,0.7,0]"});
    fx.backend->add(steps::seed, ModelRole::Reasoner, {"nothing", "useful", "here"});
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
    const TopicSet topics{{"hearts", "kidneys", "mixed"}, false};
    const CandidatePool pool = pipeline.anchor_entities(topics, 3);

    // Best-per-topic by hand: heart0 (cos=1 with x axis), kidney0, bridge.
    const SeedSet seeds = pipeline.select_seeds(pool, topics, "q");
    CHECK(seeds.fallback_used);
    REQUIRE(seeds.seeds.size() == 3);
    CHECK(seeds.seeds[0] == "heart0");
    CHECK(seeds.seeds[1] == "kidney0");
    CHECK(seeds.seeds[2] == "bridge");
}

TEST_CASE("run yields seeds from a non-empty graph even without embeddings") {
    Fixture fx;
    fx.backend->add(steps::topics, ModelRole::Reasoner, {"anything"});
    EmbedIndex empty(3);
    Gateway gateway = fx.gateway();
    SeedPipeline pipeline(fx.graph, empty, gateway, SeedConfig{});
    const SeedOutcome outcome = pipeline.run("q");
    CHECK(outcome.seeds.fallback_used);
    CHECK(!outcome.seeds.seeds.empty());
    for (const auto& id : outcome.seeds.seeds) CHECK(fx.graph.has_entity(id));
}

TEST_CASE("run fails only on an empty graph") {
    KnowledgeGraph empty_graph;
    EmbedIndex index(3);
    GatewayConfig gc;
    Gateway gateway{gc};
    SeedPipeline pipeline(empty_graph, index, gateway, SeedConfig{});
    CHECK(code_of([&] { pipeline.run("q"); }) == ErrorCode::SeedFailure);
}

TEST_CASE("seed selection is deterministic for fixed embeddings") {
    for (int run = 0; run < 2; ++run) {
        Fixture fx;
        fx.backend->add(steps::embed, ModelRole::Embedder, {"[1,0,0]"});
        Gateway gateway = fx.gateway();
        SeedPipeline pipeline(fx.graph, fx.index, gateway, SeedConfig{});
        const CandidatePool pool = pipeline.anchor_entities(TopicSet{{"t"}, false}, 5);
        static std::vector<EntityId> first_run;
        std::vector<EntityId> ids;
        for (const auto& candidate : pool.pool) ids.push_back(candidate.id);
        if (run == 0) {
            first_run = ids;
        } else {
            CHECK(ids == first_run);
        }
    }
}
