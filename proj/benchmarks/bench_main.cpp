#include <benchmark/benchmark.h>

#include "trail/embed_index.hpp"
#include "trail/kg_store.hpp"
#include "trail/refine.hpp"

#include <filesystem>
#include <random>

namespace {

using namespace trail;

EmbedIndex build_index(std::size_t count, std::size_t dim, std::mt19937& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    EmbedIndex index(dim);
    for (std::size_t i = 0; i < count; ++i) {
        EmbeddingVector v(dim);
        for (auto& x : v) x = dist(rng);
        index.upsert("v" + std::to_string(i), std::move(v));
    }
    return index;
}

KnowledgeGraph build_graph(std::size_t entities, std::size_t edges) {
    KnowledgeGraph graph;
    for (std::size_t i = 0; i < entities; ++i) {
        Entity e;
        e.id = "n" + std::to_string(i);
        e.name = e.id;
        e.provenance = {ProvenanceKind::Truth, std::nullopt, std::nullopt};
        e.confidence = 100;
        graph.add_entity(std::move(e));
    }
    std::mt19937 rng(17);
    std::uniform_int_distribution<std::size_t> pick(0, entities - 1);
    for (std::size_t i = 0; i < edges; ++i) {
        Edge e;
        e.id = "e" + std::to_string(i);
        e.head = "n" + std::to_string(pick(rng));
        e.tail = "n" + std::to_string(pick(rng));
        e.predicate = "rel";
        e.provenance = {ProvenanceKind::Truth, std::nullopt, std::nullopt};
        e.confidence = 100;
        graph.add_edge(std::move(e));
    }
    return graph;
}

void BM_TopK(benchmark::State& state) {
    std::mt19937 rng(1);
    const auto index = build_index(static_cast<std::size_t>(state.range(0)), 64, rng);
    std::normal_distribution<double> dist(0.0, 1.0);
    EmbeddingVector query(64);
    for (auto& x : query) x = dist(rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(index.top_k(query, 10));
    }
}
BENCHMARK(BM_TopK)->Arg(1000)->Arg(10000)->Arg(50000);

void BM_Neighbors(benchmark::State& state) {
    const auto graph = build_graph(static_cast<std::size_t>(state.range(0)),
                                   static_cast<std::size_t>(state.range(0)) * 4);
    std::mt19937 rng(2);
    std::uniform_int_distribution<std::size_t> pick(
        0, static_cast<std::size_t>(state.range(0)) - 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(graph.neighbors("n" + std::to_string(pick(rng))));
    }
}
BENCHMARK(BM_Neighbors)->Arg(1000)->Arg(10000);

void BM_SaveLoad(benchmark::State& state) {
    const auto graph = build_graph(static_cast<std::size_t>(state.range(0)),
                                   static_cast<std::size_t>(state.range(0)) * 2);
    const std::string path =
        (std::filesystem::temp_directory_path() / "trail-bench-graph.jsonl").string();
    for (auto _ : state) {
        graph.save(path);
        benchmark::DoNotOptimize(KnowledgeGraph::load(path));
    }
    std::filesystem::remove(path);
}
BENCHMARK(BM_SaveLoad)->Arg(1000)->Arg(5000);

void BM_CombineConfidence(benchmark::State& state) {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> score(0, 100);
    for (auto _ : state) {
        benchmark::DoNotOptimize(combine_confidence(score(rng), score(rng), 0.5));
    }
}
BENCHMARK(BM_CombineConfidence);

} // namespace

BENCHMARK_MAIN();
