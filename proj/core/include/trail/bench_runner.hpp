#pragma once

#include "trail/agent_loop.hpp"
#include "trail/config.hpp"
#include "trail/embed_index.hpp"
#include "trail/kg_store.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace trail {

struct BenchItem {
    std::string id;
    std::string question;
    std::map<std::string, std::string> options; // letter -> text
    std::string gold;
};

// Malformed lines are collected as skips, not errors, so one bad item never
// aborts a benchmark run.
struct BenchFile {
    std::vector<BenchItem> items;
    std::vector<std::string> skipped; // one message per skipped line
};

BenchFile load_bench_file(const std::string& path);

// Question text as the reasoner sees it: question plus lettered options.
std::string render_bench_question(const BenchItem& item);

struct BenchItemResult {
    std::string id;
    std::string predicted;
    std::string gold;
    bool correct = false;
    bool abstained = false;
    GraphStats after; // KG size once the item's session finished
};

struct BenchReport {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t abstained = 0;
    std::size_t skipped = 0;
    double accuracy = 0.0;
    std::vector<BenchItemResult> per_item;
    GraphStats before;
    GraphStats after;

    nlohmann::json to_json() const;
};

// Runs every item as an independent session, in file order, against the
// evolving graph. frozen = per-item snapshots instead (changes discarded).
BenchReport run_bench(KnowledgeGraph& graph, const EmbedIndex& index, Gateway& gateway,
                      const EngineConfig& config, const BenchFile& bench,
                      const std::string& trace_dir, bool frozen);

} // namespace trail
