#include "trail/bench_runner.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace trail {

using nlohmann::json;

BenchFile load_bench_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open bench file '" + path + "'");
    }
    BenchFile bench;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto skip = [&](const std::string& why) {
            bench.skipped.push_back("line " + std::to_string(line_no) + ": " + why);
        };
        json record = json::parse(text, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            skip("not an item object");
            continue;
        }
        if (!record.contains("id") || !record["id"].is_string() ||
            !record.contains("question") || !record["question"].is_string()) {
            skip("missing id or question");
            continue;
        }
        if (!record.contains("options") || !record["options"].is_object() ||
            record["options"].size() < 2) {
            skip("needs at least 2 options");
            continue;
        }
        if (!record.contains("gold") || !record["gold"].is_string()) {
            skip("missing gold");
            continue;
        }
        BenchItem item;
        item.id = record["id"].get<std::string>();
        item.question = record["question"].get<std::string>();
        bool bad_option = false;
        for (const auto& [letter, option] : record["options"].items()) {
            if (!option.is_string()) {
                bad_option = true;
                break;
            }
            item.options[letter] = option.get<std::string>();
        }
        if (bad_option) {
            skip("options must map letters to strings");
            continue;
        }
        item.gold = record["gold"].get<std::string>();
        std::transform(item.gold.begin(), item.gold.end(), item.gold.begin(),
                       [](unsigned char c) { return std::toupper(c); });
        if (!item.options.count(record["gold"].get<std::string>()) &&
            !item.options.count(item.gold)) {
            skip("gold is not an option key");
            continue;
        }
        bench.items.push_back(std::move(item));
    }
    return bench;
}

std::string render_bench_question(const BenchItem& item) {
    std::string text = item.question + "\n\nOptions:\n";
    for (const auto& [letter, option] : item.options) {
        text += letter + ") " + option + "\n";
    }
    return text;
}

json BenchReport::to_json() const {
    json per = json::array();
    json entity_series = json::array();
    json edge_series = json::array();
    for (const auto& row : per_item) {
        per.push_back(json{{"id", row.id},
                           {"predicted", row.predicted},
                           {"gold", row.gold},
                           {"correct", row.correct},
                           {"abstained", row.abstained},
                           {"entities_after", row.after.entities},
                           {"edges_after", row.after.edges}});
        entity_series.push_back(row.after.entities);
        edge_series.push_back(row.after.edges);
    }
    return json{{"total", total},
                {"correct", correct},
                {"abstained", abstained},
                {"skipped", skipped},
                {"accuracy", accuracy},
                {"per_item", per},
                {"kg_growth", json{{"entities_before", before.entities},
                                   {"entities_after", after.entities},
                                   {"edges_before", before.edges},
                                   {"edges_after", after.edges},
                                   {"entity_series", entity_series},
                                   {"edge_series", edge_series}}}};
}

BenchReport run_bench(KnowledgeGraph& graph, const EmbedIndex& index, Gateway& gateway,
                      const EngineConfig& config, const BenchFile& bench,
                      const std::string& trace_dir, bool frozen) {
    BenchReport report;
    report.skipped = bench.skipped.size();
    report.before = graph.stats();

    for (const BenchItem& item : bench.items) {
        const std::string question = render_bench_question(item);

        BenchItemResult row;
        row.id = item.id;
        row.gold = item.gold;

        if (frozen) {
            KnowledgeGraph snapshot = graph; // changes discarded after the item
            AgentLoop agent(snapshot, index, gateway, config);
            const AnswerResult result = agent.run_query(item.id, question, trace_dir);
            row.predicted = result.answer;
            row.abstained = result.abstained;
            row.after = graph.stats();
        } else {
            AgentLoop agent(graph, index, gateway, config);
            const AnswerResult result = agent.run_query(item.id, question, trace_dir);
            row.predicted = result.answer;
            row.abstained = result.abstained;
            row.after = graph.stats();
        }

        row.correct = !row.abstained && row.predicted == row.gold;
        if (row.correct) ++report.correct;
        if (row.abstained) ++report.abstained;
        ++report.total;
        report.per_item.push_back(std::move(row));
    }

    report.after = graph.stats();
    report.accuracy = report.total == 0
                          ? 0.0
                          : static_cast<double>(report.correct) / static_cast<double>(report.total);
    return report;
}

} // namespace trail
