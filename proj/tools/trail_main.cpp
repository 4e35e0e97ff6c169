#include <CLI11.hpp>

#include "trail/agent_loop.hpp"
#include "trail/bench_runner.hpp"
#include "trail/config.hpp"
#include "trail/http_backend.hpp"
#include "trail/ingest.hpp"
#include "trail/scripted_backend.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAbstain = 2;
constexpr int kExitConfig = 64;
constexpr int kExitTransport = 69;
constexpr int kExitInternal = 70;

int exit_code_for(const trail::Error& error) {
    switch (error.code()) {
    case trail::ErrorCode::TransportFailure:
        return kExitTransport;
    case trail::ErrorCode::Misconfiguration:
    case trail::ErrorCode::SeedFailure:
    case trail::ErrorCode::IoFailure:
    case trail::ErrorCode::MalformedRecord:
    case trail::ErrorCode::EmptyIndex:
    case trail::ErrorCode::PreconditionViolation:
        return kExitConfig;
    default:
        return kExitInternal;
    }
}

trail::Gateway make_gateway(const trail::EngineConfig& config,
                            const std::string& scripted_path) {
    trail::Gateway gateway(config.gateway);
    if (!scripted_path.empty()) {
        auto backend = std::make_shared<trail::ScriptedBackend>(
            trail::ScriptedBackend::from_file(scripted_path));
        gateway.set_backend_all(std::move(backend));
    } else {
        auto backend =
            std::make_shared<trail::HttpBackend>(trail::HttpBackend::from_env(config.gateway));
        gateway.set_backend_all(std::move(backend));
    }
    return gateway;
}

void print_delta(const trail::RefineOutcome& delta) {
    std::cout << "inserted: " << delta.inserted.size() << " elements\n";
    std::cout << "rejected: " << delta.rejected.size() << " candidates\n";
    std::cout << "pruned: " << delta.pruned.size() << " elements\n";
    std::cout << "rescored: " << delta.rescored.size() << " elements\n";
}

struct InspectFilter {
    int confidence_below = -1; // -1 = no filter
    bool generated_only = false;

    bool keep(const trail::Provenance& provenance, int confidence) const {
        if (generated_only && provenance.kind != trail::ProvenanceKind::Generated)
            return false;
        if (confidence_below >= 0 && confidence >= confidence_below) return false;
        return true;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"trail: multi-hop question answering over an evolving knowledge graph"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string scripted_path;
    std::string out_path;
    std::string trace_dir = "traces";
    bool frozen = false;
    app.add_option("--config", config_path, "engine config file (key = value lines)");
    app.add_option("--scripted", scripted_path, "scripted scenario file (offline backend)");
    app.add_option("--out", out_path, "output path override");
    app.add_option("--trace-dir", trace_dir, "directory for per-query trace files");
    app.add_flag("--frozen", frozen, "bench: discard KG changes after each item");

    // ingest
    auto* cmd_ingest = app.add_subcommand("ingest", "build a truth graph from a fact file");
    std::string facts_path;
    std::string embeddings_path;
    cmd_ingest->add_option("facts", facts_path, "line-delimited fact records")->required();
    cmd_ingest->add_option("--embeddings", embeddings_path, "embedding sidecar to attach");

    // ask
    auto* cmd_ask = app.add_subcommand("ask", "answer one query, updating the graph");
    std::string graph_path;
    std::string query;
    std::string session_id = "ask";
    cmd_ask->add_option("graph", graph_path, "graph file")->required();
    cmd_ask->add_option("query", query, "the question")->required();
    cmd_ask->add_option("--session", session_id, "session id (trace file name)");

    // bench
    auto* cmd_bench = app.add_subcommand("bench", "run an MCQ benchmark file");
    std::string bench_graph_path;
    std::string bench_path;
    std::string report_path;
    cmd_bench->add_option("graph", bench_graph_path, "graph file")->required();
    cmd_bench->add_option("bench", bench_path, "bench item file")->required();
    cmd_bench->add_option("--report", report_path, "report output (default <bench>.report.json)");

    // inspect
    auto* cmd_inspect = app.add_subcommand("inspect", "list graph elements");
    std::string inspect_graph_path;
    InspectFilter filter;
    cmd_inspect->add_option("graph", inspect_graph_path, "graph file")->required();
    cmd_inspect->add_option("--confidence-below", filter.confidence_below,
                            "only elements with confidence < N");
    cmd_inspect->add_flag("--generated-only", filter.generated_only,
                          "only generated elements");

    // export
    auto* cmd_export = app.add_subcommand("export", "write a copy of the graph");
    std::string export_graph_path;
    bool truth_only = false;
    std::string format = "graph";
    cmd_export->add_option("graph", export_graph_path, "graph file")->required();
    cmd_export->add_flag("--truth-only", truth_only, "drop generated elements");
    cmd_export->add_option("--format", format, "graph|facts")
        ->check(CLI::IsMember({"graph", "facts"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        trail::EngineConfig config;
        if (!config_path.empty()) config = trail::EngineConfig::from_file(config_path);
        config.validate();

        if (cmd_ingest->parsed()) {
            if (out_path.empty()) {
                throw trail::Error(trail::ErrorCode::Misconfiguration,
                                   "ingest requires --out <graph path>");
            }
            const auto summary = trail::ingest(facts_path, embeddings_path, out_path);
            std::cout << "entities: " << summary.entities << "\n"
                      << "edges: " << summary.edges << "\n"
                      << "duplicates skipped: " << summary.duplicates_skipped << "\n";
            if (!embeddings_path.empty()) {
                std::cout << "embeddings attached: " << summary.embeddings_attached << "\n"
                          << "embeddings skipped: " << summary.embeddings_skipped << "\n";
            }
            return kExitOk;
        }

        if (cmd_ask->parsed()) {
            trail::KnowledgeGraph graph = trail::KnowledgeGraph::load(graph_path);
            const trail::EmbedIndex index = trail::load_sidecar_or_empty(graph_path);
            trail::Gateway gateway = make_gateway(config, scripted_path);

            trail::AgentLoop agent(graph, index, gateway, config);
            const trail::AnswerResult result = agent.run_query(session_id, query, trace_dir);

            graph.save(out_path.empty() ? graph_path : out_path);

            std::cout << "answer: " << result.answer << "\n";
            std::cout << "citations: [";
            for (std::size_t i = 0; i < result.citations.size(); ++i) {
                if (i) std::cout << ", ";
                std::cout << result.citations[i];
            }
            std::cout << "]\n";
            for (const auto& fact : result.supporting_facts) {
                std::cout << "  " << fact[0] << " --" << fact[1] << "--> " << fact[2] << "\n";
            }
            print_delta(result.kg_delta);
            if (!result.trace_path.empty()) std::cout << "trace: " << result.trace_path << "\n";
            return result.abstained ? kExitAbstain : kExitOk;
        }

        if (cmd_bench->parsed()) {
            trail::KnowledgeGraph graph = trail::KnowledgeGraph::load(bench_graph_path);
            const trail::EmbedIndex index = trail::load_sidecar_or_empty(bench_graph_path);
            trail::Gateway gateway = make_gateway(config, scripted_path);

            const trail::BenchFile bench = trail::load_bench_file(bench_path);
            for (const auto& message : bench.skipped) {
                std::cerr << "warning: skipped " << message << "\n";
            }
            const trail::BenchReport report =
                trail::run_bench(graph, index, gateway, config, bench, trace_dir, frozen);

            const std::string report_file =
                report_path.empty() ? bench_path + ".report.json" : report_path;
            {
                std::ofstream out(report_file, std::ios::binary | std::ios::trunc);
                if (!out) {
                    throw trail::Error(trail::ErrorCode::IoFailure,
                                       "cannot write report '" + report_file + "'");
                }
                out << report.to_json().dump(2) << "\n";
            }
            if (!frozen) graph.save(out_path.empty() ? bench_graph_path : out_path);

            std::cout << "total: " << report.total << "\n"
                      << "correct: " << report.correct << "\n"
                      << "abstained: " << report.abstained << "\n"
                      << "skipped: " << report.skipped << "\n"
                      << "accuracy: " << report.accuracy << "\n"
                      << "entities: " << report.before.entities << " -> "
                      << report.after.entities << "\n"
                      << "edges: " << report.before.edges << " -> " << report.after.edges
                      << "\n"
                      << "report: " << report_file << "\n";
            return kExitOk;
        }

        if (cmd_inspect->parsed()) {
            if (filter.confidence_below != -1 &&
                (filter.confidence_below < 0 || filter.confidence_below > 100)) {
                throw trail::Error(trail::ErrorCode::Misconfiguration,
                                   "--confidence-below must be in [0,100]");
            }
            const trail::KnowledgeGraph graph = trail::KnowledgeGraph::load(inspect_graph_path);
            std::cout << "id\ttype\tkind\tconf\tdetail\n";
            std::size_t rows = 0;
            for (const auto& [id, entity] : graph.entities()) {
                if (!filter.keep(entity.provenance, entity.confidence)) continue;
                std::cout << id << "\tentity\t"
                          << (entity.provenance.kind == trail::ProvenanceKind::Truth
                                  ? "truth"
                                  : "generated")
                          << "\t" << entity.confidence << "\t" << entity.name << "\n";
                ++rows;
            }
            for (const auto& [id, edge] : graph.edges()) {
                if (!filter.keep(edge.provenance, edge.confidence)) continue;
                std::cout << id << "\tedge\t"
                          << (edge.provenance.kind == trail::ProvenanceKind::Truth
                                  ? "truth"
                                  : "generated")
                          << "\t" << edge.confidence << "\t" << edge.head << " --"
                          << edge.predicate << "--> " << edge.tail << "\n";
                ++rows;
            }
            std::cout << "rows: " << rows << "\n";
            return kExitOk;
        }

        if (cmd_export->parsed()) {
            if (out_path.empty()) {
                throw trail::Error(trail::ErrorCode::Misconfiguration,
                                   "export requires --out <path>");
            }
            const trail::KnowledgeGraph graph = trail::KnowledgeGraph::load(export_graph_path);

            trail::KnowledgeGraph filtered;
            const trail::KnowledgeGraph* source = &graph;
            if (truth_only) {
                for (const auto& [id, entity] : graph.entities()) {
                    if (entity.provenance.kind == trail::ProvenanceKind::Truth) {
                        filtered.add_entity(entity);
                    }
                }
                for (const auto& [id, edge] : graph.edges()) {
                    if (edge.provenance.kind == trail::ProvenanceKind::Truth &&
                        filtered.has_entity(edge.head) && filtered.has_entity(edge.tail)) {
                        filtered.add_edge(edge);
                    }
                }
                source = &filtered;
            }

            if (format == "graph") {
                source->save(out_path);
            } else {
                std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
                if (!out) {
                    throw trail::Error(trail::ErrorCode::IoFailure,
                                       "cannot write '" + out_path + "'");
                }
                for (const auto& [id, edge] : source->edges()) {
                    nlohmann::json record;
                    record["head"] = source->entity(edge.head).name;
                    record["predicate"] = edge.predicate;
                    record["tail"] = source->entity(edge.tail).name;
                    if (!source->entity(edge.head).description.empty()) {
                        record["head_description"] = source->entity(edge.head).description;
                    }
                    if (!source->entity(edge.tail).description.empty()) {
                        record["tail_description"] = source->entity(edge.tail).description;
                    }
                    if (!edge.description.empty()) {
                        record["edge_description"] = edge.description;
                    }
                    out << record.dump() << "\n";
                }
            }
            std::cout << "exported " << source->stats().entities << " entities, "
                      << source->stats().edges << " edges\n";
            return kExitOk;
        }

        return kExitConfig;
    } catch (const trail::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
}
