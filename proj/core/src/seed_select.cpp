#include "trail/seed_select.hpp"

#include "trail/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace trail {

namespace {

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

std::string lower(std::string text) {
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return text;
}

std::string description_snippet(const std::string& description) {
    constexpr std::size_t kMax = 80;
    if (description.size() <= kMax) return description;
    return description.substr(0, kMax) + "...";
}

std::vector<std::string> split_id_tokens(const std::string& reply) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : reply) {
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

} // namespace

std::vector<std::string> parse_topic_list(const std::string& reply) {
    std::vector<std::string> topics;
    std::set<std::string> seen;
    std::string current;
    auto flush = [&] {
        const std::string topic = trim(current);
        current.clear();
        if (topic.empty()) return;
        if (seen.insert(lower(topic)).second) topics.push_back(topic);
    };
    for (char c : reply) {
        if (c == ';' || c == '\n') {
            flush();
        } else {
            current.push_back(c);
        }
    }
    flush();
    return topics;
}

bool CandidatePool::contains(const EntityId& id) const {
    return std::any_of(pool.begin(), pool.end(),
                       [&](const PooledCandidate& c) { return c.id == id; });
}

SeedPipeline::SeedPipeline(const KnowledgeGraph& graph, const EmbedIndex& index,
                           Gateway& gateway, SeedConfig config)
    : graph_(graph), index_(index), gateway_(gateway), config_(config) {}

TopicSet SeedPipeline::identify_topics(const std::string& query) {
    if (trim(query).empty()) {
        throw Error(ErrorCode::PreconditionViolation, "blank query");
    }
    const std::string base_prompt = prompts::render(
        prompts::topic_extraction(),
        {{"query", query}, {"max_topics", std::to_string(config_.max_topics)}});
    for (int ask = 0; ask < 3; ++ask) {
        CompletionRequest request;
        request.role = ModelRole::Reasoner;
        request.step = steps::topics;
        request.prompt = ask == 0
                             ? base_prompt
                             : base_prompt + "\n\nReply with semicolon-separated topics only.";
        request.temperature = gateway_.config().reasoner_temperature;
        request.max_output = gateway_.config().max_output;
        auto topics = parse_topic_list(gateway_.complete(std::move(request)).front());
        if (!topics.empty()) {
            if (topics.size() > static_cast<std::size_t>(config_.max_topics)) {
                topics.resize(static_cast<std::size_t>(config_.max_topics));
            }
            return TopicSet{std::move(topics), false};
        }
    }
    // Degrade to plain embedding retrieval over the raw query.
    return TopicSet{{trim(query)}, true};
}

CandidatePool SeedPipeline::anchor_entities(const TopicSet& topics, int k) {
    if (index_.empty()) {
        throw Error(ErrorCode::EmptyIndex, "anchor_entities needs a populated embedding index");
    }
    const auto vectors = gateway_.embed(topics.topics, index_.dim());

    CandidatePool result;
    std::map<EntityId, std::size_t> position; // id -> index into pool
    for (std::size_t t = 0; t < topics.topics.size(); ++t) {
        auto ranked = index_.top_k(vectors[t], static_cast<std::size_t>(k));
        // Only anchor onto entities actually present in the graph.
        std::erase_if(ranked, [&](const auto& entry) { return !graph_.has_entity(entry.first); });
        for (const auto& [id, score] : ranked) {
            auto it = position.find(id);
            if (it == position.end()) {
                position.emplace(id, result.pool.size());
                result.pool.push_back(PooledCandidate{id, score, graph_.degree(id)});
            } else if (score > result.pool[it->second].score) {
                result.pool[it->second].score = score;
            }
        }
        result.per_topic.emplace_back(topics.topics[t], std::move(ranked));
    }
    return result;
}

SeedSet SeedPipeline::select_seeds(const CandidatePool& pool, const TopicSet& topics,
                                   const std::string& query) {
    if (pool.pool.empty()) {
        throw Error(ErrorCode::PreconditionViolation, "select_seeds over an empty pool");
    }

    std::string candidate_lines;
    for (const auto& candidate : pool.pool) {
        const Entity& entity = graph_.entity(candidate.id);
        std::ostringstream line;
        line << candidate.id << " | " << entity.name << " | similarity=" << candidate.score
             << " | degree=" << candidate.degree << " | "
             << description_snippet(entity.description) << '\n';
        candidate_lines += line.str();
    }
    std::string topics_joined;
    for (std::size_t i = 0; i < topics.topics.size(); ++i) {
        if (i) topics_joined += "; ";
        topics_joined += topics.topics[i];
    }

    const std::string base_prompt = prompts::render(
        prompts::seed_selection(), {{"query", query},
                                    {"topics", topics_joined},
                                    {"candidates", candidate_lines},
                                    {"max_seeds", std::to_string(config_.max_seeds)}});
    for (int ask = 0; ask < 3; ++ask) {
        CompletionRequest request;
        request.role = ModelRole::Reasoner;
        request.step = steps::seed;
        request.prompt = ask == 0
                             ? base_prompt
                             : base_prompt + "\n\nReply with comma-separated candidate ids only.";
        request.temperature = gateway_.config().reasoner_temperature;
        request.max_output = gateway_.config().max_output;
        const std::string reply = gateway_.complete(std::move(request)).front();

        std::vector<EntityId> chosen;
        for (const auto& token : split_id_tokens(reply)) {
            if (!pool.contains(token)) continue; // ids outside the pool are dropped
            if (std::find(chosen.begin(), chosen.end(), token) == chosen.end()) {
                chosen.push_back(token);
            }
        }
        if (!chosen.empty()) {
            if (chosen.size() > static_cast<std::size_t>(config_.max_seeds)) {
                chosen.resize(static_cast<std::size_t>(config_.max_seeds));
            }
            return SeedSet{std::move(chosen), false, ""};
        }
    }

    // Fallback: the best-similarity candidate of each topic, deduplicated.
    SeedSet fallback;
    fallback.fallback_used = true;
    fallback.fallback_reason = "unparsable-selection";
    for (const auto& [topic, ranked] : pool.per_topic) {
        if (ranked.empty()) continue;
        const EntityId& best = ranked.front().first;
        if (std::find(fallback.seeds.begin(), fallback.seeds.end(), best) ==
            fallback.seeds.end()) {
            fallback.seeds.push_back(best);
        }
        if (fallback.seeds.size() == static_cast<std::size_t>(config_.max_seeds)) break;
    }
    return fallback;
}

SeedOutcome SeedPipeline::run(const std::string& query) {
    if (graph_.entities().empty()) {
        throw Error(ErrorCode::SeedFailure, "graph has no entities to seed from");
    }
    SeedOutcome outcome;
    outcome.topics = identify_topics(query);
    if (index_.empty()) {
        // No embeddings at all: fall back to the first entities by id so a
        // query never aborts for lack of seeds.
        outcome.seeds.fallback_used = true;
        outcome.seeds.fallback_reason = "empty-index";
        for (const auto& [id, entity] : graph_.entities()) {
            outcome.seeds.seeds.push_back(id);
            if (outcome.seeds.seeds.size() == static_cast<std::size_t>(config_.max_seeds))
                break;
        }
        return outcome;
    }
    outcome.pool = anchor_entities(outcome.topics, config_.top_k);
    if (outcome.pool.pool.empty()) {
        outcome.seeds.fallback_used = true;
        outcome.seeds.fallback_reason = "empty-pool";
        for (const auto& [id, entity] : graph_.entities()) {
            outcome.seeds.seeds.push_back(id);
            if (outcome.seeds.seeds.size() == static_cast<std::size_t>(config_.max_seeds))
                break;
        }
        return outcome;
    }
    outcome.seeds = select_seeds(outcome.pool, outcome.topics, query);
    return outcome;
}

} // namespace trail
