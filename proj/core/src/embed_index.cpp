#include "trail/embed_index.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace trail {

using nlohmann::json;

namespace {

double norm(const EmbeddingVector& v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

bool is_zero(const EmbeddingVector& v) {
    for (double x : v) {
        if (x != 0.0) return false;
    }
    return true;
}

} // namespace

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.size() != v.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    }
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) {
        throw Error(ErrorCode::ZeroNorm, "cosine of a zero vector is undefined");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    return dot / (nu * nv);
}

EmbedIndex::EmbedIndex(std::size_t dim) : dim_(dim) {
    if (dim == 0) {
        throw Error(ErrorCode::InvariantViolation, "index dimension must be positive");
    }
}

void EmbedIndex::upsert(const EntityId& id, EmbeddingVector vector) {
    if (vector.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "vector has dimension " + std::to_string(vector.size()) +
                        ", index expects " + std::to_string(dim_));
    }
    vectors_[id] = std::move(vector);
}

std::vector<std::pair<EntityId, double>>
EmbedIndex::top_k(const EmbeddingVector& query, std::size_t k) const {
    if (k == 0) {
        throw Error(ErrorCode::PreconditionViolation, "top_k requires k >= 1");
    }
    if (vectors_.empty()) {
        throw Error(ErrorCode::EmptyIndex, "top_k over an empty index");
    }
    if (query.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "query has dimension " + std::to_string(query.size()) +
                        ", index expects " + std::to_string(dim_));
    }
    if (is_zero(query)) {
        throw Error(ErrorCode::ZeroNorm, "top_k with a zero-norm query");
    }

    std::vector<std::pair<EntityId, double>> scored;
    scored.reserve(vectors_.size());
    for (const auto& [id, v] : vectors_) {
        if (is_zero(v)) continue; // missing-embedding sentinel
        scored.emplace_back(id, cosine(query, v));
    }

    const std::size_t take = std::min(k, scored.size());
    auto better = [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), better);
    scored.resize(take);
    return scored;
}

void EmbedIndex::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::IoFailure, "cannot open '" + tmp + "' for writing");
        }
        out << json{{"dim", dim_}}.dump() << '\n';
        for (const auto& [id, v] : vectors_) {
            out << json{{"id", id}, {"vector", v}}.dump() << '\n';
        }
        if (!out.good()) {
            throw Error(ErrorCode::IoFailure, "write failed for '" + tmp + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw Error(ErrorCode::IoFailure, "rename failed: " + ec.message());
    }
}

EmbedIndex EmbedIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
    }
    std::string text;
    std::size_t line_no = 0;

    if (!std::getline(in, text)) {
        throw Error(ErrorCode::MalformedRecord, "missing {\"dim\": D} header", 1);
    }
    ++line_no;
    json header = json::parse(text, nullptr, false);
    if (header.is_discarded() || !header.is_object() || !header.contains("dim") ||
        !header["dim"].is_number_unsigned() || header["dim"].get<std::size_t>() == 0) {
        throw Error(ErrorCode::MalformedRecord, "header must be {\"dim\": D} with D >= 1",
                    line_no);
    }
    EmbedIndex index(header["dim"].get<std::size_t>());

    while (std::getline(in, text)) {
        ++line_no;
        json record = json::parse(text, nullptr, false);
        if (record.is_discarded() || !record.is_object() || !record.contains("id") ||
            !record["id"].is_string() || !record.contains("vector") ||
            !record["vector"].is_array()) {
            throw Error(ErrorCode::MalformedRecord, "expected {\"id\", \"vector\"}", line_no);
        }
        EmbeddingVector v;
        v.reserve(record["vector"].size());
        for (const auto& x : record["vector"]) {
            if (!x.is_number()) {
                throw Error(ErrorCode::MalformedRecord, "vector entries must be numbers",
                            line_no);
            }
            v.push_back(x.get<double>());
        }
        if (v.size() != index.dim()) {
            throw Error(ErrorCode::MalformedRecord,
                        "vector dimension " + std::to_string(v.size()) +
                            " does not match header dim " + std::to_string(index.dim()),
                        line_no);
        }
        index.upsert(record["id"].get<std::string>(), std::move(v));
    }
    return index;
}

} // namespace trail
