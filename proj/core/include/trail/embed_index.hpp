#pragma once

#include "trail/error.hpp"
#include "trail/kg_store.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace trail {

using EmbeddingVector = std::vector<double>;

// dot(u,v) / (|u||v|). Throws DimensionMismatch or ZeroNorm.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

/// Exact (linear scan) Top-K cosine index over entity embeddings. All
/// vectors share the dimension fixed at construction. An all-zero vector is
/// the "missing embedding" sentinel: it is stored but never retrieved, so
/// entities without a real embedding stay out of anchoring instead of
/// matching everything.
class EmbedIndex {
public:
    explicit EmbedIndex(std::size_t dim);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    bool empty() const { return vectors_.empty(); }

    void upsert(const EntityId& id, EmbeddingVector vector);

    bool contains(const EntityId& id) const { return vectors_.count(id) != 0; }

    // k highest-cosine entries, descending score, ties by ascending id.
    // Returns fewer than k when the index is smaller.
    std::vector<std::pair<EntityId, double>> top_k(const EmbeddingVector& query,
                                                   std::size_t k) const;

    const std::map<EntityId, EmbeddingVector>& vectors() const { return vectors_; }

    // Sidecar file: one {"dim": D} header line, then {"id", "vector"} records.
    void save(const std::string& path) const;
    static EmbedIndex load(const std::string& path);

private:
    std::size_t dim_;
    std::map<EntityId, EmbeddingVector> vectors_;
};

} // namespace trail
