#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cbir/vector_index.hpp"

namespace cbir {

struct Hit {
    RecordId record_id = 0;
    float similarity = 0.0f;

    bool operator==(const Hit&) const = default;
};

/// Ranking order: higher similarity first, ties by ascending record id.
constexpr bool ranks_before(const Hit& a, const Hit& b) noexcept {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.record_id < b.record_id);
}

struct RetrievalResult {
    RecordId query_record_id = 0;
    std::vector<Hit> hits;

    bool operator==(const RetrievalResult&) const = default;
};

/// Dot product of two unit vectors, clamped to [-1, 1].
///
/// The accumulation order is fixed so every code path (this function, the
/// blocked scan in top_n/batch_top_n, any thread count) produces the same
/// bits for the same pair: element i is accumulated with a fused
/// multiply-add into lane i mod 8, in increasing i, starting from +0; the
/// lanes are then combined as ((l0+l4)+(l2+l6)) + ((l1+l5)+(l3+l7)).
float cosine_similarity(std::span<const float> a, std::span<const float> b);

struct SearchOptions {
    std::size_t workers = 1;
    /// Rows per chunk for the within-query parallel scan.
    std::size_t chunk_rows = 4096;
};

/// Exact top-n by cosine similarity. Returns min(n, candidates) hits. The
/// query must already be unit norm (NormViolation otherwise).
RetrievalResult top_n(std::span<const float> query, const VectorIndex& index, std::size_t n,
                      std::optional<RecordId> exclude_id = std::nullopt, const SearchOptions& options = {});

struct Query {
    RecordId record_id = 0;
    std::span<const float> vector;
};

/// Per-query results identical to sequential top_n calls. Queries are
/// processed in blocks so each index row is streamed once per block. Errors
/// carry the record id of the first offending query.
std::vector<RetrievalResult> batch_top_n(std::span<const Query> queries, const VectorIndex& index, std::size_t n,
                                         bool exclude_self, const SearchOptions& options = {});

/// Every row of `queries` as a query.
std::vector<RetrievalResult> batch_top_n(const VectorIndex& queries, const VectorIndex& index, std::size_t n,
                                         bool exclude_self, const SearchOptions& options = {});

}  // namespace cbir
