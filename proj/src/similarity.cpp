#include "cbir/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cbir/error.hpp"
#include "cbir/parallel.hpp"
#include "dot_kernel.hpp"

namespace cbir {

namespace {

// Queries per block in batch_top_n and rows per scoring pass.
constexpr std::size_t kQueryBlock = 48;
constexpr std::size_t kRowBlock = 256;

inline float clamp_unit(float v) noexcept { return std::clamp(v, -1.0f, 1.0f); }

/// Bounded max-heap keyed on ranking order; the front is the worst kept hit.
class TopNCollector {
public:
    explicit TopNCollector(std::size_t n) : n_(n) { heap_.reserve(n); }

    void offer(float similarity, RecordId id) {
        if (heap_.size() < n_) {
            heap_.push_back({id, similarity});
            std::push_heap(heap_.begin(), heap_.end(), ranks_before);
            return;
        }
        const Hit& worst = heap_.front();
        if (similarity < worst.similarity) return;
        const Hit candidate{id, similarity};
        if (!ranks_before(candidate, worst)) return;
        std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
        heap_.back() = candidate;
        std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    }

    std::vector<Hit> take_sorted() && {
        std::sort_heap(heap_.begin(), heap_.end(), ranks_before);
        return std::move(heap_);
    }

private:
    std::size_t n_;
    std::vector<Hit> heap_;
};

void validate_query(std::span<const float> query, const VectorIndex& index, RecordId query_id) {
    if (query.size() != index.dimension()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "query " + std::to_string(query_id) + " has dimension " + std::to_string(query.size()) +
                        ", index has " + std::to_string(index.dimension()),
                    query_id);
    }
    for (float v : query) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteValue, "query " + std::to_string(query_id) + " has non-finite entries",
                        query_id);
        }
    }
    const double norm = l2_norm(query);
    if (!(std::abs(norm - 1.0) <= kUnitNormTolerance)) {
        throw Error(ErrorCode::NormViolation,
                    "query " + std::to_string(query_id) + " is not unit norm (" + std::to_string(norm) + ")",
                    query_id);
    }
}

void validate_search(const VectorIndex& index, std::size_t n) {
    if (n == 0) {
        throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
    }
    if (index.empty()) {
        throw Error(ErrorCode::EmptyIndex, "index is empty");
    }
}

/// Scans rows [begin, end) for a block of padded queries, feeding collectors.
void scan_rows(const float* padded_queries, std::span<const RecordId> query_ids, std::span<TopNCollector> collectors,
               std::span<const std::optional<RecordId>> exclude, const VectorIndex& index, std::size_t begin,
               std::size_t end) {
    const std::size_t count = query_ids.size();
    const std::size_t stride = index.stride();
    std::vector<float> scores(count * kRowBlock);
    const auto ids = index.record_ids();

    for (std::size_t r0 = begin; r0 < end; r0 += kRowBlock) {
        const std::size_t rows = std::min(kRowBlock, end - r0);
        detail::score_block(padded_queries, count, index.padded_row(r0), rows, stride, scores.data(), kRowBlock);
        for (std::size_t q = 0; q < count; ++q) {
            const float* row_scores = scores.data() + q * kRowBlock;
            auto& collector = collectors[q];
            if (exclude[q]) {
                const RecordId skip = *exclude[q];
                for (std::size_t r = 0; r < rows; ++r) {
                    if (ids[r0 + r] != skip) collector.offer(clamp_unit(row_scores[r]), ids[r0 + r]);
                }
            } else {
                for (std::size_t r = 0; r < rows; ++r) collector.offer(clamp_unit(row_scores[r]), ids[r0 + r]);
            }
        }
    }
}

std::vector<float> pad(std::span<const float> vector, std::size_t stride) {
    std::vector<float> out(stride, 0.0f);
    std::copy(vector.begin(), vector.end(), out.begin());
    return out;
}

}  // namespace

float cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch, "cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                                                      std::to_string(b.size()) + " differ");
    }
    return clamp_unit(detail::dot_fixed_order(a.data(), b.data(), a.size()));
}

RetrievalResult top_n(std::span<const float> query, const VectorIndex& index, std::size_t n,
                      std::optional<RecordId> exclude_id, const SearchOptions& options) {
    validate_search(index, n);
    validate_query(query, index, exclude_id.value_or(0));

    const std::vector<float> padded = pad(query, index.stride());
    const RecordId query_id = exclude_id.value_or(0);
    const std::size_t chunk = std::max<std::size_t>(options.chunk_rows, 1);
    const std::size_t chunks = (index.size() + chunk - 1) / chunk;
    const std::optional<RecordId> exclude[1] = {exclude_id};
    const RecordId ids[1] = {query_id};

    RetrievalResult result;
    result.query_record_id = query_id;
    if (options.workers <= 1 || chunks == 1) {
        TopNCollector collector(n);
        scan_rows(padded.data(), ids, std::span(&collector, 1), exclude, index, 0, index.size());
        result.hits = std::move(collector).take_sorted();
        return result;
    }

    // Ranking is a total order, so merging per-chunk winners in any order
    // yields the same list; chunk order keeps it obviously deterministic.
    std::vector<std::vector<Hit>> partial(chunks);
    parallel_for(chunks, options.workers, [&](std::size_t c) {
        TopNCollector collector(n);
        const std::size_t begin = c * chunk;
        scan_rows(padded.data(), ids, std::span(&collector, 1), exclude, index, begin,
                  std::min(index.size(), begin + chunk));
        partial[c] = std::move(collector).take_sorted();
    });
    TopNCollector merged(n);
    for (const auto& hits : partial)
        for (const auto& hit : hits) merged.offer(hit.similarity, hit.record_id);
    result.hits = std::move(merged).take_sorted();
    return result;
}

std::vector<RetrievalResult> batch_top_n(std::span<const Query> queries, const VectorIndex& index, std::size_t n,
                                         bool exclude_self, const SearchOptions& options) {
    validate_search(index, n);
    for (const auto& q : queries) validate_query(q.vector, index, q.record_id);

    const std::size_t stride = index.stride();
    const std::size_t blocks = (queries.size() + kQueryBlock - 1) / kQueryBlock;
    std::vector<RetrievalResult> results(queries.size());

    parallel_for(blocks, options.workers, [&](std::size_t b) {
        const std::size_t first = b * kQueryBlock;
        const std::size_t count = std::min(kQueryBlock, queries.size() - first);

        std::vector<float> padded(count * stride, 0.0f);
        std::vector<RecordId> ids(count);
        std::vector<std::optional<RecordId>> exclude(count);
        std::vector<TopNCollector> collectors;
        collectors.reserve(count);
        for (std::size_t q = 0; q < count; ++q) {
            const Query& query = queries[first + q];
            std::copy(query.vector.begin(), query.vector.end(), padded.begin() + static_cast<std::ptrdiff_t>(q * stride));
            ids[q] = query.record_id;
            if (exclude_self) exclude[q] = query.record_id;
            collectors.emplace_back(n);
        }

        scan_rows(padded.data(), ids, collectors, exclude, index, 0, index.size());

        for (std::size_t q = 0; q < count; ++q) {
            results[first + q].query_record_id = ids[q];
            results[first + q].hits = std::move(collectors[q]).take_sorted();
        }
    });
    return results;
}

std::vector<RetrievalResult> batch_top_n(const VectorIndex& queries, const VectorIndex& index, std::size_t n,
                                         bool exclude_self, const SearchOptions& options) {
    std::vector<Query> list(queries.size());
    for (std::size_t row = 0; row < queries.size(); ++row) {
        list[row] = Query{queries.record_id(row), queries.vector(row)};
    }
    return batch_top_n(list, index, n, exclude_self, options);
}

}  // namespace cbir
