#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "cbir/similarity.hpp"
#include "cbir/vector_index.hpp"

namespace cbir {

struct AblationConfig {
    std::size_t min_class_size = 3000;
    std::size_t queries_per_class = 38;
    std::vector<std::size_t> n_schedule = {5, 10, 25, 50, 100, 250, 500, 1000, 2000, 3000};
    std::size_t repetitions = 3;
    std::uint64_t seed = 0;
    /// Draw every N independently instead of nesting the subsets of one
    /// repetition.
    bool independent_draws = false;
};

void validate(const AblationConfig& config);

struct AblationRow {
    std::size_t n = 0;
    std::size_t repetition = 0;
    std::uint64_t seed = 0;
    double p_at_1 = 0.0;

    bool operator==(const AblationRow&) const = default;
};

struct AblationCurve {
    std::vector<AblationRow> rows;  // ordered by (n, repetition)
    std::map<std::size_t, double> mean_by_n;
    std::vector<ClassId> classes;
    std::size_t query_count = 0;
};

/// Classes with strictly more than `min_class_size` rows, ascending id.
std::vector<ClassId> eligible_classes(const VectorIndex& pool, std::size_t min_class_size);

/// Seeded sample of exactly `per_class` rows of each class, returned as
/// ascending row numbers of `source`. Throws InsufficientQueries naming the
/// first class that is too small.
std::vector<std::size_t> fixed_query_set(const VectorIndex& source, std::span<const ClassId> classes,
                                         std::size_t per_class, std::uint64_t seed);

/// Seed recorded for a repetition.
std::uint64_t repetition_seed(std::uint64_t base_seed, std::size_t repetition) noexcept;

/// Pool rows (ascending) placed in the index for one (repetition, n) cell:
/// `n` rows per class, never including a record id in `excluded_ids`.
std::vector<std::size_t> ablation_index_rows(const VectorIndex& pool, std::span<const ClassId> classes,
                                             const AblationConfig& config, std::size_t repetition, std::size_t n,
                                             std::span<const RecordId> excluded_ids = {});

/// Fixed queries from `query_source` (per class), index cells subsampled from
/// `pool`; records P@1 micro for every (n, repetition).
AblationCurve run_ablation(const VectorIndex& pool, const VectorIndex& query_source, const AblationConfig& config,
                           const SearchOptions& options = {});

}  // namespace cbir
