#include "cbir/ablation.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <unordered_set>

#include "cbir/error.hpp"
#include "cbir/parallel.hpp"
#include "cbir/retrieval_eval.hpp"

namespace cbir {

namespace {

// splitmix64 finalizer; derives independent stream seeds from (seed, tags).
std::uint64_t mix(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
    return mix(mix(mix(seed) ^ a) ^ b);
}

constexpr std::uint64_t kQueryStream = 0x51;
constexpr std::uint64_t kIndexStream = 0x1D;

std::vector<std::vector<std::size_t>> rows_by_class(const VectorIndex& index, std::span<const ClassId> classes,
                                                    const std::unordered_set<RecordId>& excluded) {
    std::vector<std::vector<std::size_t>> out(classes.size());
    std::vector<std::ptrdiff_t> slot(index.classes().size(), -1);
    for (std::size_t i = 0; i < classes.size(); ++i) slot[classes[i]] = static_cast<std::ptrdiff_t>(i);
    for (std::size_t row = 0; row < index.size(); ++row) {
        const auto s = slot[index.label(row)];
        if (s >= 0 && !excluded.contains(index.record_id(row))) out[static_cast<std::size_t>(s)].push_back(row);
    }
    return out;
}

}  // namespace

void validate(const AblationConfig& config) {
    if (config.queries_per_class == 0) {
        throw Error(ErrorCode::InvalidArgument, "queries_per_class must be at least 1");
    }
    if (config.repetitions == 0) {
        throw Error(ErrorCode::InvalidArgument, "repetitions must be at least 1");
    }
    if (config.n_schedule.empty()) {
        throw Error(ErrorCode::InvalidArgument, "n_schedule must not be empty");
    }
    for (std::size_t i = 0; i < config.n_schedule.size(); ++i) {
        const auto n = config.n_schedule[i];
        if (n == 0 || (i > 0 && n <= config.n_schedule[i - 1])) {
            throw Error(ErrorCode::InvalidArgument, "n_schedule must be positive and strictly increasing");
        }
        if (n > config.min_class_size) {
            throw Error(ErrorCode::InvalidArgument, "n_schedule entry " + std::to_string(n) +
                                                        " exceeds min_class_size " +
                                                        std::to_string(config.min_class_size));
        }
    }
}

std::vector<ClassId> eligible_classes(const VectorIndex& pool, std::size_t min_class_size) {
    const auto counts = pool.class_counts();
    std::vector<ClassId> out;
    for (ClassId c = 0; c < counts.size(); ++c) {
        if (counts[c] > min_class_size) out.push_back(c);
    }
    return out;
}

std::vector<std::size_t> fixed_query_set(const VectorIndex& source, std::span<const ClassId> classes,
                                         std::size_t per_class, std::uint64_t seed) {
    const auto grouped = rows_by_class(source, classes, {});
    std::vector<std::size_t> out;
    out.reserve(classes.size() * per_class);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        auto rows = grouped[i];
        if (rows.size() < per_class) {
            const auto& name = source.classes().info(classes[i]).name;
            throw Error(ErrorCode::InsufficientQueries, "class '" + name + "' has " + std::to_string(rows.size()) +
                                                            " query candidates, need " + std::to_string(per_class));
        }
        std::mt19937_64 rng(mix(seed, kQueryStream, classes[i]));
        std::shuffle(rows.begin(), rows.end(), rng);
        out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t repetition_seed(std::uint64_t base_seed, std::size_t repetition) noexcept {
    return mix(base_seed, kIndexStream, repetition);
}

std::vector<std::size_t> ablation_index_rows(const VectorIndex& pool, std::span<const ClassId> classes,
                                             const AblationConfig& config, std::size_t repetition, std::size_t n,
                                             std::span<const RecordId> excluded_ids) {
    const std::unordered_set<RecordId> excluded(excluded_ids.begin(), excluded_ids.end());
    const auto grouped = rows_by_class(pool, classes, excluded);
    const std::uint64_t seed = repetition_seed(config.seed, repetition);

    std::vector<std::size_t> out;
    out.reserve(classes.size() * n);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        auto rows = grouped[i];
        if (rows.size() < n) {
            throw Error(ErrorCode::InvalidArgument, "class '" + pool.classes().info(classes[i]).name + "' has only " +
                                                        std::to_string(rows.size()) + " pool rows, need " +
                                                        std::to_string(n));
        }
        // Nested draws share one permutation per (repetition, class), so a
        // smaller N always takes a prefix of a larger one.
        const std::uint64_t stream = config.independent_draws ? mix(seed, classes[i], n) : mix(seed, classes[i]);
        std::mt19937_64 rng(stream);
        std::shuffle(rows.begin(), rows.end(), rng);
        out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n));
    }
    std::sort(out.begin(), out.end());
    return out;
}

AblationCurve run_ablation(const VectorIndex& pool, const VectorIndex& query_source, const AblationConfig& config,
                           const SearchOptions& options) {
    validate(config);
    if (!(pool.classes() == query_source.classes())) {
        throw Error(ErrorCode::InvalidArgument, "pool and query source use different class tables");
    }

    AblationCurve curve;
    curve.classes = eligible_classes(pool, config.min_class_size);
    if (curve.classes.empty()) {
        throw Error(ErrorCode::InvalidArgument,
                    "no class has more than " + std::to_string(config.min_class_size) + " samples");
    }

    const auto query_rows = fixed_query_set(query_source, curve.classes, config.queries_per_class, config.seed);
    const VectorIndex queries = query_source.subset(query_rows);
    curve.query_count = queries.size();
    const std::vector<RecordId> query_ids(queries.record_ids().begin(), queries.record_ids().end());

    const std::size_t steps = config.n_schedule.size();
    const std::size_t cells = steps * config.repetitions;
    curve.rows.resize(cells);

    SearchOptions inner = options;
    inner.workers = 1;
    parallel_for(cells, options.workers, [&](std::size_t cell) {
        const std::size_t step = cell / config.repetitions;
        const std::size_t repetition = cell % config.repetitions;
        const std::size_t n = config.n_schedule[step];

        const auto rows = ablation_index_rows(pool, curve.classes, config, repetition, n, query_ids);
        const VectorIndex index = pool.subset(rows);
        const auto results = batch_top_n(queries, index, 1, false, inner);

        std::vector<RelevanceJudgment> judgments;
        judgments.reserve(results.size());
        for (std::size_t q = 0; q < results.size(); ++q) {
            judgments.push_back(judge(results[q], queries.label(q), index, 1));
        }
        curve.rows[cell] = AblationRow{n, repetition, repetition_seed(config.seed, repetition),
                                       precision_at_n_micro(judgments, 1)};
    });

    for (std::size_t step = 0; step < steps; ++step) {
        double sum = 0.0;
        for (std::size_t r = 0; r < config.repetitions; ++r) sum += curve.rows[step * config.repetitions + r].p_at_1;
        curve.mean_by_n[config.n_schedule[step]] = sum / static_cast<double>(config.repetitions);
    }
    return curve;
}

}  // namespace cbir
