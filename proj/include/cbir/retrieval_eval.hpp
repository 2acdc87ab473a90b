#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "cbir/similarity.hpp"
#include "cbir/vector_index.hpp"

namespace cbir {

struct RelevanceJudgment {
    RecordId query_record_id = 0;
    ClassId query_class = 0;
    /// rel[j] == 1 iff hit j shares the query's class.
    std::vector<std::uint8_t> rel;
};

/// Judges the first n hits. Throws InsufficientHits when fewer than n hits
/// exist (an index smaller than n) and UnknownRecordId for hits that do not
/// resolve in `index`.
RelevanceJudgment judge(const RetrievalResult& result, ClassId query_class, const VectorIndex& index, std::size_t n);

/// P@N over all queries: total relevant hits in the first n positions divided
/// by Q * n, which equals the mean of per-query precisions.
double precision_at_n_micro(std::span<const RelevanceJudgment> judgments, std::size_t n);

/// Per-class mean of per-query P@n (grouped by query class), then the
/// unweighted mean across classes that have queries.
double precision_at_n_macro(std::span<const RelevanceJudgment> judgments, std::size_t n);

struct ClassReportRow {
    ClassId class_id = 0;
    std::string class_name;
    ClassKind class_kind = ClassKind::Pathological;
    std::size_t query_count = 0;
    std::size_t index_count = 0;
    double p_at_1 = 0.0;
};

/// One row per query class, sorted by index count ascending (then class id).
std::vector<ClassReportRow> per_class_report(std::span<const RelevanceJudgment> judgments, const VectorIndex& index);

struct MetricsReport {
    std::map<std::size_t, double> p_at_n_micro;
    std::map<std::size_t, double> p_at_n_macro;
    std::vector<ClassReportRow> per_class;
    std::size_t query_count = 0;
};

inline const std::vector<std::size_t> kDefaultNValues = {1, 3, 5, 10};

/// Judges every result at max(n_values) against the query class found at the
/// same position in `query_classes` and fills a MetricsReport.
MetricsReport evaluate_retrieval(std::span<const RetrievalResult> results, std::span<const ClassId> query_classes,
                                 const VectorIndex& index, std::span<const std::size_t> n_values = kDefaultNValues);

}  // namespace cbir
