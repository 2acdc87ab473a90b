#include "cbir/retrieval_eval.hpp"

#include <algorithm>
#include <string>

#include "cbir/error.hpp"

namespace cbir {

namespace {

std::size_t relevant_in_prefix(const RelevanceJudgment& j, std::size_t n) {
    if (j.rel.size() < n) {
        throw Error(ErrorCode::InsufficientHits,
                    "judgment for query " + std::to_string(j.query_record_id) + " covers " +
                        std::to_string(j.rel.size()) + " positions, need " + std::to_string(n),
                    j.query_record_id);
    }
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += j.rel[i];
    return count;
}

void require_queries(std::span<const RelevanceJudgment> judgments, std::size_t n) {
    if (judgments.empty()) {
        throw Error(ErrorCode::EmptyQuerySet, "no queries to evaluate");
    }
    if (n == 0) {
        throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
    }
}

}  // namespace

RelevanceJudgment judge(const RetrievalResult& result, ClassId query_class, const VectorIndex& index, std::size_t n) {
    if (n == 0) {
        throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
    }
    if (result.hits.size() < n) {
        throw Error(ErrorCode::InsufficientHits,
                    "query " + std::to_string(result.query_record_id) + " has " + std::to_string(result.hits.size()) +
                        " hits but P@" + std::to_string(n) + " needs an index of at least " + std::to_string(n) +
                        " candidates",
                    result.query_record_id);
    }
    RelevanceJudgment judgment{result.query_record_id, query_class, std::vector<std::uint8_t>(n, 0)};
    for (std::size_t j = 0; j < n; ++j) {
        const auto row = index.find(result.hits[j].record_id);
        if (!row) {
            throw Error(ErrorCode::UnknownRecordId,
                        "hit " + std::to_string(result.hits[j].record_id) + " is not in the index",
                        result.hits[j].record_id);
        }
        judgment.rel[j] = index.label(*row) == query_class ? 1 : 0;
    }
    return judgment;
}

double precision_at_n_micro(std::span<const RelevanceJudgment> judgments, std::size_t n) {
    require_queries(judgments, n);
    std::uint64_t relevant = 0;
    for (const auto& j : judgments) relevant += relevant_in_prefix(j, n);
    return static_cast<double>(relevant) / (static_cast<double>(judgments.size()) * static_cast<double>(n));
}

double precision_at_n_macro(std::span<const RelevanceJudgment> judgments, std::size_t n) {
    require_queries(judgments, n);
    // Ordered by class id so the final sum has a fixed order.
    std::map<ClassId, std::pair<std::uint64_t, std::uint64_t>> per_class;  // relevant, queries
    for (const auto& j : judgments) {
        auto& [relevant, queries] = per_class[j.query_class];
        relevant += relevant_in_prefix(j, n);
        ++queries;
    }
    double sum = 0.0;
    for (const auto& [cls, counts] : per_class) {
        sum += static_cast<double>(counts.first) / (static_cast<double>(counts.second) * static_cast<double>(n));
    }
    return sum / static_cast<double>(per_class.size());
}

std::vector<ClassReportRow> per_class_report(std::span<const RelevanceJudgment> judgments, const VectorIndex& index) {
    std::map<ClassId, std::pair<std::size_t, std::size_t>> per_class;  // top-1 relevant, queries
    for (const auto& j : judgments) {
        auto& [relevant, queries] = per_class[j.query_class];
        relevant += relevant_in_prefix(j, 1);
        ++queries;
    }
    const auto counts = index.class_counts();
    std::vector<ClassReportRow> rows;
    rows.reserve(per_class.size());
    for (const auto& [cls, c] : per_class) {
        ClassReportRow row;
        row.class_id = cls;
        if (cls < index.classes().size()) {
            row.class_name = index.classes().info(cls).name;
            row.class_kind = index.classes().info(cls).kind;
        }
        row.query_count = c.second;
        row.index_count = cls < counts.size() ? counts[cls] : 0;
        row.p_at_1 = static_cast<double>(c.first) / static_cast<double>(c.second);
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.index_count < b.index_count; });
    return rows;
}

MetricsReport evaluate_retrieval(std::span<const RetrievalResult> results, std::span<const ClassId> query_classes,
                                 const VectorIndex& index, std::span<const std::size_t> n_values) {
    if (results.size() != query_classes.size()) {
        throw Error(ErrorCode::LengthMismatch, "results and query classes differ in length");
    }
    if (n_values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "n_values must not be empty");
    }
    const std::size_t max_n = *std::max_element(n_values.begin(), n_values.end());

    std::vector<RelevanceJudgment> judgments;
    judgments.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        judgments.push_back(judge(results[i], query_classes[i], index, max_n));
    }

    MetricsReport report;
    report.query_count = judgments.size();
    for (std::size_t n : n_values) {
        report.p_at_n_micro[n] = precision_at_n_micro(judgments, n);
        report.p_at_n_macro[n] = precision_at_n_macro(judgments, n);
    }
    report.per_class = per_class_report(judgments, index);
    return report;
}

}  // namespace cbir
