#include <gtest/gtest.h>

#include <map>

#include "cbir/error.hpp"
#include "cbir/retrieval_eval.hpp"
#include "support.hpp"

using namespace cbir;

namespace {

RelevanceJudgment rel(std::vector<std::uint8_t> bits, ClassId cls = 0, RecordId id = 0) {
    return {id, cls, std::move(bits)};
}

// Precision summed literally: per-query mean first, then the mean over queries.
double oracle_micro(const std::vector<RelevanceJudgment>& js, std::size_t n) {
    long double outer = 0;
    for (const auto& j : js) {
        long double inner = 0;
        for (std::size_t i = 0; i < n; ++i) inner += j.rel[i];
        outer += inner / n;
    }
    return static_cast<double>(outer / js.size());
}

double oracle_macro(const std::vector<RelevanceJudgment>& js, std::size_t n) {
    std::map<ClassId, std::vector<RelevanceJudgment>> groups;
    for (const auto& j : js) groups[j.query_class].push_back(j);
    long double sum = 0;
    for (const auto& [cls, group] : groups) sum += oracle_micro(group, n);
    return static_cast<double>(sum / groups.size());
}

std::vector<RelevanceJudgment> random_judgments(std::size_t count, std::size_t classes, std::size_t n,
                                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<RelevanceJudgment> out;
    for (std::size_t q = 0; q < count; ++q) {
        std::vector<std::uint8_t> bits(n);
        for (auto& b : bits) b = rng() % 3 == 0;
        out.push_back(rel(std::move(bits), ClassId(rng() % classes), q));
    }
    return out;
}

VectorIndex labelled_index(const std::vector<std::pair<RecordId, std::size_t>>& rows, std::size_t classes) {
    test::Corpus c;
    c.dimension = 2;
    for (const auto& [id, label] : rows) test::add_record(c, id, label, Split::Train, {1.0f, float(id)});
    // Register every class, including ones without index rows.
    for (std::size_t k = 0; k < classes; ++k) {
        ManifestEntry e;
        e.record_id = 100000 + k;
        e.labels = {test::class_name(k)};
        e.split = Split::Test;
        c.manifest.push_back(e);
    }
    return test::index_of(c, Split::Train);
}

}  // namespace

TEST(Judge, Definition) {
    const auto index = labelled_index({{1, 0}, {2, 1}, {3, 0}}, 2);
    RetrievalResult r{9, {{1, 0.9f}, {2, 0.8f}, {3, 0.7f}}};
    EXPECT_EQ(judge(r, 0, index, 3).rel, (std::vector<std::uint8_t>{1, 0, 1}));
    EXPECT_EQ(judge(r, 1, index, 3).rel, (std::vector<std::uint8_t>{0, 1, 0}));
    RetrievalResult same{9, {{1, 0.9f}, {3, 0.7f}}};
    EXPECT_EQ(judge(same, 0, index, 2).rel, (std::vector<std::uint8_t>{1, 1}));
}

TEST(Judge, ShortResultIsAnError) {
    const auto index = labelled_index({{1, 0}, {2, 1}}, 2);
    RetrievalResult r{5, {{1, 0.9f}, {2, 0.8f}}};
    try {
        judge(r, 0, index, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientHits);
        EXPECT_EQ(e.record_id(), 5u);
    }
}

TEST(PrecisionAtN, HandCaseOneThird) {
    const std::vector<RelevanceJudgment> js = {rel({1, 0, 1}), rel({0, 0, 0})};
    EXPECT_EQ(precision_at_n_micro(js, 3), 1.0 / 3.0);
}

TEST(PrecisionAtN, AllRelevantIsOne) {
    const std::vector<RelevanceJudgment> js = {rel({1, 1, 1, 1, 1})};
    for (std::size_t n = 1; n <= 5; ++n) EXPECT_EQ(precision_at_n_micro(js, n), 1.0);
}

TEST(PrecisionAtN, MacroHalfVersusMicroTwoThirds) {
    const std::vector<RelevanceJudgment> js = {rel({1}, 0), rel({1}, 0), rel({0}, 1)};
    EXPECT_EQ(precision_at_n_macro(js, 1), 0.5);
    EXPECT_EQ(precision_at_n_micro(js, 1), 2.0 / 3.0);
}

TEST(PrecisionAtN, MatchesResummationOracle) {
    const auto js = random_judgments(200, 10, 10, 3);
    for (std::size_t n : {1u, 3u, 5u, 10u}) {
        EXPECT_NEAR(precision_at_n_micro(js, n), oracle_micro(js, n), 1e-12);
        EXPECT_NEAR(precision_at_n_macro(js, n), oracle_macro(js, n), 1e-12);
    }
}

TEST(PrecisionAtN, BalancedClassesMacroEqualsMicro) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<RelevanceJudgment> js;
        for (ClassId c = 0; c < 7; ++c) {
            for (int q = 0; q < 12; ++q) {
                std::vector<std::uint8_t> bits(5);
                for (auto& b : bits) b = rng() & 1;
                js.push_back(rel(bits, c));
            }
        }
        for (std::size_t n : {1u, 5u}) {
            EXPECT_NEAR(precision_at_n_macro(js, n), precision_at_n_micro(js, n), 1e-12);
        }
    }
}

TEST(PrecisionAtN, Errors) {
    EXPECT_THROW(precision_at_n_micro({}, 1), Error);
    try {
        precision_at_n_macro({}, 1);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyQuerySet);
    }
    const std::vector<RelevanceJudgment> js = {rel({1})};
    try {
        precision_at_n_micro(js, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientHits);
    }
}

TEST(PrecisionAtN, ValuesStayInUnitInterval) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto js = random_judgments(30, 4, 3, seed);
        for (std::size_t n = 1; n <= 3; ++n) {
            const double micro = precision_at_n_micro(js, n);
            const double macro = precision_at_n_macro(js, n);
            EXPECT_GE(micro, 0.0);
            EXPECT_LE(micro, 1.0);
            EXPECT_GE(macro, 0.0);
            EXPECT_LE(macro, 1.0);
        }
    }
}

TEST(PerClassReport, ClassAbsentFromIndexHasZeroCountAndZeroPrecision) {
    const auto index = labelled_index({{1, 0}, {2, 0}}, 3);
    const std::vector<RelevanceJudgment> js = {rel({1}, 0), rel({0}, 2)};
    const auto rows = per_class_report(js, index);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].class_id, 2u);
    EXPECT_EQ(rows[0].index_count, 0u);
    EXPECT_EQ(rows[0].p_at_1, 0.0);
    EXPECT_EQ(rows[1].index_count, 2u);
}

TEST(PerClassReport, SingleClassMatchesMicro) {
    const auto index = labelled_index({{1, 0}, {2, 0}}, 1);
    const std::vector<RelevanceJudgment> js = {rel({1}, 0), rel({0}, 0), rel({1}, 0), rel({1}, 0)};
    const auto rows = per_class_report(js, index);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].p_at_1, precision_at_n_micro(js, 1));
    EXPECT_EQ(rows[0].query_count, 4u);
}

TEST(PerClassReport, TwoClusterHandInstance) {
    // Cluster A near (1,0): ids 1,2,3; cluster B near (0,1): ids 4,5.
    test::Corpus c;
    c.dimension = 2;
    test::add_record(c, 1, 0, Split::Train, {1.0f, 0.05f});
    test::add_record(c, 2, 0, Split::Train, {1.0f, -0.05f});
    test::add_record(c, 3, 0, Split::Train, {1.0f, 0.2f});
    test::add_record(c, 4, 1, Split::Train, {0.05f, 1.0f});
    test::add_record(c, 5, 1, Split::Train, {-0.05f, 1.0f});
    // Queries: 10 in A, 11 in A but leaning towards B, 12 in B.
    test::add_record(c, 10, 0, Split::Test, {1.0f, 0.0f});
    test::add_record(c, 11, 0, Split::Test, {0.1f, 1.0f});
    test::add_record(c, 12, 1, Split::Test, {0.0f, 1.0f});
    const auto index = test::index_of(c, Split::Train);
    const auto queries = test::index_of(c, Split::Test, index.classes());

    const auto results = batch_top_n(queries, index, 3, false);
    const std::vector<ClassId> qc(queries.labels().begin(), queries.labels().end());
    const std::vector<std::size_t> ns = {1, 3};
    const auto report = evaluate_retrieval(results, qc, index, ns);
    // By hand: query 10 -> A,A,A; query 11 -> B,B,A; query 12 -> B,B,A.
    EXPECT_EQ(report.p_at_n_micro.at(1), 2.0 / 3.0);
    EXPECT_EQ(report.p_at_n_micro.at(3), (3.0 + 1.0 + 2.0) / 9.0);
    EXPECT_EQ(report.p_at_n_macro.at(1), (0.5 + 1.0) / 2.0);
    ASSERT_EQ(report.per_class.size(), 2u);
    EXPECT_EQ(report.per_class[0].class_name, "c01");
    EXPECT_EQ(report.per_class[0].index_count, 2u);
    EXPECT_EQ(report.per_class[0].p_at_1, 1.0);
    EXPECT_EQ(report.per_class[1].index_count, 3u);
    EXPECT_EQ(report.per_class[1].p_at_1, 0.5);
}

TEST(EvaluateRetrieval, PerfectClustersScoreOne) {
    test::ClusterSpec spec;
    spec.separation = 50.0f;
    spec.train_per_class = 15;
    const auto corpus = test::gaussian_clusters(spec);
    const auto index = test::index_of(corpus, Split::Train);
    const auto queries = test::index_of(corpus, Split::Test, index.classes());
    const auto results = batch_top_n(queries, index, 10, false);
    const std::vector<ClassId> qc(queries.labels().begin(), queries.labels().end());
    const auto report = evaluate_retrieval(results, qc, index);
    for (std::size_t n : kDefaultNValues) {
        EXPECT_EQ(report.p_at_n_micro.at(n), 1.0);
        EXPECT_EQ(report.p_at_n_macro.at(n), 1.0);
    }
}
