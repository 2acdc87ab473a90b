#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "cbir/classification_metrics.hpp"
#include "cbir/error.hpp"

using namespace cbir;

namespace {

// Step-wise AP straight from the definition: precision at the rank of every
// positive, averaged over positives. Ranks come from an explicit O(m^2) count.
double oracle_ap(const std::vector<double>& scores, const std::vector<std::uint8_t>& pos) {
    const std::size_t m = scores.size();
    double sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!pos[i]) continue;
        ++positives;
        std::size_t rank = 1, above_pos = 1;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const bool before = scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
            if (before) {
                ++rank;
                above_pos += pos[j];
            }
        }
        sum += double(above_pos) / double(rank);
    }
    return sum / double(positives);
}

}  // namespace

TEST(F1Scores, AllCorrect) {
    const std::vector<ClassId> y = {0, 1, 2, 1, 0};
    const auto f1 = f1_scores(y, y, 3);
    EXPECT_EQ(f1.micro, 1.0);
    EXPECT_EQ(f1.macro, 1.0);
}

TEST(F1Scores, HandConfusionMatrix) {
    const std::vector<ClassId> truths = {0, 0, 1, 1};
    const std::vector<ClassId> preds = {0, 1, 1, 1};
    const auto f1 = f1_scores(preds, truths, 2);
    EXPECT_DOUBLE_EQ(*f1.per_class[0], 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*f1.per_class[1], 4.0 / 5.0);
    EXPECT_DOUBLE_EQ(f1.macro, 11.0 / 15.0);
}

TEST(F1Scores, MicroEqualsAccuracy) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 200;
        std::vector<ClassId> t(n), p(n);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = ClassId(rng() % 6);
            p[i] = rng() % 2 ? t[i] : ClassId(rng() % 6);
            correct += p[i] == t[i];
        }
        const auto f1 = f1_scores(p, t, 6);
        EXPECT_EQ(f1.micro, double(correct) / double(n));
        EXPECT_GE(f1.macro, 0.0);
        EXPECT_LE(f1.macro, 1.0);
    }
}

TEST(F1Scores, AbsentClassesExcludedAndZeroF1Kept) {
    // Class 2 never occurs; class 1 is only ever mispredicted (F1 = 0).
    const std::vector<ClassId> truths = {0, 0, 1};
    const std::vector<ClassId> preds = {0, 0, 0};
    const auto f1 = f1_scores(preds, truths, 3);
    EXPECT_FALSE(f1.per_class[2].has_value());
    EXPECT_EQ(*f1.per_class[1], 0.0);
    EXPECT_DOUBLE_EQ(f1.macro, (0.8 + 0.0) / 2.0);
}

TEST(F1Scores, LengthMismatch) {
    const std::vector<ClassId> a = {0, 1}, b = {0};
    try {
        f1_scores(a, b, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
    }
}

TEST(AveragePrecision, PerfectSeparation) {
    const std::vector<double> s = {0.9, 0.8, 0.3, 0.1};
    const std::vector<std::uint8_t> p = {1, 1, 0, 0};
    EXPECT_EQ(*average_precision(s, p), 1.0);
}

TEST(AveragePrecision, FiveSixths) {
    const std::vector<double> s = {0.9, 0.8, 0.7, 0.6};
    const std::vector<std::uint8_t> p = {1, 0, 1, 0};
    EXPECT_EQ(*average_precision(s, p), 5.0 / 6.0);
}

TEST(AveragePrecision, SinglePositiveRankedLast) {
    for (std::size_t m = 1; m <= 40; ++m) {
        std::vector<double> s(m);
        std::vector<std::uint8_t> p(m, 0);
        for (std::size_t i = 0; i < m; ++i) s[i] = double(m - i);
        p[m - 1] = 1;
        EXPECT_EQ(*average_precision(s, p), 1.0 / double(m));
    }
}

TEST(AveragePrecision, TiesBrokenBySampleIndex) {
    const std::vector<double> s = {0.5, 0.5};
    EXPECT_EQ(*average_precision(s, std::vector<std::uint8_t>{1, 0}), 1.0);
    EXPECT_EQ(*average_precision(s, std::vector<std::uint8_t>{0, 1}), 0.5);
}

TEST(AveragePrecision, NoPositivesIsUndefined) {
    const std::vector<double> s = {0.5, 0.2};
    EXPECT_FALSE(average_precision(s, std::vector<std::uint8_t>{0, 0}).has_value());
}

TEST(AveragePrecision, MatchesDefinitionOracle) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng() % 60;
        std::vector<double> s(m);
        std::vector<std::uint8_t> p(m);
        for (std::size_t i = 0; i < m; ++i) {
            s[i] = double(rng() % 10) / 10.0;  // coarse scores force ties
            p[i] = rng() % 3 == 0;
        }
        p[rng() % m] = 1;
        EXPECT_NEAR(*average_precision(s, p), oracle_ap(s, p), 1e-12);
    }
}

TEST(AveragePrecision, InvariantUnderOrderPreservingPermutation) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 2 + rng() % 50;
        std::vector<double> s(m);
        std::vector<std::uint8_t> p(m);
        for (std::size_t i = 0; i < m; ++i) {
            s[i] = std::uniform_real_distribution<double>(0, 1)(rng);
            p[i] = rng() & 1;
        }
        p[0] = 1;
        std::vector<std::size_t> perm(m);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> s2(m);
        std::vector<std::uint8_t> p2(m);
        for (std::size_t i = 0; i < m; ++i) {
            s2[i] = s[perm[i]];
            p2[i] = p[perm[i]];
        }
        EXPECT_DOUBLE_EQ(*average_precision(s, p), *average_precision(s2, p2));
    }
}

TEST(AuprcScores, MacroOverClassesWithPositivesMicroFlattened) {
    // 3 samples x 3 classes; class 2 has no positive.
    const std::vector<double> scores = {0.7, 0.2, 0.1,   //
                                        0.4, 0.5, 0.1,   //
                                        0.6, 0.3, 0.1};
    const std::vector<ClassId> truths = {0, 1, 1};
    const auto out = auprc_scores(scores, truths, 3);
    const double ap0 = oracle_ap({0.7, 0.4, 0.6}, {1, 0, 0});
    const double ap1 = oracle_ap({0.2, 0.5, 0.3}, {0, 1, 1});
    EXPECT_FALSE(out.per_class[2].has_value());
    EXPECT_NEAR(out.macro, (ap0 + ap1) / 2.0, 1e-15);
    EXPECT_NEAR(out.micro, oracle_ap(scores, {1, 0, 0, 0, 1, 0, 0, 1, 0}), 1e-15);
}

TEST(AuprcScores, NoPositivesAnywhere) {
    const std::vector<double> scores;
    const std::vector<ClassId> truths;
    try {
        auprc_scores(scores, truths, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoPositives);
    }
}

TEST(AuprcScores, OutputsInUnitInterval) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng() % 40, c = 2 + rng() % 4;
        std::vector<double> s(n * c);
        std::vector<ClassId> t(n);
        for (auto& x : s) x = std::uniform_real_distribution<double>(-1, 1)(rng);
        for (auto& x : t) x = ClassId(rng() % c);
        const auto out = auprc_scores(s, t, c);
        EXPECT_GE(out.micro, 0.0);
        EXPECT_LE(out.micro, 1.0);
        EXPECT_GE(out.macro, 0.0);
        EXPECT_LE(out.macro, 1.0);
    }
}
