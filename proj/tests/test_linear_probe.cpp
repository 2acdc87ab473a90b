#include <gtest/gtest.h>

#include <cmath>

#include "cbir/error.hpp"
#include "cbir/linear_probe.hpp"
#include "cbir/probe_suite.hpp"
#include "support.hpp"

using namespace cbir;

namespace {

LinearModel random_model(std::size_t c, std::size_t d, std::mt19937_64& rng, float scale = 0.5f) {
    LinearModel m(c, d);
    std::normal_distribution<float> n(0.0f, scale);
    for (auto& w : m.weights) w = n(rng);
    for (auto& b : m.bias) b = n(rng);
    return m;
}

// Softmax probabilities re-evaluated with plain loops in long double.
std::vector<double> oracle_probs(const LinearModel& m, const std::vector<float>& x, std::size_t rows) {
    std::vector<double> out;
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<long double> z(m.classes);
        for (std::size_t c = 0; c < m.classes; ++c) {
            z[c] = m.bias[c];
            for (std::size_t d = 0; d < m.dimension; ++d) {
                z[c] += static_cast<long double>(m.weights[c * m.dimension + d]) * x[r * m.dimension + d];
            }
        }
        long double total = 0;
        for (auto v : z) total += std::exp(v);
        for (auto v : z) out.push_back(double(std::exp(v) / total));
    }
    return out;
}

// Fixed-step perceptron; returns true once an epoch passes with no mistakes.
bool perceptron_separates(const std::vector<float>& x, const std::vector<ClassId>& y, std::size_t d) {
    std::vector<double> w(d + 1, 0.0);
    for (int epoch = 0; epoch < 1000; ++epoch) {
        bool clean = true;
        for (std::size_t i = 0; i < y.size(); ++i) {
            double s = w[d];
            for (std::size_t k = 0; k < d; ++k) s += w[k] * x[i * d + k];
            const double t = y[i] == 1 ? 1.0 : -1.0;
            if (s * t <= 0) {
                clean = false;
                for (std::size_t k = 0; k < d; ++k) w[k] += t * x[i * d + k];
                w[d] += t;
            }
        }
        if (clean) return true;
    }
    return false;
}

}  // namespace

TEST(AdamW, ZeroGradientAppliesDecoupledDecayOnly) {
    AdamWParams p;
    p.learning_rate = 0.1;
    p.weight_decay = 0.5;
    AdamW opt(p, {3, 1}, {true, false});
    std::vector<float> w = {1.0f, -2.0f, 4.0f}, b = {3.0f};
    const std::vector<float> gw(3, 0.0f), gb(1, 0.0f);
    const AdamW::Slot slots[] = {{w, gw}, {b, gb}};
    opt.step(slots);
    EXPECT_FLOAT_EQ(w[0], 1.0f * 0.95f);
    EXPECT_FLOAT_EQ(w[1], -2.0f * 0.95f);
    EXPECT_FLOAT_EQ(w[2], 4.0f * 0.95f);
    EXPECT_EQ(b[0], 3.0f);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
    AdamWParams p;
    p.weight_decay = 0.0;
    AdamW opt(p, {1}, {true});
    std::vector<float> w = {0.0f};
    const std::vector<float> g = {1.0f};
    const AdamW::Slot slots[] = {{w, g}};
    opt.step(slots);
    EXPECT_NEAR(w[0], -p.learning_rate / (1.0 + p.epsilon), 1e-9);
}

TEST(LinearPredict, ZeroModelIsUniform) {
    const LinearModel m(4, 3);
    const std::vector<float> x = {0.1f, 0.2f, 0.3f, -1.0f, 0.0f, 2.0f};
    for (double p : linear_predict(m, x, 2)) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(LinearPredict, ShiftInvariant) {
    std::mt19937_64 rng(1);
    auto m = random_model(5, 6, rng);
    std::vector<float> x(6 * 3);
    for (auto& v : x) v = std::normal_distribution<float>(0, 1)(rng);
    const auto before = linear_predict(m, x, 3);
    for (auto& b : m.bias) b += 3.0f;
    const auto after = linear_predict(m, x, 3);
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(before[i], after[i], 1e-7);
}

TEST(LinearPredict, MatchesDirectEvaluationAndRowsSumToOne) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t c = 2 + rng() % 5, d = 1 + rng() % 16, rows = 1 + rng() % 10;
        const auto m = random_model(c, d, rng);
        std::vector<float> x(rows * d);
        for (auto& v : x) v = std::normal_distribution<float>(0, 1)(rng);
        const auto p = linear_predict(m, x, rows);
        const auto o = oracle_probs(m, x, rows);
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], o[i], 1e-6);
        for (std::size_t r = 0; r < rows; ++r) {
            double sum = 0;
            for (std::size_t k = 0; k < c; ++k) sum += p[r * c + k];
            EXPECT_NEAR(sum, 1.0, 1e-6);
        }
    }
}

TEST(LinearPredict, DimensionMismatch) {
    const LinearModel m(2, 3);
    const std::vector<float> x = {1, 2, 3, 4};
    try {
        linear_predict(m, x, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
}

TEST(SoftmaxCrossEntropy, GradientMatchesCentralDifferences) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t c = 2 + rng() % 4, d = 1 + rng() % 16, rows = 1 + rng() % 12;
        auto m = random_model(c, d, rng);
        std::vector<float> x(rows * d);
        std::vector<ClassId> y(rows);
        for (auto& v : x) v = std::normal_distribution<float>(0, 1)(rng);
        for (auto& v : y) v = ClassId(rng() % c);
        LinearModel grad;
        softmax_cross_entropy(m, x, y, &grad);

        const float h = 1e-2f;
        double diff2 = 0, norm_a = 0, norm_n = 0;
        auto probe = [&](std::vector<float>& params, const std::vector<float>& analytic) {
            for (std::size_t i = 0; i < params.size(); ++i) {
                const float saved = params[i];
                params[i] = saved + h;
                const double up = softmax_cross_entropy(m, x, y);
                params[i] = saved - h;
                const double down = softmax_cross_entropy(m, x, y);
                params[i] = saved;
                const double numeric = (up - down) / (2.0 * h);
                diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
                norm_a += double(analytic[i]) * analytic[i];
                norm_n += numeric * numeric;
            }
        };
        probe(m.weights, grad.weights);
        probe(m.bias, grad.bias);
        const double rel = std::sqrt(diff2) / std::max(std::sqrt(norm_a), std::sqrt(norm_n));
        EXPECT_LT(rel, 1e-4) << "trial " << trial;
    }
}

TEST(LinearProbe, SeparableBlobsReachFullTrainingAccuracy) {
    std::mt19937_64 rng(9);
    std::normal_distribution<float> n(0.0f, 0.3f);
    std::vector<float> x, vx;
    std::vector<ClassId> y, vy;
    for (int i = 0; i < 200; ++i) {
        const ClassId label = i % 2;
        const float cx = label ? 1.0f : -1.0f;
        auto& xs = i < 160 ? x : vx;
        auto& ys = i < 160 ? y : vy;
        xs.push_back(cx + n(rng));
        xs.push_back(0.5f + n(rng));
        ys.push_back(label);
    }
    ASSERT_TRUE(perceptron_separates(x, y, 2));

    LinearProbeConfig config;
    config.optimizer.learning_rate = 0.05;
    config.batch_size = 32;
    config.seed = 4;
    const auto result = train_linear_probe(x, y, vx, vy, 2, 2, config);
    for (const auto& h : result.history) {
        EXPECT_TRUE(std::isfinite(h.train_loss));
        EXPECT_TRUE(std::isfinite(h.val_loss));
    }
    const auto probs = linear_predict(result.model, x, y.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) correct += (probs[2 * i + 1] > probs[2 * i]) == (y[i] == 1);
    EXPECT_EQ(correct, y.size());
}

TEST(LinearProbe, DeterministicForSeedAndEarlyStops) {
    test::ClusterSpec spec;
    spec.classes = 3;
    spec.dimension = 8;
    spec.val_per_class = 10;
    spec.separation = 1.0f;
    const auto corpus = test::gaussian_clusters(spec);
    const auto train = test::index_of(corpus, Split::Train);
    const auto val = test::index_of(corpus, Split::Val, train.classes());
    LinearProbeConfig config;
    config.epochs = 400;
    config.early_stopping_patience = 5;
    config.optimizer.learning_rate = 0.1;
    config.batch_size = 8;
    const auto a = train_linear_probe(train, val, config);
    const auto b = train_linear_probe(train, val, config);
    EXPECT_EQ(a.model.weights, b.model.weights);
    EXPECT_EQ(a.history.size(), b.history.size());
    EXPECT_TRUE(a.stopped_early);
    EXPECT_EQ(a.history.size(), a.best_epoch + config.early_stopping_patience);
    double best = a.history[a.best_epoch - 1].val_loss;
    for (const auto& h : a.history) EXPECT_GE(h.val_loss, best);
}

TEST(LinearProbe, Errors) {
    const std::vector<float> x = {1, 0, 0, 1};
    const std::vector<ClassId> one_class = {0, 0};
    const std::vector<ClassId> two = {0, 1};
    LinearProbeConfig config;
    try {
        train_linear_probe(x, one_class, x, two, 2, 2, config);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingleClass);
    }
    try {
        train_linear_probe(x, two, {}, {}, 2, 2, config);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyValidationSet);
    }
}

TEST(LinearProbe, DivergenceReportsHistory) {
    const std::vector<float> x = {1e30f, 0, -1e30f, 0};
    const std::vector<ClassId> y = {0, 1};
    LinearProbeConfig config;
    config.optimizer.learning_rate = 1e30;
    config.epochs = 5;
    config.early_stopping_patience = 2;
    try {
        train_linear_probe(x, y, x, y, 2, 2, config);
        FAIL();
    } catch (const TrainingDiverged& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
        EXPECT_LE(e.history().size(), 5u);
    }
}

TEST(ProbeSuite, SeparatedClustersScoreHighAndStayInRange) {
    test::ClusterSpec spec;
    spec.classes = 4;
    spec.dimension = 12;
    spec.train_per_class = 40;
    spec.val_per_class = 10;
    spec.test_per_class = 10;
    spec.separation = 6.0f;
    const auto corpus = test::gaussian_clusters(spec);
    const auto train = test::index_of(corpus, Split::Train);
    const auto val = test::index_of(corpus, Split::Val, train.classes());
    const auto testset = test::index_of(corpus, Split::Test, train.classes());
    LinearProbeConfig lc;
    lc.optimizer.learning_rate = 0.05;
    lc.batch_size = 16;
    const auto report = run_probe_suite(train, val, testset, KnnConfig{{1, 3, 5, 11}}, lc);
    EXPECT_EQ(report.k_validation_macro_f1.size(), 4u);
    for (const auto* s : {&report.knn, &report.linear}) {
        for (double v : {s->f1_micro, s->f1_macro, s->auprc_micro, s->auprc_macro}) {
            EXPECT_GE(v, 0.9);
            EXPECT_LE(v, 1.0);
        }
    }
}
