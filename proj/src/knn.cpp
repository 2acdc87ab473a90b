#include "cbir/knn.hpp"

#include <algorithm>
#include <string>

#include "cbir/classification_metrics.hpp"
#include "cbir/error.hpp"

namespace cbir {

namespace {

void check_k(const VectorIndex& index, std::size_t k) {
    if (index.empty()) {
        throw Error(ErrorCode::EmptyIndex, "kNN over an empty index");
    }
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    }
    if (k > index.size()) {
        throw Error(ErrorCode::KTooLarge,
                    "k = " + std::to_string(k) + " exceeds index size " + std::to_string(index.size()));
    }
}

void validate_grid(const KnnConfig& config, const VectorIndex& index) {
    if (config.k_grid.empty()) {
        throw Error(ErrorCode::InvalidArgument, "k_grid must not be empty");
    }
    for (std::size_t i = 0; i < config.k_grid.size(); ++i) {
        if (i > 0 && config.k_grid[i] <= config.k_grid[i - 1]) {
            throw Error(ErrorCode::InvalidArgument, "k_grid must be strictly increasing");
        }
        check_k(index, config.k_grid[i]);
    }
}

}  // namespace

KnnPrediction knn_from_hits(std::span<const Hit> hits, std::size_t k, const VectorIndex& index) {
    if (k == 0 || hits.size() < k) {
        throw Error(ErrorCode::InsufficientHits,
                    "kNN needs " + std::to_string(k) + " hits, got " + std::to_string(hits.size()));
    }
    const std::size_t classes = index.classes().size();
    std::vector<std::size_t> votes(classes, 0);
    std::vector<double> summed(classes, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const auto row = index.find(hits[i].record_id);
        if (!row) {
            throw Error(ErrorCode::UnknownRecordId, "hit not in index", hits[i].record_id);
        }
        const ClassId c = index.label(*row);
        ++votes[c];
        summed[c] += hits[i].similarity;
        total += hits[i].similarity;
    }

    ClassId best = 0;
    for (ClassId c = 1; c < classes; ++c) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && summed[c] > summed[best])) {
            best = c;
        }
    }

    KnnPrediction out;
    out.predicted = best;
    out.class_scores.resize(classes, 0.0);
    for (ClassId c = 0; c < classes; ++c) {
        out.class_scores[c] = total > 0.0 ? summed[c] / total
                                          : static_cast<double>(votes[c]) / static_cast<double>(k);
    }
    return out;
}

KnnPrediction knn_classify(std::span<const float> query, const VectorIndex& index, std::size_t k,
                           const SearchOptions& options) {
    check_k(index, k);
    const auto result = top_n(query, index, k, std::nullopt, options);
    return knn_from_hits(result.hits, k, index);
}

KnnEvaluation knn_predict(const VectorIndex& queries, const VectorIndex& index, std::size_t k,
                          const SearchOptions& options) {
    check_k(index, k);
    const auto results = batch_top_n(queries, index, k, false, options);
    const std::size_t classes = index.classes().size();
    KnnEvaluation out;
    out.predictions.reserve(results.size());
    out.scores.reserve(results.size() * classes);
    for (const auto& r : results) {
        auto p = knn_from_hits(r.hits, k, index);
        out.predictions.push_back(p.predicted);
        out.scores.insert(out.scores.end(), p.class_scores.begin(), p.class_scores.end());
    }
    return out;
}

KSelection select_k(const VectorIndex& index, const VectorIndex& validation, const KnnConfig& config,
                    const SearchOptions& options) {
    if (validation.empty()) {
        throw Error(ErrorCode::EmptyValidationSet, "validation set is empty");
    }
    validate_grid(config, index);
    if (!(validation.classes() == index.classes())) {
        throw Error(ErrorCode::InvalidArgument, "validation set and index use different class tables");
    }
    const std::size_t max_k = config.k_grid.back();
    const auto results = batch_top_n(validation, index, max_k, false, options);
    const auto truths = validation.labels();

    KSelection out;
    double best_f1 = -1.0;
    std::vector<ClassId> predictions(results.size());
    for (std::size_t k : config.k_grid) {
        for (std::size_t q = 0; q < results.size(); ++q) {
            predictions[q] = knn_from_hits(results[q].hits, k, index).predicted;
        }
        const double f1 = f1_scores(predictions, truths, index.classes().size()).macro;
        out.macro_f1.push_back(f1);
        if (f1 > best_f1) {
            best_f1 = f1;
            out.best_k = k;
        }
    }
    return out;
}

}  // namespace cbir
