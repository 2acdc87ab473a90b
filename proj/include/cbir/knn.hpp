#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cbir/similarity.hpp"
#include "cbir/vector_index.hpp"

namespace cbir {

struct KnnConfig {
    std::vector<std::size_t> k_grid = {1, 3, 5, 11, 21, 51, 101};
};

struct KnnPrediction {
    ClassId predicted = 0;
    /// Per class: summed similarity of that class among the k neighbours over
    /// the total summed similarity. Falls back to vote fractions when the
    /// total is not positive.
    std::vector<double> class_scores;
};

/// Majority vote over the first k hits; ties go to the larger summed
/// similarity, then to the lower class id. Hits must resolve in `index`.
KnnPrediction knn_from_hits(std::span<const Hit> hits, std::size_t k, const VectorIndex& index);

/// Throws EmptyIndex, or KTooLarge when k exceeds the index size.
KnnPrediction knn_classify(std::span<const float> query, const VectorIndex& index, std::size_t k,
                           const SearchOptions& options = {});

struct KnnEvaluation {
    std::vector<ClassId> predictions;
    /// Row-major (queries x classes).
    std::vector<double> scores;
};

/// Classifies every row of `queries` with a single search at k.
KnnEvaluation knn_predict(const VectorIndex& queries, const VectorIndex& index, std::size_t k,
                          const SearchOptions& options = {});

struct KSelection {
    std::size_t best_k = 0;
    /// Macro F1 on the validation set for each grid entry, in grid order.
    std::vector<double> macro_f1;
};

/// Picks the K with the highest validation macro F1; ties go to the smaller
/// K. One search at max(k_grid) serves every grid entry.
KSelection select_k(const VectorIndex& index, const VectorIndex& validation, const KnnConfig& config,
                    const SearchOptions& options = {});

}  // namespace cbir
