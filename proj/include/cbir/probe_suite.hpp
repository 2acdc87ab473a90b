#pragma once

#include <cstddef>
#include <vector>

#include "cbir/knn.hpp"
#include "cbir/linear_probe.hpp"
#include "cbir/similarity.hpp"
#include "cbir/vector_index.hpp"

namespace cbir {

struct ProbeScores {
    double auprc_micro = 0.0;
    double auprc_macro = 0.0;
    double f1_micro = 0.0;
    double f1_macro = 0.0;
};

struct ProbeReport {
    std::size_t best_k = 0;
    std::vector<std::size_t> k_grid;
    std::vector<double> k_validation_macro_f1;
    ProbeScores knn;
    ProbeScores linear;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

/// Scores a (samples x classes) score matrix plus argmax-style predictions.
ProbeScores score_predictions(std::span<const ClassId> predictions, std::span<const double> scores,
                              std::span<const ClassId> truths, std::size_t classes);

/// kNN (K chosen on validation, index = train) and linear probe (trained on
/// train, early-stopped on validation), both scored on test.
ProbeReport run_probe_suite(const VectorIndex& train, const VectorIndex& validation, const VectorIndex& test,
                            const KnnConfig& knn_config, const LinearProbeConfig& linear_config,
                            const SearchOptions& options = {});

}  // namespace cbir
