#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cbir/vector_index.hpp"

namespace cbir {

struct F1Scores {
    double micro = 0.0;
    double macro = 0.0;
    /// nullopt for classes absent from both truths and predictions.
    std::vector<std::optional<double>> per_class;
};

/// Single-label multi-class F1. Micro aggregates TP/FP/FN globally (equal to
/// accuracy here); macro averages per-class F1 over classes that appear in
/// truths or predictions.
F1Scores f1_scores(std::span<const ClassId> predictions, std::span<const ClassId> truths, std::size_t classes);

/// Non-interpolated average precision: the mean of precision@rank over the
/// ranks of the positives. Ranking is by score descending, ties by sample
/// position. Returns nullopt when there are no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> positives);

struct AuprcScores {
    double micro = 0.0;
    double macro = 0.0;
    /// nullopt for classes without positives.
    std::vector<std::optional<double>> per_class;
};

/// One-vs-rest AP per class from a row-major (samples x classes) score
/// matrix. Macro averages classes with at least one positive; micro is the AP
/// of the flattened (sample, class) pairs.
AuprcScores auprc_scores(std::span<const double> scores, std::span<const ClassId> truths, std::size_t classes);

}  // namespace cbir
