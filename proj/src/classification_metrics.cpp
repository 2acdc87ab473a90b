#include "cbir/classification_metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "cbir/error.hpp"

namespace cbir {

F1Scores f1_scores(std::span<const ClassId> predictions, std::span<const ClassId> truths, std::size_t classes) {
    if (predictions.size() != truths.size()) {
        throw Error(ErrorCode::LengthMismatch, "predictions (" + std::to_string(predictions.size()) +
                                                   ") and truths (" + std::to_string(truths.size()) +
                                                   ") differ in length");
    }
    if (truths.empty()) {
        throw Error(ErrorCode::EmptyQuerySet, "no samples to score");
    }
    std::vector<std::uint64_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] >= classes || predictions[i] >= classes) {
            throw Error(ErrorCode::InvalidArgument, "class id out of range");
        }
        if (predictions[i] == truths[i]) {
            ++tp[truths[i]];
        } else {
            ++fp[predictions[i]];
            ++fn[truths[i]];
        }
    }

    F1Scores out;
    out.per_class.resize(classes);
    double macro_sum = 0.0;
    std::size_t present = 0;
    std::uint64_t tp_all = 0, fp_all = 0, fn_all = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        tp_all += tp[c];
        fp_all += fp[c];
        fn_all += fn[c];
        const std::uint64_t denom = 2 * tp[c] + fp[c] + fn[c];
        if (denom == 0) continue;
        const double f1 = static_cast<double>(2 * tp[c]) / static_cast<double>(denom);
        out.per_class[c] = f1;
        macro_sum += f1;
        ++present;
    }
    out.macro = macro_sum / static_cast<double>(present);
    out.micro = static_cast<double>(2 * tp_all) / static_cast<double>(2 * tp_all + fp_all + fn_all);
    return out;
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> positives) {
    if (scores.size() != positives.size()) {
        throw Error(ErrorCode::LengthMismatch, "scores and indicators differ in length");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // Extended precision keeps hand-checkable fractions (e.g. 5/6) correctly
    // rounded in the final double.
    long double sum = 0.0L;
    std::uint64_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (positives[order[rank]]) {
            ++hits;
            sum += static_cast<long double>(hits) / static_cast<long double>(rank + 1);
        }
    }
    if (hits == 0) return std::nullopt;
    return static_cast<double>(sum / static_cast<long double>(hits));
}

AuprcScores auprc_scores(std::span<const double> scores, std::span<const ClassId> truths, std::size_t classes) {
    if (classes == 0 || scores.size() != truths.size() * classes) {
        throw Error(ErrorCode::LengthMismatch, "score matrix does not match truths x classes");
    }
    const std::size_t samples = truths.size();
    for (ClassId t : truths) {
        if (t >= classes) throw Error(ErrorCode::InvalidArgument, "class id out of range");
    }

    AuprcScores out;
    out.per_class.resize(classes);
    std::vector<double> column(samples);
    std::vector<std::uint8_t> positive(samples);
    double macro_sum = 0.0;
    std::size_t with_positives = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < samples; ++i) {
            column[i] = scores[i * classes + c];
            positive[i] = truths[i] == c ? 1 : 0;
        }
        if (auto ap = average_precision(column, positive)) {
            out.per_class[c] = *ap;
            macro_sum += *ap;
            ++with_positives;
        }
    }
    if (with_positives == 0) {
        throw Error(ErrorCode::NoPositives, "no class has a positive sample");
    }
    out.macro = macro_sum / static_cast<double>(with_positives);

    std::vector<std::uint8_t> flat(scores.size(), 0);
    for (std::size_t i = 0; i < samples; ++i) flat[i * classes + truths[i]] = 1;
    out.micro = *average_precision(scores, flat);
    return out;
}

}  // namespace cbir
