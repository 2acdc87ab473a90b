#include "cbir/probe_suite.hpp"

#include <algorithm>

#include "cbir/classification_metrics.hpp"
#include "cbir/error.hpp"

namespace cbir {

ProbeScores score_predictions(std::span<const ClassId> predictions, std::span<const double> scores,
                              std::span<const ClassId> truths, std::size_t classes) {
    const auto f1 = f1_scores(predictions, truths, classes);
    const auto auprc = auprc_scores(scores, truths, classes);
    return ProbeScores{auprc.micro, auprc.macro, f1.micro, f1.macro};
}

ProbeReport run_probe_suite(const VectorIndex& train, const VectorIndex& validation, const VectorIndex& test,
                            const KnnConfig& knn_config, const LinearProbeConfig& linear_config,
                            const SearchOptions& options) {
    if (test.empty()) {
        throw Error(ErrorCode::EmptyQuerySet, "probe test set is empty");
    }
    if (!(test.classes() == train.classes())) {
        throw Error(ErrorCode::InvalidArgument, "train and test use different class tables");
    }
    const std::size_t classes = train.classes().size();

    ProbeReport report;
    report.k_grid = knn_config.k_grid;
    const auto selection = select_k(train, validation, knn_config, options);
    report.best_k = selection.best_k;
    report.k_validation_macro_f1 = selection.macro_f1;
    const auto knn = knn_predict(test, train, selection.best_k, options);
    report.knn = score_predictions(knn.predictions, knn.scores, test.labels(), classes);

    const auto trained = train_linear_probe(train, validation, linear_config);
    report.history = trained.history;
    report.best_epoch = trained.best_epoch;
    report.stopped_early = trained.stopped_early;
    const auto probs = linear_predict(trained.model, test);
    std::vector<ClassId> predictions(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto row = probs.begin() + static_cast<std::ptrdiff_t>(i * classes);
        predictions[i] = static_cast<ClassId>(std::max_element(row, row + static_cast<std::ptrdiff_t>(classes)) - row);
    }
    report.linear = score_predictions(predictions, probs, test.labels(), classes);
    return report;
}

}  // namespace cbir
