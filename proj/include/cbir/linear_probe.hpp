#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cbir/error.hpp"
#include "cbir/vector_index.hpp"

namespace cbir {

struct AdamWParams {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay: each step first scales decayed
/// parameters by (1 - lr * weight_decay), then applies the bias-corrected
/// Adam update.
class AdamW {
public:
    struct Slot {
        std::span<float> values;
        std::span<const float> gradient;
    };

    /// `decay[i]` says whether parameter group i receives weight decay.
    AdamW(AdamWParams params, std::vector<std::size_t> sizes, std::vector<bool> decay);

    /// One optimizer step over all groups, in registration order.
    void step(std::span<const Slot> slots);

    std::uint64_t steps() const noexcept { return t_; }

private:
    AdamWParams params_;
    std::vector<bool> decay_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    std::uint64_t t_ = 0;
};

/// Single-layer softmax classifier: logits = W x + b.
struct LinearModel {
    std::size_t classes = 0;
    std::size_t dimension = 0;
    std::vector<float> weights;  // classes x dimension, row-major
    std::vector<float> bias;     // classes

    LinearModel() = default;
    LinearModel(std::size_t classes, std::size_t dimension)
        : classes(classes), dimension(dimension), weights(classes * dimension, 0.0f), bias(classes, 0.0f) {}
};

/// Mean softmax cross-entropy over the rows of `features` (rows x dimension).
/// When `gradient` is non-null it receives d(loss)/dW and d(loss)/db. Weight
/// decay is not part of the loss.
double softmax_cross_entropy(const LinearModel& model, std::span<const float> features,
                             std::span<const ClassId> labels, LinearModel* gradient = nullptr);

/// Softmax probabilities, row-major (rows x classes).
std::vector<double> linear_predict(const LinearModel& model, std::span<const float> features, std::size_t rows);
std::vector<double> linear_predict(const LinearModel& model, const VectorIndex& vectors);

struct LinearProbeConfig {
    std::size_t epochs = 100;
    std::size_t early_stopping_patience = 20;
    std::size_t batch_size = 256;
    AdamWParams optimizer;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct LinearProbeResult {
    LinearModel model;  // parameters from the best validation epoch
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

/// Raised with the partial history when a loss becomes NaN/Inf.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& message, std::vector<EpochRecord> history)
        : Error(ErrorCode::NonFiniteLoss, message), history_(std::move(history)) {}
    const std::vector<EpochRecord>& history() const noexcept { return history_; }

private:
    std::vector<EpochRecord> history_;
};

/// Dense row-major copy of an index's vectors (rows x dimension).
std::vector<float> dense_features(const VectorIndex& index);

/// Trains with shuffled mini-batches (seeded) and early stopping on the
/// validation loss. Throws SingleClass when train has fewer than two classes
/// and EmptyValidationSet when there is no validation data.
LinearProbeResult train_linear_probe(std::span<const float> train_features, std::span<const ClassId> train_labels,
                                     std::span<const float> val_features, std::span<const ClassId> val_labels,
                                     std::size_t classes, std::size_t dimension, const LinearProbeConfig& config);

LinearProbeResult train_linear_probe(const VectorIndex& train, const VectorIndex& validation,
                                     const LinearProbeConfig& config);

void validate(const LinearProbeConfig& config);

}  // namespace cbir
