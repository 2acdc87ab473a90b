#include "cbir/linear_probe.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>

namespace cbir {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

RowMatrix logits_of(const LinearModel& model, std::span<const float> features, std::size_t rows) {
    const auto n = static_cast<Eigen::Index>(rows);
    const auto c = static_cast<Eigen::Index>(model.classes);
    const auto d = static_cast<Eigen::Index>(model.dimension);
    ConstRowMap x(features.data(), n, d);
    ConstRowMap w(model.weights.data(), c, d);
    Eigen::Map<const Eigen::RowVectorXf> b(model.bias.data(), c);
    RowMatrix logits = x * w.transpose();
    logits.rowwise() += b;
    return logits;
}

std::size_t rows_of(const LinearModel& model, std::span<const float> features) {
    if (model.dimension == 0 || features.size() % model.dimension != 0) {
        throw Error(ErrorCode::DimensionMismatch, "feature length " + std::to_string(features.size()) +
                                                      " is not a multiple of dimension " +
                                                      std::to_string(model.dimension));
    }
    return features.size() / model.dimension;
}

}  // namespace

// ---- AdamW -----------------------------------------------------------------

AdamW::AdamW(AdamWParams params, std::vector<std::size_t> sizes, std::vector<bool> decay)
    : params_(params), decay_(std::move(decay)) {
    if (sizes.size() != decay_.size()) {
        throw Error(ErrorCode::LengthMismatch, "AdamW: sizes and decay flags differ in length");
    }
    for (auto size : sizes) {
        m_.emplace_back(size, 0.0f);
        v_.emplace_back(size, 0.0f);
    }
}

void AdamW::step(std::span<const Slot> slots) {
    if (slots.size() != m_.size()) {
        throw Error(ErrorCode::LengthMismatch, "AdamW: wrong number of parameter groups");
    }
    ++t_;
    const double lr = params_.learning_rate;
    const double b1 = params_.beta1;
    const double b2 = params_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double decay_factor = 1.0 - lr * params_.weight_decay;

    for (std::size_t g = 0; g < slots.size(); ++g) {
        auto values = slots[g].values;
        auto grad = slots[g].gradient;
        auto& m = m_[g];
        auto& v = v_[g];
        if (values.size() != m.size() || grad.size() != m.size()) {
            throw Error(ErrorCode::LengthMismatch, "AdamW: parameter group " + std::to_string(g) + " changed size");
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double gi = grad[i];
            const double mi = b1 * m[i] + (1.0 - b1) * gi;
            const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            double p = values[i];
            if (decay_[g]) p *= decay_factor;
            p -= lr * (mi / correction1) / (std::sqrt(vi / correction2) + params_.epsilon);
            values[i] = static_cast<float>(p);
        }
    }
}

// ---- loss and prediction ---------------------------------------------------

double softmax_cross_entropy(const LinearModel& model, std::span<const float> features,
                             std::span<const ClassId> labels, LinearModel* gradient) {
    const std::size_t rows = rows_of(model, features);
    if (labels.size() != rows) {
        throw Error(ErrorCode::LengthMismatch, "features and labels differ in row count");
    }
    if (rows == 0) {
        throw Error(ErrorCode::EmptyQuerySet, "cross-entropy over zero samples");
    }
    const RowMatrix logits = logits_of(model, features, rows);
    const auto c = static_cast<Eigen::Index>(model.classes);

    RowMatrix dlogits;
    if (gradient) dlogits.resize(logits.rows(), c);

    double loss = 0.0;
    const double inv_rows = 1.0 / static_cast<double>(rows);
    std::vector<double> e(model.classes);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const ClassId y = labels[static_cast<std::size_t>(i)];
        if (y >= model.classes) {
            throw Error(ErrorCode::InvalidArgument, "label out of range");
        }
        const double mx = logits.row(i).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index k = 0; k < c; ++k) {
            e[static_cast<std::size_t>(k)] = std::exp(static_cast<double>(logits(i, k)) - mx);
            sum += e[static_cast<std::size_t>(k)];
        }
        loss += std::log(sum) + mx - static_cast<double>(logits(i, static_cast<Eigen::Index>(y)));
        if (gradient) {
            for (Eigen::Index k = 0; k < c; ++k) {
                const double p = e[static_cast<std::size_t>(k)] / sum;
                dlogits(i, k) = static_cast<float>((p - (k == static_cast<Eigen::Index>(y) ? 1.0 : 0.0)) * inv_rows);
            }
        }
    }

    if (gradient) {
        const auto d = static_cast<Eigen::Index>(model.dimension);
        *gradient = LinearModel(model.classes, model.dimension);
        ConstRowMap x(features.data(), static_cast<Eigen::Index>(rows), d);
        RowMap gw(gradient->weights.data(), c, d);
        gw.noalias() = dlogits.transpose() * x;
        Eigen::Map<Eigen::RowVectorXf> gb(gradient->bias.data(), c);
        gb = dlogits.colwise().sum();
    }
    return loss * inv_rows;
}

std::vector<double> linear_predict(const LinearModel& model, std::span<const float> features, std::size_t rows) {
    if (features.size() != rows * model.dimension) {
        throw Error(ErrorCode::DimensionMismatch, "features do not have " + std::to_string(rows) + " rows of dimension " +
                                                      std::to_string(model.dimension));
    }
    // Double-precision logits; training uses the float path.
    using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto c = static_cast<Eigen::Index>(model.classes);
    const auto d = static_cast<Eigen::Index>(model.dimension);
    ConstRowMap x(features.data(), static_cast<Eigen::Index>(rows), d);
    ConstRowMap w(model.weights.data(), c, d);
    Eigen::Map<const Eigen::RowVectorXf> b(model.bias.data(), c);
    RowMatrixD logits = x.cast<double>() * w.cast<double>().transpose();
    logits.rowwise() += b.cast<double>();
    std::vector<double> probs(rows * model.classes);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double mx = logits.row(r).maxCoeff();
        double sum = 0.0;
        double* out = probs.data() + i * model.classes;
        for (std::size_t k = 0; k < model.classes; ++k) {
            out[k] = std::exp(logits(r, static_cast<Eigen::Index>(k)) - mx);
            sum += out[k];
        }
        for (std::size_t k = 0; k < model.classes; ++k) out[k] /= sum;
    }
    return probs;
}

std::vector<double> linear_predict(const LinearModel& model, const VectorIndex& vectors) {
    if (vectors.dimension() != model.dimension && !vectors.empty()) {
        throw Error(ErrorCode::DimensionMismatch, "index dimension " + std::to_string(vectors.dimension()) +
                                                      " does not match model dimension " +
                                                      std::to_string(model.dimension));
    }
    return linear_predict(model, dense_features(vectors), vectors.size());
}

std::vector<float> dense_features(const VectorIndex& index) {
    std::vector<float> out;
    out.reserve(index.size() * index.dimension());
    for (std::size_t row = 0; row < index.size(); ++row) {
        const auto v = index.vector(row);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

// ---- training --------------------------------------------------------------

void validate(const LinearProbeConfig& config) {
    if (config.epochs == 0) {
        throw Error(ErrorCode::InvalidArgument, "epochs must be positive");
    }
    if (config.early_stopping_patience >= config.epochs) {
        throw Error(ErrorCode::InvalidArgument, "early-stopping patience must be smaller than epochs");
    }
    if (!(config.optimizer.learning_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    }
    if (config.batch_size == 0) {
        throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
    }
}

LinearProbeResult train_linear_probe(std::span<const float> train_features, std::span<const ClassId> train_labels,
                                     std::span<const float> val_features, std::span<const ClassId> val_labels,
                                     std::size_t classes, std::size_t dimension, const LinearProbeConfig& config) {
    validate(config);
    LinearModel model(classes, dimension);
    const std::size_t rows = rows_of(model, train_features);
    if (rows != train_labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "train features and labels differ in row count");
    }
    if (rows_of(model, val_features) != val_labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "validation features and labels differ in row count");
    }
    if (val_labels.empty()) {
        throw Error(ErrorCode::EmptyValidationSet, "linear probe needs validation samples for early stopping");
    }
    if (std::set<ClassId>(train_labels.begin(), train_labels.end()).size() < 2) {
        throw Error(ErrorCode::SingleClass, "linear probe needs at least two classes in train");
    }

    AdamW optimizer(config.optimizer, {model.weights.size(), model.bias.size()}, {true, false});
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});

    LinearProbeResult result;
    result.model = model;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<float> batch_x;
    std::vector<ClassId> batch_y;
    LinearModel grad;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < rows; start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, rows - start);
            batch_x.resize(count * dimension);
            batch_y.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t src = order[start + i];
                std::copy_n(train_features.data() + src * dimension, dimension, batch_x.data() + i * dimension);
                batch_y[i] = train_labels[src];
            }
            const double loss = softmax_cross_entropy(model, batch_x, batch_y, &grad);
            if (!std::isfinite(loss)) {
                throw TrainingDiverged("training loss became non-finite in epoch " + std::to_string(epoch),
                                       result.history);
            }
            epoch_loss += loss * static_cast<double>(count);
            const AdamW::Slot slots[] = {{model.weights, grad.weights}, {model.bias, grad.bias}};
            optimizer.step(slots);
        }

        const double val_loss = softmax_cross_entropy(model, val_features, val_labels);
        const double train_loss = epoch_loss / static_cast<double>(rows);
        result.history.push_back({epoch, train_loss, val_loss});
        if (!std::isfinite(val_loss)) {
            throw TrainingDiverged("validation loss became non-finite in epoch " + std::to_string(epoch),
                                   result.history);
        }
        if (val_loss < best_val) {
            best_val = val_loss;
            result.model = model;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.early_stopping_patience) {
            result.stopped_early = epoch < config.epochs;
            break;
        }
    }
    return result;
}

LinearProbeResult train_linear_probe(const VectorIndex& train, const VectorIndex& validation,
                                     const LinearProbeConfig& config) {
    if (!validation.empty() && !(validation.classes() == train.classes())) {
        throw Error(ErrorCode::InvalidArgument, "train and validation use different class tables");
    }
    if (!validation.empty() && validation.dimension() != train.dimension()) {
        throw Error(ErrorCode::DimensionMismatch, "train and validation dimensions differ");
    }
    const auto train_x = dense_features(train);
    const auto val_x = dense_features(validation);
    return train_linear_probe(train_x, train.labels(), val_x, validation.labels(), train.classes().size(),
                              train.dimension(), config);
}

}  // namespace cbir
