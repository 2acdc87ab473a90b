#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cbir/embedding_file.hpp"
#include "cbir/manifest.hpp"

namespace cbir {

using ClassId = std::uint32_t;

/// Tolerance on stored and query vector norms.
inline constexpr double kUnitNormTolerance = 1e-5;

/// Returns vector / ||vector||. Throws ZeroVector when the norm is below 1e-12
/// and NonFiniteValue for NaN/Inf entries.
std::vector<float> l2_normalize(std::span<const float> vector);
void l2_normalize_into(std::span<const float> vector, std::span<float> out);

/// Euclidean norm accumulated in double.
double l2_norm(std::span<const float> vector) noexcept;

struct ClassInfo {
    std::string name;
    ClassKind kind = ClassKind::Pathological;

    bool operator==(const ClassInfo&) const = default;
};

/// Bidirectional class-name <-> class-id map. Ids are assigned in
/// lexicographic order of the names.
class ClassTable {
public:
    ClassTable() = default;
    explicit ClassTable(std::vector<ClassInfo> classes);

    /// Every label of every entry, all splits. Conflicting kinds for one
    /// name raise InvalidArgument.
    static ClassTable from_manifest(const Manifest& manifest);

    std::size_t size() const noexcept { return classes_.size(); }
    const ClassInfo& info(ClassId id) const { return classes_.at(id); }
    std::optional<ClassId> find(std::string_view name) const;
    ClassId id_of(std::string_view name) const;  // throws UnknownClass
    std::span<const ClassInfo> classes() const noexcept { return classes_; }

    bool operator==(const ClassTable& other) const { return classes_ == other.classes_; }

private:
    std::vector<ClassInfo> classes_;
};

/// Immutable matrix of unit-norm vectors with aligned labels and record ids.
/// Copies share storage. Rows are padded with zeros to a multiple of
/// `kRowAlignment` floats for the scan kernel; `vector(row)` exposes only the
/// first `dimension()` entries.
class VectorIndex {
    struct Storage {
        std::size_t dimension = 0;
        std::size_t stride = 0;
        std::vector<float> data;
        std::vector<ClassId> labels;
        std::vector<RecordId> record_ids;
        ClassTable classes;
        std::unordered_map<RecordId, std::size_t> row_of;
    };

public:
    static constexpr std::size_t kRowAlignment = 16;

    VectorIndex();

    std::size_t dimension() const noexcept { return storage_->dimension; }
    std::size_t size() const noexcept { return storage_->record_ids.size(); }
    bool empty() const noexcept { return size() == 0; }
    std::size_t stride() const noexcept { return storage_->stride; }

    std::span<const float> vector(std::size_t row) const noexcept {
        return {storage_->data.data() + row * storage_->stride, storage_->dimension};
    }
    /// Padded row, `stride()` floats.
    const float* padded_row(std::size_t row) const noexcept {
        return storage_->data.data() + row * storage_->stride;
    }
    ClassId label(std::size_t row) const noexcept { return storage_->labels[row]; }
    RecordId record_id(std::size_t row) const noexcept { return storage_->record_ids[row]; }
    std::span<const ClassId> labels() const noexcept { return storage_->labels; }
    std::span<const RecordId> record_ids() const noexcept { return storage_->record_ids; }
    const ClassTable& classes() const noexcept { return storage_->classes; }

    std::optional<std::size_t> find(RecordId id) const;

    /// New index holding the given rows in the given order.
    VectorIndex subset(std::span<const std::size_t> rows) const;

    /// Number of rows per class id, sized to the class table.
    std::vector<std::size_t> class_counts() const;

private:
    friend class IndexBuilder;
    friend VectorIndex load_index(const std::filesystem::path&);

    explicit VectorIndex(std::shared_ptr<const Storage> storage);

    std::shared_ptr<const Storage> storage_;
};

/// Accumulates records for one split and finalizes them into a VectorIndex.
class IndexBuilder {
public:
    struct Options {
        Split split = Split::Train;
        /// Record ids removed during manifest preparation; their embeddings
        /// are skipped instead of raising UnknownRecordId.
        std::unordered_set<RecordId> dropped;
        /// Class table to use instead of one derived from the manifest.
        std::optional<ClassTable> classes;
    };

    IndexBuilder(const Manifest& manifest, std::size_t dimension, Options options);

    /// Normalizes and stores the record if its split matches; returns whether
    /// it was kept.
    bool add(RecordId id, std::span<const float> vector);

    /// Consumes the builder.
    VectorIndex finalize() &&;

private:
    std::size_t dimension_;
    std::size_t stride_;
    Options options_;
    ClassTable classes_;
    std::unordered_map<RecordId, const ManifestEntry*> entries_;
    std::vector<float> data_;
    std::vector<ClassId> labels_;
    std::vector<RecordId> ids_;
    std::unordered_set<RecordId> seen_;
};

VectorIndex build_index(EmbeddingReader& embeddings, const Manifest& manifest, IndexBuilder::Options options);
VectorIndex build_index(std::span<const EmbeddingRecord> embeddings, std::size_t dimension,
                        const Manifest& manifest, IndexBuilder::Options options);

/// Index file: embedding-file layout (header + records) followed by
///   u64 metadata byte length | metadata
/// where metadata is
///   u32 class count | per class: u8 kind, u32 name length, name bytes |
///   count x u32 label | count x u64 record_id.
void save_index(const VectorIndex& index, const std::filesystem::path& path);

/// Validates magic, version, dimension, sizes and the unit norm of up to 100
/// evenly spaced rows (NormViolation).
VectorIndex load_index(const std::filesystem::path& path);

}  // namespace cbir
