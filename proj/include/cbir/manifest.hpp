#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace cbir {

using RecordId = std::uint64_t;
using ContentHash = std::array<std::uint8_t, 32>;

enum class Split { Train, Val, Test };
enum class ClassKind { Pathological, Anatomical };

std::string_view to_string(Split split) noexcept;
std::string_view to_string(ClassKind kind) noexcept;
Split parse_split(std::string_view text);
ClassKind parse_class_kind(std::string_view text);

/// Lowercase hex, 64 characters.
std::string to_hex(const ContentHash& hash);
ContentHash parse_content_hash(std::string_view hex);

struct ManifestEntry {
    RecordId record_id = 0;
    std::string source_path;
    std::vector<std::string> labels;
    std::string dataset;
    Split split = Split::Train;
    std::optional<std::string> patient_id;
    std::optional<ContentHash> content_hash;
    ClassKind class_kind = ClassKind::Pathological;

    bool operator==(const ManifestEntry&) const = default;
};

using Manifest = std::vector<ManifestEntry>;

/// Reads the manifest CSV. The header must be exactly
/// `record_id,source_path,labels,dataset,split,patient_id,content_hash,class_kind`;
/// labels are pipe-separated, empty patient_id/content_hash cells mean absent.
Manifest read_manifest_csv(std::istream& in);
Manifest read_manifest_csv(const std::filesystem::path& path);
void write_manifest_csv(std::ostream& out, const Manifest& manifest);
void write_manifest_csv(const std::filesystem::path& path, const Manifest& manifest);

/// Throws DuplicateRecordId or InvalidArgument (empty labels).
void validate_manifest(const Manifest& manifest);

struct PreparationRules {
    /// Datasets deduplicated by content hash (first occurrence in file order wins).
    std::set<std::string> dedup_datasets;
    /// Datasets whose entries with more than one label are dropped.
    std::set<std::string> multi_label_excluded_datasets;
    /// Old label name -> canonical name, applied before any other rule.
    std::map<std::string, std::string> class_aliases;
    /// Dataset -> validation fraction for a patient-wise train/val carve-out.
    std::map<std::string, double> patient_split;
    std::uint64_t seed = 0;
};

struct PatientSplitLog {
    std::string dataset;
    double val_fraction = 0.0;
    std::size_t patients_total = 0;
    std::size_t patients_val = 0;
    std::size_t samples_moved = 0;
};

struct PreparationLog {
    std::size_t input_count = 0;
    std::size_t output_count = 0;
    std::size_t duplicates_dropped = 0;
    std::size_t multi_label_dropped = 0;
    std::size_t labels_aliased = 0;
    std::vector<RecordId> dropped_record_ids;
    std::vector<PatientSplitLog> patient_splits;

    bool empty() const noexcept {
        return duplicates_dropped == 0 && multi_label_dropped == 0 && labels_aliased == 0 &&
               patient_splits.empty();
    }
};

struct PreparedManifest {
    Manifest entries;
    PreparationLog log;
};

/// Applies aliasing, content-hash dedup and multi-label exclusion. Output order
/// follows input order. Patient-wise splits are separate (see below).
PreparedManifest prepare_manifest(const Manifest& raw, const PreparationRules& rules);

/// Moves every sample of a seeded selection of patients from train to val.
/// Only entries currently marked train are affected; the number of selected
/// patients is round(val_fraction * train patients).
Manifest patient_wise_split(const Manifest& entries, double val_fraction, std::uint64_t seed,
                            PatientSplitLog* log = nullptr);

/// prepare_manifest followed by patient_wise_split on every dataset named in
/// rules.patient_split; entries of other datasets are untouched.
PreparedManifest prepare_with_splits(const Manifest& raw, const PreparationRules& rules);

}  // namespace cbir
