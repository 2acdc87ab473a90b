#include "cbir/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cbir/error.hpp"

namespace cbir {

namespace {

constexpr double kZeroNorm = 1e-12;
constexpr std::size_t kSpotChecks = 100;

std::size_t padded_stride(std::size_t dimension) {
    const std::size_t a = VectorIndex::kRowAlignment;
    return (dimension + a - 1) / a * a;
}

}  // namespace

double l2_norm(std::span<const float> vector) noexcept {
    double sum = 0.0;
    for (float v : vector) sum += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(sum);
}

void l2_normalize_into(std::span<const float> vector, std::span<float> out) {
    if (vector.empty()) {
        throw Error(ErrorCode::InvalidArgument, "cannot normalize an empty vector");
    }
    if (out.size() != vector.size()) {
        throw Error(ErrorCode::DimensionMismatch, "output span has the wrong length");
    }
    for (float v : vector) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteValue, "vector contains a non-finite entry");
        }
    }
    const double norm = l2_norm(vector);
    if (norm < kZeroNorm) {
        throw Error(ErrorCode::ZeroVector, "vector norm below 1e-12");
    }
    for (std::size_t i = 0; i < vector.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(vector[i]) / norm);
    }
}

std::vector<float> l2_normalize(std::span<const float> vector) {
    std::vector<float> out(vector.size());
    l2_normalize_into(vector, out);
    return out;
}

// ---- ClassTable ------------------------------------------------------------

ClassTable::ClassTable(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
    std::sort(classes_.begin(), classes_.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    auto dup = std::adjacent_find(classes_.begin(), classes_.end(),
                                  [](const auto& a, const auto& b) { return a.name == b.name; });
    if (dup != classes_.end()) {
        throw Error(ErrorCode::InvalidArgument, "class '" + dup->name + "' listed twice");
    }
}

ClassTable ClassTable::from_manifest(const Manifest& manifest) {
    std::map<std::string, ClassKind> kinds;
    for (const auto& entry : manifest) {
        for (const auto& label : entry.labels) {
            auto [it, inserted] = kinds.emplace(label, entry.class_kind);
            if (!inserted && it->second != entry.class_kind) {
                throw Error(ErrorCode::InvalidArgument, "class '" + label + "' has conflicting class_kind values",
                            entry.record_id);
            }
        }
    }
    std::vector<ClassInfo> classes;
    classes.reserve(kinds.size());
    for (auto& [name, kind] : kinds) classes.push_back({name, kind});
    return ClassTable(std::move(classes));
}

std::optional<ClassId> ClassTable::find(std::string_view name) const {
    auto it = std::lower_bound(classes_.begin(), classes_.end(), name,
                               [](const ClassInfo& c, std::string_view n) { return c.name < n; });
    if (it == classes_.end() || it->name != name) return std::nullopt;
    return static_cast<ClassId>(it - classes_.begin());
}

ClassId ClassTable::id_of(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw Error(ErrorCode::UnknownClass, "unknown class '" + std::string(name) + "'");
}

// ---- VectorIndex -----------------------------------------------------------

VectorIndex::VectorIndex() : storage_(std::make_shared<const Storage>()) {}

VectorIndex::VectorIndex(std::shared_ptr<const Storage> storage) : storage_(std::move(storage)) {}

std::optional<std::size_t> VectorIndex::find(RecordId id) const {
    auto it = storage_->row_of.find(id);
    if (it == storage_->row_of.end()) return std::nullopt;
    return it->second;
}

VectorIndex VectorIndex::subset(std::span<const std::size_t> rows) const {
    auto s = std::make_shared<Storage>();
    s->dimension = storage_->dimension;
    s->stride = storage_->stride;
    s->classes = storage_->classes;
    s->data.resize(rows.size() * s->stride);
    s->labels.reserve(rows.size());
    s->record_ids.reserve(rows.size());
    s->row_of.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t row = rows[i];
        if (row >= size()) {
            throw Error(ErrorCode::InvalidArgument, "subset row out of range");
        }
        std::copy_n(padded_row(row), s->stride, s->data.data() + i * s->stride);
        s->labels.push_back(label(row));
        s->record_ids.push_back(record_id(row));
        if (!s->row_of.emplace(record_id(row), i).second) {
            throw Error(ErrorCode::DuplicateRecordId, "subset repeats a row", record_id(row));
        }
    }
    return VectorIndex(std::move(s));
}

std::vector<std::size_t> VectorIndex::class_counts() const {
    std::vector<std::size_t> counts(classes().size(), 0);
    for (ClassId c : labels()) ++counts[c];
    return counts;
}

// ---- IndexBuilder ----------------------------------------------------------

IndexBuilder::IndexBuilder(const Manifest& manifest, std::size_t dimension, Options options)
    : dimension_(dimension), stride_(padded_stride(dimension)), options_(std::move(options)) {
    if (dimension == 0) {
        throw Error(ErrorCode::InvalidArgument, "index dimension must be at least 1");
    }
    validate_manifest(manifest);
    classes_ = options_.classes ? *options_.classes : ClassTable::from_manifest(manifest);
    entries_.reserve(manifest.size());
    for (const auto& entry : manifest) entries_.emplace(entry.record_id, &entry);
}

bool IndexBuilder::add(RecordId id, std::span<const float> vector) {
    if (vector.size() != dimension_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "record " + std::to_string(id) + " has dimension " + std::to_string(vector.size()) +
                        ", expected " + std::to_string(dimension_),
                    id);
    }
    if (!seen_.insert(id).second) {
        throw Error(ErrorCode::DuplicateRecordId, "embedding record " + std::to_string(id) + " appears twice", id);
    }
    auto it = entries_.find(id);
    if (it == entries_.end()) {
        if (options_.dropped.contains(id)) return false;
        throw Error(ErrorCode::UnknownRecordId, "embedding record " + std::to_string(id) + " not in manifest", id);
    }
    const ManifestEntry& entry = *it->second;
    if (entry.split != options_.split) return false;
    if (entry.labels.size() != 1) {
        throw Error(ErrorCode::MultiLabelRecord,
                    "record " + std::to_string(id) + " has " + std::to_string(entry.labels.size()) +
                        " labels; indexed records must be single-label",
                    id);
    }

    const std::size_t offset = data_.size();
    data_.resize(offset + stride_, 0.0f);
    try {
        l2_normalize_into(vector, std::span<float>(data_.data() + offset, dimension_));
    } catch (const Error& e) {
        data_.resize(offset);
        throw Error(e.code(), "record " + std::to_string(id) + ": " + e.what(), id);
    }
    labels_.push_back(classes_.id_of(entry.labels.front()));
    ids_.push_back(id);
    return true;
}

VectorIndex IndexBuilder::finalize() && {
    auto s = std::make_shared<VectorIndex::Storage>();
    s->dimension = dimension_;
    s->stride = stride_;
    s->data = std::move(data_);
    s->labels = std::move(labels_);
    s->record_ids = std::move(ids_);
    s->classes = std::move(classes_);
    s->row_of.reserve(s->record_ids.size());
    for (std::size_t i = 0; i < s->record_ids.size(); ++i) s->row_of.emplace(s->record_ids[i], i);
    return VectorIndex(std::move(s));
}

VectorIndex build_index(EmbeddingReader& embeddings, const Manifest& manifest, IndexBuilder::Options options) {
    IndexBuilder builder(manifest, embeddings.dimension(), std::move(options));
    EmbeddingRecord record;
    while (embeddings.next(record)) builder.add(record.record_id, record.vector);
    return std::move(builder).finalize();
}

VectorIndex build_index(std::span<const EmbeddingRecord> embeddings, std::size_t dimension,
                        const Manifest& manifest, IndexBuilder::Options options) {
    IndexBuilder builder(manifest, dimension, std::move(options));
    for (const auto& record : embeddings) builder.add(record.record_id, record.vector);
    return std::move(builder).finalize();
}

// ---- persistence -----------------------------------------------------------

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write index '" + path.string() + "'");
    }
    if (index.dimension() == 0) {
        throw Error(ErrorCode::InvalidArgument, "cannot save an index without a dimension");
    }
    detail::write_header(out, FileHeader{kFormatVersion, static_cast<std::uint32_t>(index.dimension()),
                                         static_cast<std::uint64_t>(index.size())});
    for (std::size_t row = 0; row < index.size(); ++row) {
        detail::write_u64(out, index.record_id(row));
        detail::write_f32s(out, index.vector(row));
    }

    std::ostringstream meta;
    const auto classes = index.classes().classes();
    detail::write_u32(meta, static_cast<std::uint32_t>(classes.size()));
    for (const auto& c : classes) {
        meta.put(static_cast<char>(c.kind == ClassKind::Anatomical ? 1 : 0));
        detail::write_u32(meta, static_cast<std::uint32_t>(c.name.size()));
        meta.write(c.name.data(), static_cast<std::streamsize>(c.name.size()));
    }
    for (ClassId label : index.labels()) detail::write_u32(meta, label);
    for (RecordId id : index.record_ids()) detail::write_u64(meta, id);

    const std::string block = meta.str();
    detail::write_u64(out, block.size());
    out.write(block.data(), static_cast<std::streamsize>(block.size()));
    out.flush();
    if (!out) {
        throw Error(ErrorCode::Io, "failed writing index '" + path.string() + "'");
    }
}

VectorIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingInput, "cannot open index '" + path.string() + "'");
    }
    std::error_code ec;
    const std::uint64_t file_size = std::filesystem::file_size(path, ec);
    if (ec) {
        throw Error(ErrorCode::Io, "cannot stat '" + path.string() + "'");
    }

    const FileHeader header = detail::read_header(in);
    const std::uint64_t record_bytes = 8 + 4ull * header.dimension;
    if (header.count > (file_size - kHeaderBytes) / record_bytes ||
        kHeaderBytes + header.count * record_bytes + 8 > file_size) {
        throw Error(ErrorCode::CorruptFile, "index '" + path.string() + "' is truncated");
    }

    auto s = std::make_shared<VectorIndex::Storage>();
    s->dimension = header.dimension;
    s->stride = padded_stride(header.dimension);
    const auto count = static_cast<std::size_t>(header.count);
    s->data.assign(count * s->stride, 0.0f);
    s->record_ids.resize(count);
    for (std::size_t row = 0; row < count; ++row) {
        s->record_ids[row] = detail::read_u64(in);
        detail::read_f32s(in, std::span<float>(s->data.data() + row * s->stride, s->dimension));
    }

    const std::uint64_t meta_bytes = detail::read_u64(in);
    if (kHeaderBytes + header.count * record_bytes + 8 + meta_bytes != file_size) {
        throw Error(ErrorCode::CorruptFile, "index '" + path.string() + "' metadata length does not match file size");
    }
    std::string block(meta_bytes, '\0');
    in.read(block.data(), static_cast<std::streamsize>(meta_bytes));
    if (!in) {
        throw Error(ErrorCode::CorruptFile, "index '" + path.string() + "' metadata is truncated");
    }

    std::istringstream meta(block);
    const std::uint32_t class_count = detail::read_u32(meta);
    std::vector<ClassInfo> classes;
    classes.reserve(std::min<std::uint32_t>(class_count, 1u << 16));
    for (std::uint32_t c = 0; c < class_count; ++c) {
        const int kind = meta.get();
        if (kind != 0 && kind != 1) {
            throw Error(ErrorCode::CorruptFile, "index metadata: bad class kind");
        }
        const std::uint32_t len = detail::read_u32(meta);
        if (len > meta_bytes) {
            throw Error(ErrorCode::CorruptFile, "index metadata: class name length out of range");
        }
        std::string name(len, '\0');
        meta.read(name.data(), len);
        if (!meta) {
            throw Error(ErrorCode::CorruptFile, "index metadata: truncated class name");
        }
        classes.push_back({std::move(name), kind == 1 ? ClassKind::Anatomical : ClassKind::Pathological});
    }
    const bool sorted = std::is_sorted(classes.begin(), classes.end(),
                                       [](const auto& a, const auto& b) { return a.name < b.name; });
    if (!sorted) {
        throw Error(ErrorCode::CorruptFile, "index metadata: class table not in canonical order");
    }
    try {
        s->classes = ClassTable(std::move(classes));
    } catch (const Error& e) {
        throw Error(ErrorCode::CorruptFile, std::string("index metadata: ") + e.what());
    }

    s->labels.resize(count);
    for (auto& label : s->labels) {
        label = detail::read_u32(meta);
        if (label >= class_count) {
            throw Error(ErrorCode::CorruptFile, "index metadata: label out of range");
        }
    }
    for (std::size_t row = 0; row < count; ++row) {
        if (detail::read_u64(meta) != s->record_ids[row]) {
            throw Error(ErrorCode::CorruptFile, "index metadata: record ids disagree with payload",
                        s->record_ids[row]);
        }
    }
    if (meta.peek() != std::char_traits<char>::eof()) {
        throw Error(ErrorCode::CorruptFile, "index metadata: trailing bytes");
    }

    s->row_of.reserve(count);
    for (std::size_t row = 0; row < count; ++row) {
        if (!s->row_of.emplace(s->record_ids[row], row).second) {
            throw Error(ErrorCode::CorruptFile, "index contains duplicate record id", s->record_ids[row]);
        }
    }

    const std::size_t checks = std::min(count, kSpotChecks);
    for (std::size_t i = 0; i < checks; ++i) {
        const std::size_t row = i * count / checks;
        const double norm = l2_norm(std::span<const float>(s->data.data() + row * s->stride, s->dimension));
        if (!(std::abs(norm - 1.0) <= kUnitNormTolerance)) {
            throw Error(ErrorCode::NormViolation,
                        "index row " + std::to_string(row) + " has norm " + std::to_string(norm), s->record_ids[row]);
        }
    }
    return VectorIndex(std::move(s));
}

}  // namespace cbir
