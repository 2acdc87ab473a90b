#include "cbir/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "cbir/error.hpp"

namespace cbir {

namespace {

constexpr std::string_view kManifestHeader =
    "record_id,source_path,labels,dataset,split,patient_id,content_hash,class_kind";

// RFC 4180 style: fields may be quoted, "" escapes a quote inside a quoted field.
std::optional<std::vector<std::string>> next_csv_row(std::istream& in) {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            fields.push_back(std::move(field));
            return fields;
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (in_quotes) {
        throw Error(ErrorCode::ParseError, "manifest: unterminated quoted field");
    }
    if (!any) {
        return std::nullopt;
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_escape(std::string_view value) {
    if (value.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(value);
    }
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::vector<std::string> split_labels(std::string_view cell) {
    std::vector<std::string> labels;
    std::size_t start = 0;
    while (start <= cell.size()) {
        auto end = cell.find('|', start);
        if (end == std::string_view::npos) end = cell.size();
        if (end > start) labels.emplace_back(cell.substr(start, end - start));
        start = end + 1;
    }
    return labels;
}

RecordId parse_record_id(std::string_view text, std::size_t line) {
    if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw Error(ErrorCode::ParseError,
                    "manifest line " + std::to_string(line) + ": bad record_id '" + std::string(text) + "'");
    }
    try {
        return std::stoull(std::string(text));
    } catch (const std::out_of_range&) {
        throw Error(ErrorCode::ParseError, "manifest line " + std::to_string(line) + ": record_id out of range");
    }
}

}  // namespace

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

std::string_view to_string(ClassKind kind) noexcept {
    return kind == ClassKind::Anatomical ? "anatomical" : "pathological";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw Error(ErrorCode::ParseError, "unknown split '" + std::string(text) + "'");
}

ClassKind parse_class_kind(std::string_view text) {
    if (text == "pathological") return ClassKind::Pathological;
    if (text == "anatomical") return ClassKind::Anatomical;
    throw Error(ErrorCode::ParseError, "unknown class_kind '" + std::string(text) + "'");
}

std::string to_hex(const ContentHash& hash) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto byte : hash) {
        out.push_back(digits[byte >> 4]);
        out.push_back(digits[byte & 0xF]);
    }
    return out;
}

ContentHash parse_content_hash(std::string_view hex) {
    auto nibble = [&](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        throw Error(ErrorCode::ParseError, "content_hash must be lowercase hex: '" + std::string(hex) + "'");
    };
    if (hex.size() != 64) {
        throw Error(ErrorCode::ParseError, "content_hash must be 64 hex characters: '" + std::string(hex) + "'");
    }
    ContentHash hash{};
    for (std::size_t i = 0; i < hash.size(); ++i) {
        hash[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
    }
    return hash;
}

Manifest read_manifest_csv(std::istream& in) {
    auto header = next_csv_row(in);
    if (!header) {
        throw Error(ErrorCode::ParseError, "manifest: missing header");
    }
    std::string joined;
    for (std::size_t i = 0; i < header->size(); ++i) {
        if (i) joined.push_back(',');
        joined += (*header)[i];
    }
    if (joined != kManifestHeader) {
        throw Error(ErrorCode::ParseError, "manifest: unexpected header '" + joined + "'");
    }

    Manifest manifest;
    std::size_t line = 1;
    while (auto row = next_csv_row(in)) {
        ++line;
        if (row->size() == 1 && row->front().empty()) continue;
        if (row->size() != 8) {
            throw Error(ErrorCode::ParseError, "manifest line " + std::to_string(line) + ": expected 8 fields, got " +
                                                   std::to_string(row->size()));
        }
        auto& f = *row;
        ManifestEntry entry;
        entry.record_id = parse_record_id(f[0], line);
        entry.source_path = f[1];
        entry.labels = split_labels(f[2]);
        entry.dataset = f[3];
        entry.split = parse_split(f[4]);
        if (!f[5].empty()) entry.patient_id = f[5];
        if (!f[6].empty()) entry.content_hash = parse_content_hash(f[6]);
        entry.class_kind = parse_class_kind(f[7]);
        manifest.push_back(std::move(entry));
    }
    validate_manifest(manifest);
    return manifest;
}

Manifest read_manifest_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingInput, "cannot open manifest '" + path.string() + "'");
    }
    return read_manifest_csv(in);
}

void write_manifest_csv(std::ostream& out, const Manifest& manifest) {
    out << kManifestHeader << '\n';
    for (const auto& e : manifest) {
        std::string labels;
        for (std::size_t i = 0; i < e.labels.size(); ++i) {
            if (i) labels.push_back('|');
            labels += e.labels[i];
        }
        out << e.record_id << ',' << csv_escape(e.source_path) << ',' << csv_escape(labels) << ','
            << csv_escape(e.dataset) << ',' << to_string(e.split) << ',' << csv_escape(e.patient_id.value_or(""))
            << ',' << (e.content_hash ? to_hex(*e.content_hash) : std::string()) << ',' << to_string(e.class_kind)
            << '\n';
    }
}

void write_manifest_csv(const std::filesystem::path& path, const Manifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write manifest '" + path.string() + "'");
    }
    write_manifest_csv(out, manifest);
    if (!out) {
        throw Error(ErrorCode::Io, "failed writing manifest '" + path.string() + "'");
    }
}

void validate_manifest(const Manifest& manifest) {
    std::unordered_set<RecordId> seen;
    seen.reserve(manifest.size());
    for (const auto& e : manifest) {
        if (!seen.insert(e.record_id).second) {
            throw Error(ErrorCode::DuplicateRecordId, "duplicate record_id " + std::to_string(e.record_id),
                        e.record_id);
        }
        if (e.labels.empty()) {
            throw Error(ErrorCode::InvalidArgument, "record " + std::to_string(e.record_id) + " has no labels",
                        e.record_id);
        }
    }
}

PreparedManifest prepare_manifest(const Manifest& raw, const PreparationRules& rules) {
    validate_manifest(raw);

    PreparedManifest out;
    out.log.input_count = raw.size();

    for (const auto& entry : raw) {
        if (rules.dedup_datasets.contains(entry.dataset) && !entry.content_hash) {
            throw Error(ErrorCode::MissingHash,
                        "record " + std::to_string(entry.record_id) + " in deduplicated dataset '" + entry.dataset +
                            "' has no content_hash",
                        entry.record_id);
        }
    }

    // Hashes are scoped per dataset.
    std::map<std::string, std::set<ContentHash>> seen_hashes;
    for (const auto& entry : raw) {
        ManifestEntry e = entry;

        std::vector<std::string> labels;
        for (const auto& label : e.labels) {
            std::string canonical = label;
            if (auto it = rules.class_aliases.find(label); it != rules.class_aliases.end()) {
                canonical = it->second;
                ++out.log.labels_aliased;
            }
            if (std::find(labels.begin(), labels.end(), canonical) == labels.end()) {
                labels.push_back(std::move(canonical));
            }
        }
        e.labels = std::move(labels);

        if (rules.dedup_datasets.contains(e.dataset)) {
            if (!seen_hashes[e.dataset].insert(*e.content_hash).second) {
                ++out.log.duplicates_dropped;
                out.log.dropped_record_ids.push_back(e.record_id);
                continue;
            }
        }
        if (e.labels.size() > 1 && rules.multi_label_excluded_datasets.contains(e.dataset)) {
            ++out.log.multi_label_dropped;
            out.log.dropped_record_ids.push_back(e.record_id);
            continue;
        }
        out.entries.push_back(std::move(e));
    }
    out.log.output_count = out.entries.size();
    return out;
}

Manifest patient_wise_split(const Manifest& entries, double val_fraction, std::uint64_t seed,
                            PatientSplitLog* log) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "val_fraction must lie in (0, 1)");
    }
    for (const auto& e : entries) {
        if (!e.patient_id || e.patient_id->empty()) {
            throw Error(ErrorCode::MissingPatientId, "record " + std::to_string(e.record_id) + " has no patient_id",
                        e.record_id);
        }
    }

    // Sorted first so the shuffle input never depends on file order.
    std::set<std::string> patient_set;
    for (const auto& e : entries) {
        if (e.split == Split::Train) patient_set.insert(*e.patient_id);
    }
    std::vector<std::string> patients(patient_set.begin(), patient_set.end());
    std::mt19937_64 rng(seed);
    std::shuffle(patients.begin(), patients.end(), rng);

    const auto selected =
        static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(patients.size())));
    std::unordered_set<std::string> val_patients(patients.begin(),
                                                 patients.begin() + static_cast<std::ptrdiff_t>(selected));

    Manifest out = entries;
    std::size_t moved = 0;
    for (auto& e : out) {
        if (e.split == Split::Train && val_patients.contains(*e.patient_id)) {
            e.split = Split::Val;
            ++moved;
        }
    }
    if (log) {
        log->val_fraction = val_fraction;
        log->patients_total = patients.size();
        log->patients_val = selected;
        log->samples_moved = moved;
    }
    return out;
}

PreparedManifest prepare_with_splits(const Manifest& raw, const PreparationRules& rules) {
    PreparedManifest prepared = prepare_manifest(raw, rules);
    for (const auto& [dataset, fraction] : rules.patient_split) {
        std::vector<std::size_t> positions;
        Manifest subset;
        for (std::size_t i = 0; i < prepared.entries.size(); ++i) {
            if (prepared.entries[i].dataset == dataset) {
                positions.push_back(i);
                subset.push_back(prepared.entries[i]);
            }
        }
        PatientSplitLog split_log;
        split_log.dataset = dataset;
        Manifest reassigned = patient_wise_split(subset, fraction, rules.seed, &split_log);
        for (std::size_t j = 0; j < positions.size(); ++j) {
            prepared.entries[positions[j]] = std::move(reassigned[j]);
        }
        prepared.log.patient_splits.push_back(std::move(split_log));
    }
    return prepared;
}

}  // namespace cbir
