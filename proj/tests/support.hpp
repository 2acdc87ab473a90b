#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "cbir/embedding_file.hpp"
#include "cbir/manifest.hpp"
#include "cbir/similarity.hpp"
#include "cbir/vector_index.hpp"

namespace cbir::test {

struct Corpus {
    std::size_t dimension = 0;
    Manifest manifest;
    std::vector<EmbeddingRecord> records;
};

inline std::string class_name(std::size_t c) {
    std::string name = "c";
    if (c < 10) name += '0';
    return name + std::to_string(c);
}

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::vector<float> v(dim);
    for (auto& x : v) x = normal(rng);
    return v;
}

inline void add_record(Corpus& corpus, RecordId id, std::size_t label, Split split, std::vector<float> vector,
                       const std::string& dataset = "synthetic") {
    ManifestEntry e;
    e.record_id = id;
    e.source_path = "img/" + std::to_string(id) + ".png";
    e.labels = {class_name(label)};
    e.dataset = dataset;
    e.split = split;
    corpus.manifest.push_back(std::move(e));
    corpus.records.push_back({id, std::move(vector)});
}

/// Isotropic Gaussian clusters around random unit centres scaled to `separation`.
/// Record ids are assigned in generation order starting at `first_id`.
struct ClusterSpec {
    std::size_t classes = 4;
    std::size_t dimension = 16;
    std::size_t train_per_class = 20;
    std::size_t val_per_class = 0;
    std::size_t test_per_class = 5;
    float separation = 4.0f;
    float noise = 1.0f;
    std::uint64_t seed = 1;
    RecordId first_id = 1;
};

inline Corpus gaussian_clusters(const ClusterSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    Corpus corpus;
    corpus.dimension = spec.dimension;
    std::vector<std::vector<float>> centres;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        auto v = random_vector(rng, spec.dimension);
        double norm = 0.0;
        for (float x : v) norm += double(x) * x;
        for (auto& x : v) x = float(x / std::sqrt(norm) * spec.separation);
        centres.push_back(std::move(v));
    }
    std::normal_distribution<float> normal(0.0f, spec.noise);
    RecordId id = spec.first_id;
    const std::pair<Split, std::size_t> splits[] = {
        {Split::Train, spec.train_per_class}, {Split::Val, spec.val_per_class}, {Split::Test, spec.test_per_class}};
    for (const auto& [split, count] : splits) {
        for (std::size_t c = 0; c < spec.classes; ++c) {
            for (std::size_t i = 0; i < count; ++i) {
                std::vector<float> v = centres[c];
                for (auto& x : v) x += normal(rng);
                add_record(corpus, id++, c, split, std::move(v));
            }
        }
    }
    return corpus;
}

/// Uniformly random directions with random labels, all in the train split.
/// `planted_ties` records copy an earlier vector bit for bit under a new id.
inline Corpus random_corpus(std::size_t count, std::size_t dim, std::size_t classes, std::uint64_t seed,
                            std::size_t planted_ties = 0) {
    std::mt19937_64 rng(seed);
    Corpus corpus;
    corpus.dimension = dim;
    std::uniform_int_distribution<std::size_t> label(0, classes - 1);
    // Shuffled ids so row order and id order disagree.
    std::vector<RecordId> ids(count);
    for (std::size_t i = 0; i < count; ++i) ids[i] = 1000 + 7 * i;
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<float> v;
        if (i >= count - planted_ties && i > 0) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            v = corpus.records[pick(rng)].vector;
        } else {
            v = random_vector(rng, dim);
        }
        add_record(corpus, ids[i], label(rng), Split::Train, std::move(v));
    }
    return corpus;
}

inline VectorIndex index_of(const Corpus& corpus, Split split,
                            std::optional<ClassTable> classes = std::nullopt) {
    IndexBuilder::Options options;
    options.split = split;
    options.classes = classes ? std::move(classes) : std::optional(ClassTable::from_manifest(corpus.manifest));
    return build_index(corpus.records, corpus.dimension, corpus.manifest, std::move(options));
}

/// Documented accumulation order of the similarity kernel, re-coded here:
/// element i goes to lane i mod 8 through a fused multiply-add, lanes combine
/// pairwise as ((l0+l4)+(l2+l6)) + ((l1+l5)+(l3+l7)).
inline float reference_dot(std::span<const float> a, std::span<const float> b) {
    float lanes[8] = {};
    for (std::size_t i = 0; i < a.size(); ++i) lanes[i % 8] = std::fma(a[i], b[i], lanes[i % 8]);
    const float even = (lanes[0] + lanes[4]) + (lanes[2] + lanes[6]);
    const float odd = (lanes[1] + lanes[5]) + (lanes[3] + lanes[7]);
    return std::clamp(even + odd, -1.0f, 1.0f);
}

/// Scores every row, sorts the whole list and keeps the first n.
inline RetrievalResult naive_top_n(std::span<const float> query, RecordId query_id, const VectorIndex& index,
                                   std::size_t n, bool exclude_self) {
    std::vector<Hit> all;
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (exclude_self && index.record_id(r) == query_id) continue;
        all.push_back({index.record_id(r), reference_dot(query, index.vector(r))});
    }
    std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.record_id < b.record_id;
    });
    all.resize(std::min(n, all.size()));
    RetrievalResult out;
    out.query_record_id = query_id;
    out.hits = std::move(all);
    return out;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("cbir_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace cbir::test
