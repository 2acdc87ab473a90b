#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <set>

#include "cbir/cli.hpp"
#include "cbir/error.hpp"
#include "cbir/parallel.hpp"

namespace cbir::cli {

namespace {

const std::set<std::string> kKnownKeys = {
    "embeddings",
    "manifest",
    "index",
    "preparation_log",
    "query_vector",
    "query_id",
    "output",
    "n_values",
    "n",
    "index_split",
    "query_split",
    "exclude_self",
    "dedup_datasets",
    "multi_label_excluded_datasets",
    "class_aliases",
    "patient_split",
    "knn_k_grid",
    "probe_epochs",
    "probe_patience",
    "probe_batch_size",
    "probe_learning_rate",
    "probe_weight_decay",
    "probe_beta1",
    "probe_beta2",
    "probe_epsilon",
    "ablation_min_class_size",
    "ablation_queries_per_class",
    "ablation_n_schedule",
    "ablation_repetitions",
    "ablation_independent_draws",
    "seed",
    "workers",
};

template <class T>
T get(const nlohmann::json& doc, const std::string& key) {
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': " + e.what());
    }
}

template <class T>
void read_if(const nlohmann::json& doc, const std::string& key, T& target) {
    if (doc.contains(key)) target = get<T>(doc, key);
}

void read_path(const nlohmann::json& doc, const std::string& key, std::optional<std::filesystem::path>& target) {
    if (doc.contains(key)) target = get<std::string>(doc, key);
}

std::vector<std::size_t> positive_list(const nlohmann::json& doc, const std::string& key) {
    auto values = get<std::vector<std::size_t>>(doc, key);
    if (values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must be a non-empty list");
    }
    for (auto v : values) {
        if (v == 0) throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must hold positive integers");
    }
    return values;
}

std::string hex(std::span<const unsigned char> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw Error(ErrorCode::Io, "SHA-256 initialisation failed");
        }
    }
    void update(const void* data, std::size_t size) { EVP_DigestUpdate(ctx_.get(), data, size); }
    std::string finish() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
        unsigned int length = 0;
        EVP_DigestFinal_ex(ctx_.get(), digest.data(), &length);
        return hex(std::span(digest.data(), length));
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

RunConfig resolve_config(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (!kKnownKeys.contains(key)) {
            throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
        }
    }

    RunConfig c;
    c.document = doc;
    read_path(doc, "embeddings", c.embeddings);
    read_path(doc, "manifest", c.manifest);
    read_path(doc, "index", c.index);
    read_path(doc, "preparation_log", c.preparation_log);
    read_path(doc, "query_vector", c.query_vector);
    if (doc.contains("query_id")) c.query_id = get<RecordId>(doc, "query_id");
    if (doc.contains("output")) c.output = get<std::string>(doc, "output");

    if (doc.contains("n_values")) c.n_values = positive_list(doc, "n_values");
    read_if(doc, "n", c.query_n);
    if (c.query_n == 0) throw Error(ErrorCode::InvalidArgument, "config key 'n' must be positive");
    if (doc.contains("index_split")) c.index_split = parse_split(get<std::string>(doc, "index_split"));
    if (doc.contains("query_split")) c.query_split = parse_split(get<std::string>(doc, "query_split"));
    read_if(doc, "exclude_self", c.exclude_self);

    read_if(doc, "seed", c.seed);
    c.workers = default_workers();
    read_if(doc, "workers", c.workers);
    if (c.workers == 0) throw Error(ErrorCode::InvalidArgument, "config key 'workers' must be positive");

    read_if(doc, "dedup_datasets", c.rules.dedup_datasets);
    read_if(doc, "multi_label_excluded_datasets", c.rules.multi_label_excluded_datasets);
    read_if(doc, "class_aliases", c.rules.class_aliases);
    read_if(doc, "patient_split", c.rules.patient_split);
    c.rules.seed = c.seed;

    if (doc.contains("knn_k_grid")) c.knn.k_grid = positive_list(doc, "knn_k_grid");

    read_if(doc, "probe_epochs", c.probe.epochs);
    read_if(doc, "probe_patience", c.probe.early_stopping_patience);
    read_if(doc, "probe_batch_size", c.probe.batch_size);
    read_if(doc, "probe_learning_rate", c.probe.optimizer.learning_rate);
    read_if(doc, "probe_weight_decay", c.probe.optimizer.weight_decay);
    read_if(doc, "probe_beta1", c.probe.optimizer.beta1);
    read_if(doc, "probe_beta2", c.probe.optimizer.beta2);
    read_if(doc, "probe_epsilon", c.probe.optimizer.epsilon);
    c.probe.seed = c.seed;
    validate(c.probe);

    read_if(doc, "ablation_min_class_size", c.ablation.min_class_size);
    read_if(doc, "ablation_queries_per_class", c.ablation.queries_per_class);
    if (doc.contains("ablation_n_schedule")) c.ablation.n_schedule = positive_list(doc, "ablation_n_schedule");
    read_if(doc, "ablation_repetitions", c.ablation.repetitions);
    read_if(doc, "ablation_independent_draws", c.ablation.independent_draws);
    c.ablation.seed = c.seed;
    validate(c.ablation);
    return c;
}

void apply_override(nlohmann::json& document, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCode::InvalidArgument, "--set expects KEY=VALUE, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    auto parsed = nlohmann::json::parse(text, nullptr, false);
    document[key] = parsed.is_discarded() ? nlohmann::json(text) : parsed;
}

std::string config_hash(const nlohmann::json& document) {
    nlohmann::json canonical = document;
    canonical.erase("workers");
    canonical.erase("output");
    const std::string text = canonical.dump();
    Sha256 sha;
    sha.update(text.data(), text.size());
    return sha.finish();
}

std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingInput, "cannot open '" + path.string() + "'");
    }
    Sha256 sha;
    std::array<char, 1 << 16> buffer;
    while (in) {
        in.read(buffer.data(), buffer.size());
        sha.update(buffer.data(), static_cast<std::size_t>(in.gcount()));
    }
    return sha.finish();
}

}  // namespace cbir::cli
