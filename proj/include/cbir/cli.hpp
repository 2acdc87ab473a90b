#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbir/ablation.hpp"
#include "cbir/knn.hpp"
#include "cbir/linear_probe.hpp"
#include "cbir/manifest.hpp"

namespace cbir::cli {

/// Effective configuration of one command, resolved from the flat JSON
/// config document plus overrides.
struct RunConfig {
    std::optional<std::filesystem::path> embeddings;
    std::optional<std::filesystem::path> manifest;
    std::optional<std::filesystem::path> index;
    std::optional<std::filesystem::path> preparation_log;
    std::optional<std::filesystem::path> query_vector;
    std::optional<RecordId> query_id;
    std::filesystem::path output = "cbir_out";

    std::vector<std::size_t> n_values = {1, 3, 5, 10};
    std::size_t query_n = 6;
    Split index_split = Split::Train;
    Split query_split = Split::Test;
    bool exclude_self = false;

    PreparationRules rules;
    KnnConfig knn;
    LinearProbeConfig probe;
    AblationConfig ablation;

    std::uint64_t seed = 0;
    std::size_t workers = 1;

    /// Flat key/value document the fields above were read from.
    nlohmann::json document = nlohmann::json::object();
};

/// Parses a flat JSON object into a RunConfig. Unknown keys and badly typed
/// values raise InvalidArgument.
RunConfig resolve_config(const nlohmann::json& document);

/// Applies `key=value`; the value is parsed as JSON when possible and kept as
/// a string otherwise.
void apply_override(nlohmann::json& document, const std::string& assignment);

/// SHA-256 of the canonical config dump, ignoring keys that cannot change
/// results (`workers`, `output`).
std::string config_hash(const nlohmann::json& document);

/// Lowercase hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

/// Entry point; `args` excludes the program name. Returns the process exit
/// status: 0 on success, 1 on a module error (an error record is printed to
/// `err` as JSON), 2 on a usage error.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace cbir::cli
