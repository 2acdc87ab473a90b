#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cbir/cli.hpp"
#include "cbir/error.hpp"
#include "cbir/reports.hpp"
#include "cbir/similarity.hpp"
#include "cbir/vector_index.hpp"

namespace cbir::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const fs::path& require_input(const std::optional<fs::path>& path, const char* key) {
    if (!path) {
        throw Error(ErrorCode::MissingInput, std::string("config key '") + key + "' is required for this command");
    }
    if (!fs::exists(*path)) {
        throw Error(ErrorCode::MissingInput, std::string(key) + " '" + path->string() + "' does not exist");
    }
    return *path;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

json provenance(const RunConfig& config, const std::vector<fs::path>& inputs) {
    json files = json::object();
    for (const auto& path : inputs) files[path.filename().string()] = file_sha256(path);
    return {{"config_hash", config_hash(config.document)}, {"input_sha256", files}, {"seed", config.seed}};
}

fs::path output_file(const RunConfig& config, const char* name) {
    fs::create_directories(config.output);
    return config.output / name;
}

/// Report documents keep the wall-clock timestamp apart from the payload so
/// payloads are reproducible byte for byte.
void write_report(const fs::path& path, json payload) {
    const json document = {{"payload", std::move(payload)}, {"metadata", {{"timestamp", utc_timestamp()}}}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << document.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

template <class Writer>
void write_text(const fs::path& path, Writer&& writer) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    writer(out);
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::unordered_set<RecordId> dropped_ids(const RunConfig& config) {
    std::unordered_set<RecordId> ids;
    if (!config.preparation_log) return ids;
    std::ifstream in(require_input(config.preparation_log, "preparation_log"));
    json log;
    try {
        log = json::parse(in);
        const json& body = log.contains("payload") ? log.at("payload") : log;
        for (const auto& id : body.at("log").at("dropped_record_ids")) ids.insert(id.get<RecordId>());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("preparation log: ") + e.what());
    }
    return ids;
}

VectorIndex build_split(const RunConfig& config, const Manifest& manifest, Split split,
                        std::optional<ClassTable> classes = std::nullopt) {
    EmbeddingReader reader(require_input(config.embeddings, "embeddings"));
    IndexBuilder::Options options;
    options.split = split;
    options.dropped = dropped_ids(config);
    options.classes = std::move(classes);
    return build_index(reader, manifest, std::move(options));
}

std::vector<fs::path> used_inputs(std::initializer_list<const std::optional<fs::path>*> keys) {
    std::vector<fs::path> out;
    for (const auto* key : keys) {
        if (*key) out.push_back(**key);
    }
    return out;
}

// ---- commands --------------------------------------------------------------

void cmd_ingest(const RunConfig& config, std::ostream& out) {
    const Manifest raw = read_manifest_csv(require_input(config.manifest, "manifest"));
    const PreparedManifest prepared = prepare_with_splits(raw, config.rules);

    const auto manifest_path = output_file(config, "prepared_manifest.csv");
    write_manifest_csv(manifest_path, prepared.entries);
    json payload = {{"log", to_json(prepared.log)}, {"provenance", provenance(config, {*config.manifest})}};
    write_report(output_file(config, "preparation_log.json"), std::move(payload));

    out << "ingest: " << prepared.log.input_count << " entries in, " << prepared.log.output_count << " out ("
        << prepared.log.duplicates_dropped << " duplicates, " << prepared.log.multi_label_dropped
        << " multi-label dropped)\n";
    for (const auto& s : prepared.log.patient_splits) {
        out << "ingest: " << s.dataset << " patient split " << s.patients_val << "/" << s.patients_total
            << " patients to val (" << s.samples_moved << " samples)\n";
    }
}

void cmd_build_index(const RunConfig& config, std::ostream& out) {
    const Manifest manifest = read_manifest_csv(require_input(config.manifest, "manifest"));
    const VectorIndex index = build_split(config, manifest, config.index_split);
    const fs::path path = config.index ? *config.index : output_file(config, "index.cbir");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_index(index, path);

    json payload = {{"index", path.filename().string()},
                    {"count", index.size()},
                    {"dimension", index.dimension()},
                    {"classes", index.classes().size()},
                    {"split", std::string(to_string(config.index_split))},
                    {"provenance", provenance(config, used_inputs({&config.embeddings, &config.manifest}))}};
    write_report(output_file(config, "build_index.json"), std::move(payload));
    out << "build-index: " << index.size() << " vectors of dimension " << index.dimension() << " -> "
        << path.string() << '\n';
}

void cmd_query(const RunConfig& config, std::ostream& out) {
    const VectorIndex index = load_index(require_input(config.index, "index"));

    std::vector<float> query;
    RecordId query_id = 0;
    if (config.query_vector) {
        EmbeddingReader reader(require_input(config.query_vector, "query_vector"));
        EmbeddingRecord record;
        if (!reader.next(record)) throw Error(ErrorCode::InvalidArgument, "query vector file holds no records");
        query_id = record.record_id;
        query = l2_normalize(record.vector);
    } else if (config.query_id) {
        query_id = *config.query_id;
        if (config.embeddings) {
            EmbeddingReader reader(require_input(config.embeddings, "embeddings"));
            EmbeddingRecord record;
            bool found = false;
            while (!found && reader.next(record)) found = record.record_id == query_id;
            if (!found) throw Error(ErrorCode::UnknownRecordId, "query id not in embeddings", query_id);
            query = l2_normalize(record.vector);
        } else if (auto row = index.find(query_id)) {
            const auto v = index.vector(*row);
            query.assign(v.begin(), v.end());
        } else {
            throw Error(ErrorCode::UnknownRecordId, "query id not in index (set 'embeddings' to look it up)",
                        query_id);
        }
    } else {
        throw Error(ErrorCode::MissingInput, "query needs 'query_id' or 'query_vector'");
    }

    std::unordered_map<RecordId, std::string> sources;
    if (config.manifest) {
        for (const auto& e : read_manifest_csv(require_input(config.manifest, "manifest"))) {
            sources.emplace(e.record_id, e.source_path);
        }
    }

    const std::optional<RecordId> exclude = config.exclude_self ? std::optional(query_id) : std::nullopt;
    const auto result = top_n(query, index, config.query_n, exclude, SearchOptions{config.workers});
    out << "query " << query_id << ": top " << result.hits.size() << " of " << index.size() << '\n';
    out << "rank\trecord_id\tsimilarity\tlabel\tsource_path\n";
    for (std::size_t i = 0; i < result.hits.size(); ++i) {
        const auto& hit = result.hits[i];
        const auto row = *index.find(hit.record_id);
        const auto it = sources.find(hit.record_id);
        out << (i + 1) << '\t' << hit.record_id << '\t' << std::fixed << std::setprecision(6) << hit.similarity
            << std::defaultfloat << '\t' << index.classes().info(index.label(row)).name << '\t'
            << (it == sources.end() ? std::string("-") : it->second) << '\n';
    }
}

void cmd_evaluate(const RunConfig& config, std::ostream& out) {
    const VectorIndex index = load_index(require_input(config.index, "index"));
    const Manifest manifest = read_manifest_csv(require_input(config.manifest, "manifest"));
    const VectorIndex queries = build_split(config, manifest, config.query_split, index.classes());
    if (queries.empty()) {
        throw Error(ErrorCode::EmptyQuerySet,
                    "no " + std::string(to_string(config.query_split)) + " records to use as queries");
    }

    const std::size_t max_n = *std::max_element(config.n_values.begin(), config.n_values.end());
    if (index.size() < max_n) {
        throw Error(ErrorCode::InsufficientHits, "P@" + std::to_string(max_n) + " requires an index of at least " +
                                                     std::to_string(max_n) + " vectors; index has " +
                                                     std::to_string(index.size()));
    }
    const auto results = batch_top_n(queries, index, max_n, config.exclude_self, SearchOptions{config.workers});
    const std::vector<ClassId> query_classes(queries.labels().begin(), queries.labels().end());
    const MetricsReport report = evaluate_retrieval(results, query_classes, index, config.n_values);

    json payload = to_json(report);
    payload["provenance"] =
        provenance(config, used_inputs({&config.index, &config.embeddings, &config.manifest}));
    write_report(output_file(config, "metrics.json"), std::move(payload));
    write_text(output_file(config, "metrics.csv"), [&](std::ostream& o) { write_metrics_csv(o, report); });
    write_text(output_file(config, "per_class.csv"), [&](std::ostream& o) { write_per_class_csv(o, report); });

    for (std::size_t n : config.n_values) {
        out << "P@" << n << " micro " << format_number(report.p_at_n_micro.at(n)) << " macro "
            << format_number(report.p_at_n_macro.at(n)) << '\n';
    }
}

void cmd_probe(const RunConfig& config, std::ostream& out) {
    const Manifest manifest = read_manifest_csv(require_input(config.manifest, "manifest"));
    const VectorIndex train = build_split(config, manifest, Split::Train);
    const VectorIndex val = build_split(config, manifest, Split::Val);
    const VectorIndex test = build_split(config, manifest, Split::Test);

    // Grid entries larger than the index cannot be evaluated; they are dropped
    // and the effective grid is reported.
    KnnConfig knn = config.knn;
    std::erase_if(knn.k_grid, [&](std::size_t k) { return k > train.size(); });
    if (knn.k_grid.empty()) {
        throw Error(ErrorCode::KTooLarge, "every K in knn_k_grid exceeds the index size " + std::to_string(train.size()));
    }

    const ProbeReport report = run_probe_suite(train, val, test, knn, config.probe, SearchOptions{config.workers});
    json payload = to_json(report);
    payload["provenance"] = provenance(config, used_inputs({&config.embeddings, &config.manifest}));
    write_report(output_file(config, "probe.json"), std::move(payload));
    write_text(output_file(config, "probe_history.csv"), [&](std::ostream& o) { write_history_csv(o, report); });

    out << "kNN (K=" << report.best_k << ") F1 micro " << format_number(report.knn.f1_micro) << " macro "
        << format_number(report.knn.f1_macro) << ", AUPRC micro " << format_number(report.knn.auprc_micro)
        << " macro " << format_number(report.knn.auprc_macro) << '\n';
    out << "linear (epoch " << report.best_epoch << ") F1 micro " << format_number(report.linear.f1_micro)
        << " macro " << format_number(report.linear.f1_macro) << ", AUPRC micro "
        << format_number(report.linear.auprc_micro) << " macro " << format_number(report.linear.auprc_macro) << '\n';
}

void cmd_ablate(const RunConfig& config, std::ostream& out) {
    const Manifest manifest = read_manifest_csv(require_input(config.manifest, "manifest"));
    const VectorIndex pool = build_split(config, manifest, config.index_split);
    const VectorIndex queries = build_split(config, manifest, config.query_split);

    const AblationCurve curve = run_ablation(pool, queries, config.ablation, SearchOptions{config.workers});
    json payload = to_json(curve);
    payload["provenance"] = provenance(config, used_inputs({&config.embeddings, &config.manifest}));
    write_report(output_file(config, "ablation.json"), std::move(payload));
    write_text(output_file(config, "ablation.csv"), [&](std::ostream& o) { write_ablation_csv(o, curve); });

    for (const auto& [n, mean] : curve.mean_by_n) out << "N=" << n << " mean P@1 " << format_number(mean) << '\n';
}

void print_error(std::ostream& err, std::string_view code, const std::string& message,
                 std::optional<RecordId> record_id = std::nullopt) {
    json record = {{"code", code}, {"message", message}};
    if (record_id) record["record_id"] = *record_id;
    err << json{{"error", record}}.dump() << '\n';
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Exact cosine-similarity image retrieval and evaluation toolkit", "cbir"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"ingest", "Prepare a manifest (dedup, multi-label exclusion, patient-wise split)"},
        {"build-index", "Normalize embeddings of one split into an index file"},
        {"query", "Print the most similar indexed records for one query"},
        {"evaluate", "Precision@N (micro/macro) of test queries against an index"},
        {"probe", "kNN and linear-probe classification of the embedding space"},
        {"ablate", "P@1 as a function of per-class index size"},
    };
    for (const auto& [name, description] : commands) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--set", overrides, "Override a config key (KEY=VALUE)")->take_all();
        sub->add_option("--workers", workers, "Worker threads (default: CBIR_WORKERS or hardware concurrency)");
        sub->add_option("--seed", seed, "Random seed");
        sub->add_option("--output", output, "Output directory");
    }

    std::vector<std::string> argv_storage{"cbir"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        print_error(err, "usage", e.what());
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        json document = json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            document = json::parse(in, nullptr, false);
            if (document.is_discarded()) {
                throw Error(ErrorCode::ParseError, "config '" + config_path + "' is not valid JSON");
            }
        }
        for (const auto& assignment : overrides) apply_override(document, assignment);
        if (workers) document["workers"] = *workers;
        if (seed) document["seed"] = *seed;
        if (output) document["output"] = *output;
        const RunConfig config = resolve_config(document);

        if (command == "ingest") cmd_ingest(config, out);
        else if (command == "build-index") cmd_build_index(config, out);
        else if (command == "query") cmd_query(config, out);
        else if (command == "evaluate") cmd_evaluate(config, out);
        else if (command == "probe") cmd_probe(config, out);
        else if (command == "ablate") cmd_ablate(config, out);
        return 0;
    } catch (const Error& e) {
        print_error(err, to_string(e.code()), e.what(), e.record_id());
        return 1;
    } catch (const fs::filesystem_error& e) {
        print_error(err, to_string(ErrorCode::Io), e.what());
        return 1;
    }
}

}  // namespace cbir::cli
