#include "cbir/reports.hpp"

#include <charconv>
#include <ostream>

namespace cbir {

namespace {

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

nlohmann::json scores_json(const ProbeScores& s) {
    return {{"auprc_micro", s.auprc_micro}, {"auprc_macro", s.auprc_macro},
            {"f1_micro", s.f1_micro},       {"f1_macro", s.f1_macro}};
}

}  // namespace

std::string format_number(double value) {
    char buffer[64];
    const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, end);
}

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json micro = nlohmann::json::object();
    nlohmann::json macro = nlohmann::json::object();
    for (const auto& [n, v] : report.p_at_n_micro) micro[std::to_string(n)] = v;
    for (const auto& [n, v] : report.p_at_n_macro) macro[std::to_string(n)] = v;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.per_class) {
        rows.push_back({{"class_id", r.class_id},
                        {"class_name", r.class_name},
                        {"class_kind", std::string(to_string(r.class_kind))},
                        {"query_count", r.query_count},
                        {"index_count", r.index_count},
                        {"p_at_1", r.p_at_1}});
    }
    return {{"query_count", report.query_count},
            {"p_at_n_micro", micro},
            {"p_at_n_macro", macro},
            {"per_class", rows}};
}

nlohmann::json to_json(const ProbeReport& report) {
    nlohmann::json knn = scores_json(report.knn);
    knn["best_k"] = report.best_k;
    knn["k_grid"] = report.k_grid;
    knn["k_validation_macro_f1"] = report.k_validation_macro_f1;
    nlohmann::json linear = scores_json(report.linear);
    linear["best_epoch"] = report.best_epoch;
    linear["stopped_early"] = report.stopped_early;
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : report.history) {
        history.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_loss", h.val_loss}});
    }
    linear["history"] = history;
    return {{"knn", knn}, {"linear", linear}};
}

nlohmann::json to_json(const AblationCurve& curve) {
    nlohmann::json means = nlohmann::json::array();
    for (const auto& [n, mean] : curve.mean_by_n) means.push_back({{"n", n}, {"mean_p_at_1", mean}});
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : curve.rows) {
        rows.push_back({{"n", r.n}, {"repetition", r.repetition}, {"seed", r.seed}, {"p_at_1", r.p_at_1}});
    }
    return {{"classes", curve.classes}, {"query_count", curve.query_count}, {"means", means}, {"rows", rows}};
}

nlohmann::json to_json(const PreparationLog& log) {
    nlohmann::json splits = nlohmann::json::array();
    for (const auto& s : log.patient_splits) {
        splits.push_back({{"dataset", s.dataset},
                          {"val_fraction", s.val_fraction},
                          {"patients_total", s.patients_total},
                          {"patients_val", s.patients_val},
                          {"samples_moved", s.samples_moved}});
    }
    return {{"input_count", log.input_count},
            {"output_count", log.output_count},
            {"duplicates_dropped", log.duplicates_dropped},
            {"multi_label_dropped", log.multi_label_dropped},
            {"labels_aliased", log.labels_aliased},
            {"dropped_record_ids", log.dropped_record_ids},
            {"patient_splits", splits}};
}

void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
    out << "metric,n,averaging,value\n";
    for (const auto& [n, v] : report.p_at_n_micro) out << "precision," << n << ",micro," << format_number(v) << '\n';
    for (const auto& [n, v] : report.p_at_n_macro) out << "precision," << n << ",macro," << format_number(v) << '\n';
}

void write_per_class_csv(std::ostream& out, const MetricsReport& report) {
    out << "class_id,class_name,class_kind,query_count,index_count,p_at_1\n";
    for (const auto& r : report.per_class) {
        out << r.class_id << ',' << csv_field(r.class_name) << ',' << to_string(r.class_kind) << ','
            << r.query_count << ',' << r.index_count << ',' << format_number(r.p_at_1) << '\n';
    }
}

void write_history_csv(std::ostream& out, const ProbeReport& report) {
    out << "epoch,train_loss,val_loss\n";
    for (const auto& h : report.history) {
        out << h.epoch << ',' << format_number(h.train_loss) << ',' << format_number(h.val_loss) << '\n';
    }
}

void write_ablation_csv(std::ostream& out, const AblationCurve& curve) {
    out << "n,seed,p_at_1\n";
    for (const auto& r : curve.rows) out << r.n << ',' << r.seed << ',' << format_number(r.p_at_1) << '\n';
}

}  // namespace cbir
