#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "cbir/ablation.hpp"
#include "cbir/manifest.hpp"
#include "cbir/probe_suite.hpp"
#include "cbir/retrieval_eval.hpp"

namespace cbir {

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const ProbeReport& report);
nlohmann::json to_json(const AblationCurve& curve);
nlohmann::json to_json(const PreparationLog& log);

/// `metric,n,averaging,value`
void write_metrics_csv(std::ostream& out, const MetricsReport& report);
/// `class_id,class_name,class_kind,query_count,index_count,p_at_1`
void write_per_class_csv(std::ostream& out, const MetricsReport& report);
/// `epoch,train_loss,val_loss`
void write_history_csv(std::ostream& out, const ProbeReport& report);
/// `n,seed,p_at_1`
void write_ablation_csv(std::ostream& out, const AblationCurve& curve);

}  // namespace cbir
