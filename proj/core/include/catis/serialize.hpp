#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catis/diagnostics.hpp"
#include "catis/recurrence.hpp"
#include "catis/reduce.hpp"
#include "catis/synth.hpp"
#include "catis/triage.hpp"

namespace catis {

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Diagnostics CSV: header layer,rho_s,delta_f,rho_off,pool_rho_s; the pool
/// column is empty when absent.
std::string report_csv_body(const DiagnosticsReport& report);
nlohmann::ordered_json to_json(const DiagnosticsReport& report);

nlohmann::ordered_json to_json(const TriagePartition& partition);
nlohmann::ordered_json to_json(const MergePlan& plan);
nlohmann::ordered_json to_json(const ReductionAudit& audit);
nlohmann::ordered_json to_json(const InverseDepthFit& fit);
nlohmann::ordered_json to_json(const EnergySweep& sweep);

/// Merge groups CSV body: token_index,size,patches (patches space-separated).
std::string merge_groups_csv_body(const TokenPopulation& pop);

}  // namespace catis
