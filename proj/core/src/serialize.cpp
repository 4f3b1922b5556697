#include "catis/serialize.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace catis {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string report_csv_body(const DiagnosticsReport& report) {
  std::ostringstream out;
  out << "layer,rho_s,delta_f,rho_off,pool_rho_s\n";
  for (const auto& row : report.per_layer) {
    out << row.layer << ',' << format_double(row.rho_s) << ',' << format_double(row.delta_f)
        << ',' << format_double(row.rho_off) << ',';
    if (row.pool_rho_s) out << format_double(*row.pool_rho_s);
    out << '\n';
  }
  return out.str();
}

nlohmann::ordered_json to_json(const DiagnosticsReport& report) {
  nlohmann::ordered_json j;
  j["similarity_kind"] = to_string(report.kind);
  j["feature_source"] = report.feature_source;
  auto& layers = j["per_layer"] = nlohmann::ordered_json::array();
  for (const auto& row : report.per_layer) {
    nlohmann::ordered_json l;
    l["layer"] = row.layer;
    l["rho_s"] = row.rho_s;
    l["delta_f"] = row.delta_f;
    l["rho_off"] = row.rho_off;
    l["pool_rho_s"] = row.pool_rho_s ? nlohmann::ordered_json(*row.pool_rho_s) : nlohmann::ordered_json(nullptr);
    layers.push_back(std::move(l));
  }
  if (report.energy) {
    j["energy"] = {{"v_pair", report.energy->v_pair},
                   {"v_unary", report.energy->v_unary},
                   {"np", report.energy->np}};
  } else {
    j["energy"] = nullptr;
  }
  return j;
}

nlohmann::ordered_json to_json(const TriagePartition& p) {
  nlohmann::ordered_json j;
  j["protect"] = p.protect;
  j["merge_pool"] = p.merge_pool;
  j["evict_pool"] = p.evict_pool;
  j["r_e"] = p.r_e;
  j["r_m"] = p.r_m;
  j["m_overflow"] = p.m_overflow;
  return j;
}

nlohmann::ordered_json to_json(const MergePlan& plan) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& [src, dst] : plan.pairs) j.push_back({{"src", src}, {"dst", dst}});
  return j;
}

nlohmann::ordered_json to_json(const ReductionAudit& a) {
  nlohmann::ordered_json j;
  j["layer"] = a.layer;
  j["tokens_in"] = a.tokens_in;
  j["tokens_out"] = a.tokens_out;
  j["r_e"] = a.r_e;
  j["r_m"] = a.r_m;
  j["m_overflow"] = a.m_overflow;
  j["partition"] = a.partition ? to_json(*a.partition) : nlohmann::ordered_json(nullptr);
  j["merge_plan"] = to_json(a.plan);
  return j;
}

nlohmann::ordered_json to_json(const InverseDepthFit& fit) {
  return {{"slope", fit.slope},
          {"intercept", fit.intercept},
          {"r2", fit.r2},
          {"underdetermined", fit.underdetermined}};
}

nlohmann::ordered_json to_json(const EnergySweep& sweep) {
  nlohmann::ordered_json j;
  j["degenerate"] = sweep.degenerate;
  if (sweep.degenerate) {
    j["slope"] = nullptr;
    j["intercept"] = nullptr;
    j["r2"] = nullptr;
  } else {
    j["slope"] = sweep.fit.slope;
    j["intercept"] = sweep.fit.intercept;
    j["r2"] = sweep.fit.r2;
  }
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : sweep.points) {
    pts.push_back({{"np", p.np}, {"v_pair", p.v_pair}, {"v_unary", p.v_unary}});
  }
  return j;
}

std::string merge_groups_csv_body(const TokenPopulation& pop) {
  std::ostringstream out;
  out << "token_index,size,patches\n";
  for (std::size_t k = 0; k < pop.patch_count(); ++k) {
    const std::size_t row = pop.first_patch() + k;
    out << k << ',' << pop.sizes()[row] << ',';
    const auto& p = pop.provenance()[row];
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? " " : "") << p[i];
    out << '\n';
  }
  return out.str();
}

}  // namespace catis
