#pragma once

// Cost reports and search traces as JSON / CSV. Column names carry units.

#include <cstdio>
#include <sstream>
#include <string>

#include "xpert/config.hpp"
#include "xpert/costmodel.hpp"
#include "xpert/search.hpp"

namespace xpert {

inline json metrics_to_json(const Metrics& m) {
  return json{{"area_mm2", m.area_mm2}, {"delay_ns", m.delay_ns}, {"energy_pJ", m.energy_pj}};
}

inline json report_to_json(const CostReport& r) {
  json j;
  j["area_mm2"] = r.area_mm2;
  j["delay_ns"] = r.delay_ns;
  j["energy_pJ"] = r.energy_pj;
  j["edap_mJ_ms_mm2"] = r.edap;
  j["tops_per_watt"] = r.tops_per_watt;
  j["tops_per_mm2"] = r.tops_per_mm2;
  j["psi"] = r.psi;
  j["mean_cs"] = r.mean_cs;
  j["sar_fraction"] = r.sar_fraction;
  j["total_tiles"] = r.total_tiles;
  j["op_count"] = r.op_count;
  json& b = j["breakdown"];
  for (auto c : kComponents) b[component_name(c)] = metrics_to_json(r.breakdown[std::size_t(c)]);
  return j;
}

inline std::string layer_csv(const CandidateModel& m, const CostReport& r) {
  std::ostringstream os;
  os << "layer,cd_in,cd_out,kernel,fc,cs,at,ap,ip,tiles,xbars,read_cycles,macs,area_mm2,delay_ns,energy_pJ\n";
  for (std::size_t l = 0; l < r.per_layer.size(); ++l) {
    const auto& lc = r.per_layer[l];
    const auto& ml = m.layers[l];
    os << l << ',' << m.cd_in(l) << ',' << ml.choice.cd_out << ',' << ml.shape.kernel << ',' << (ml.shape.is_fc ? 1 : 0)
       << ',' << ml.choice.cs << ',' << to_string(ml.choice.at) << ',' << ml.choice.ap << ',' << ml.choice.ip << ','
       << lc.tiles << ',' << lc.xbars << ',' << lc.read_cycles_per_activation << ',' << lc.macs << ','
       << fmt_num(lc.area_mm2) << ',' << fmt_num(lc.delay_ns) << ',' << fmt_num(lc.energy_pj) << '\n';
  }
  return os.str();
}

inline std::string breakdown_csv(const CostReport& r) {
  std::ostringstream os;
  os << "component,area_mm2,delay_ns,energy_pJ\n";
  for (auto c : kComponents) {
    const auto& m = r.breakdown[std::size_t(c)];
    os << component_name(c) << ',' << fmt_num(m.area_mm2) << ',' << fmt_num(m.delay_ns) << ',' << fmt_num(m.energy_pj)
       << '\n';
  }
  return os.str();
}

inline std::string phase1_trace_csv(const std::vector<Phase1TraceRow>& t) {
  std::ostringstream os;
  os << "step,loss,expected_area_mm2,expected_delay_ns,argmax_id,argmax_area_mm2,argmax_delay_ns,admitted\n";
  for (const auto& r : t)
    os << r.step << ',' << fmt_num(r.loss) << ',' << fmt_num(r.expected_area_mm2) << ',' << fmt_num(r.expected_delay_ns)
       << ',' << r.argmax_id << ',' << fmt_num(r.argmax_area_mm2) << ',' << fmt_num(r.argmax_delay_ns) << ','
       << (r.admitted ? 1 : 0) << '\n';
  return os.str();
}

inline std::string phase2_trace_csv(const std::vector<Phase2TraceRow>& t) {
  std::ostringstream os;
  os << "step,probed_layer,argmax_id,argmax_ce,argmax_delay_ns,argmax_loss,expected_delay_ns\n";
  for (const auto& r : t)
    os << r.step << ',' << r.probed_layer << ',' << r.argmax_id << ',' << fmt_num(r.argmax_ce) << ','
       << fmt_num(r.argmax_delay_ns) << ',' << fmt_num(r.argmax_loss) << ',' << fmt_num(r.expected_delay_ns) << '\n';
  return os.str();
}

inline json pool_to_json(const CandidatePool& pool) {
  json j = json::array();
  for (const auto& e : pool.entries) {
    json x;
    x["id"] = candidate_id(e.option_index);
    x["step"] = e.step;
    x["admitted"] = e.admitted;
    x["area_mm2"] = e.report.area_mm2;
    x["delay_ns"] = e.report.delay_ns;
    x["energy_pJ"] = e.report.energy_pj;
    x["edap_mJ_ms_mm2"] = e.report.edap;
    x["psi"] = e.report.psi;
    if (e.hd_score) x["hd_score"] = *e.hd_score;
    x["model"] = model_to_json(e.model);
    j.push_back(std::move(x));
  }
  return j;
}

inline const char* kSweepHeader =
    "value,status,area_mm2,delay_ns,energy_pJ,edap_mJ_ms_mm2,psi,mean_cs,sar_fraction,total_tiles,message\n";

inline std::string sweep_row(double value, const CostReport& r) {
  std::ostringstream os;
  os << fmt_num(value) << ",ok," << fmt_num(r.area_mm2) << ',' << fmt_num(r.delay_ns) << ',' << fmt_num(r.energy_pj)
     << ',' << fmt_num(r.edap) << ',' << fmt_num(r.psi) << ',' << fmt_num(r.mean_cs) << ',' << fmt_num(r.sar_fraction)
     << ',' << r.total_tiles << ",\n";
  return os.str();
}

inline std::string sweep_error_row(double value, const std::string& status, std::string message) {
  for (auto& ch : message)
    if (ch == ',' || ch == '\n') ch = ';';
  return fmt_num(value) + "," + status + ",,,,,,,,," + message + "\n";
}

}  // namespace xpert
