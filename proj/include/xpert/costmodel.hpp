#pragma once

// Analytical area / delay / energy model for DNNs mapped onto a tiled crossbar accelerator.
//
// Each layer owns whole tiles. A tile holds `xbars_per_tile` crossbars grouped into PEs. One ADC
// serves `cs` columns of a crossbar through a cs:1 mux, so a crossbar activation takes
// (ip / input_slice_bits) * cs read rounds; within a round every ADC of every crossbar converts in
// parallel. Layers execute back to back (no inter-layer pipelining).

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "xpert/designspace.hpp"

namespace xpert {

enum class Component : int { Adc, Accumulators, HTree, Buffers, SwitchMatrix, Mux, XbarArray };
inline constexpr std::size_t kComponentCount = 7;
inline constexpr std::array<Component, kComponentCount> kComponents = {
    Component::Adc,     Component::Accumulators, Component::HTree,    Component::Buffers,
    Component::SwitchMatrix, Component::Mux,     Component::XbarArray};

inline const char* component_name(Component c) {
  switch (c) {
    case Component::Adc: return "ADC";
    case Component::Accumulators: return "Accumulators";
    case Component::HTree: return "HTree";
    case Component::Buffers: return "Buffers";
    case Component::SwitchMatrix: return "SwitchMatrix";
    case Component::Mux: return "Mux";
    case Component::XbarArray: return "XbarArray";
  }
  return "?";
}

struct Metrics {
  double area_mm2 = 0.0;
  double delay_ns = 0.0;
  double energy_pj = 0.0;

  Metrics& operator+=(const Metrics& o) {
    area_mm2 += o.area_mm2;
    delay_ns += o.delay_ns;
    energy_pj += o.energy_pj;
    return *this;
  }
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

using Breakdown = std::array<Metrics, kComponentCount>;

struct AdcProfile {
  double area_mm2 = 0.0;
  double energy_per_conversion_pj = 0.0;
  double latency_per_conversion_ns = 0.0;
  int comparator_count = 0;
};

struct LayerCost {
  std::int64_t tiles = 0;
  std::int64_t xbars = 0;
  std::int64_t read_cycles_per_activation = 0;
  std::int64_t macs = 0;
  double area_mm2 = 0.0;
  double delay_ns = 0.0;
  double energy_pj = 0.0;
  Breakdown breakdown{};

  Metrics totals() const { return {area_mm2, delay_ns, energy_pj}; }
};

struct CostReport {
  double area_mm2 = 0.0;
  double delay_ns = 0.0;
  double energy_pj = 0.0;
  double edap = 0.0;  // mJ * ms * mm^2
  double tops_per_watt = 0.0;
  double tops_per_mm2 = 0.0;
  double psi = 0.0;
  double mean_cs = 0.0;
  double sar_fraction = 0.0;
  std::int64_t total_tiles = 0;
  double op_count = 0.0;  // 2 * MACs
  std::vector<LayerCost> per_layer;
  Breakdown breakdown{};
};

namespace detail {
inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }
inline int ceil_log2(std::int64_t n) {
  int d = 0;
  while ((std::int64_t{1} << d) < n) ++d;
  return d;
}
}  // namespace detail

struct XbarMapping {
  std::int64_t rows = 0;        // cd_in * k^2
  std::int64_t cols = 0;        // cd_out * weight slices (physical columns)
  std::int64_t row_blocks = 0;  // crossbars stacked along the input dimension
  std::int64_t col_blocks = 0;
  std::int64_t xbars = 0;
  std::int64_t tiles = 0;
};

inline XbarMapping map_layer(int cd_in, const LayerShape& shape, int cd_out, const PlatformParams& p) {
  XbarMapping m;
  const std::int64_t k = shape.effective_kernel();
  m.rows = std::int64_t{cd_in} * k * k;
  m.cols = std::int64_t{cd_out} * p.weight_slices();
  m.row_blocks = detail::ceil_div(m.rows, p.xbar_size);
  m.col_blocks = detail::ceil_div(m.cols, p.xbar_size);
  m.xbars = m.row_blocks * m.col_blocks;
  m.tiles = std::max<std::int64_t>(1, detail::ceil_div(m.xbars, p.xbars_per_tile));
  return m;
}

// Tiles needed by a layer: crossbars along rows times crossbars along (weight-sliced) columns,
// packed xbars_per_tile to a tile, at least one.
inline std::int64_t tiles_for_layer(int cd_in, const LayerShape& shape, const LayerChoice& choice,
                                    const PlatformParams& platform) {
  return map_layer(cd_in, shape, choice.cd_out, platform).tiles;
}

inline std::int64_t read_cycles(const LayerChoice& choice, const PlatformParams& platform) {
  const std::int64_t input_cycles = detail::ceil_div(choice.ip, platform.input_slice_bits);
  return input_cycles * choice.cs;
}

inline AdcProfile adc_profile(AdcType at, int ap, const PlatformParams& platform) {
  if (ap < 1 || ap > 8) throw std::invalid_argument("ADC precision " + std::to_string(ap) + " outside [1, 8]");
  const auto& u = platform.unit_costs;
  AdcProfile a;
  if (at == AdcType::Flash) {
    a.comparator_count = (1 << ap) - 1;
    a.area_mm2 = a.comparator_count * u.comparator.area_mm2 + ap * u.flash_encoder.area_mm2;
    a.energy_per_conversion_pj = a.comparator_count * u.comparator.energy_pj;
    // One comparator settle plus the thermometer-to-binary encoder, which deepens with resolution.
    a.latency_per_conversion_ns = u.comparator.latency_ns + ap * u.flash_encoder.latency_ns;
  } else {
    a.comparator_count = 1;
    a.area_mm2 = u.comparator.area_mm2 + double(1 << ap) * u.sar_capdac.area_mm2 + ap * u.sar_logic.area_mm2;
    a.energy_per_conversion_pj = ap * (u.comparator.energy_pj + u.sar_capdac.energy_pj);
    a.latency_per_conversion_ns = ap * platform.clock_period_ns;
  }
  return a;
}

inline LayerCost layer_cost(int cd_in, const LayerShape& shape, const LayerChoice& choice,
                            const PlatformParams& p) {
  const auto& u = p.unit_costs;
  const AdcProfile adc = adc_profile(choice.at, choice.ap, p);
  const XbarMapping m = map_layer(cd_in, shape, choice.cd_out, p);

  const double X = p.xbar_size;
  const double tiles = double(m.tiles);
  const double slots = tiles * p.xbars_per_tile;  // provisioned crossbars
  const double adcs_per_xbar = double(detail::ceil_div(p.xbar_size, choice.cs));
  const double pes = tiles * p.pes_per_tile();
  const double positions = double(shape.out_positions());
  const double input_cycles = double(detail::ceil_div(choice.ip, p.input_slice_bits));
  const double rounds = double(read_cycles(choice, p));
  const double k2 = double(shape.effective_kernel()) * shape.effective_kernel();

  // Conversions per output position: every used physical column of every row block, per input bit.
  const double conversions = input_cycles * double(m.cols) * double(m.row_blocks);
  // Bytes moved per output position: the ip-bit input window in, 8-bit outputs out.
  const double bytes = double(cd_in) * k2 * choice.ip / 8.0 + double(choice.cd_out);
  // Buffers are provisioned for 8-bit activations regardless of the input precision in use.
  const double stored_bytes = double(shape.in_positions()) * cd_in + positions * choice.cd_out;
  const double hops = 1.0 + detail::ceil_log2(m.tiles);
  const double acc_depth = u.pe_accumulator.latency_ns +
                           u.tile_accumulator.latency_ns * detail::ceil_log2(m.row_blocks) +
                           u.global_accumulator.latency_ns * detail::ceil_log2(m.tiles);

  LayerCost lc;
  lc.tiles = m.tiles;
  lc.xbars = m.xbars;
  lc.read_cycles_per_activation = std::int64_t(rounds);
  lc.macs = shape.out_positions() * m.rows * choice.cd_out;

  auto& b = lc.breakdown;
  auto at = [&](Component c) -> Metrics& { return b[static_cast<int>(c)]; };

  at(Component::XbarArray) = {slots * u.xbar_array.area_mm2,
                              positions * rounds * u.xbar_array.latency_ns,
                              positions * rounds * double(m.xbars) * u.xbar_array.energy_pj};
  at(Component::SwitchMatrix) = {slots * X * u.switch_matrix.area_mm2,
                                 positions * rounds * u.switch_matrix.latency_ns,
                                 positions * rounds * double(m.rows) * double(m.col_blocks) *
                                     u.switch_matrix.energy_pj};
  at(Component::Mux) = {slots * adcs_per_xbar * choice.cs * u.mux.area_mm2,
                        positions * rounds * u.mux.latency_ns,
                        positions * conversions * choice.cs * u.mux.energy_pj};
  at(Component::Adc) = {slots * adcs_per_xbar * adc.area_mm2,
                        positions * rounds * adc.latency_per_conversion_ns,
                        positions * conversions * adc.energy_per_conversion_pj};
  at(Component::Accumulators) = {
      slots * adcs_per_xbar * u.shift_add.area_mm2 + pes * u.pe_accumulator.area_mm2 +
          tiles * u.tile_accumulator.area_mm2 + tiles * u.global_accumulator.area_mm2,
      positions * (rounds * u.shift_add.latency_ns + acc_depth),
      positions * (conversions * u.shift_add.energy_pj +
                   double(m.cols) * (double(m.row_blocks) * u.pe_accumulator.energy_pj +
                                     u.tile_accumulator.energy_pj + u.global_accumulator.energy_pj))};
  at(Component::Buffers) = {
      pes * p.pe_buffer_bytes * u.pe_buffer.area_mm2 + tiles * p.tile_buffer_bytes * u.tile_buffer.area_mm2 +
          stored_bytes * u.global_buffer.area_mm2,
      positions * bytes * (u.pe_buffer.latency_ns + u.tile_buffer.latency_ns + u.global_buffer.latency_ns),
      positions * bytes * (u.pe_buffer.energy_pj + u.tile_buffer.energy_pj + u.global_buffer.energy_pj)};
  at(Component::HTree) = {tiles * p.bus_width_bytes * u.htree.area_mm2,
                          positions * bytes * hops * u.htree.latency_ns,
                          positions * bytes * hops * u.htree.energy_pj};

  for (const auto& e : b) {
    lc.area_mm2 += e.area_mm2;
    lc.delay_ns += e.delay_ns;
    lc.energy_pj += e.energy_pj;
  }
  return lc;
}

inline double psi(const CandidateModel& model) {
  if (model.layers.empty()) throw std::invalid_argument("psi: empty model");
  double cs_sum = 0.0;
  int sar = 0;
  for (const auto& l : model.layers) {
    cs_sum += l.choice.cs;
    sar += l.choice.at == AdcType::Sar ? 1 : 0;
  }
  const double n = double(model.layers.size());
  return (cs_sum / n) * (sar / n);
}

// EDAP in mJ * ms * mm^2 from pJ, ns and mm^2.
inline double edap(double energy_pj, double delay_ns, double area_mm2) {
  return (energy_pj / 1e9) * (delay_ns / 1e6) * area_mm2;
}

inline void finalize_report(CostReport& r) {
  r.edap = edap(r.energy_pj, r.delay_ns, r.area_mm2);
  // ops / pJ = 1e12 ops/J = TOPS/W; ops / ns / mm^2 = 1e9 ops/s/mm^2.
  r.tops_per_watt = r.energy_pj > 0 ? r.op_count / r.energy_pj : 0.0;
  r.tops_per_mm2 = (r.delay_ns > 0 && r.area_mm2 > 0) ? (r.op_count / r.delay_ns) * 1e-3 / r.area_mm2 : 0.0;
}

// Evaluates a model without checking design-space membership.
inline CostReport model_cost_unchecked(const CandidateModel& model, const PlatformParams& platform) {
  if (model.layers.empty()) throw std::invalid_argument("model_cost: empty model");
  CostReport r;
  double macs = 0.0;
  double cs_sum = 0.0;
  int sar = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    LayerCost lc = layer_cost(model.cd_in(l), layer.shape, layer.choice, platform);
    r.area_mm2 += lc.area_mm2;
    r.delay_ns += lc.delay_ns;
    r.energy_pj += lc.energy_pj;
    r.total_tiles += lc.tiles;
    for (std::size_t c = 0; c < kComponentCount; ++c) r.breakdown[c] += lc.breakdown[c];
    macs += double(lc.macs);
    cs_sum += layer.choice.cs;
    sar += layer.choice.at == AdcType::Sar ? 1 : 0;
    r.per_layer.push_back(lc);
  }
  const double n = double(model.layers.size());
  r.mean_cs = cs_sum / n;
  r.sar_fraction = sar / n;
  r.psi = r.mean_cs * r.sar_fraction;
  r.op_count = 2.0 * macs;
  finalize_report(r);
  return r;
}

struct InvalidModel : std::invalid_argument {
  std::vector<Violation> violations;
  explicit InvalidModel(std::vector<Violation> v)
      : std::invalid_argument(describe(v)), violations(std::move(v)) {}
  static std::string describe(const std::vector<Violation>& v) {
    std::string s = "invalid model:";
    for (const auto& x : v)
      s += " [layer " + std::to_string(x.layer) + ", " + x.field + ": " + x.message + "]";
    return s;
  }
};

inline CostReport model_cost(const CandidateModel& model, const DesignSpace& space, const PlatformParams& platform) {
  auto v = validate_candidate(model, space, platform);
  if (!v.empty()) throw InvalidModel(std::move(v));
  return model_cost_unchecked(model, platform);
}

}  // namespace xpert
