#pragma once

// Searchable design space, candidate models and platform configuration.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xpert {

enum class AdcType { Sar, Flash };

inline std::string_view to_string(AdcType t) { return t == AdcType::Sar ? "SAR" : "Flash"; }

inline AdcType adc_type_from_string(std::string_view s) {
  if (s == "SAR" || s == "sar" || s == "S") return AdcType::Sar;
  if (s == "Flash" || s == "flash" || s == "F") return AdcType::Flash;
  throw std::invalid_argument("unknown ADC type '" + std::string(s) + "' (expected SAR or Flash)");
}

struct LayerShape {
  int kernel = 3;
  int in_h = 1;
  int in_w = 1;
  int stride = 1;
  bool is_fc = false;

  // Fully-connected layers are mapped as a 1x1 kernel over a 1x1 extent.
  int effective_kernel() const { return is_fc ? 1 : kernel; }
  int out_h() const { return is_fc ? 1 : (in_h + stride - 1) / stride; }
  int out_w() const { return is_fc ? 1 : (in_w + stride - 1) / stride; }
  std::int64_t out_positions() const { return std::int64_t{out_h()} * out_w(); }
  std::int64_t in_positions() const { return is_fc ? 1 : std::int64_t{in_h} * in_w; }

  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct LayerChoice {
  int cd_out = 1;
  int cs = 1;
  AdcType at = AdcType::Flash;
  int ap = 6;
  int ip = 8;

  friend bool operator==(const LayerChoice&, const LayerChoice&) = default;
};

struct ModelLayer {
  LayerShape shape;
  LayerChoice choice;
  // Input channel count as declared by a model file; inferred from the previous layer when empty.
  std::optional<int> declared_cd_in;

  friend bool operator==(const ModelLayer&, const ModelLayer&) = default;
};

struct CandidateModel {
  int input_channels = 3;
  std::vector<ModelLayer> layers;

  int cd_in(std::size_t l) const { return l == 0 ? input_channels : layers[l - 1].choice.cd_out; }

  friend bool operator==(const CandidateModel&, const CandidateModel&) = default;
};

// Per-use cost of one circuit component. Units: mm^2, pJ, ns.
struct UnitCost {
  double area_mm2 = 0.0;
  double energy_pj = 0.0;
  double latency_ns = 0.0;
  friend bool operator==(const UnitCost&, const UnitCost&) = default;
};

// Calibration table for every circuit component the cost model prices.
//
// Instance conventions:
//   xbar_array          one crossbar array; energy/latency per read round
//   comparator          one comparator; energy per decision, latency = settle time
//   sar_logic           SAR control logic per resolved bit (area)
//   sar_capdac          one unit capacitor (area); energy per SAR step
//   flash_encoder       thermometer encoder per output bit (area, latency)
//   mux                 one column switch; energy per conversion per mux input
//   switch_matrix       one row driver; energy per driven row per round
//   shift_add           one shift-and-add unit, one per ADC
//   *_accumulator       one adder unit; energy per accumulated value
//   *_buffer            one byte of storage; energy/latency per byte moved
//   htree               one hop of one byte of bus width; energy/latency per byte per hop
struct UnitCostTable {
  std::string calibration_id = "default-32nm-v1";
  UnitCost xbar_array, comparator, sar_logic, sar_capdac, flash_encoder, mux, switch_matrix,
      shift_add, pe_accumulator, tile_accumulator, global_accumulator, pe_buffer, tile_buffer,
      global_buffer, htree;

  // Stable iteration order used by the calibration file format.
  template <class F>
  void for_each(F&& f) {
    f("xbar_array", xbar_array);
    f("comparator", comparator);
    f("sar_logic", sar_logic);
    f("sar_capdac", sar_capdac);
    f("flash_encoder", flash_encoder);
    f("mux", mux);
    f("switch_matrix", switch_matrix);
    f("shift_add", shift_add);
    f("pe_accumulator", pe_accumulator);
    f("tile_accumulator", tile_accumulator);
    f("global_accumulator", global_accumulator);
    f("pe_buffer", pe_buffer);
    f("tile_buffer", tile_buffer);
    f("global_buffer", global_buffer);
    f("htree", htree);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<UnitCostTable*>(this)->for_each(
        [&](const char* name, UnitCost& c) { f(name, static_cast<const UnitCost&>(c)); });
  }

  UnitCostTable scaled(double factor) const {
    UnitCostTable out = *this;
    out.for_each([&](const char*, UnitCost& c) {
      c.area_mm2 *= factor;
      c.energy_pj *= factor;
      c.latency_ns *= factor;
    });
    return out;
  }

  friend bool operator==(const UnitCostTable&, const UnitCostTable&) = default;
};

// Placeholder calibration loosely based on 32 nm component figures.
// Only relative trends are meaningful; absolute values are not calibrated.
inline UnitCostTable default_unit_costs() {
  UnitCostTable t;
  t.calibration_id = "default-32nm-v1";
  t.xbar_array = {5.0e-4, 0.5, 1.0};
  t.comparator = {3.0e-5, 0.01, 0.1};
  t.sar_logic = {1.0e-5, 0.0, 0.0};
  t.sar_capdac = {1.0e-6, 0.12, 0.0};
  t.flash_encoder = {5.0e-6, 0.0, 0.05};
  t.mux = {2.0e-7, 0.001, 0.05};
  t.switch_matrix = {2.0e-6, 0.002, 0.1};
  t.shift_add = {2.0e-4, 0.05, 0.1};
  t.pe_accumulator = {3.0e-4, 0.02, 0.2};
  t.tile_accumulator = {1.0e-3, 0.03, 0.3};
  t.global_accumulator = {2.0e-3, 0.05, 0.5};
  t.pe_buffer = {1.6e-6, 0.01, 0.05};
  t.tile_buffer = {1.6e-6, 0.02, 0.1};
  t.global_buffer = {1.6e-6, 0.05, 0.2};
  t.htree = {1.0e-4, 0.02, 0.1};
  return t;
}

struct PlatformParams {
  int xbar_size = 64;
  int xbars_per_tile = 64;
  int xbars_per_pe = 4;
  int device_bits = 4;
  double sigma_over_mu = 0.20;
  double r_on_ohm = 6000.0;
  double on_off_ratio = 150.0;
  int weight_bits = 8;
  int weight_slice_bits = 4;
  int input_slice_bits = 1;
  double clock_period_ns = 1.0;
  int pe_buffer_bytes = 2048;
  int tile_buffer_bytes = 16384;
  int bus_width_bytes = 32;
  UnitCostTable unit_costs = default_unit_costs();

  int weight_slices() const { return weight_bits / weight_slice_bits; }
  int pes_per_tile() const { return (xbars_per_tile + xbars_per_pe - 1) / xbars_per_pe; }

  friend bool operator==(const PlatformParams&, const PlatformParams&) = default;
};

struct Phase1Option {
  int cd_out;
  int cs;
  AdcType at;
  friend bool operator==(const Phase1Option&, const Phase1Option&) = default;
};

struct Phase2Option {
  int ap;
  int ip;
  friend bool operator==(const Phase2Option&, const Phase2Option&) = default;
};

struct DesignSpace {
  int input_channels = 3;
  std::vector<LayerShape> shapes;
  std::vector<std::vector<int>> cd_options_per_layer;
  std::vector<int> cs_options{2, 4, 8, 16, 32};
  std::vector<AdcType> at_options{AdcType::Sar, AdcType::Flash};
  std::vector<int> ap_options{5, 6};
  std::vector<int> ip_options{3, 4, 5, 6, 7, 8};
  // AP/IP held fixed while channel depth, column sharing and ADC type are searched.
  int phase1_ap = 6;
  int phase1_ip = 8;

  std::size_t layer_count() const { return shapes.size(); }
  std::size_t phase1_option_count(std::size_t l) const {
    return cd_options_per_layer.at(l).size() * cs_options.size() * at_options.size();
  }
  std::size_t phase2_option_count() const { return ap_options.size() * ip_options.size(); }

  friend bool operator==(const DesignSpace&, const DesignSpace&) = default;
};

inline void check_layer_index(const DesignSpace& space, std::size_t layer) {
  if (layer >= space.layer_count())
    throw std::out_of_range("layer index " + std::to_string(layer) + " out of range (space has " +
                            std::to_string(space.layer_count()) + " layers)");
}

// Phase1 options are ordered CD-major, then CS, then AT.
inline std::vector<Phase1Option> enumerate_phase1_options(const DesignSpace& space, std::size_t layer) {
  check_layer_index(space, layer);
  std::vector<Phase1Option> out;
  out.reserve(space.phase1_option_count(layer));
  for (int cd : space.cd_options_per_layer[layer])
    for (int cs : space.cs_options)
      for (AdcType at : space.at_options) out.push_back({cd, cs, at});
  return out;
}

// Phase2 options are ordered AP-major, then IP.
inline std::vector<Phase2Option> enumerate_phase2_options(const DesignSpace& space, std::size_t layer) {
  check_layer_index(space, layer);
  std::vector<Phase2Option> out;
  out.reserve(space.phase2_option_count());
  for (int ap : space.ap_options)
    for (int ip : space.ip_options) out.push_back({ap, ip});
  return out;
}

inline int round_to_multiple(double v, int m) {
  int r = static_cast<int>(v / m + 0.5) * m;
  return std::max(r, m);
}

// VGG16 backbone on square inputs (13 conv layers with 3x3 kernels, then one FC classifier).
// Conv layers get width fractions of the base width rounded to a multiple of 8; the FC output is
// pinned to the class count.
inline DesignSpace vgg16_space(int num_classes = 10, int input_size = 32, int input_channels = 3,
                               std::vector<double> width_fractions = {0.25, 0.5, 0.75, 1.0}) {
  static constexpr int kBase[13] = {64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512};
  // A 2x2 max-pool follows these conv indices.
  static constexpr bool kPoolAfter[13] = {false, true,  false, true,  false, false, true,
                                          false, false, true,  false, false, true};
  DesignSpace s;
  s.input_channels = input_channels;
  int spatial = input_size;
  for (int i = 0; i < 13; ++i) {
    s.shapes.push_back(LayerShape{3, spatial, spatial, 1, false});
    std::vector<int> opts;
    for (double f : width_fractions) opts.push_back(round_to_multiple(f * kBase[i], 8));
    s.cd_options_per_layer.push_back(opts);
    if (kPoolAfter[i]) spatial = std::max(1, spatial / 2);
  }
  s.shapes.push_back(LayerShape{1, 1, 1, 1, true});
  s.cd_options_per_layer.push_back({num_classes});
  return s;
}

// Homogeneous VGG16 model with full widths and one peripheral configuration for every layer.
inline CandidateModel vgg16_homogeneous(AdcType at, int cs, int ap = 6, int ip = 8, int num_classes = 10,
                                        int input_size = 32) {
  DesignSpace s = vgg16_space(num_classes, input_size);
  CandidateModel m;
  m.input_channels = s.input_channels;
  for (std::size_t l = 0; l < s.layer_count(); ++l)
    m.layers.push_back({s.shapes[l], LayerChoice{s.cd_options_per_layer[l].back(), cs, at, ap, ip}, {}});
  return m;
}

struct Violation {
  int layer = -1;  // -1 for model/platform-level violations
  std::string field;
  std::string message;
  friend bool operator==(const Violation&, const Violation&) = default;
};

inline std::vector<Violation> validate_platform(const PlatformParams& p) {
  std::vector<Violation> v;
  auto positive = [&](bool ok, const char* field) {
    if (!ok) v.push_back({-1, field, std::string(field) + " must be positive"});
  };
  positive(p.xbar_size > 0, "xbar_size");
  positive(p.xbars_per_tile > 0, "xbars_per_tile");
  positive(p.xbars_per_pe > 0, "xbars_per_pe");
  positive(p.device_bits > 0, "device_bits");
  positive(p.weight_bits > 0, "weight_bits");
  positive(p.weight_slice_bits > 0, "weight_slice_bits");
  positive(p.clock_period_ns > 0, "clock_period_ns");
  positive(p.r_on_ohm > 0, "r_on_ohm");
  positive(p.on_off_ratio > 0, "on_off_ratio");
  positive(p.pe_buffer_bytes > 0, "pe_buffer_bytes");
  positive(p.tile_buffer_bytes > 0, "tile_buffer_bytes");
  positive(p.bus_width_bytes > 0, "bus_width_bytes");
  if (p.sigma_over_mu < 0) v.push_back({-1, "sigma_over_mu", "sigma_over_mu must be >= 0"});
  if (p.weight_bits > 0 && p.weight_slice_bits > 0 && p.weight_bits % p.weight_slice_bits != 0)
    v.push_back({-1, "weight_slice_bits", "weight_bits must be divisible by weight_slice_bits"});
  if (p.input_slice_bits != 1)
    v.push_back({-1, "input_slice_bits", "inputs are bit-serial: input_slice_bits must be 1"});
  p.unit_costs.for_each([&](const char* name, const UnitCost& c) {
    if (c.area_mm2 < 0 || c.energy_pj < 0 || c.latency_ns < 0)
      v.push_back({-1, std::string("unit_costs.") + name, "unit costs must be >= 0"});
  });
  return v;
}

inline std::vector<Violation> validate_space(const DesignSpace& s) {
  std::vector<Violation> v;
  if (s.shapes.empty()) v.push_back({-1, "shapes", "design space has no layers"});
  if (s.cd_options_per_layer.size() != s.shapes.size())
    v.push_back({-1, "cd_options", "need one channel option set per layer"});
  auto nonempty = [&](std::size_t n, const char* f) {
    if (n == 0) v.push_back({-1, f, std::string(f) + " must not be empty"});
  };
  nonempty(s.cs_options.size(), "cs_options");
  nonempty(s.at_options.size(), "at_options");
  nonempty(s.ap_options.size(), "ap_options");
  nonempty(s.ip_options.size(), "ip_options");
  if (s.input_channels < 1) v.push_back({-1, "input_channels", "input_channels must be >= 1"});
  for (std::size_t l = 0; l < s.cd_options_per_layer.size(); ++l) {
    const int li = static_cast<int>(l);
    if (s.cd_options_per_layer[l].empty()) v.push_back({li, "cd_out", "empty channel option set"});
    for (int cd : s.cd_options_per_layer[l])
      if (cd < 1) v.push_back({li, "cd_out", "channel options must be >= 1"});
  }
  for (std::size_t l = 0; l < s.shapes.size(); ++l) {
    const auto& sh = s.shapes[l];
    if (sh.kernel < 1 || sh.in_h < 1 || sh.in_w < 1 || sh.stride < 1)
      v.push_back({static_cast<int>(l), "shape", "kernel, spatial dims and stride must be positive"});
  }
  for (int cs : s.cs_options)
    if (cs < 1) v.push_back({-1, "cs_options", "column sharing must be >= 1"});
  for (int ap : s.ap_options)
    if (ap < 1 || ap > 8) v.push_back({-1, "ap_options", "ADC precision must be in [1, 8]"});
  for (int ip : s.ip_options)
    if (ip < 1 || ip > 8) v.push_back({-1, "ip_options", "input precision must be in [1, 8]"});
  return v;
}

namespace detail {
template <class T>
bool contains(const std::vector<T>& v, const T& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}
}  // namespace detail

// Returns every violation; an empty list means the model is a member of the space and is
// accepted by all cost and search operations.
inline std::vector<Violation> validate_candidate(const CandidateModel& model, const DesignSpace& space,
                                                 const PlatformParams& platform) {
  std::vector<Violation> v = validate_platform(platform);
  for (auto& sv : validate_space(space)) v.push_back(sv);
  if (model.layers.empty()) {
    v.push_back({-1, "layers", "model has no layers"});
    return v;
  }
  if (model.input_channels < 1) v.push_back({-1, "input_channels", "input_channels must be >= 1"});
  if (model.layers.size() != space.layer_count())
    v.push_back({-1, "layers",
                 "model has " + std::to_string(model.layers.size()) + " layers, space has " +
                     std::to_string(space.layer_count())});
  if (model.input_channels != space.input_channels)
    v.push_back({-1, "input_channels", "model input_channels differs from the design space"});

  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const int li = static_cast<int>(l);
    const auto& layer = model.layers[l];
    const auto& c = layer.choice;
    if (layer.declared_cd_in && *layer.declared_cd_in != model.cd_in(l))
      v.push_back({li, "chaining",
                   "declared cd_in " + std::to_string(*layer.declared_cd_in) + " but previous layer outputs " +
                       std::to_string(model.cd_in(l))});
    if (c.cd_out < 1) v.push_back({li, "cd_out", "cd_out must be >= 1"});
    if (c.cs < 1) v.push_back({li, "cs", "cs must be >= 1"});
    if (c.ap < 1 || c.ap > 8)
      v.push_back({li, "ap", "ADC precision " + std::to_string(c.ap) + " outside [1, 8]"});
    else if (!detail::contains(space.ap_options, c.ap) && c.ap != space.phase1_ap)
      v.push_back({li, "ap", "ADC precision " + std::to_string(c.ap) + " not in the design space"});
    if (c.ip < 1 || c.ip > 8)
      v.push_back({li, "ip", "input precision " + std::to_string(c.ip) + " outside [1, 8]"});
    else if (!detail::contains(space.ip_options, c.ip) && c.ip != space.phase1_ip)
      v.push_back({li, "ip", "input precision " + std::to_string(c.ip) + " not in the design space"});

    if (l >= space.layer_count()) continue;
    if (!(layer.shape == space.shapes[l])) v.push_back({li, "shape", "layer shape differs from the design space"});
    if (c.cd_out >= 1 && !detail::contains(space.cd_options_per_layer[l], c.cd_out))
      v.push_back({li, "cd_out", "cd_out " + std::to_string(c.cd_out) + " not in the design space"});
    if (c.cs >= 1 && !detail::contains(space.cs_options, c.cs))
      v.push_back({li, "cs", "cs " + std::to_string(c.cs) + " not in the design space"});
    if (!detail::contains(space.at_options, c.at))
      v.push_back({li, "at", std::string("ADC type ") + std::string(to_string(c.at)) + " not in the design space"});
  }
  return v;
}

// Builds the discrete model selected by one Phase1 option index per layer.
inline CandidateModel model_from_phase1(const DesignSpace& space, const std::vector<std::size_t>& option_index) {
  CandidateModel m;
  m.input_channels = space.input_channels;
  for (std::size_t l = 0; l < space.layer_count(); ++l) {
    auto opts = enumerate_phase1_options(space, l);
    const auto& o = opts.at(option_index.at(l));
    m.layers.push_back({space.shapes[l], LayerChoice{o.cd_out, o.cs, o.at, space.phase1_ap, space.phase1_ip}, {}});
  }
  return m;
}

}  // namespace xpert
