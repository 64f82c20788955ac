#pragma once

// JSON configuration, candidate-model JSON and calibration CSV readers/writers.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xpert/designspace.hpp"
#include "xpert/nnsim/fixture.hpp"
#include "xpert/nnsim/train.hpp"
#include "xpert/search.hpp"

namespace xpert {

using json = nlohmann::ordered_json;

inline constexpr const char* kCalibrationEnv = "XPERT_CALIBRATION";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Synthetic data and the desk-scale reference network used by Phase2 and HD ranking.
struct FixtureConfig {
  nnsim::BlobSpec blobs{1024, 64, 4, 0.5, 1.0, 7};
  double train_fraction = 0.5;
  nnsim::TrainOptions train{};
  double adapt_fraction = 0.25;  // share of the training split used for BN adaptation
  int adapt_batch_size = 16;
  double image_noise = 0.5;  // used when the model's first layer is a convolution

  friend bool operator==(const FixtureConfig& a, const FixtureConfig& b) {
    auto key = [](const FixtureConfig& f) {
      return std::tie(f.blobs.samples, f.blobs.features, f.blobs.classes, f.blobs.separation, f.blobs.spread,
                      f.blobs.seed, f.train_fraction, f.train.epochs, f.train.lr, f.train.batch_size, f.train.seed,
                      f.train.bn_momentum, f.adapt_fraction, f.adapt_batch_size, f.image_noise);
    };
    return key(a) == key(b);
  }
};

struct Config {
  PlatformParams platform;
  DesignSpace space;
  SearchConfig search;
  FixtureConfig fixture;
  std::string calibration_path;  // empty when built-in unit costs are used
};

namespace detail {

inline std::string type_name(const json& j) { return j.type_name(); }

// Typed field access with path-qualified diagnostics.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + ": expected an object, got " + type_name(node_));
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return node_.contains(key); }
  const json& at(const std::string& key) const { return node_.at(key); }

  template <class T>
  void get(const std::string& key, T& out) const {
    if (!node_.contains(key)) return;
    out = convert<T>(node_.at(key), where(key));
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean, got " + type_name(v));
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer, got " + type_name(v));
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<long long>() < 0) throw ConfigError(where + ": expected a non-negative integer");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + ": expected a number, got " + type_name(v));
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + ": expected a string, got " + type_name(v));
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, AdcType>) {
      const auto s = convert<std::string>(v, where);
      try {
        return adc_type_from_string(s);
      } catch (const std::exception&) {
        throw ConfigError(where + ": unknown ADC type '" + s + "' (expected SAR or Flash)");
      }
    } else {
      if (!v.is_array()) throw ConfigError(where + ": expected an array, got " + type_name(v));
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

  void reject_unknown(std::initializer_list<const char*> known) const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok |= it.key() == k;
      if (!ok) throw ConfigError(where(it.key()) + ": unknown field");
    }
  }

 private:
  const json& node_;
  std::string path_;
};

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

}  // namespace detail

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ":" + std::to_string(detail::line_of_offset(text, e.byte)) + ": JSON parse error: " +
                      e.what());
  }
}

// Shortest round-trip decimal form; locale independent.
inline std::string fmt_num(double v) {
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// ---- calibration CSV ------------------------------------------------------------------------

// Format:
//   # calibration_id: <id>
//   # units: area_mm2, energy_pJ, latency_ns
//   component,area_mm2,energy_pJ,latency_ns
//   xbar_array,5e-4,0.5,1.0
//   ...
// Every component of UnitCostTable must appear exactly once.
inline UnitCostTable parse_calibration_csv(const std::string& text, const std::string& origin) {
  UnitCostTable table;
  table.calibration_id.clear();
  std::vector<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  auto fail = [&](const std::string& msg) { throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg); };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      if (body.rfind("calibration_id:", 0) == 0) table.calibration_id = trim(body.substr(15));
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
    if (!header) {
      if (cells != std::vector<std::string>{"component", "area_mm2", "energy_pJ", "latency_ns"})
        fail("expected header 'component,area_mm2,energy_pJ,latency_ns'");
      header = true;
      continue;
    }
    if (cells.size() != 4) fail("expected 4 columns, got " + std::to_string(cells.size()));
    UnitCost cost;
    double* dst[3] = {&cost.area_mm2, &cost.energy_pj, &cost.latency_ns};
    for (int k = 0; k < 3; ++k) {
      std::size_t used = 0;
      try {
        *dst[k] = std::stod(cells[std::size_t(k + 1)], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells[std::size_t(k + 1)].size() || !std::isfinite(*dst[k]) || *dst[k] < 0)
        fail("component '" + cells[0] + "': invalid non-negative number '" + cells[std::size_t(k + 1)] + "'");
    }
    bool found = false;
    table.for_each([&](const char* name, UnitCost& c) {
      if (cells[0] == name) {
        c = cost;
        found = true;
      }
    });
    if (!found) fail("unknown component '" + cells[0] + "'");
    for (const auto& s : seen)
      if (s == cells[0]) fail("duplicate component '" + cells[0] + "'");
    seen.push_back(cells[0]);
  }
  if (!header) throw ConfigError(origin + ": missing CSV header");
  table.for_each([&](const char* name, UnitCost&) {
    bool ok = false;
    for (const auto& s : seen) ok |= s == name;
    if (!ok) throw ConfigError(origin + ": missing component '" + std::string(name) + "'");
  });
  if (table.calibration_id.empty()) throw ConfigError(origin + ": missing '# calibration_id:' line");
  return table;
}

inline UnitCostTable load_calibration_csv(const std::string& path) {
  return parse_calibration_csv(read_text_file(path), path);
}

inline std::string format_calibration_csv(const UnitCostTable& table) {
  std::ostringstream os;
  os << "# calibration_id: " << table.calibration_id << "\n# units: area_mm2, energy_pJ, latency_ns\n"
     << "component,area_mm2,energy_pJ,latency_ns\n";
  table.for_each([&](const char* name, const UnitCost& c) {
    os << name << ',' << fmt_num(c.area_mm2) << ',' << fmt_num(c.energy_pj) << ',' << fmt_num(c.latency_ns) << '\n';
  });
  return os.str();
}

// ---- model JSON -----------------------------------------------------------------------------

inline json layer_to_json(const ModelLayer& l) {
  json j;
  j["kernel"] = l.shape.kernel;
  j["in_h"] = l.shape.in_h;
  j["in_w"] = l.shape.in_w;
  j["stride"] = l.shape.stride;
  j["fc"] = l.shape.is_fc;
  if (l.declared_cd_in) j["cd_in"] = *l.declared_cd_in;
  j["cd_out"] = l.choice.cd_out;
  j["cs"] = l.choice.cs;
  j["at"] = std::string(to_string(l.choice.at));
  j["ap"] = l.choice.ap;
  j["ip"] = l.choice.ip;
  return j;
}

inline json model_to_json(const CandidateModel& m) {
  json j;
  j["input_channels"] = m.input_channels;
  j["layers"] = json::array();
  for (const auto& l : m.layers) j["layers"].push_back(layer_to_json(l));
  return j;
}

inline CandidateModel model_from_json(const json& j) {
  detail::Reader r(j, "");
  r.reject_unknown({"input_channels", "layers"});
  CandidateModel m;
  r.get("input_channels", m.input_channels);
  if (!r.has("layers") || !r.at("layers").is_array()) throw ConfigError("layers: expected an array of layer objects");
  const json& layers = r.at("layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    detail::Reader lr(layers[i], "layers[" + std::to_string(i) + "]");
    lr.reject_unknown({"kernel", "in_h", "in_w", "stride", "fc", "cd_in", "cd_out", "cs", "at", "ap", "ip"});
    for (const char* required : {"cd_out", "cs", "at", "ap", "ip"})
      if (!lr.has(required)) throw ConfigError(lr.where(required) + ": missing required field");
    ModelLayer l;
    lr.get("kernel", l.shape.kernel);
    lr.get("in_h", l.shape.in_h);
    lr.get("in_w", l.shape.in_w);
    lr.get("stride", l.shape.stride);
    lr.get("fc", l.shape.is_fc);
    if (lr.has("cd_in")) {
      int v = 0;
      lr.get("cd_in", v);
      l.declared_cd_in = v;
    }
    lr.get("cd_out", l.choice.cd_out);
    lr.get("cs", l.choice.cs);
    lr.get("at", l.choice.at);
    lr.get("ap", l.choice.ap);
    lr.get("ip", l.choice.ip);
    m.layers.push_back(l);
  }
  return m;
}

inline CandidateModel load_model_json(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return model_from_json(parse_json_text(text, path));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

// ---- experiment config ----------------------------------------------------------------------

inline json config_to_json(const Config& c) {
  json j;
  json& p = j["platform"];
  const auto& pp = c.platform;
  p["xbar_size"] = pp.xbar_size;
  p["xbars_per_tile"] = pp.xbars_per_tile;
  p["xbars_per_pe"] = pp.xbars_per_pe;
  p["device_bits"] = pp.device_bits;
  p["sigma_over_mu"] = pp.sigma_over_mu;
  p["r_on_ohm"] = pp.r_on_ohm;
  p["on_off_ratio"] = pp.on_off_ratio;
  p["weight_bits"] = pp.weight_bits;
  p["weight_slice_bits"] = pp.weight_slice_bits;
  p["input_slice_bits"] = pp.input_slice_bits;
  p["clock_period_ns"] = pp.clock_period_ns;
  p["pe_buffer_bytes"] = pp.pe_buffer_bytes;
  p["tile_buffer_bytes"] = pp.tile_buffer_bytes;
  p["bus_width_bytes"] = pp.bus_width_bytes;
  p["calibration_id"] = pp.unit_costs.calibration_id;
  json& uc = p["unit_costs"];
  pp.unit_costs.for_each([&](const char* name, const UnitCost& u) {
    uc[name] = json{{"area_mm2", u.area_mm2}, {"energy_pJ", u.energy_pj}, {"latency_ns", u.latency_ns}};
  });

  json& s = j["design_space"];
  s["input_channels"] = c.space.input_channels;
  s["layers"] = json::array();
  for (std::size_t l = 0; l < c.space.layer_count(); ++l) {
    const auto& sh = c.space.shapes[l];
    s["layers"].push_back(json{{"kernel", sh.kernel},
                               {"in_h", sh.in_h},
                               {"in_w", sh.in_w},
                               {"stride", sh.stride},
                               {"fc", sh.is_fc},
                               {"cd_options", c.space.cd_options_per_layer[l]}});
  }
  s["cs_options"] = c.space.cs_options;
  s["at_options"] = json::array();
  for (auto a : c.space.at_options) s["at_options"].push_back(std::string(to_string(a)));
  s["ap_options"] = c.space.ap_options;
  s["ip_options"] = c.space.ip_options;
  s["phase1_ap"] = c.space.phase1_ap;
  s["phase1_ip"] = c.space.phase1_ip;

  json& q = j["search"];
  const auto& sc = c.search;
  q["area_constraint_mm2"] = sc.area_constraint_mm2;
  q["n1_steps"] = sc.n1_steps;
  q["n2_steps"] = sc.n2_steps;
  q["lambda1"] = sc.lambda1;
  q["lambda2"] = sc.lambda2;
  q["lr1"] = sc.lr1;
  q["lr2"] = sc.lr2;
  q["seed"] = sc.seed;
  q["admit_margin"] = sc.admit_margin;
  q["area_error_scale"] = sc.area_error_scale;
  q["temperature"] = sc.temperature;
  q["final_temperature"] = sc.final_temperature;
  q["init_logit_noise"] = sc.init_logit_noise;
  q["hd_batch"] = sc.hd_batch;
  q["bn_momentum"] = sc.bn_momentum;

  json& f = j["fixture"];
  const auto& fx = c.fixture;
  f["samples"] = fx.blobs.samples;
  f["features"] = fx.blobs.features;
  f["classes"] = fx.blobs.classes;
  f["separation"] = fx.blobs.separation;
  f["spread"] = fx.blobs.spread;
  f["data_seed"] = fx.blobs.seed;
  f["train_fraction"] = fx.train_fraction;
  f["epochs"] = fx.train.epochs;
  f["lr"] = fx.train.lr;
  f["batch_size"] = fx.train.batch_size;
  f["train_seed"] = fx.train.seed;
  f["bn_momentum"] = fx.train.bn_momentum;
  f["adapt_fraction"] = fx.adapt_fraction;
  f["adapt_batch_size"] = fx.adapt_batch_size;
  f["image_noise"] = fx.image_noise;
  return j;
}

namespace detail {

inline void read_platform(const json& node, PlatformParams& p, std::string& calibration_file) {
  Reader r(node, "platform");
  r.reject_unknown({"xbar_size", "xbars_per_tile", "xbars_per_pe", "device_bits", "sigma_over_mu", "r_on_ohm",
                    "on_off_ratio", "weight_bits", "weight_slice_bits", "input_slice_bits", "clock_period_ns",
                    "pe_buffer_bytes", "tile_buffer_bytes", "bus_width_bytes", "calibration_file", "calibration_id",
                    "unit_costs"});
  r.get("xbar_size", p.xbar_size);
  r.get("xbars_per_tile", p.xbars_per_tile);
  r.get("xbars_per_pe", p.xbars_per_pe);
  r.get("device_bits", p.device_bits);
  r.get("sigma_over_mu", p.sigma_over_mu);
  r.get("r_on_ohm", p.r_on_ohm);
  r.get("on_off_ratio", p.on_off_ratio);
  r.get("weight_bits", p.weight_bits);
  r.get("weight_slice_bits", p.weight_slice_bits);
  r.get("input_slice_bits", p.input_slice_bits);
  r.get("clock_period_ns", p.clock_period_ns);
  r.get("pe_buffer_bytes", p.pe_buffer_bytes);
  r.get("tile_buffer_bytes", p.tile_buffer_bytes);
  r.get("bus_width_bytes", p.bus_width_bytes);
  r.get("calibration_file", calibration_file);
  if (r.has("unit_costs")) {
    if (!calibration_file.empty())
      throw ConfigError("platform: give either calibration_file or unit_costs, not both");
    Reader ur(r.at("unit_costs"), "platform.unit_costs");
    p.unit_costs.for_each([&](const char* name, UnitCost& u) {
      if (!ur.has(name)) throw ConfigError(ur.where(name) + ": missing component");
      Reader cr(ur.at(name), ur.where(name));
      cr.reject_unknown({"area_mm2", "energy_pJ", "latency_ns"});
      cr.get("area_mm2", u.area_mm2);
      cr.get("energy_pJ", u.energy_pj);
      cr.get("latency_ns", u.latency_ns);
    });
    r.get("calibration_id", p.unit_costs.calibration_id);
  }
}

inline void read_space(const json& node, DesignSpace& s) {
  Reader r(node, "design_space");
  r.reject_unknown({"preset", "num_classes", "input_size", "input_channels", "width_fractions", "layers", "cs_options",
                    "at_options", "ap_options", "ip_options", "phase1_ap", "phase1_ip"});
  std::string preset;
  r.get("preset", preset);
  if (!preset.empty()) {
    if (preset != "vgg16") throw ConfigError(r.where("preset") + ": unknown preset '" + preset + "' (expected vgg16)");
    if (r.has("layers")) throw ConfigError("design_space: give either preset or layers, not both");
    int classes = 10, size = 32, channels = 3;
    std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
    r.get("num_classes", classes);
    r.get("input_size", size);
    r.get("input_channels", channels);
    r.get("width_fractions", fractions);
    s = vgg16_space(classes, size, channels, fractions);
  } else {
    for (const char* k : {"num_classes", "input_size", "width_fractions"})
      if (r.has(k)) throw ConfigError(r.where(k) + ": only valid with a preset");
    if (!r.has("layers")) throw ConfigError("design_space: needs either preset or layers");
    r.get("input_channels", s.input_channels);
    const json& layers = r.at("layers");
    if (!layers.is_array()) throw ConfigError("design_space.layers: expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Reader lr(layers[i], "design_space.layers[" + std::to_string(i) + "]");
      lr.reject_unknown({"kernel", "in_h", "in_w", "stride", "fc", "cd_options"});
      if (!lr.has("cd_options")) throw ConfigError(lr.where("cd_options") + ": missing required field");
      LayerShape sh;
      lr.get("kernel", sh.kernel);
      lr.get("in_h", sh.in_h);
      lr.get("in_w", sh.in_w);
      lr.get("stride", sh.stride);
      lr.get("fc", sh.is_fc);
      std::vector<int> cd;
      lr.get("cd_options", cd);
      s.shapes.push_back(sh);
      s.cd_options_per_layer.push_back(cd);
    }
  }
  r.get("cs_options", s.cs_options);
  r.get("at_options", s.at_options);
  r.get("ap_options", s.ap_options);
  r.get("ip_options", s.ip_options);
  r.get("phase1_ap", s.phase1_ap);
  r.get("phase1_ip", s.phase1_ip);
}

inline void read_search(const json& node, SearchConfig& c) {
  Reader r(node, "search");
  r.reject_unknown({"area_constraint_mm2", "n1_steps", "n2_steps", "lambda1", "lambda2", "lr1", "lr2", "seed",
                    "admit_margin", "area_error_scale", "temperature", "final_temperature", "init_logit_noise",
                    "hd_batch", "bn_momentum"});
  r.get("area_constraint_mm2", c.area_constraint_mm2);
  r.get("n1_steps", c.n1_steps);
  r.get("n2_steps", c.n2_steps);
  r.get("lambda1", c.lambda1);
  r.get("lambda2", c.lambda2);
  r.get("lr1", c.lr1);
  r.get("lr2", c.lr2);
  r.get("seed", c.seed);
  r.get("admit_margin", c.admit_margin);
  r.get("area_error_scale", c.area_error_scale);
  r.get("temperature", c.temperature);
  r.get("final_temperature", c.final_temperature);
  r.get("init_logit_noise", c.init_logit_noise);
  r.get("hd_batch", c.hd_batch);
  r.get("bn_momentum", c.bn_momentum);
}

inline void read_fixture(const json& node, FixtureConfig& f) {
  Reader r(node, "fixture");
  r.reject_unknown({"samples", "features", "classes", "separation", "spread", "data_seed", "train_fraction", "epochs",
                    "lr", "batch_size", "train_seed", "bn_momentum", "adapt_fraction", "adapt_batch_size",
                    "image_noise"});
  r.get("samples", f.blobs.samples);
  r.get("features", f.blobs.features);
  r.get("classes", f.blobs.classes);
  r.get("separation", f.blobs.separation);
  r.get("spread", f.blobs.spread);
  r.get("data_seed", f.blobs.seed);
  r.get("train_fraction", f.train_fraction);
  r.get("epochs", f.train.epochs);
  r.get("lr", f.train.lr);
  r.get("batch_size", f.train.batch_size);
  r.get("train_seed", f.train.seed);
  r.get("bn_momentum", f.train.bn_momentum);
  r.get("adapt_fraction", f.adapt_fraction);
  r.get("adapt_batch_size", f.adapt_batch_size);
  r.get("image_noise", f.image_noise);
}

}  // namespace detail

inline std::vector<std::string> validate_fixture(const FixtureConfig& f) {
  std::vector<std::string> e;
  if (f.blobs.samples < 4) e.push_back("fixture.samples must be >= 4");
  if (f.blobs.features < 1) e.push_back("fixture.features must be >= 1");
  if (f.blobs.classes < 2) e.push_back("fixture.classes must be >= 2");
  if (!(f.train_fraction > 0 && f.train_fraction < 1)) e.push_back("fixture.train_fraction must be in (0, 1)");
  if (!(f.adapt_fraction > 0 && f.adapt_fraction <= 1)) e.push_back("fixture.adapt_fraction must be in (0, 1]");
  if (f.adapt_batch_size < 2) e.push_back("fixture.adapt_batch_size must be >= 2");
  if (f.train.epochs < 0) e.push_back("fixture.epochs must be >= 0");
  if (f.train.lr < 0) e.push_back("fixture.lr must be >= 0");
  if (f.train.batch_size < 1) e.push_back("fixture.batch_size must be >= 1");
  return e;
}

// Parses a config document. Relative calibration paths resolve against `base_dir`. Without a
// calibration_file or inline unit_costs, the XPERT_CALIBRATION environment variable is consulted,
// then the built-in table.
inline Config config_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  Config c;
  detail::Reader root(j, "");
  root.reject_unknown({"platform", "design_space", "search", "fixture"});
  std::string calibration_file;
  bool inline_costs = false;
  if (root.has("platform")) {
    detail::read_platform(root.at("platform"), c.platform, calibration_file);
    inline_costs = root.at("platform").contains("unit_costs");
  }
  if (!root.has("design_space")) throw ConfigError("design_space: missing required section");
  detail::read_space(root.at("design_space"), c.space);
  if (root.has("search")) detail::read_search(root.at("search"), c.search);
  if (root.has("fixture")) detail::read_fixture(root.at("fixture"), c.fixture);

  if (calibration_file.empty() && !inline_costs)
    if (const char* env = std::getenv(kCalibrationEnv); env && *env) calibration_file = env;
  if (!calibration_file.empty()) {
    std::filesystem::path path(calibration_file);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    c.calibration_path = path.string();
    c.platform.unit_costs = load_calibration_csv(c.calibration_path);
  }

  std::vector<std::string> errors;
  for (const auto& v : validate_platform(c.platform)) errors.push_back("platform." + v.field + ": " + v.message);
  for (const auto& v : validate_space(c.space))
    errors.push_back("design_space" + (v.layer >= 0 ? ".layers[" + std::to_string(v.layer) + "]" : std::string{}) +
                     "." + v.field + ": " + v.message);
  for (auto& e : validate_search_config(c.search)) errors.push_back(e);
  for (auto& e : validate_fixture(c.fixture)) errors.push_back(e);
  if (!errors.empty()) {
    std::string msg = errors.front();
    for (std::size_t i = 1; i < errors.size(); ++i) msg += "\n" + errors[i];
    throw ConfigError(msg);
  }
  return c;
}

inline Config load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  const json j = parse_json_text(text, path);
  try {
    return config_from_json(j, std::filesystem::path(path).parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace xpert
