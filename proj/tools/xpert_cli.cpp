// xpert: command-line driver for cost evaluation, the two search phases, sweeps and fixture training.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "xpert/xpert.hpp"

namespace fs = std::filesystem;
using namespace xpert;

namespace {

enum Exit : int { kOk = 0, kConfigError = 2, kEmptyPool = 3, kNumericFailure = 4, kRuntimeError = 1 };

struct Options {
  std::string config;
  std::string model;
  std::string out_dir = "runs/out";
  std::string phase1_dir;
  std::string net;
  std::string axis;
  std::vector<double> values;
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

Config load(const Options& o) {
  Config c = load_config(o.config);
  if (o.seed) c.search.seed = *o.seed;
  return c;
}

CandidateModel model_for(const Options& o) {
  if (!o.model.empty()) return load_model_json(o.model);
  if (!o.phase1_dir.empty()) return load_model_json((fs::path(o.phase1_dir) / "model.json").string());
  throw ConfigError("a model is required: pass --model or --phase1-dir");
}

int cmd_eval(const Options& o) {
  const Config cfg = load(o);
  const CandidateModel model = model_for(o);
  const CostReport report = model_cost(model, cfg.space, cfg.platform);
  RunDir rd(o.out_dir, "eval", cfg, cfg.search.seed);
  rd.manifest()["model"] = o.model;
  write_model_outputs(rd, model, cfg.platform);
  rd.finish("ok");
  std::printf("area %s mm2, delay %s ns, energy %s pJ, EDAP %s mJ*ms*mm2, psi %s\n", fmt_num(report.area_mm2).c_str(),
              fmt_num(report.delay_ns).c_str(), fmt_num(report.energy_pj).c_str(), fmt_num(report.edap).c_str(),
              fmt_num(report.psi).c_str());
  return kOk;
}

int cmd_phase1(const Options& o) {
  const Config cfg = load(o);
  const Phase1Outcome out = run_phase1(cfg, o.out_dir);
  const auto& sel = out.result.pool.entries[out.selected];
  std::printf("pool %zu (admitted %zu); selected %s at step %d: area %s mm2, delay %s ns -> %s\n",
              out.result.pool.entries.size(), out.result.pool.admitted_count(),
              candidate_id(sel.option_index).c_str(), sel.step, fmt_num(sel.report.area_mm2).c_str(),
              fmt_num(sel.report.delay_ns).c_str(), o.out_dir.c_str());
  return kOk;
}

int cmd_phase2(const Options& o) {
  if (o.phase1_dir.empty() || o.net.empty()) throw ConfigError("phase2 needs --phase1-dir and --net");
  const Config cfg = load(o);
  const Phase2Result r = run_phase2(cfg, o.phase1_dir, o.net, o.out_dir);
  std::string a;
  for (const auto& p : r.assignment) a += " (" + std::to_string(p.ap) + "," + std::to_string(p.ip) + ")";
  std::printf("assignment (ap,ip):%s; delay %s ns -> %s\n", a.c_str(), fmt_num(r.final_report.delay_ns).c_str(),
              o.out_dir.c_str());
  return kOk;
}

int cmd_train_fixture(const Options& o) {
  const Config cfg = load(o);
  const CandidateModel model = model_for(o);
  if (o.net.empty()) throw ConfigError("train-fixture needs --net (output weights path)");
  const auto result = train_reference(model, cfg.fixture);
  nnsim::save_refnet(o.net, result.net);
  std::printf("trained %zu compute layers: final loss %s, train accuracy %s -> %s\n", result.net.compute_layer_count(),
              fmt_num(result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()).c_str(),
              fmt_num(result.train_accuracy).c_str(), o.net.c_str());
  return kOk;
}

// One point of a sweep: a Phase1 search (area axis) or a cost evaluation (crossbar-size axis).
std::string sweep_point(const Options& o, const Config& base, const CandidateModel* model, double value,
                        const fs::path& dir) {
  try {
    Config cfg = base;
    if (o.axis == "area_constraint") {
      cfg.search.area_constraint_mm2 = value;
      if (auto e = validate_search_config(cfg.search); !e.empty()) throw ConfigError(e.front());
      const Phase1Outcome out = run_phase1(cfg, dir);
      return sweep_row(value, out.result.pool.entries[out.selected].report);
    }
    cfg.platform.xbar_size = int(value);
    if (double(cfg.platform.xbar_size) != value) throw ConfigError("xbar_size must be an integer");
    const CostReport r = model_cost(*model, cfg.space, cfg.platform);
    RunDir rd(dir, "eval", cfg, cfg.search.seed);
    write_model_outputs(rd, *model, cfg.platform);
    rd.finish("ok");
    return sweep_row(value, r);
  } catch (const NoAdmittedCandidates& e) {
    return sweep_error_row(value, "empty_pool", e.what());
  } catch (const NumericFailure& e) {
    return sweep_error_row(value, "numeric_failure", e.what());
  } catch (const std::exception& e) {
    return sweep_error_row(value, "error", e.what());
  }
}

int cmd_sweep(const Options& o) {
  if (o.axis != "area_constraint" && o.axis != "xbar_size")
    throw ConfigError("--axis must be area_constraint or xbar_size");
  if (o.values.empty()) throw ConfigError("--values needs at least one value");
  if (o.workers < 1) throw ConfigError("--workers must be >= 1");
  const Config cfg = load(o);
  std::optional<CandidateModel> model;
  if (o.axis == "xbar_size") model = model_for(o);

  fs::create_directories(o.out_dir);
  std::vector<std::string> rows(o.values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < o.values.size();)
      rows[i] = sweep_point(o, cfg, model ? &*model : nullptr, o.values[i], fs::path(o.out_dir) / ("point_" + std::to_string(i)));
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(o.workers, int(o.values.size()));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::string csv = kSweepHeader;
  int failures = 0;
  for (const auto& r : rows) {
    csv += r;
    failures += r.find(",ok,") == std::string::npos;
  }
  write_file(fs::path(o.out_dir) / "sweep.csv", csv);
  std::fputs(csv.c_str(), stdout);
  if (failures) std::fprintf(stderr, "%d of %zu sweep points failed\n", failures, rows.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crossbar accelerator cost model and hardware/architecture co-search"};
  app.set_version_flag("--version", XPERT_VERSION);
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override search.seed");
    sub->add_option("--out-dir", o.out_dir, "Run directory to create");
  };
  auto* eval = app.add_subcommand("eval", "Evaluate the cost of a fixed model");
  common(eval);
  eval->add_option("--model", o.model, "Model JSON")->required()->check(CLI::ExistingFile);

  auto* p1 = app.add_subcommand("phase1", "Area-constrained CD/CS/ADC-type search and HD ranking");
  common(p1);

  auto* p2 = app.add_subcommand("phase2", "Per-layer ADC/input precision search on a trained network");
  common(p2);
  p2->add_option("--phase1-dir", o.phase1_dir, "Phase1 run directory")->required()->check(CLI::ExistingDirectory);
  p2->add_option("--net", o.net, "Reference network weights")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Run one search or evaluation per value of an axis");
  common(sweep);
  sweep->add_option("--axis", o.axis, "area_constraint or xbar_size")->required();
  sweep->add_option("--values", o.values, "Axis values")->required()->delimiter(',');
  sweep->add_option("--workers", o.workers, "Parallel sweep points");
  sweep->add_option("--model", o.model, "Model JSON (xbar_size axis)");

  auto* train = app.add_subcommand("train-fixture", "Train a reference network on the synthetic fixture");
  common(train);
  train->add_option("--model", o.model, "Model JSON");
  train->add_option("--phase1-dir", o.phase1_dir, "Phase1 run directory (uses its model.json)");
  train->add_option("--net", o.net, "Output weights path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*eval) return cmd_eval(o);
    if (*p1) return cmd_phase1(o);
    if (*p2) return cmd_phase2(o);
    if (*sweep) return cmd_sweep(o);
    if (*train) return cmd_train_fixture(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidModel& e) {
    std::cerr << "invalid model: " << e.what() << "\n";
    return kConfigError;
  } catch (const NoAdmittedCandidates& e) {
    std::cerr << "empty candidate pool: " << e.what() << "\n";
    return kEmptyPool;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const nnsim::TrainingDiverged& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
