#pragma once

// End-to-end runs that write run directories: Phase1 search + HD ranking, Phase2 precision
// search, and reference-network training on the synthetic fixture.

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "xpert/config.hpp"
#include "xpert/costmodel.hpp"
#include "xpert/nnsim/fixture.hpp"
#include "xpert/nnsim/refnet.hpp"
#include "xpert/nnsim/train.hpp"
#include "xpert/report_io.hpp"
#include "xpert/rundir.hpp"
#include "xpert/search.hpp"

namespace xpert {

struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FixtureData {
  nnsim::TensorBatch train;
  nnsim::TensorBatch test;
  std::vector<nnsim::TensorBatch> adapt;
};

// Synthetic data shaped for `model`: Gaussian blobs when the first layer is fully connected,
// class-template images otherwise. The class count is the last layer's width.
inline FixtureData make_fixture_data(const FixtureConfig& f, const CandidateModel& model) {
  if (model.layers.empty()) throw std::invalid_argument("fixture: empty model");
  const int classes = model.layers.back().choice.cd_out;
  nnsim::TensorBatch all;
  if (model.layers.front().shape.is_fc) {
    nnsim::BlobSpec b = f.blobs;
    b.features = model.input_channels;
    b.classes = classes;
    all = nnsim::make_blobs(b);
  } else {
    const auto& s = model.layers.front().shape;
    if (s.in_h != s.in_w) throw std::invalid_argument("fixture: image inputs must be square");
    all = nnsim::make_images({f.blobs.samples, model.input_channels, s.in_h, classes, f.image_noise, f.blobs.seed});
  }
  const int n_train = std::max(2, int(std::lround(f.train_fraction * all.n())));
  FixtureData d{all.slice(0, n_train), all.slice(n_train, all.n() - n_train), {}};
  const int n_adapt = std::max(f.adapt_batch_size, int(std::lround(f.adapt_fraction * n_train)));
  for (int start = 0; start + f.adapt_batch_size <= std::min(n_adapt, n_train); start += f.adapt_batch_size)
    d.adapt.push_back(d.train.slice(start, f.adapt_batch_size));
  return d;
}

inline nnsim::TensorBatch hd_batch_for(const FixtureConfig& f, const CandidateModel& model, int size) {
  FixtureConfig g = f;
  g.blobs.samples = std::max(size * 2, 4);
  g.train_fraction = 0.5;
  return make_fixture_data(g, model).train.slice(0, size);
}

inline nnsim::TrainResult train_reference(const CandidateModel& model, const FixtureConfig& f) {
  const FixtureData d = make_fixture_data(f, model);
  return nnsim::train_tiny(nnsim::net_from_candidate(model, f.train.seed), d.train, f.train);
}

inline void write_model_outputs(RunDir& rd, const CandidateModel& model, const PlatformParams& platform) {
  const CostReport report = model_cost_unchecked(model, platform);
  rd.write("model.json", model_to_json(model).dump(2) + "\n");
  rd.write("report.json", report_to_json(report).dump(2) + "\n");
  rd.write("layers.csv", layer_csv(model, report));
  rd.write("breakdown.csv", breakdown_csv(report));
}

struct Phase1Outcome {
  Phase1Result result;
  std::size_t selected = 0;
};

// Phase1 search, admission and HD ranking. Throws NoAdmittedCandidates after writing the trace and
// pool when nothing was admitted.
inline Phase1Outcome run_phase1(const Config& cfg, const std::filesystem::path& out_dir) {
  RunDir rd(out_dir, "phase1", cfg, cfg.search.seed);
  Phase1Outcome o{phase1_run(cfg.space, cfg.platform, cfg.search), 0};
  for (const auto& t : o.result.trace)
    if (!std::isfinite(t.loss)) {
      rd.finish("numeric_failure");
      throw NumericFailure("phase1: non-finite loss at step " + std::to_string(t.step));
    }
  rd.write("phase1_trace.csv", phase1_trace_csv(o.result.trace));
  json summary;
  summary["delay_ref_ns"] = o.result.delay_ref_ns;
  summary["final_argmax_id"] = candidate_id(o.result.final_index);
  summary["final_argmax"] = report_to_json(o.result.final_report);
  summary["pool_size"] = o.result.pool.entries.size();
  summary["admitted"] = o.result.pool.admitted_count();

  if (o.result.pool.admitted_count() == 0) {
    rd.write("pool.json", pool_to_json(o.result.pool).dump(2) + "\n");
    rd.write("phase1_summary.json", summary.dump(2) + "\n");
    rd.finish("empty_pool");
    throw NoAdmittedCandidates("phase1: no candidate within " + fmt_num(100 * cfg.search.admit_margin) +
                               "% of the area constraint (" + fmt_num(cfg.search.area_constraint_mm2) + " mm2)");
  }
  const auto& first = o.result.pool.entries.front().model;
  o.selected = rank_candidates(o.result.pool, hd_batch_for(cfg.fixture, first, cfg.search.hd_batch), cfg.search.seed);
  const PoolEntry& sel = o.result.pool.entries[o.selected];
  summary["selected_id"] = candidate_id(sel.option_index);
  summary["selected_step"] = sel.step;
  rd.write("pool.json", pool_to_json(o.result.pool).dump(2) + "\n");
  rd.write("phase1_summary.json", summary.dump(2) + "\n");
  write_model_outputs(rd, sel.model, cfg.platform);
  rd.finish("ok");
  return o;
}

inline Phase2Result run_phase2(const Config& cfg, const std::filesystem::path& phase1_dir, const std::string& net_path,
                               const std::filesystem::path& out_dir) {
  const CandidateModel model = load_model_json((phase1_dir / "model.json").string());
  if (auto v = validate_candidate(model, cfg.space, cfg.platform); !v.empty()) throw InvalidModel(std::move(v));
  nnsim::RefNet net = nnsim::load_refnet(net_path);

  RunDir rd(out_dir, "phase2", cfg, cfg.search.seed);
  rd.manifest()["phase1_dir"] = phase1_dir.string();
  rd.manifest()["net"] = net_path;
  const FixtureData data = make_fixture_data(cfg.fixture, model);
  Phase2Data pd{data.adapt, data.test};
  Phase2Result r = phase2_run(net, model, cfg.space, cfg.platform, cfg.search, pd);
  for (const auto& t : r.trace)
    if (!std::isfinite(t.argmax_loss)) {
      rd.finish("numeric_failure");
      throw NumericFailure("phase2: non-finite loss at step " + std::to_string(t.step));
    }
  rd.write("phase2_trace.csv", phase2_trace_csv(r.trace));

  nnsim::NoiseSpec noise;
  noise.sigma_over_mu = cfg.platform.sigma_over_mu;
  noise.seed = cfg.search.seed;
  const auto geom = nnsim::XbarGeometry::from(cfg.platform);
  const nnsim::RefNet adapted = nnsim::bn_adapt(net, pd.adapt_batches, r.assignment, noise, geom, cfg.search.bn_momentum);
  json summary;
  summary["delay_ref_ns"] = r.delay_ref_ns;
  summary["assignment"] = json::array();
  for (const auto& p : r.assignment) summary["assignment"].push_back(json{{"ap", p.ap}, {"ip", p.ip}});
  summary["ideal_test_accuracy"] = nnsim::accuracy(nnsim::ideal_forward(net, data.test), data.test.labels);
  summary["noisy_test_accuracy"] =
      nnsim::accuracy(nnsim::noisy_forward(adapted, data.test, r.assignment, noise, geom), data.test.labels);
  rd.write("phase2_summary.json", summary.dump(2) + "\n");
  write_model_outputs(rd, r.final_model, cfg.platform);
  rd.finish("ok");
  return r;
}

}  // namespace xpert
