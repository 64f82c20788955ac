#pragma once

// Dual-phase co-search.
//
// Phase1 searches channel depth, column sharing and ADC type per layer under an area constraint,
// with ADC/input precision held at the space's Phase1 defaults. Every step's argmax candidate is
// costed and recorded; candidates whose area is within the admission margin of the constraint
// are admitted. Admitted candidates are ranked by a training-free Hamming-distance score and by
// delay. Phase2 freezes the trained network and searches per-layer (ADC precision, input
// precision) against cross-entropy under crossbar noise plus a delay penalty.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "xpert/costmodel.hpp"
#include "xpert/designspace.hpp"
#include "xpert/nnsim/forward.hpp"
#include "xpert/nnsim/hd.hpp"
#include "xpert/relax.hpp"

namespace xpert {

struct SearchConfig {
  double area_constraint_mm2 = 50.0;
  int n1_steps = 2000;
  int n2_steps = 20;
  double lambda1 = 0.01;
  double lambda2 = 0.001;
  double lr1 = 13.0;
  double lr2 = 0.1;
  std::uint64_t seed = 0;
  double admit_margin = 0.02;
  // Unit of the Phase1 area error: 0.01 measures it in percent of the constraint, 1.0 as a fraction.
  double area_error_scale = 0.01;
  double temperature = 1.0;
  // Temperature at the last Phase1 step; annealed geometrically from `temperature`.
  double final_temperature = 0.01;
  // Standard deviation of seeded Gaussian noise added to the initial (zero) logits.
  double init_logit_noise = 0.0;
  int hd_batch = 64;
  float bn_momentum = 0.1f;

  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

inline std::vector<std::string> validate_search_config(const SearchConfig& c) {
  std::vector<std::string> e;
  if (!(c.area_constraint_mm2 > 0)) e.push_back("search.area_constraint_mm2 must be positive");
  if (c.n1_steps < 0) e.push_back("search.n1_steps must be >= 0");
  if (c.n2_steps < 0) e.push_back("search.n2_steps must be >= 0");
  if (c.lambda1 < 0) e.push_back("search.lambda1 must be >= 0");
  if (c.lambda2 < 0) e.push_back("search.lambda2 must be >= 0");
  if (!(c.lr1 > 0)) e.push_back("search.lr1 must be positive");
  if (!(c.lr2 > 0)) e.push_back("search.lr2 must be positive");
  if (!(c.admit_margin >= 0)) e.push_back("search.admit_margin must be >= 0");
  if (!(c.area_error_scale > 0)) e.push_back("search.area_error_scale must be positive");
  if (!(c.temperature > 0)) e.push_back("search.temperature must be positive");
  if (!(c.final_temperature > 0)) e.push_back("search.final_temperature must be positive");
  if (c.init_logit_noise < 0) e.push_back("search.init_logit_noise must be >= 0");
  if (c.hd_batch < 1) e.push_back("search.hd_batch must be >= 1");
  return e;
}

inline bool admit(const CostReport& report, double area_constraint, double margin = 0.02) {
  if (!(area_constraint > 0)) throw std::invalid_argument("area constraint must be positive");
  return std::abs(report.area_mm2 - area_constraint) / area_constraint <= margin;
}

struct PoolEntry {
  CandidateModel model;
  std::vector<std::size_t> option_index;
  CostReport report;
  int step = 0;
  bool admitted = false;
  std::optional<double> hd_score;
};

// Distinct discrete candidates visited by Phase1, earliest visit kept.
struct CandidatePool {
  std::vector<PoolEntry> entries;

  std::size_t admitted_count() const {
    return std::size_t(std::count_if(entries.begin(), entries.end(), [](const PoolEntry& e) { return e.admitted; }));
  }

  bool add(PoolEntry e) {
    for (const auto& x : entries)
      if (x.option_index == e.option_index) return false;
    entries.push_back(std::move(e));
    return true;
  }
};

inline std::string candidate_id(const std::vector<std::size_t>& option_index) {
  std::string s;
  for (std::size_t i = 0; i < option_index.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(option_index[i]);
  }
  return s;
}

struct Phase1TraceRow {
  int step = 0;
  double loss = 0.0;
  double expected_area_mm2 = 0.0;
  double expected_delay_ns = 0.0;
  std::string argmax_id;
  double argmax_area_mm2 = 0.0;
  double argmax_delay_ns = 0.0;
  bool admitted = false;
};

struct Phase1Result {
  CandidatePool pool;
  LogitMatrix logits;
  std::vector<Phase1TraceRow> trace;
  double delay_ref_ns = 0.0;
  std::vector<std::size_t> final_index;
  CandidateModel final_model;
  CostReport final_report;
};

inline LogitMatrix initial_logits(const std::vector<std::size_t>& option_counts, const SearchConfig& cfg,
                                  std::uint64_t stream) {
  LogitMatrix m = zero_logits(option_counts, cfg.temperature);
  if (cfg.init_logit_noise > 0) {
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + stream);
    std::normal_distribution<double> nd(0.0, cfg.init_logit_noise);
    for (auto& r : m.values)
      for (auto& v : r) v = nd(rng);
  }
  return m;
}

inline Phase1Result phase1_run(const DesignSpace& space, const PlatformParams& platform, const SearchConfig& cfg) {
  {
    std::vector<Violation> v = validate_platform(platform);
    for (auto& x : validate_space(space)) v.push_back(x);
    if (!v.empty()) throw InvalidModel(std::move(v));
    auto e = validate_search_config(cfg);
    if (!e.empty()) throw std::invalid_argument(e.front());
  }
  const Phase1Tables tables = build_phase1_tables(space, platform);
  Phase1Result r;
  r.logits = initial_logits(tables.option_counts(), cfg, 1);
  r.delay_ref_ns = expected_model_cost(r.logits, tables).delay_ns;
  OptState opt{cfg.lr1, 0, cfg.seed};

  for (int step = 0; step < cfg.n1_steps; ++step) {
    if (cfg.n1_steps > 1)
      r.logits.temperature =
          cfg.temperature * std::pow(cfg.final_temperature / cfg.temperature, double(step) / double(cfg.n1_steps - 1));
    // The candidate recorded at a step is the argmax before that step's update.
    auto idx = argmax_select(r.logits);
    CandidateModel model = model_from_phase1(space, idx);
    CostReport report = model_cost_unchecked(model, platform);
    const bool ok = admit(report, cfg.area_constraint_mm2, cfg.admit_margin);

    Phase1Objective obj = phase1_objective(r.logits, tables, cfg.area_constraint_mm2, cfg.lambda1, r.delay_ref_ns,
                                           cfg.area_error_scale);
    r.trace.push_back({step, obj.loss, obj.cost.area_mm2, obj.cost.delay_ns, candidate_id(idx), report.area_mm2,
                       report.delay_ns, ok});
    r.pool.add(PoolEntry{std::move(model), idx, std::move(report), step, ok, std::nullopt});
    r.logits = sgd_step(r.logits, obj.grad, opt);
  }
  r.final_index = argmax_select(r.logits);
  r.final_model = model_from_phase1(space, r.final_index);
  r.final_report = model_cost_unchecked(r.final_model, platform);
  return r;
}

struct NoAdmittedCandidates : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scores every admitted entry (fills hd_score) and returns the index of the entry maximizing
// normalized HD score minus normalized delay, both min-max normalized over the admitted entries.
// Ties go to the lower delay, then the earlier step.
inline std::size_t rank_candidates(CandidatePool& pool, const nnsim::TensorBatch& hd_batch, std::uint64_t seed) {
  std::vector<std::size_t> adm;
  for (std::size_t i = 0; i < pool.entries.size(); ++i)
    if (pool.entries[i].admitted) adm.push_back(i);
  if (adm.empty())
    throw NoAdmittedCandidates("no candidate within the area admission margin (2% of the constraint by default)");

  double hmin = INFINITY, hmax = -INFINITY, dmin = INFINITY, dmax = -INFINITY;
  for (auto i : adm) {
    auto& e = pool.entries[i];
    if (!e.hd_score) e.hd_score = nnsim::hd_score(e.model, hd_batch, seed);
    hmin = std::min(hmin, *e.hd_score);
    hmax = std::max(hmax, *e.hd_score);
    dmin = std::min(dmin, e.report.delay_ns);
    dmax = std::max(dmax, e.report.delay_ns);
  }
  auto norm = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
  std::size_t best = adm.front();
  double best_score = -INFINITY;
  for (auto i : adm) {
    const auto& e = pool.entries[i];
    const double s = norm(*e.hd_score, hmin, hmax) - norm(e.report.delay_ns, dmin, dmax);
    const auto& b = pool.entries[best];
    if (s > best_score || (s == best_score && (e.report.delay_ns < b.report.delay_ns ||
                                               (e.report.delay_ns == b.report.delay_ns && e.step < b.step)))) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

struct Phase2Data {
  std::vector<nnsim::TensorBatch> adapt_batches;
  nnsim::TensorBatch eval_batch;
};

// Cross-entropy of the network under crossbar noise after BN adaptation at the given precisions.
inline double noisy_ce(const nnsim::RefNet& net, const std::vector<nnsim::LayerPrecision>& prec, const Phase2Data& data,
                       const nnsim::NoiseSpec& noise, const nnsim::XbarGeometry& geom, float momentum) {
  nnsim::RefNet adapted = data.adapt_batches.empty() ? net : nnsim::bn_adapt(net, data.adapt_batches, prec, noise, geom, momentum);
  nnsim::NoiseSpec eval_noise = noise;
  eval_noise.seed = noise.seed ^ 0xA5A5A5A5ull;
  return nnsim::cross_entropy(nnsim::noisy_forward(adapted, data.eval_batch, prec, eval_noise, geom), data.eval_batch.labels);
}

struct Phase2TraceRow {
  int step = 0;
  std::size_t probed_layer = 0;
  double argmax_ce = 0.0;
  double argmax_delay_ns = 0.0;
  double argmax_loss = 0.0;
  double expected_delay_ns = 0.0;
  std::string argmax_id;
};

struct Phase2Result {
  std::vector<nnsim::LayerPrecision> assignment;
  std::vector<std::size_t> final_index;
  CandidateModel final_model;
  CostReport final_report;
  LogitMatrix logits;
  std::vector<Phase2TraceRow> trace;
  double delay_ref_ns = 0.0;
};

// Layer delays under every (AP, IP) option with CD/CS/AT frozen.
inline Matrix phase2_delay_table(const CandidateModel& model, const DesignSpace& space, const PlatformParams& platform) {
  Matrix d(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    for (const auto& o : enumerate_phase2_options(space, l)) {
      LayerChoice c = model.layers[l].choice;
      c.ap = o.ap;
      c.ip = o.ip;
      d[l].push_back(layer_cost(model.cd_in(l), model.layers[l].shape, c, platform).delay_ns);
    }
  }
  return d;
}

inline CandidateModel with_precisions(CandidateModel model, const std::vector<nnsim::LayerPrecision>& prec) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    model.layers[l].choice.ap = prec[l].ap;
    model.layers[l].choice.ip = prec[l].ip;
  }
  return model;
}

inline std::vector<nnsim::LayerPrecision> precisions_from_index(const DesignSpace& space,
                                                                const std::vector<std::size_t>& idx) {
  std::vector<nnsim::LayerPrecision> p;
  for (std::size_t l = 0; l < idx.size(); ++l) {
    const auto o = enumerate_phase2_options(space, l).at(idx[l]);
    p.push_back({o.ap, o.ip});
  }
  return p;
}

inline Phase2Result phase2_run(const nnsim::RefNet& trained_net, const CandidateModel& phase1_model,
                               const DesignSpace& space, const PlatformParams& platform, const SearchConfig& cfg,
                               const Phase2Data& data) {
  if (trained_net.compute_layer_count() != phase1_model.layers.size())
    throw std::invalid_argument("phase2: network has " + std::to_string(trained_net.compute_layer_count()) +
                                " compute layers but the model has " + std::to_string(phase1_model.layers.size()));
  if (phase1_model.layers.size() != space.layer_count())
    throw std::invalid_argument("phase2: model does not match the design space");
  {
    auto e = validate_search_config(cfg);
    if (!e.empty()) throw std::invalid_argument(e.front());
  }
  const std::size_t L = phase1_model.layers.size();
  const nnsim::XbarGeometry geom = nnsim::XbarGeometry::from(platform);
  const Matrix delay = phase2_delay_table(phase1_model, space, platform);

  Phase2Result r;
  {
    CandidateModel ref = phase1_model;
    for (auto& l : ref.layers) {
      l.choice.ap = space.phase1_ap;
      l.choice.ip = space.phase1_ip;
    }
    r.delay_ref_ns = model_cost_unchecked(ref, platform).delay_ns;
  }
  r.logits = initial_logits(std::vector<std::size_t>(L, space.phase2_option_count()), cfg, 2);
  OptState opt{cfg.lr2, 0, cfg.seed};
  std::mt19937_64 rng(cfg.seed ^ 0x5EED2ull);

  for (int step = 0; step < cfg.n2_steps; ++step) {
    const auto idx = argmax_select(r.logits);
    const std::size_t layer = std::uniform_int_distribution<std::size_t>(0, L - 1)(rng);
    nnsim::NoiseSpec noise;
    noise.sigma_over_mu = platform.sigma_over_mu;
    noise.seed = rng();

    Matrix ce(L);
    const std::size_t n_opt = space.phase2_option_count();
    for (std::size_t j = 0; j < n_opt; ++j) {
      auto probe = idx;
      probe[layer] = j;
      ce[layer].push_back(noisy_ce(trained_net, precisions_from_index(space, probe), data, noise, geom, cfg.bn_momentum));
    }
    Phase2Objective obj = phase2_objective(r.logits, ce, delay, r.delay_ref_ns, cfg.lambda2);

    double argmax_delay = 0.0;
    for (std::size_t l = 0; l < L; ++l) argmax_delay += delay[l][idx[l]];
    const double argmax_ce = ce[layer][idx[layer]];
    r.trace.push_back({step, layer, argmax_ce, argmax_delay,
                       phase2_loss(argmax_ce, argmax_delay, r.delay_ref_ns, cfg.lambda2), obj.expected_delay,
                       candidate_id(idx)});
    r.logits = sgd_step(r.logits, obj.grad, opt);
  }
  r.final_index = argmax_select(r.logits);
  r.assignment = precisions_from_index(space, r.final_index);
  r.final_model = with_precisions(phase1_model, r.assignment);
  r.final_report = model_cost_unchecked(r.final_model, platform);
  return r;
}

}  // namespace xpert
