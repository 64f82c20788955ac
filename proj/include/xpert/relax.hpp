#pragma once

// Differentiable relaxation of the discrete design space.
//
// Each layer carries a row of logits over its options; softmax(logits / T) gives independent
// categorical distributions. Expected area and delay are exact expectations of the discrete cost
// model under those distributions. Because a layer's tile count depends on the previous layer's
// channel depth, the expectation couples adjacent layers bilinearly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "xpert/costmodel.hpp"
#include "xpert/designspace.hpp"

namespace xpert {

using Row = std::vector<double>;
using Matrix = std::vector<Row>;

struct LogitMatrix {
  Matrix values;
  double temperature = 1.0;

  std::size_t layers() const { return values.size(); }
  friend bool operator==(const LogitMatrix&, const LogitMatrix&) = default;
};

struct OptState {
  double learning_rate = 0.1;
  std::int64_t step_count = 0;
  std::uint64_t rng_seed = 0;
};

inline Row softmax_probs(const Row& logits, double temperature = 1.0) {
  if (!(temperature > 0)) throw std::invalid_argument("softmax temperature must be positive");
  Row p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    sum += p[i];
  }
  for (auto& x : p) x /= sum;
  return p;
}

inline Matrix softmax_probs(const LogitMatrix& m) {
  Matrix p;
  p.reserve(m.values.size());
  for (const auto& r : m.values) p.push_back(softmax_probs(r, m.temperature));
  return p;
}

// Index of the largest logit; ties go to the lowest index.
inline std::size_t argmax_select(const Row& logits) {
  if (logits.empty()) throw std::invalid_argument("argmax of empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

inline std::vector<std::size_t> argmax_select(const LogitMatrix& m) {
  std::vector<std::size_t> idx;
  idx.reserve(m.values.size());
  for (const auto& r : m.values) idx.push_back(argmax_select(r));
  return idx;
}

// Chain rule through softmax: dL/dlogit_i = p_i (g_i - sum_k p_k g_k) / T.
inline Row softmax_backward(const Row& probs, const Row& grad_probs, double temperature) {
  double mean = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) mean += probs[i] * grad_probs[i];
  Row g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = probs[i] * (grad_probs[i] - mean) / temperature;
  return g;
}

inline LogitMatrix zero_logits(const std::vector<std::size_t>& option_counts, double temperature = 1.0) {
  LogitMatrix m;
  m.temperature = temperature;
  for (auto n : option_counts) m.values.emplace_back(n, 0.0);
  return m;
}

inline LogitMatrix sgd_step(const LogitMatrix& logits, const Matrix& grad, OptState& opt) {
  if (!(opt.learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (grad.size() != logits.values.size()) throw std::invalid_argument("sgd_step: layer count mismatch");
  LogitMatrix out = logits;
  for (std::size_t l = 0; l < grad.size(); ++l) {
    if (grad[l].size() != out.values[l].size()) throw std::invalid_argument("sgd_step: option count mismatch");
    for (std::size_t i = 0; i < grad[l].size(); ++i) out.values[l][i] -= opt.learning_rate * grad[l][i];
  }
  ++opt.step_count;
  return out;
}

// Per-option cost tables for the Phase1 relaxation.
//
// For layer l, `cd_values[l]` lists the distinct channel depths of layer l's options and
// `cd_slot[l][j]` maps option j to its entry there. `area[l][c][j]` and `delay[l][c][j]` hold the
// cost of layer l under option j when its input channel count is cd_values[l-1][c] (layer 0 has a
// single slot for the model input).
struct Phase1Tables {
  std::vector<std::vector<Phase1Option>> options;
  std::vector<std::vector<int>> cd_values;
  std::vector<std::vector<std::size_t>> cd_slot;
  std::vector<Matrix> area;
  std::vector<Matrix> delay;

  std::vector<std::size_t> option_counts() const {
    std::vector<std::size_t> n;
    for (const auto& o : options) n.push_back(o.size());
    return n;
  }
};

inline Phase1Tables build_phase1_tables(const DesignSpace& space, const PlatformParams& platform) {
  Phase1Tables t;
  const std::size_t L = space.layer_count();
  for (std::size_t l = 0; l < L; ++l) {
    t.options.push_back(enumerate_phase1_options(space, l));
    std::vector<int> cds;
    std::vector<std::size_t> slot;
    for (const auto& o : t.options.back()) {
      auto it = std::find(cds.begin(), cds.end(), o.cd_out);
      if (it == cds.end()) {
        slot.push_back(cds.size());
        cds.push_back(o.cd_out);
      } else {
        slot.push_back(std::size_t(it - cds.begin()));
      }
    }
    t.cd_values.push_back(cds);
    t.cd_slot.push_back(slot);
  }
  for (std::size_t l = 0; l < L; ++l) {
    const std::vector<int> inputs = l == 0 ? std::vector<int>{space.input_channels} : t.cd_values[l - 1];
    Matrix a(inputs.size(), Row(t.options[l].size()));
    Matrix d = a;
    for (std::size_t c = 0; c < inputs.size(); ++c)
      for (std::size_t j = 0; j < t.options[l].size(); ++j) {
        const auto& o = t.options[l][j];
        LayerChoice ch{o.cd_out, o.cs, o.at, space.phase1_ap, space.phase1_ip};
        LayerCost lc = layer_cost(inputs[c], space.shapes[l], ch, platform);
        a[c][j] = lc.area_mm2;
        d[c][j] = lc.delay_ns;
      }
    t.area.push_back(std::move(a));
    t.delay.push_back(std::move(d));
  }
  return t;
}

struct ExpectedCost {
  double area_mm2 = 0.0;
  double delay_ns = 0.0;
  Matrix d_area;   // d E[area]  / d logits
  Matrix d_delay;  // d E[delay] / d logits
};

namespace detail {

// E[cost] and dE/dp for one bilinear table family.
inline double expected_table(const Phase1Tables& t, const std::vector<Matrix>& table, const Matrix& p,
                             Matrix& grad_p) {
  const std::size_t L = p.size();
  grad_p.assign(L, Row{});
  for (std::size_t l = 0; l < L; ++l) grad_p[l].assign(p[l].size(), 0.0);

  // Marginal distribution over each layer's channel depth.
  Matrix q(L);
  for (std::size_t l = 0; l < L; ++l) {
    q[l].assign(t.cd_values[l].size(), 0.0);
    for (std::size_t j = 0; j < p[l].size(); ++j) q[l][t.cd_slot[l][j]] += p[l][j];
  }

  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    const Matrix& tab = table[l];
    const Row q_prev = l == 0 ? Row{1.0} : q[l - 1];
    Row dq_prev(q_prev.size(), 0.0);
    for (std::size_t c = 0; c < q_prev.size(); ++c)
      for (std::size_t j = 0; j < p[l].size(); ++j) {
        total += q_prev[c] * p[l][j] * tab[c][j];
        grad_p[l][j] += q_prev[c] * tab[c][j];
        dq_prev[c] += p[l][j] * tab[c][j];
      }
    if (l > 0)
      for (std::size_t i = 0; i < p[l - 1].size(); ++i) grad_p[l - 1][i] += dq_prev[t.cd_slot[l - 1][i]];
  }
  return total;
}

}  // namespace detail

inline ExpectedCost expected_model_cost(const LogitMatrix& logits, const Phase1Tables& tables) {
  if (logits.values.size() != tables.options.size())
    throw std::invalid_argument("expected_model_cost: logit layers do not match the space");
  for (std::size_t l = 0; l < tables.options.size(); ++l)
    if (logits.values[l].size() != tables.options[l].size())
      throw std::invalid_argument("expected_model_cost: option count mismatch at layer " + std::to_string(l));
  const Matrix p = softmax_probs(logits);
  ExpectedCost e;
  Matrix gp_area, gp_delay;
  e.area_mm2 = detail::expected_table(tables, tables.area, p, gp_area);
  e.delay_ns = detail::expected_table(tables, tables.delay, p, gp_delay);
  for (std::size_t l = 0; l < p.size(); ++l) {
    e.d_area.push_back(softmax_backward(p[l], gp_area[l], logits.temperature));
    e.d_delay.push_back(softmax_backward(p[l], gp_delay[l], logits.temperature));
  }
  return e;
}

inline ExpectedCost expected_model_cost(const LogitMatrix& logits, const DesignSpace& space,
                                        const PlatformParams& platform) {
  return expected_model_cost(logits, build_phase1_tables(space, platform));
}

struct LossValue {
  double value = 0.0;
  double d_delay = 0.0;  // dL / d expected_delay
  double d_area = 0.0;   // dL / d expected_area
};

// L1 = delay / delay_ref + lambda1 * ((area - A_C) / (area_scale * A_C))^2.
// area_scale = 1 measures the area error as a fraction of the constraint; 0.01 measures it in
// percent of the constraint.
inline LossValue phase1_loss(double expected_delay, double expected_area, double area_constraint, double lambda1,
                             double delay_ref, double area_scale = 1.0) {
  if (!(area_constraint > 0)) throw std::invalid_argument("area constraint must be positive");
  if (!(delay_ref > 0)) throw std::invalid_argument("delay_ref must be positive");
  if (!(area_scale > 0)) throw std::invalid_argument("area_scale must be positive");
  const double denom = area_scale * area_constraint;
  const double err = (expected_area - area_constraint) / denom;
  LossValue v;
  v.value = expected_delay / delay_ref + lambda1 * err * err;
  v.d_delay = 1.0 / delay_ref;
  v.d_area = 2.0 * lambda1 * err / denom;
  return v;
}

struct Phase1Objective {
  double loss = 0.0;
  ExpectedCost cost;
  Matrix grad;
};

inline Phase1Objective phase1_objective(const LogitMatrix& logits, const Phase1Tables& tables,
                                        double area_constraint, double lambda1, double delay_ref,
                                        double area_scale = 1.0) {
  Phase1Objective o;
  o.cost = expected_model_cost(logits, tables);
  LossValue lv = phase1_loss(o.cost.delay_ns, o.cost.area_mm2, area_constraint, lambda1, delay_ref, area_scale);
  o.loss = lv.value;
  o.grad = o.cost.d_delay;
  for (std::size_t l = 0; l < o.grad.size(); ++l)
    for (std::size_t i = 0; i < o.grad[l].size(); ++i)
      o.grad[l][i] = lv.d_delay * o.cost.d_delay[l][i] + lv.d_area * o.cost.d_area[l][i];
  return o;
}

// L2 = ce + lambda2 * delay / delay_ref.
inline double phase2_loss(double ce, double expected_delay, double delay_ref, double lambda2) {
  if (!(delay_ref > 0)) throw std::invalid_argument("delay_ref must be positive");
  return ce + lambda2 * expected_delay / delay_ref;
}

// Relaxed Phase2 objective over per-layer (AP, IP) logits.
//
// `delay[l][j]` is layer l's delay under option j. `ce[l]` is either empty (layer not probed this
// step) or holds the cross-entropy measured with layer l switched to option j and every other layer
// at its argmax. The CE term is the softmax mixture over the probed layers' options, averaged over
// probed layers; the delay term is the exact expectation over all layers.
struct Phase2Objective {
  double loss = 0.0;
  double expected_ce = 0.0;
  double expected_delay = 0.0;
  Matrix grad;
};

inline Phase2Objective phase2_objective(const LogitMatrix& logits, const Matrix& ce, const Matrix& delay,
                                        double delay_ref, double lambda2) {
  const std::size_t L = logits.values.size();
  if (ce.size() != L || delay.size() != L) throw std::invalid_argument("phase2_objective: layer count mismatch");
  const Matrix p = softmax_probs(logits);
  std::size_t probed = 0;
  for (const auto& r : ce) probed += r.empty() ? 0 : 1;

  Phase2Objective o;
  o.grad.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t n = p[l].size();
    if (delay[l].size() != n || (!ce[l].empty() && ce[l].size() != n))
      throw std::invalid_argument("phase2_objective: option count mismatch at layer " + std::to_string(l));
    Row gp(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      o.expected_delay += p[l][j] * delay[l][j];
      gp[j] += lambda2 * delay[l][j] / delay_ref;
      if (!ce[l].empty()) {
        o.expected_ce += p[l][j] * ce[l][j] / double(probed);
        gp[j] += ce[l][j] / double(probed);
      }
    }
    o.grad[l] = softmax_backward(p[l], gp, logits.temperature);
  }
  o.loss = phase2_loss(o.expected_ce, o.expected_delay, delay_ref, lambda2);
  return o;
}

}  // namespace xpert
