#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "xpert/costmodel.hpp"
#include "xpert/relax.hpp"

using namespace xpert;

namespace {

DesignSpace small_space(int layers, std::vector<int> cds, std::vector<int> cs, std::vector<AdcType> at) {
  DesignSpace s;
  s.input_channels = 3;
  for (int l = 0; l < layers; ++l) {
    s.shapes.push_back(LayerShape{3, 8, 8, 1, false});
    s.cd_options_per_layer.push_back(cds);
  }
  s.cs_options = std::move(cs);
  s.at_options = std::move(at);
  return s;
}

LogitMatrix random_logits(const std::vector<std::size_t>& counts, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  LogitMatrix m = zero_logits(counts);
  for (auto& r : m.values)
    for (auto& v : r) v = nd(rng);
  return m;
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-12}); }

}  // namespace

TEST(Softmax, ClosedForm) {
  const Row p = softmax_probs(Row{0.0, std::log(3.0)});
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, UniformFortyOptions) {
  for (double v : softmax_probs(Row(40, 2.5))) EXPECT_NEAR(v, 0.025, 1e-15);
}

TEST(Softmax, HugeTemperatureIsUniform) {
  const Row p = softmax_probs(Row{-3.0, 0.0, 4.0, 10.0}, 1e9);
  EXPECT_LT(*std::max_element(p.begin(), p.end()) - *std::min_element(p.begin(), p.end()), 1e-6);
}

TEST(Softmax, StableAndNormalized) {
  const Row p = softmax_probs(Row{1000.0, 999.0, -1000.0});
  double sum = 0;
  for (double v : p) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_THROW(softmax_probs(Row{1.0}, 0.0), std::invalid_argument);
}

TEST(Argmax, ExamplesAndTies) {
  EXPECT_EQ(argmax_select(Row{1, 5, 2}), 1u);
  EXPECT_EQ(argmax_select(Row{3, 3, 1}), 0u);
  Row r{0.3, -2.0, 0.9, 0.9};
  const auto i = argmax_select(r);
  for (auto& v : r) v = 2.5 * v + 7.0;
  EXPECT_EQ(argmax_select(r), i);
  EXPECT_EQ(i, 2u);
}

TEST(ExpectedCost, OneHotEqualsDiscreteCandidate) {
  const DesignSpace s = small_space(3, {8, 16, 24}, {4, 8}, {AdcType::Sar, AdcType::Flash});
  const PlatformParams p;
  const auto tables = build_phase1_tables(s, p);
  const std::vector<std::size_t> pick{5, 0, 11};
  LogitMatrix m = zero_logits(tables.option_counts());
  for (std::size_t l = 0; l < 3; ++l) m.values[l][pick[l]] = 800.0;
  const auto e = expected_model_cost(m, tables);
  const auto r = model_cost_unchecked(model_from_phase1(s, pick), p);
  EXPECT_LE(rel_err(e.area_mm2, r.area_mm2), 1e-12);
  EXPECT_LE(rel_err(e.delay_ns, r.delay_ns), 1e-12);
}

TEST(ExpectedCost, TwoLayerBruteForce) {
  const DesignSpace s = small_space(2, {8, 32}, {4}, {AdcType::Flash});
  const PlatformParams p;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const LogitMatrix m = random_logits({2, 2}, rng);
    double area = 0, delay = 0;
    oracle::for_each_assignment(m, [&](const std::vector<std::size_t>& idx, double prob) {
      const auto r = model_cost_unchecked(model_from_phase1(s, idx), p);
      area += prob * r.area_mm2;
      delay += prob * r.delay_ns;
    });
    const auto e = expected_model_cost(m, s, p);
    EXPECT_LE(rel_err(e.area_mm2, area), 1e-12);
    EXPECT_LE(rel_err(e.delay_ns, delay), 1e-12);
  }
}

TEST(ExpectedCost, BoundedByDiscreteExtremes) {
  const DesignSpace s = small_space(3, {8, 16, 24}, {2}, {AdcType::Sar});
  const PlatformParams p;
  std::mt19937_64 rng(9);
  double amin = INFINITY, amax = -INFINITY, dmin = INFINITY, dmax = -INFINITY;
  const LogitMatrix probe = zero_logits({3, 3, 3});
  oracle::for_each_assignment(probe, [&](const std::vector<std::size_t>& idx, double) {
    const auto r = model_cost_unchecked(model_from_phase1(s, idx), p);
    amin = std::min(amin, r.area_mm2);
    amax = std::max(amax, r.area_mm2);
    dmin = std::min(dmin, r.delay_ns);
    dmax = std::max(dmax, r.delay_ns);
  });
  for (int trial = 0; trial < 20; ++trial) {
    const auto e = expected_model_cost(random_logits({3, 3, 3}, rng, 3.0), s, p);
    EXPECT_GE(e.area_mm2, amin * (1 - 1e-12));
    EXPECT_LE(e.area_mm2, amax * (1 + 1e-12));
    EXPECT_GE(e.delay_ns, dmin * (1 - 1e-12));
    EXPECT_LE(e.delay_ns, dmax * (1 + 1e-12));
  }
}

TEST(ExpectedCost, GradientMatchesFiniteDifferences) {
  const DesignSpace s = small_space(3, {8, 16, 32}, {2, 8}, {AdcType::Sar, AdcType::Flash});
  const PlatformParams p;
  const auto tables = build_phase1_tables(s, p);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    LogitMatrix m = random_logits(tables.option_counts(), rng);
    m.temperature = trial % 2 ? 0.5 : 1.0;
    const auto e = expected_model_cost(m, tables);
    const auto fd_area = oracle::fd_gradient(m, [&](const LogitMatrix& x) { return expected_model_cost(x, tables).area_mm2; });
    const auto fd_delay = oracle::fd_gradient(m, [&](const LogitMatrix& x) { return expected_model_cost(x, tables).delay_ns; });
    for (std::size_t l = 0; l < m.layers(); ++l)
      for (std::size_t i = 0; i < m.values[l].size(); ++i) {
        EXPECT_NEAR(e.d_area[l][i], fd_area[l][i], 1e-4 * std::max(1.0, std::fabs(fd_area[l][i])));
        EXPECT_NEAR(e.d_delay[l][i], fd_delay[l][i], 1e-4 * std::max(1.0, std::fabs(fd_delay[l][i])));
      }
  }
}

TEST(ExpectedCost, ShapeMismatchThrows) {
  const DesignSpace s = small_space(2, {8}, {4}, {AdcType::Sar});
  const auto tables = build_phase1_tables(s, PlatformParams{});
  EXPECT_THROW(expected_model_cost(zero_logits({1}), tables), std::invalid_argument);
  EXPECT_THROW(expected_model_cost(zero_logits({1, 2}), tables), std::invalid_argument);
}

TEST(Phase1Loss, Examples) {
  EXPECT_NEAR(phase1_loss(2.0, 1.1, 1.0, 0.01, 1.0).value, 2.0001, 1e-12);
  EXPECT_DOUBLE_EQ(phase1_loss(3.0, 50.0, 50.0, 0.01, 3.0).value, 1.0);
  EXPECT_THROW(phase1_loss(1, 1, 0, 0.01, 1), std::invalid_argument);
  EXPECT_THROW(phase1_loss(1, 1, 1, 0.01, 0), std::invalid_argument);
}

TEST(Phase1Loss, PercentScaleMultipliesPenalty) {
  const double unit = phase1_loss(1.0, 55.0, 50.0, 0.01, 1.0, 1.0).value - 1.0;
  const double percent = phase1_loss(1.0, 55.0, 50.0, 0.01, 1.0, 0.01).value - 1.0;
  EXPECT_NEAR(percent, 1e4 * unit, 1e-9);
}

TEST(Phase1Loss, PartialsMatchFiniteDifferences) {
  const double h = 1e-4;
  for (double scale : {1.0, 0.01}) {
    const auto v = phase1_loss(7.0, 48.0, 50.0, 0.01, 5.0, scale);
    const double dd = (phase1_loss(7.0 + h, 48.0, 50.0, 0.01, 5.0, scale).value -
                       phase1_loss(7.0 - h, 48.0, 50.0, 0.01, 5.0, scale).value) / (2 * h);
    const double da = (phase1_loss(7.0, 48.0 + h, 50.0, 0.01, 5.0, scale).value -
                       phase1_loss(7.0, 48.0 - h, 50.0, 0.01, 5.0, scale).value) / (2 * h);
    EXPECT_LE(rel_err(v.d_delay, dd), 1e-6);
    EXPECT_LE(rel_err(v.d_area, da), 1e-6);
  }
}

TEST(Phase2Loss, Formula) {
  EXPECT_DOUBLE_EQ(phase2_loss(0.7, 200.0, 100.0, 0.5), 1.7);
  EXPECT_DOUBLE_EQ(phase2_loss(0.7, 200.0, 100.0, 0.0), 0.7);
  EXPECT_THROW(phase2_loss(0.7, 1.0, 0.0, 0.5), std::invalid_argument);
}

TEST(Phase2Objective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ud(0.1, 3.0);
  const Matrix delay{{ud(rng), ud(rng), ud(rng)}, {ud(rng), ud(rng), ud(rng)}, {ud(rng), ud(rng), ud(rng)}};
  const Matrix ce{{ud(rng), ud(rng), ud(rng)}, {}, {ud(rng), ud(rng), ud(rng)}};
  const LogitMatrix m = random_logits({3, 3, 3}, rng);
  const auto o = phase2_objective(m, ce, delay, 2.0, 0.3);
  const auto fd = oracle::fd_gradient(m, [&](const LogitMatrix& x) { return phase2_objective(x, ce, delay, 2.0, 0.3).loss; });
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(o.grad[l][i], fd[l][i], 1e-8);
}

TEST(Sgd, Update) {
  OptState opt;
  opt.learning_rate = 0.1;
  LogitMatrix m = zero_logits({2});
  m.values[0] = {1.0, -1.0};
  const LogitMatrix out = sgd_step(m, Matrix{{0.5, 0.0}}, opt);
  EXPECT_DOUBLE_EQ(out.values[0][0], 0.95);
  EXPECT_DOUBLE_EQ(out.values[0][1], -1.0);
  EXPECT_EQ(opt.step_count, 1);
  EXPECT_EQ(m.values[0][0], 1.0);
  EXPECT_EQ(sgd_step(m, Matrix{{0.0, 0.0}}, opt), m);
  EXPECT_THROW(sgd_step(m, Matrix{{0.0}}, opt), std::invalid_argument);
  opt.learning_rate = 0;
  EXPECT_THROW(sgd_step(m, Matrix{{0.0, 0.0}}, opt), std::invalid_argument);
}
