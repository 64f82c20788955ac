#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "xpert/nnsim/fixture.hpp"
#include "xpert/nnsim/forward.hpp"
#include "xpert/nnsim/hd.hpp"
#include "xpert/nnsim/quant.hpp"
#include "xpert/nnsim/refnet.hpp"
#include "xpert/nnsim/train.hpp"

using namespace xpert::nnsim;

namespace {

TensorBatch rows(std::vector<std::vector<float>> x, std::vector<int> labels = {}) {
  TensorBatch b;
  b.c = int(x.front().size());
  b.data = RowMat(Eigen::Index(x.size()), b.c);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[i].size(); ++j) b.data(Eigen::Index(i), Eigen::Index(j)) = x[i][j];
  b.labels = std::move(labels);
  return b;
}

// Dense 2 -> 4 with hand-set weights, ReLU, then a dense head.
RefNet four_unit_net() {
  RefNet net;
  net.in_c = 2;
  net.class_count = 2;
  Dense d = make_dense(2, 4);
  d.weight << 1, 0, 0, 1, 1, -1, -1, 1;
  net.layers.emplace_back(d);
  net.layers.emplace_back(Relu{});
  net.layers.emplace_back(make_dense(4, 2));
  return net;
}

struct Trained {
  RefNet net;
  TensorBatch train, test;
};

const Trained& blob_mlp() {
  static const Trained t = [] {
    BlobSpec b{1024, 64, 4, 0.5, 1.0, 7};
    TensorBatch all = make_blobs(b);
    Trained r{{}, all.slice(0, 512), all.slice(512, 512)};
    r.net = train_tiny(make_mlp(64, {64}, 4, 1), r.train, TrainOptions{}).net;
    return r;
  }();
  return t;
}

std::vector<LayerPrecision> uniform(int ap, int ip) { return std::vector<LayerPrecision>(2, LayerPrecision{ap, ip}); }

std::string serialized(const RefNet& net) {
  std::ostringstream os;
  write_refnet(os, net);
  return os.str();
}

}  // namespace

TEST(Slicing, MaxCodeSlices) {
  const auto s = slice_code(127, 8, 4);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], 15);
  EXPECT_EQ(s[1], 7);
  const std::vector<float> w{1.0f, 0.0f, -0.5f};
  const auto q = quantize_slice_weights(w);
  EXPECT_EQ(q.codes[0], 127);
  EXPECT_EQ(q.codes[1], 0);
  EXPECT_EQ(q.slices[0][1], 0);
  EXPECT_EQ(q.slices[1][1], 0);
  EXPECT_EQ(q.sign[2], -1);
  EXPECT_DOUBLE_EQ(q.scale, 1.0 / 127);
}

TEST(Slicing, ExhaustiveRoundTrip) {
  for (int bits : {4, 8})
    for (int slice : {1, 2, 4}) {
      const int qmax = (1 << (bits - 1)) - 1;
      for (int code = -qmax; code <= qmax; ++code) {
        const auto s = slice_code(code, bits, slice);
        EXPECT_EQ(recompose_slices(s, slice, code < 0 ? -1 : 1), code);
      }
    }
}

TEST(Slicing, AllZeroTensorHasUnitScale) {
  const std::vector<float> w(5, 0.0f);
  const auto q = quantize_slice_weights(w);
  EXPECT_EQ(q.scale, 1.0);
  for (auto c : q.codes) EXPECT_EQ(c, 0);
}

TEST(Serialization, BinaryExpansion) {
  EXPECT_EQ(code_to_planes(9, 4), (std::vector<std::uint8_t>{1, 0, 0, 1}));
  const std::vector<float> acts{0.0f, 0.2f, 0.9f, 1.0f};
  const auto bp = bit_serialize_inputs(acts, 1);
  EXPECT_EQ(bp.planes.size(), 1u);
  EXPECT_EQ(bp.planes[0], (std::vector<std::uint8_t>{0, 0, 1, 1}));
}

TEST(Serialization, ExhaustiveRoundTrip) {
  for (int bits = 1; bits <= 8; ++bits) {
    std::vector<float> acts;
    for (std::uint32_t c = 0; c < (1u << bits); ++c) {
      EXPECT_EQ(planes_to_code(code_to_planes(c, bits)), c);
      acts.push_back(float(c));
    }
    const auto bp = bit_serialize_inputs(acts, bits, 1.0);
    for (std::uint32_t c = 0; c < (1u << bits); ++c) {
      std::uint32_t sum = 0;
      for (int b = 0; b < bits; ++b) sum += std::uint32_t{bp.planes[std::size_t(b)][c]} << b;
      EXPECT_EQ(sum, c);
      EXPECT_EQ(bp.codes[c], c);
    }
  }
}

TEST(Serialization, NegativeInputRejected) {
  const std::vector<float> acts{-1.0f};
  EXPECT_THROW(bit_serialize_inputs(acts, 4), std::invalid_argument);
}

TEST(Adc, EdgeCodes) {
  for (auto mode : {AdcRounding::Nearest, AdcRounding::Floor}) {
    EXPECT_EQ(adc_quantize(0.0, 6, 64.0, mode), 0);
    EXPECT_EQ(adc_quantize(64.0, 6, 64.0, mode), 63);
    EXPECT_EQ(adc_quantize(1e6, 6, 64.0, mode), 63);
    EXPECT_EQ(adc_quantize(-3.0, 6, 64.0, mode), 0);
  }
  EXPECT_EQ(adc_quantize(33.0, 6, 64.0, AdcRounding::Nearest), 32);
  EXPECT_EQ(adc_quantize(33.0, 6, 64.0, AdcRounding::Floor), 32);
  EXPECT_THROW(adc_quantize(1.0, 0, 64.0), std::invalid_argument);
  EXPECT_THROW(adc_quantize(1.0, 6, 0.0), std::invalid_argument);
}

TEST(Adc, MatchesScalarQuantizer) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ud(-5.0, 1000.0);
  for (int i = 0; i < 2000; ++i) {
    const int ap = 1 + i % 8;
    const double range = 16.0 + (i % 7) * 100.0;
    const double v = ud(rng);
    EXPECT_EQ(adc_quantize(v, ap, range, AdcRounding::Nearest), oracle::scalar_adc(v, ap, range, false)) << v;
    EXPECT_EQ(adc_quantize(v, ap, range, AdcRounding::Floor), oracle::scalar_adc(v, ap, range, true)) << v;
  }
}

TEST(Crossbar, NoiselessDotProduct) {
  RowMat g(70, 2);
  std::vector<std::uint8_t> plane(70);
  for (int r = 0; r < 70; ++r) {
    g(r, 0) = float(r % 16);
    g(r, 1) = float((3 * r) % 16);
    plane[std::size_t(r)] = std::uint8_t(r % 3 == 0);
  }
  const auto out = crossbar_matvec(g, plane, 64);
  ASSERT_EQ(out.rows(), 2);
  double expect[2][2] = {{0, 0}, {0, 0}};
  for (int r = 0; r < 70; ++r)
    if (r % 3 == 0) {
      expect[r / 64][0] += r % 16;
      expect[r / 64][1] += (3 * r) % 16;
    }
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k) EXPECT_EQ(out(c, k), expect[c][k]);
}

TEST(Crossbar, VariationIsUnbiased) {
  std::mt19937_64 rng(2);
  const std::vector<std::uint8_t> ones(64, 1), zeros(64, 0);
  double sum = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    RowMat g = RowMat::Ones(64, 1);
    apply_variation(g, 0.2, rng);
    sum += crossbar_matvec(g, ones, 64)(0, 0);
    EXPECT_EQ(crossbar_matvec(g, zeros, 64)(0, 0), 0.0);
  }
  EXPECT_NEAR(sum / trials, 64.0, 0.64);
}

TEST(Forward, NoiseOffMatchesIdealPredictions) {
  const auto& t = blob_mlp();
  NoiseSpec off;
  off.quantization = false;
  off.variation = false;
  const RowMat ideal = ideal_forward(t.net, t.test);
  const RowMat q = noisy_forward(t.net, t.test, uniform(8, 8), off);
  int same = 0;
  for (Eigen::Index n = 0; n < ideal.rows(); ++n) {
    Eigen::Index a, b;
    ideal.row(n).maxCoeff(&a);
    q.row(n).maxCoeff(&b);
    same += a == b;
    // 8-bit weights and inputs: error stays well inside the logit spread.
    EXPECT_LT((ideal.row(n) - q.row(n)).cwiseAbs().maxCoeff(), 0.05f * ideal.row(n).cwiseAbs().maxCoeff() + 0.05f);
  }
  EXPECT_EQ(same, ideal.rows());
}

TEST(Forward, DeterministicForPinnedSeed) {
  const auto& t = blob_mlp();
  NoiseSpec n;
  n.seed = 42;
  EXPECT_TRUE(noisy_forward(t.net, t.test, uniform(5, 4), n) == noisy_forward(t.net, t.test, uniform(5, 4), n));
  NoiseSpec m = n;
  m.seed = 43;
  EXPECT_FALSE(noisy_forward(t.net, t.test, uniform(5, 4), n) == noisy_forward(t.net, t.test, uniform(5, 4), m));
}

TEST(Forward, OneBitInputsDoNotBeatEightBits) {
  const auto& t = blob_mlp();
  NoiseSpec n;
  n.seed = 1;
  const double a1 = accuracy(noisy_forward(t.net, t.test, uniform(8, 1), n), t.test.labels);
  const double a8 = accuracy(noisy_forward(t.net, t.test, uniform(8, 8), n), t.test.labels);
  EXPECT_LE(a1, a8);
}

TEST(Forward, ZeroWeightsGiveConstantLogits) {
  RefNet net = make_mlp(8, {6}, 3, 5);
  for (auto& l : net.layers)
    if (auto* d = std::get_if<Dense>(&l)) d->weight.setZero();
  std::get<Dense>(net.layers.back()).bias << 0.5f, -1.0f, 2.0f;
  BlobSpec b{16, 8, 3, 1.0, 1.0, 3};
  const RowMat y = noisy_forward(net, make_blobs(b), {{6, 8}, {6, 8}}, NoiseSpec{});
  for (Eigen::Index n = 1; n < y.rows(); ++n) EXPECT_TRUE(y.row(n) == y.row(0));
}

TEST(Forward, ShapeMismatchThrows) {
  const auto& t = blob_mlp();
  EXPECT_THROW(noisy_forward(t.net, rows({{1.0f, 2.0f}}), uniform(6, 8), NoiseSpec{}), std::invalid_argument);
  EXPECT_THROW(noisy_forward(t.net, t.test, {{6, 8}}, NoiseSpec{}), std::invalid_argument);
}

TEST(BnAdapt, MomentumOneTakesNoisyBatchMean) {
  const auto& t = blob_mlp();
  const TensorBatch batch = t.train.slice(0, 32);
  NoiseSpec noise;
  noise.seed = 9;
  const auto prec = uniform(5, 4);
  const RefNet adapted = bn_adapt(t.net, {batch}, prec, noise, XbarGeometry{}, 1.0f);

  ForwardOptions opt;
  opt.noise = noise;
  std::mt19937_64 rng(noise.seed);
  const Act pre = dense_forward_noisy(std::get<Dense>(t.net.layers[0]), to_act(batch), prec[0], opt, rng);
  Vec mean, var;
  channel_stats(pre, mean, var);
  const auto& bn = std::get<BatchNorm>(adapted.layers[1]);
  EXPECT_TRUE(bn.running_mean == mean);
  EXPECT_TRUE(bn.running_var == var);
  EXPECT_TRUE(std::get<Dense>(adapted.layers[0]).weight == std::get<Dense>(t.net.layers[0]).weight);
}

TEST(BnAdapt, NoiseOffKeepsCleanStatistics) {
  const auto& t = blob_mlp();
  const TensorBatch batch = t.train.slice(0, 256);
  NoiseSpec off;
  off.quantization = false;
  off.variation = false;
  const RefNet noisy = bn_adapt(t.net, {batch}, uniform(8, 8), off, XbarGeometry{}, 1.0f);
  Vec mean, var;
  channel_stats(dense_forward(std::get<Dense>(t.net.layers[0]), to_act(batch)), mean, var);
  const auto& bn = std::get<BatchNorm>(noisy.layers[1]);
  for (Eigen::Index c = 0; c < mean.size(); ++c) {
    EXPECT_NEAR(bn.running_mean(c), mean(c), 0.02f * (std::fabs(mean(c)) + std::sqrt(var(c))));
    EXPECT_NEAR(bn.running_var(c), var(c), 0.05f * var(c) + 1e-4f);
  }
  EXPECT_THROW(bn_adapt(t.net, {}, uniform(8, 8), off), std::invalid_argument);
}

TEST(Hd, SingleSample) {
  const auto codes = relu_codes(four_unit_net(), rows({{1.0f, 0.0f}}));
  EXPECT_EQ(codes.bits, 4u);
  EXPECT_NEAR(hd_score_from_codes(codes), std::log(4.0 + kHdRegularization * 4), 1e-12);
}

TEST(Hd, HandComputedThreeSamples) {
  // Codes: (1,0,1,0), (0,1,0,1), (1,1,0,0); K = [[4,0,2],[0,4,2],[2,2,4]] plus lambda on the diagonal.
  const auto codes = relu_codes(four_unit_net(), rows({{1, 0}, {0, 1}, {1, 1}}));
  const Eigen::MatrixXd k = hamming_kernel(codes);
  Eigen::MatrixXd want(3, 3);
  want << 4, 0, 2, 0, 4, 2, 2, 2, 4;
  EXPECT_TRUE(k == want);
  const double a = 4.0 + kHdRegularization * 4;
  EXPECT_NEAR(hd_score_from_codes(codes), std::log(a * a * a - 8 * a), 1e-12);
}

TEST(Hd, DuplicatesHitRegularizationFloor) {
  const auto codes = relu_codes(four_unit_net(), rows({{1, 0}, {1, 0}}));
  const double lambda = kHdRegularization * 4;
  const double s = hd_score_from_codes(codes);
  EXPECT_TRUE(std::isfinite(s));
  EXPECT_NEAR(s, std::log(8 * lambda + lambda * lambda), 1e-9);
  EXPECT_LT(s, hd_score_from_codes(relu_codes(four_unit_net(), rows({{1, 0}, {0, 1}}))));
}

TEST(Hd, DeterministicAndPermutationInvariant) {
  const RefNet net = make_mlp(16, {32, 32}, 4, 3);
  BlobSpec b{24, 16, 4, 1.0, 1.0, 11};
  const TensorBatch batch = make_blobs(b);
  TensorBatch perm = batch;
  for (int i = 0; i < batch.n(); ++i) perm.data.row(i) = batch.data.row(batch.n() - 1 - i);
  const double s = hd_score(net, batch, 5);
  EXPECT_EQ(s, hd_score(net, batch, 5));
  EXPECT_NEAR(s, hd_score(net, perm, 5), 1e-9 * std::fabs(s));
}

TEST(CrossEntropy, ClosedForms) {
  RowMat uniform_logits = RowMat::Constant(3, 5, 0.7f);
  EXPECT_NEAR(cross_entropy(uniform_logits, {0, 3, 4}), std::log(5.0), 1e-6);
  RowMat two(1, 2);
  two << 1.0f, 0.0f;
  EXPECT_NEAR(cross_entropy(two, {0}), std::log1p(std::exp(-1.0)), 1e-7);
  RowMat confident(1, 3);
  confident << 50.0f, 0.0f, 0.0f;
  EXPECT_LT(cross_entropy(confident, {0}), 1e-12);
  EXPECT_THROW(cross_entropy(two, {2}), std::invalid_argument);
}

TEST(Train, SeparableBlobsReachNinetyFivePercent) {
  const TensorBatch data = make_blobs(BlobSpec{400, 2, 2, 6.0, 1.0, 1});
  std::vector<double> first, last;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainOptions o;
    o.epochs = 50;
    o.seed = seed;
    const auto r = train_tiny(make_mlp(2, {16}, 2, seed), data, o);
    EXPECT_GE(r.train_accuracy, 0.95);
    first.push_back(r.epoch_loss.front());
    last.push_back(r.epoch_loss.back());
  }
  std::sort(first.begin(), first.end());
  std::sort(last.begin(), last.end());
  EXPECT_LT(last[1], first[1]);
}

TEST(Train, ZeroLearningRateKeepsWeights) {
  const TensorBatch data = make_blobs(BlobSpec{64, 4, 2, 3.0, 1.0, 2});
  const RefNet net = make_mlp(4, {8}, 2, 4);
  TrainOptions o;
  o.lr = 0.0;
  o.epochs = 3;
  const auto r = train_tiny(net, data, o);
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (auto* d = std::get_if<Dense>(&net.layers[i])) {
      EXPECT_TRUE(std::get<Dense>(r.net.layers[i]).weight == d->weight);
    }
}

TEST(RefNetIo, RoundTrip) {
  const auto& t = blob_mlp();
  const auto path = std::filesystem::temp_directory_path() / "xpert_refnet_roundtrip.bin";
  save_refnet(path.string(), t.net);
  const RefNet back = load_refnet(path.string());
  EXPECT_EQ(serialized(back), serialized(t.net));
  EXPECT_TRUE(ideal_forward(back, t.test) == ideal_forward(t.net, t.test));
  std::filesystem::remove(path);
}

TEST(RefNetIo, RejectsGarbage) {
  std::istringstream is("not a network");
  EXPECT_THROW(read_refnet(is), std::runtime_error);
}

TEST(Fixture, SeededAndVersioned) {
  const BlobSpec b{32, 4, 2, 2.0, 1.0, 8};
  EXPECT_TRUE(make_blobs(b).data == make_blobs(b).data);
  EXPECT_EQ(kFixtureVersion, 1);
  const TensorBatch img = make_images(ImageSpec{8, 3, 8, 4, 0.5, 1});
  EXPECT_EQ(img.features(), 3 * 8 * 8);
  for (int y : img.labels) EXPECT_LT(y, 4);
}
