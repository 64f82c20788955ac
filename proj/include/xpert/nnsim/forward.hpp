#pragma once

// Ideal and crossbar-aware noisy inference, batchnorm adaptation and classification metrics.
//
// In the noisy path every conv/dense layer runs as it would on crossbars: weights are quantized
// to `weight_bits`, sliced into `slice_bits` device slices on differential column pairs; inputs
// are quantized per sample to `ip` bits and applied one bit plane per read cycle; rows are split
// into crossbar-sized chunks whose column sums are digitized by an `ap`-bit ADC; digital
// shift-and-add recombines bits, slices and chunks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "xpert/designspace.hpp"
#include "xpert/nnsim/quant.hpp"
#include "xpert/nnsim/refnet.hpp"

namespace xpert::nnsim {

struct LayerPrecision {
  int ap = 8;
  int ip = 8;
  friend bool operator==(const LayerPrecision&, const LayerPrecision&) = default;
};

struct NoiseSpec {
  double sigma_over_mu = 0.20;
  std::uint64_t seed = 0;
  bool quantization = true;  // ADC partial-sum quantization
  bool variation = true;     // multiplicative conductance variation
  // Use the largest observed partial sum of each chunk as ADC full range instead of the
  // worst case rows * (2^slice_bits - 1).
  bool calibrated_adc_range = false;
  AdcRounding adc_rounding = AdcRounding::Floor;
};

struct XbarGeometry {
  int xbar_size = 64;
  int weight_bits = 8;
  int slice_bits = 4;

  static XbarGeometry from(const PlatformParams& p) { return {p.xbar_size, p.weight_bits, p.weight_slice_bits}; }
};

// Activations flowing through the network: N rows of channel-major (c, h, w) features.
struct Act {
  int c = 1, h = 1, w = 1;
  RowMat x;
};

inline Act to_act(const TensorBatch& b) { return Act{b.c, b.h, b.w, b.data}; }

// Unfolds one sample into a (c*k*k) x (h*w) matrix with zero padding k/2.
inline RowMat im2col(const float* sample, int c, int h, int w, int k) {
  const int pad = k / 2;
  RowMat col = RowMat::Zero(c * k * k, h * w);
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ch * k + ky) * k + kx;
        for (int y = 0; y < h; ++y) {
          const int iy = y + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int x = 0; x < w; ++x) {
            const int ix = x + kx - pad;
            if (ix < 0 || ix >= w) continue;
            col(row, y * w + x) = sample[(ch * h + iy) * w + ix];
          }
        }
      }
  return col;
}

inline void col2im_add(const RowMat& col, float* sample, int c, int h, int w, int k) {
  const int pad = k / 2;
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ch * k + ky) * k + kx;
        for (int y = 0; y < h; ++y) {
          const int iy = y + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int x = 0; x < w; ++x) {
            const int ix = x + kx - pad;
            if (ix < 0 || ix >= w) continue;
            sample[(ch * h + iy) * w + ix] += col(row, y * w + x);
          }
        }
      }
}

// Multiplies every cell conductance by an independent N(1, sigma) factor.
template <class Rng>
void apply_variation(RowMat& conductance, double sigma, Rng& rng) {
  if (sigma <= 0) return;
  std::normal_distribution<double> nd(1.0, sigma);
  for (Eigen::Index i = 0; i < conductance.size(); ++i) conductance.data()[i] = float(conductance.data()[i] * nd(rng));
}

// Analog column sums of one input bit plane against a rows x cols conductance matrix, one row of
// the result per crossbar chunk of `xbar_size` rows.
inline Eigen::MatrixXd crossbar_matvec(const RowMat& conductance, std::span<const std::uint8_t> plane, int xbar_size) {
  const Eigen::Index rows = conductance.rows();
  if (Eigen::Index(plane.size()) != rows) throw std::invalid_argument("crossbar_matvec: plane length mismatch");
  const Eigen::Index chunks = (rows + xbar_size - 1) / xbar_size;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(chunks, conductance.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!plane[r]) continue;
    out.row(r / xbar_size) += conductance.row(r).cast<double>();
  }
  return out;
}

namespace detail {

// Noisy crossbar product for P input vectors (rows of `x`, length R) against weight (O x R).
// `row_scale[p]` is the input quantization step of row p. Returns P x O real outputs (no bias).
template <class Rng>
RowMat crossbar_matmul(const RowMat& x, const RowMat& weight, const std::vector<double>& row_scale,
                       const LayerPrecision& prec, const NoiseSpec& noise, const XbarGeometry& g, Rng& rng) {
  const Eigen::Index P = x.rows(), R = x.cols(), O = weight.rows();
  const SlicedWeights sw =
      quantize_slice_weights(std::span<const float>(weight.data(), std::size_t(weight.size())), g.weight_bits, g.slice_bits);
  const int n_slices = g.weight_bits / g.slice_bits;
  const double slice_max = double((1 << g.slice_bits) - 1);

  // Conductance matrices (R x O) per slice and column polarity.
  std::vector<RowMat> cond;  // index 2*s + (negative ? 1 : 0)
  for (int s = 0; s < n_slices; ++s)
    for (int neg = 0; neg < 2; ++neg) {
      RowMat gm = RowMat::Zero(R, O);
      for (Eigen::Index o = 0; o < O; ++o)
        for (Eigen::Index r = 0; r < R; ++r) {
          const std::size_t idx = std::size_t(o * R + r);
          if (sw.sign[idx] == (neg ? -1 : 1)) gm(r, o) = sw.slices[s][idx];
        }
      if (noise.variation) apply_variation(gm, noise.sigma_over_mu, rng);
      cond.push_back(std::move(gm));
    }

  const std::uint32_t qmax = (1u << prec.ip) - 1;
  bool any_negative = false;
  for (Eigen::Index i = 0; i < x.size(); ++i) any_negative |= x.data()[i] < 0;

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(P, O);
  const int parts = any_negative ? 2 : 1;
  for (int part = 0; part < parts; ++part) {
    const double part_sign = part == 0 ? 1.0 : -1.0;
    // Integer input codes of this polarity.
    Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> codes(P, R);
    for (Eigen::Index p = 0; p < P; ++p)
      for (Eigen::Index r = 0; r < R; ++r) {
        const double v = double(x(p, r)) * part_sign;
        codes(p, r) = v > 0 ? std::uint32_t(std::min<double>(std::floor(v / row_scale[p] + 0.5), qmax)) : 0u;
      }
    for (int b = 0; b < prec.ip; ++b) {
      RowMat plane(P, R);
      for (Eigen::Index i = 0; i < plane.size(); ++i) plane.data()[i] = float((codes.data()[i] >> b) & 1u);
      for (Eigen::Index r0 = 0; r0 < R; r0 += g.xbar_size) {
        const Eigen::Index len = std::min<Eigen::Index>(g.xbar_size, R - r0);
        for (int s = 0; s < n_slices; ++s) {
          const double weight_of = part_sign * std::ldexp(1.0, b + g.slice_bits * s);
          for (int neg = 0; neg < 2; ++neg) {
            Eigen::MatrixXd sums =
                (plane.middleCols(r0, len) * cond[std::size_t(2 * s + neg)].middleRows(r0, len)).cast<double>();
            if (noise.quantization) {
              double full_range = double(len) * slice_max;
              if (noise.calibrated_adc_range) {
                const double m = sums.maxCoeff();
                full_range = m > 0 ? m : 1.0;
              }
              const double step = adc_step(prec.ap, full_range);
              for (Eigen::Index i = 0; i < sums.size(); ++i)
                sums.data()[i] = adc_quantize(sums.data()[i], prec.ap, full_range, noise.adc_rounding) * step;
            }
            if (neg) acc -= weight_of * sums;
            else acc += weight_of * sums;
          }
        }
      }
    }
  }
  RowMat y(P, O);
  for (Eigen::Index p = 0; p < P; ++p)
    for (Eigen::Index o = 0; o < O; ++o) y(p, o) = float(acc(p, o) * sw.scale * row_scale[p]);
  return y;
}

inline std::vector<double> per_sample_input_scale(const Act& a, int ip) {
  const double qmax = double((1u << ip) - 1);
  std::vector<double> s(std::size_t(a.x.rows()));
  for (Eigen::Index n = 0; n < a.x.rows(); ++n) {
    const double m = a.x.row(n).cwiseAbs().maxCoeff();
    s[std::size_t(n)] = m > 0 ? m / qmax : 1.0;
  }
  return s;
}

}  // namespace detail

enum class BnMode { Running, Batch, BatchUpdate };

struct ForwardOptions {
  // Per compute layer precisions; empty runs the ideal floating-point path.
  std::vector<LayerPrecision> precision;
  NoiseSpec noise;
  XbarGeometry geometry;
  BnMode bn = BnMode::Running;
  float momentum = 0.1f;
  // Called with the output of every ReLU.
  std::function<void(const Act&)> on_relu;
};

inline Act conv_forward(const Conv& c, const Act& in) {
  if (in.c != c.in_ch) throw std::invalid_argument("conv: channel mismatch");
  Act out{c.out_ch, in.h, in.w, RowMat(in.x.rows(), c.out_ch * in.h * in.w)};
  for (Eigen::Index n = 0; n < in.x.rows(); ++n) {
    RowMat col = im2col(in.x.row(n).data(), in.c, in.h, in.w, c.kernel);
    RowMat y = c.weight * col;
    y.colwise() += c.bias;
    out.x.row(n) = Eigen::Map<const Eigen::RowVectorXf>(y.data(), y.size());
  }
  return out;
}

template <class Rng>
Act conv_forward_noisy(const Conv& c, const Act& in, const LayerPrecision& prec, const ForwardOptions& opt, Rng& rng) {
  if (in.c != c.in_ch) throw std::invalid_argument("conv: channel mismatch");
  const int hw = in.h * in.w;
  const Eigen::Index N = in.x.rows();
  RowMat x(N * hw, c.in_ch * c.kernel * c.kernel);
  const auto sample_scale = detail::per_sample_input_scale(in, prec.ip);
  std::vector<double> row_scale(std::size_t(N * hw));
  for (Eigen::Index n = 0; n < N; ++n) {
    RowMat col = im2col(in.x.row(n).data(), in.c, in.h, in.w, c.kernel);
    x.middleRows(n * hw, hw) = col.transpose();
    std::fill_n(row_scale.begin() + n * hw, hw, sample_scale[std::size_t(n)]);
  }
  RowMat y = detail::crossbar_matmul(x, c.weight, row_scale, prec, opt.noise, opt.geometry, rng);
  Act out{c.out_ch, in.h, in.w, RowMat(N, c.out_ch * hw)};
  for (Eigen::Index n = 0; n < N; ++n)
    for (int o = 0; o < c.out_ch; ++o)
      for (int p = 0; p < hw; ++p) out.x(n, o * hw + p) = y(n * hw + p, o) + c.bias(o);
  return out;
}

inline Act dense_forward(const Dense& d, const Act& in) {
  if (in.x.cols() != d.in_features) throw std::invalid_argument("dense: feature mismatch");
  Act out{d.out_features, 1, 1, in.x * d.weight.transpose()};
  out.x.rowwise() += d.bias.transpose();
  return out;
}

template <class Rng>
Act dense_forward_noisy(const Dense& d, const Act& in, const LayerPrecision& prec, const ForwardOptions& opt, Rng& rng) {
  if (in.x.cols() != d.in_features) throw std::invalid_argument("dense: feature mismatch");
  const auto scale = detail::per_sample_input_scale(in, prec.ip);
  Act out{d.out_features, 1, 1, detail::crossbar_matmul(in.x, d.weight, scale, prec, opt.noise, opt.geometry, rng)};
  out.x.rowwise() += d.bias.transpose();
  return out;
}

// Per-channel mean and (biased) variance over samples and spatial positions.
inline void channel_stats(const Act& a, Vec& mean, Vec& var) {
  const int hw = a.h * a.w;
  const double count = double(a.x.rows()) * hw;
  mean = Vec::Zero(a.c);
  var = Vec::Zero(a.c);
  for (int ch = 0; ch < a.c; ++ch) {
    double s = 0, s2 = 0;
    for (Eigen::Index n = 0; n < a.x.rows(); ++n)
      for (int p = 0; p < hw; ++p) {
        const double v = a.x(n, ch * hw + p);
        s += v;
        s2 += v * v;
      }
    const double m = s / count;
    mean(ch) = float(m);
    var(ch) = float(std::max(0.0, s2 / count - m * m));
  }
}

inline Act batchnorm_apply(const BatchNorm& bn, const Act& in, const Vec& mean, const Vec& var) {
  if (in.c != bn.channels) throw std::invalid_argument("batchnorm: channel mismatch");
  Act out = in;
  const int hw = in.h * in.w;
  for (int ch = 0; ch < in.c; ++ch) {
    const float inv = bn.gamma(ch) / std::sqrt(var(ch) + bn.eps);
    const float shift = bn.beta(ch) - mean(ch) * inv;
    out.x.middleCols(ch * hw, hw).array() = in.x.middleCols(ch * hw, hw).array() * inv + shift;
  }
  return out;
}

inline Act maxpool_forward(const Act& in) {
  const int oh = std::max(1, in.h / 2), ow = std::max(1, in.w / 2);
  Act out{in.c, oh, ow, RowMat(in.x.rows(), in.c * oh * ow)};
  for (Eigen::Index n = 0; n < in.x.rows(); ++n)
    for (int ch = 0; ch < in.c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          float m = -std::numeric_limits<float>::infinity();
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int iy = std::min(in.h - 1, 2 * y + dy), ix = std::min(in.w - 1, 2 * x + dx);
              m = std::max(m, in.x(n, (ch * in.h + iy) * in.w + ix));
            }
          out.x(n, (ch * oh + y) * ow + x) = m;
        }
  return out;
}

inline void check_input(const RefNet& net, const TensorBatch& batch) {
  if (batch.features() != net.in_c * net.in_h * net.in_w || batch.data.cols() != batch.features())
    throw std::invalid_argument("batch shape does not match the network input");
}

// Runs the network; BN running statistics are updated in place when opt.bn == BatchUpdate.
inline RowMat run_forward(RefNet& net, const TensorBatch& batch, const ForwardOptions& opt) {
  check_input(net, batch);
  const bool noisy = !opt.precision.empty();
  if (noisy && opt.precision.size() != net.compute_layer_count())
    throw std::invalid_argument("need one precision per compute layer (" + std::to_string(net.compute_layer_count()) + ")");
  std::mt19937_64 rng(opt.noise.seed);
  Act a{net.in_c, net.in_h, net.in_w, batch.data};
  std::size_t compute_idx = 0;
  for (auto& layer : net.layers) {
    if (auto* c = std::get_if<Conv>(&layer)) {
      a = noisy ? conv_forward_noisy(*c, a, opt.precision[compute_idx], opt, rng) : conv_forward(*c, a);
      ++compute_idx;
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      if (a.h != 1 || a.w != 1) a = Act{int(a.x.cols()), 1, 1, a.x};
      a = noisy ? dense_forward_noisy(*d, a, opt.precision[compute_idx], opt, rng) : dense_forward(*d, a);
      ++compute_idx;
    } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      if (opt.bn == BnMode::Running) {
        a = batchnorm_apply(*bn, a, bn->running_mean, bn->running_var);
      } else {
        Vec mean, var;
        channel_stats(a, mean, var);
        if (opt.bn == BnMode::BatchUpdate) {
          bn->running_mean = (1.0f - opt.momentum) * bn->running_mean + opt.momentum * mean;
          bn->running_var = (1.0f - opt.momentum) * bn->running_var + opt.momentum * var;
        }
        a = batchnorm_apply(*bn, a, mean, var);
      }
    } else if (std::holds_alternative<Relu>(layer)) {
      a.x = a.x.cwiseMax(0.0f);
      if (opt.on_relu) opt.on_relu(a);
    } else {
      a = maxpool_forward(a);
    }
  }
  return a.x;
}

inline RowMat ideal_forward(const RefNet& net, const TensorBatch& batch) {
  RefNet copy = net;
  return run_forward(copy, batch, ForwardOptions{});
}

inline RowMat noisy_forward(const RefNet& net, const TensorBatch& batch, const std::vector<LayerPrecision>& precision,
                            const NoiseSpec& noise, const XbarGeometry& geometry = {}) {
  ForwardOptions opt;
  opt.precision = precision;
  opt.noise = noise;
  opt.geometry = geometry;
  RefNet copy = net;
  return run_forward(copy, batch, opt);
}

// Recomputes BN running statistics from noisy activations; weights are untouched. Batch i draws
// its device variation from seed noise.seed + i.
inline RefNet bn_adapt(const RefNet& net, const std::vector<TensorBatch>& batches,
                       const std::vector<LayerPrecision>& precision, const NoiseSpec& noise,
                       const XbarGeometry& geometry = {}, float momentum = 0.1f) {
  if (batches.empty()) throw std::invalid_argument("bn_adapt: no batches");
  RefNet out = net;
  ForwardOptions opt;
  opt.precision = precision;
  opt.geometry = geometry;
  opt.bn = BnMode::BatchUpdate;
  opt.momentum = momentum;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    opt.noise = noise;
    opt.noise.seed = noise.seed + i;
    run_forward(out, batches[i], opt);
  }
  return out;
}

inline double cross_entropy(const RowMat& logits, const std::vector<int>& labels) {
  if (std::size_t(logits.rows()) != labels.size()) throw std::invalid_argument("cross_entropy: label count mismatch");
  double total = 0.0;
  for (Eigen::Index n = 0; n < logits.rows(); ++n) {
    const int y = labels[std::size_t(n)];
    if (y < 0 || y >= logits.cols()) throw std::invalid_argument("cross_entropy: label out of range");
    const double mx = logits.row(n).maxCoeff();
    double s = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) s += std::exp(double(logits(n, k)) - mx);
    total += std::log(s) + mx - double(logits(n, y));
  }
  return total / double(logits.rows());
}

inline double accuracy(const RowMat& logits, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  int correct = 0;
  for (Eigen::Index n = 0; n < logits.rows(); ++n) {
    Eigen::Index best;
    logits.row(n).maxCoeff(&best);
    correct += int(best) == labels[std::size_t(n)] ? 1 : 0;
  }
  return double(correct) / double(labels.size());
}

}  // namespace xpert::nnsim
