#pragma once

// Minimal SGD trainer (ideal forward, backprop through conv/dense/BN/ReLU/max-pool).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "xpert/nnsim/forward.hpp"

namespace xpert::nnsim {

struct TrainOptions {
  int epochs = 30;
  double lr = 0.05;
  int batch_size = 32;
  std::uint64_t seed = 0;
  float bn_momentum = 0.1f;
};

struct TrainResult {
  RefNet net;
  std::vector<double> epoch_loss;  // mean training CE per epoch
  double train_accuracy = 0.0;
};

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Cache {
  Act input;
  // batchnorm
  RowMat xhat;
  Vec inv_std;
  // max-pool: flat input index chosen for each output element
  std::vector<int> argmax;
};

inline Act maxpool_forward_cached(const Act& in, std::vector<int>& arg) {
  const int oh = std::max(1, in.h / 2), ow = std::max(1, in.w / 2);
  Act out{in.c, oh, ow, RowMat(in.x.rows(), in.c * oh * ow)};
  arg.assign(std::size_t(out.x.size()), 0);
  for (Eigen::Index n = 0; n < in.x.rows(); ++n)
    for (int ch = 0; ch < in.c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          int best = -1;
          float m = -std::numeric_limits<float>::infinity();
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int iy = std::min(in.h - 1, 2 * y + dy), ix = std::min(in.w - 1, 2 * x + dx);
              const int idx = (ch * in.h + iy) * in.w + ix;
              if (in.x(n, idx) > m) {
                m = in.x(n, idx);
                best = idx;
              }
            }
          const int o = (ch * oh + y) * ow + x;
          out.x(n, o) = m;
          arg[std::size_t(n * out.x.cols() + o)] = best;
        }
  return out;
}

}  // namespace detail

// One SGD step on a mini-batch; returns the batch cross-entropy.
inline double sgd_train_step(RefNet& net, const TensorBatch& batch, double lr, float momentum) {
  check_input(net, batch);
  std::vector<detail::Cache> caches(net.layers.size());
  Act a{net.in_c, net.in_h, net.in_w, batch.data};
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& layer = net.layers[i];
    auto& cache = caches[i];
    if (std::holds_alternative<Dense>(layer) && (a.h != 1 || a.w != 1)) a = Act{int(a.x.cols()), 1, 1, a.x};
    cache.input = a;
    if (auto* c = std::get_if<Conv>(&layer)) {
      a = conv_forward(*c, a);
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      a = dense_forward(*d, a);
    } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      Vec mean, var;
      channel_stats(a, mean, var);
      bn->running_mean = (1.0f - momentum) * bn->running_mean + momentum * mean;
      bn->running_var = (1.0f - momentum) * bn->running_var + momentum * var;
      const int hw = a.h * a.w;
      cache.inv_std = (var.array() + bn->eps).rsqrt();
      cache.xhat = a.x;
      for (int ch = 0; ch < a.c; ++ch)
        cache.xhat.middleCols(ch * hw, hw).array() = (a.x.middleCols(ch * hw, hw).array() - mean(ch)) * cache.inv_std(ch);
      a = batchnorm_apply(*bn, a, mean, var);
    } else if (std::holds_alternative<Relu>(layer)) {
      a.x = a.x.cwiseMax(0.0f);
    } else {
      a = detail::maxpool_forward_cached(a, cache.argmax);
    }
  }

  const double loss = cross_entropy(a.x, batch.labels);
  const Eigen::Index N = a.x.rows();
  RowMat grad(N, a.x.cols());
  for (Eigen::Index n = 0; n < N; ++n) {
    const float mx = a.x.row(n).maxCoeff();
    Eigen::RowVectorXf e = (a.x.row(n).array() - mx).exp();
    grad.row(n) = e / e.sum();
    grad(n, batch.labels[std::size_t(n)]) -= 1.0f;
  }
  grad /= float(N);

  for (std::size_t i = net.layers.size(); i-- > 0;) {
    auto& layer = net.layers[i];
    const auto& cache = caches[i];
    const Act& in = cache.input;
    if (auto* d = std::get_if<Dense>(&layer)) {
      RowMat gin = grad * d->weight;
      d->weight -= float(lr) * (grad.transpose() * in.x);
      d->bias -= float(lr) * grad.colwise().sum().transpose();
      grad = std::move(gin);
    } else if (auto* c = std::get_if<Conv>(&layer)) {
      const int hw = in.h * in.w;
      RowMat gw = RowMat::Zero(c->weight.rows(), c->weight.cols());
      Vec gb = Vec::Zero(c->out_ch);
      RowMat gin = RowMat::Zero(N, in.x.cols());
      for (Eigen::Index n = 0; n < N; ++n) {
        RowMat col = im2col(in.x.row(n).data(), in.c, in.h, in.w, c->kernel);
        Eigen::Map<const RowMat> gy(grad.row(n).data(), c->out_ch, hw);
        gw += gy * col.transpose();
        gb += gy.rowwise().sum();
        RowMat gcol = c->weight.transpose() * gy;
        col2im_add(gcol, gin.row(n).data(), in.c, in.h, in.w, c->kernel);
      }
      c->weight -= float(lr) * gw;
      c->bias -= float(lr) * gb;
      grad = std::move(gin);
    } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      const int hw = in.h * in.w;
      const double m = double(N) * hw;
      RowMat gin(N, in.x.cols());
      Vec ggamma(bn->channels), gbeta(bn->channels);
      for (int ch = 0; ch < in.c; ++ch) {
        auto dy = grad.middleCols(ch * hw, hw).array();
        auto xh = cache.xhat.middleCols(ch * hw, hw).array();
        const double sum_dy = dy.sum();
        const double sum_dy_xh = (dy * xh).sum();
        const float k = bn->gamma(ch) * cache.inv_std(ch) / float(m);
        gin.middleCols(ch * hw, hw).array() = k * (float(m) * dy - float(sum_dy) - xh * float(sum_dy_xh));
        ggamma(ch) = float(sum_dy_xh);
        gbeta(ch) = float(sum_dy);
      }
      bn->gamma -= float(lr) * ggamma;
      bn->beta -= float(lr) * gbeta;
      grad = std::move(gin);
    } else if (std::holds_alternative<Relu>(layer)) {
      grad = (in.x.array() > 0.0f).select(grad, 0.0f);
    } else {
      RowMat gin = RowMat::Zero(N, in.x.cols());
      const Eigen::Index oc = grad.cols();
      for (Eigen::Index n = 0; n < N; ++n)
        for (Eigen::Index o = 0; o < oc; ++o) gin(n, cache.argmax[std::size_t(n * oc + o)]) += grad(n, o);
      grad = std::move(gin);
    }
  }
  return loss;
}

// Plain mini-batch SGD on cross-entropy over the ideal forward path.
inline TrainResult train_tiny(const RefNet& initial, const TensorBatch& data, const TrainOptions& opt) {
  if (data.labels.size() != std::size_t(data.n())) throw std::invalid_argument("train_tiny: dataset must be labeled");
  TrainResult r{initial, {}, 0.0};
  std::mt19937_64 rng(opt.seed);
  std::vector<int> order(std::size_t(data.n()));
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int seen = 0;
    for (int start = 0; start < data.n(); start += opt.batch_size) {
      const int count = std::min(opt.batch_size, data.n() - start);
      TensorBatch mb{data.c, data.h, data.w, RowMat(count, data.features()), std::vector<int>(std::size_t(count))};
      for (int i = 0; i < count; ++i) {
        const int src = order[std::size_t(start + i)];
        mb.data.row(i) = data.data.row(src);
        mb.labels[std::size_t(i)] = data.labels[std::size_t(src)];
      }
      const double loss = sgd_train_step(r.net, mb, opt.lr, opt.bn_momentum);
      if (!std::isfinite(loss))
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
      total += loss * count;
      seen += count;
    }
    r.epoch_loss.push_back(total / seen);
  }
  r.train_accuracy = accuracy(ideal_forward(r.net, data), data.labels);
  r.net.train_accuracy = r.train_accuracy;
  return r;
}

}  // namespace xpert::nnsim
