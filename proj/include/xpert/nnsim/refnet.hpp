#pragma once

// Reference networks: a small sequential stack of conv / dense / batchnorm / relu / max-pool layers.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "xpert/designspace.hpp"

namespace xpert::nnsim {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXf;

// N samples, each flattened channel-major (c, h, w). Dense data uses h = w = 1.
struct TensorBatch {
  int c = 1, h = 1, w = 1;
  RowMat data;
  std::vector<int> labels;

  int n() const { return int(data.rows()); }
  int features() const { return c * h * w; }

  TensorBatch slice(int begin, int count) const {
    TensorBatch b{c, h, w, data.middleRows(begin, count), {}};
    if (!labels.empty()) b.labels.assign(labels.begin() + begin, labels.begin() + begin + count);
    return b;
  }
};

// 3x3 (or 1x1) convolution with same padding and stride 1; weight is out x (in * k * k).
struct Conv {
  int in_ch = 1, out_ch = 1, kernel = 3;
  RowMat weight;
  Vec bias;
};

struct Dense {
  int in_features = 1, out_features = 1;
  RowMat weight;  // out x in
  Vec bias;
};

struct BatchNorm {
  int channels = 1;
  Vec gamma, beta, running_mean, running_var;
  float eps = 1e-5f;
};

struct Relu {};
struct MaxPool {};  // 2x2, stride 2

using Layer = std::variant<Conv, Dense, BatchNorm, Relu, MaxPool>;

struct RefNet {
  int in_c = 1, in_h = 1, in_w = 1;
  int class_count = 2;
  std::vector<Layer> layers;
  double train_accuracy = 0.0;

  std::size_t compute_layer_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
      if (std::holds_alternative<Conv>(l) || std::holds_alternative<Dense>(l)) ++n;
    return n;
  }
};

inline BatchNorm make_batchnorm(int channels) {
  return BatchNorm{channels, Vec::Ones(channels), Vec::Zero(channels), Vec::Zero(channels), Vec::Ones(channels)};
}

// He-normal weights, zero bias.
template <class Rng>
void init_he(RowMat& w, Vec& b, int fan_in, Rng& rng) {
  std::normal_distribution<float> nd(0.0f, std::sqrt(2.0f / float(fan_in)));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = nd(rng);
  b.setZero();
}

inline void reinitialize(RefNet& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : net.layers) {
    if (auto* c = std::get_if<Conv>(&l)) init_he(c->weight, c->bias, c->in_ch * c->kernel * c->kernel, rng);
    else if (auto* d = std::get_if<Dense>(&l)) init_he(d->weight, d->bias, d->in_features, rng);
    else if (auto* bn = std::get_if<BatchNorm>(&l)) *bn = make_batchnorm(bn->channels);
  }
}

inline Conv make_conv(int in_ch, int out_ch, int kernel) {
  return Conv{in_ch, out_ch, kernel, RowMat::Zero(out_ch, in_ch * kernel * kernel), Vec::Zero(out_ch)};
}

inline Dense make_dense(int in_f, int out_f) { return Dense{in_f, out_f, RowMat::Zero(out_f, in_f), Vec::Zero(out_f)}; }

// Multi-layer perceptron: dense -> BN -> ReLU for each hidden width, then a dense classifier.
inline RefNet make_mlp(int in_features, const std::vector<int>& hidden, int classes, std::uint64_t seed) {
  RefNet net;
  net.in_c = in_features;
  net.class_count = classes;
  int f = in_features;
  for (int h : hidden) {
    net.layers.emplace_back(make_dense(f, h));
    net.layers.emplace_back(make_batchnorm(h));
    net.layers.emplace_back(Relu{});
    f = h;
  }
  net.layers.emplace_back(make_dense(f, classes));
  reinitialize(net, seed);
  return net;
}

// Network with the layer widths of a candidate model. Conv layers get BN + ReLU; a 2x2 max-pool is
// inserted wherever the next layer's input is spatially smaller. The last layer emits logits.
inline RefNet net_from_candidate(const CandidateModel& model, std::uint64_t seed) {
  if (model.layers.empty()) throw std::invalid_argument("net_from_candidate: empty model");
  RefNet net;
  const auto& first = model.layers.front().shape;
  net.in_c = model.input_channels;
  net.in_h = first.is_fc ? 1 : first.in_h;
  net.in_w = first.is_fc ? 1 : first.in_w;
  int c = net.in_c, h = net.in_h, w = net.in_w;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& ml = model.layers[l];
    const int out = ml.choice.cd_out;
    if (ml.shape.is_fc) {
      net.layers.emplace_back(make_dense(c * h * w, out));
      c = out;
      h = w = 1;
    } else {
      if (ml.shape.stride != 1) throw std::invalid_argument("net_from_candidate: only stride-1 conv layers");
      net.layers.emplace_back(make_conv(c, out, ml.shape.kernel));
      c = out;
    }
    const bool last = l + 1 == model.layers.size();
    if (!last) {
      net.layers.emplace_back(make_batchnorm(c));
      net.layers.emplace_back(Relu{});
      const auto& next = model.layers[l + 1].shape;
      if (!next.is_fc)
        while (h > next.in_h && h > 1) {
          net.layers.emplace_back(MaxPool{});
          h /= 2;
          w = std::max(1, w / 2);
        }
    }
  }
  net.class_count = c;
  reinitialize(net, seed);
  return net;
}

// Binary container, little-endian:
//   magic "XPRN", u32 version = 1, u32 in_c, in_h, in_w, class_count, layer count
//   per layer: u32 kind (0 conv, 1 dense, 2 batchnorm, 3 relu, 4 maxpool)
//     conv:      u32 in_ch, out_ch, kernel; f32 weight[out*in*k*k]; f32 bias[out]
//     dense:     u32 in, out; f32 weight[out*in]; f32 bias[out]
//     batchnorm: u32 channels; f32 eps; f32 gamma, beta, running_mean, running_var [channels each]
namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_f32(std::ostream& os, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(os, u);
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("refnet: truncated file");
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
}
inline float get_f32(std::istream& is) {
  std::uint32_t u = get_u32(is);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}
template <class M>
void put_array(std::ostream& os, const M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put_f32(os, m.data()[i]);
}
template <class M>
void get_array(std::istream& is, M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_f32(is);
}

}  // namespace detail

inline void write_refnet(std::ostream& os, const RefNet& net) {
  using namespace detail;
  os.write("XPRN", 4);
  put_u32(os, 1);
  put_u32(os, net.in_c);
  put_u32(os, net.in_h);
  put_u32(os, net.in_w);
  put_u32(os, net.class_count);
  put_u32(os, std::uint32_t(net.layers.size()));
  for (const auto& layer : net.layers) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Conv>) {
            put_u32(os, 0);
            put_u32(os, l.in_ch);
            put_u32(os, l.out_ch);
            put_u32(os, l.kernel);
            put_array(os, l.weight);
            put_array(os, l.bias);
          } else if constexpr (std::is_same_v<T, Dense>) {
            put_u32(os, 1);
            put_u32(os, l.in_features);
            put_u32(os, l.out_features);
            put_array(os, l.weight);
            put_array(os, l.bias);
          } else if constexpr (std::is_same_v<T, BatchNorm>) {
            put_u32(os, 2);
            put_u32(os, l.channels);
            put_f32(os, l.eps);
            put_array(os, l.gamma);
            put_array(os, l.beta);
            put_array(os, l.running_mean);
            put_array(os, l.running_var);
          } else if constexpr (std::is_same_v<T, Relu>) {
            put_u32(os, 3);
          } else {
            put_u32(os, 4);
          }
        },
        layer);
  }
}

inline RefNet read_refnet(std::istream& is) {
  using namespace detail;
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "XPRN", 4) != 0) throw std::runtime_error("refnet: bad magic");
  if (get_u32(is) != 1) throw std::runtime_error("refnet: unsupported version");
  RefNet net;
  net.in_c = int(get_u32(is));
  net.in_h = int(get_u32(is));
  net.in_w = int(get_u32(is));
  net.class_count = int(get_u32(is));
  const std::uint32_t n = get_u32(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    switch (get_u32(is)) {
      case 0: {
        int in = int(get_u32(is)), out = int(get_u32(is)), k = int(get_u32(is));
        Conv c = make_conv(in, out, k);
        get_array(is, c.weight);
        get_array(is, c.bias);
        net.layers.emplace_back(std::move(c));
        break;
      }
      case 1: {
        int in = int(get_u32(is)), out = int(get_u32(is));
        Dense d = make_dense(in, out);
        get_array(is, d.weight);
        get_array(is, d.bias);
        net.layers.emplace_back(std::move(d));
        break;
      }
      case 2: {
        BatchNorm bn = make_batchnorm(int(get_u32(is)));
        bn.eps = get_f32(is);
        get_array(is, bn.gamma);
        get_array(is, bn.beta);
        get_array(is, bn.running_mean);
        get_array(is, bn.running_var);
        net.layers.emplace_back(std::move(bn));
        break;
      }
      case 3: net.layers.emplace_back(Relu{}); break;
      case 4: net.layers.emplace_back(MaxPool{}); break;
      default: throw std::runtime_error("refnet: unknown layer kind");
    }
  }
  return net;
}

inline void save_refnet(const std::string& path, const RefNet& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_refnet(os, net);
}

inline RefNet load_refnet(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_refnet(is);
}

}  // namespace xpert::nnsim
