#pragma once

// Seeded synthetic datasets for desk-scale experiments.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "xpert/nnsim/refnet.hpp"

namespace xpert::nnsim {

inline constexpr int kFixtureVersion = 1;

struct BlobSpec {
  int samples = 512;
  int features = 16;
  int classes = 4;
  double separation = 3.0;  // distance scale of class centers
  double spread = 1.0;      // per-feature standard deviation around a center
  std::uint64_t seed = 0;
};

// Gaussian blobs: class centers drawn once from N(0, separation^2) per feature, samples around
// them with `spread`. Labels cycle through the classes.
inline TensorBatch make_blobs(const BlobSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> centers(std::size_t(spec.classes), std::vector<double>(std::size_t(spec.features)));
  for (auto& c : centers)
    for (auto& v : c) v = spec.separation * nd(rng);
  TensorBatch b{spec.features, 1, 1, RowMat(spec.samples, spec.features), std::vector<int>(std::size_t(spec.samples))};
  for (int i = 0; i < spec.samples; ++i) {
    const int y = i % spec.classes;
    b.labels[std::size_t(i)] = y;
    for (int f = 0; f < spec.features; ++f)
      b.data(i, f) = float(centers[std::size_t(y)][std::size_t(f)] + spec.spread * nd(rng));
  }
  return b;
}

struct ImageSpec {
  int samples = 64;
  int channels = 3;
  int size = 32;
  int classes = 10;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

// Class templates of smooth random patterns plus per-pixel Gaussian noise.
inline TensorBatch make_images(const ImageSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 6.283185307179586);
  const int f = spec.channels * spec.size * spec.size;
  std::vector<std::vector<double>> templ(std::size_t(spec.classes), std::vector<double>(std::size_t(f)));
  for (auto& t : templ) {
    const double fx = 1.0 + 3.0 * (ud(rng) / 6.283185307179586), fy = 1.0 + 3.0 * (ud(rng) / 6.283185307179586);
    for (int c = 0; c < spec.channels; ++c) {
      const double phase = ud(rng);
      for (int y = 0; y < spec.size; ++y)
        for (int x = 0; x < spec.size; ++x)
          t[std::size_t((c * spec.size + y) * spec.size + x)] =
              std::sin(fx * x * 6.283185307179586 / spec.size + phase) * std::cos(fy * y * 6.283185307179586 / spec.size);
    }
  }
  TensorBatch b{spec.channels, spec.size, spec.size, RowMat(spec.samples, f), std::vector<int>(std::size_t(spec.samples))};
  for (int i = 0; i < spec.samples; ++i) {
    const int y = i % spec.classes;
    b.labels[std::size_t(i)] = y;
    for (int j = 0; j < f; ++j) b.data(i, j) = float(templ[std::size_t(y)][std::size_t(j)] + spec.noise * nd(rng));
  }
  return b;
}

}  // namespace xpert::nnsim
