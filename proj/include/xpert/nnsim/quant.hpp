#pragma once

// Weight slicing, input bit-serialization and ADC quantization for crossbar inference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace xpert::nnsim {

// Signed weights are stored sign-magnitude: the magnitude is split into unsigned device slices
// (least significant first) and the sign selects the positive or negative column of a
// differential pair.
struct SlicedWeights {
  double scale = 1.0;                          // real weight = code * scale
  std::vector<std::int32_t> codes;             // signed quantized codes
  std::vector<std::int8_t> sign;               // +1, -1 or 0 per weight
  std::vector<std::vector<std::uint8_t>> slices;  // [slice][weight], slice 0 = least significant
  int slice_bits = 4;
};

inline std::int32_t recompose_slices(std::span<const std::uint8_t> slice_values, int slice_bits, int sign) {
  std::int32_t mag = 0;
  for (std::size_t s = 0; s < slice_values.size(); ++s) mag += std::int32_t{slice_values[s]} << (slice_bits * s);
  return sign < 0 ? -mag : mag;
}

inline std::vector<std::uint8_t> slice_code(std::int32_t code, int weight_bits, int slice_bits) {
  const int n = weight_bits / slice_bits;
  const std::uint32_t mag = static_cast<std::uint32_t>(code < 0 ? -code : code);
  const std::uint32_t mask = (1u << slice_bits) - 1;
  std::vector<std::uint8_t> out(n);
  for (int s = 0; s < n; ++s) out[s] = static_cast<std::uint8_t>((mag >> (slice_bits * s)) & mask);
  return out;
}

// Symmetric uniform quantization to weight_bits (codes in [-(2^(b-1)-1), 2^(b-1)-1]) followed by
// slicing. An all-zero tensor gets scale 1.
inline SlicedWeights quantize_slice_weights(std::span<const float> weights, int weight_bits = 8, int slice_bits = 4) {
  if (weight_bits < 2 || slice_bits < 1 || weight_bits % slice_bits != 0)
    throw std::invalid_argument("weight_bits must be a multiple of slice_bits");
  SlicedWeights sw;
  sw.slice_bits = slice_bits;
  const int qmax = (1 << (weight_bits - 1)) - 1;
  double amax = 0.0;
  for (float w : weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("non-finite weight");
    amax = std::max(amax, double(std::fabs(w)));
  }
  sw.scale = amax > 0 ? amax / qmax : 1.0;
  const int n = weight_bits / slice_bits;
  sw.codes.resize(weights.size());
  sw.sign.resize(weights.size());
  sw.slices.assign(n, std::vector<std::uint8_t>(weights.size()));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto q = static_cast<std::int32_t>(std::lround(weights[i] / sw.scale));
    q = std::clamp(q, -qmax, qmax);
    sw.codes[i] = q;
    sw.sign[i] = static_cast<std::int8_t>(q > 0 ? 1 : (q < 0 ? -1 : 0));
    auto sl = slice_code(q, weight_bits, slice_bits);
    for (int s = 0; s < n; ++s) sw.slices[s][i] = sl[s];
  }
  return sw;
}

struct BitPlanes {
  double scale = 1.0;                       // real activation = code * scale
  std::vector<std::uint16_t> codes;
  std::vector<std::vector<std::uint8_t>> planes;  // [bit][element], bit 0 = least significant
};

inline std::vector<std::uint8_t> code_to_planes(std::uint32_t code, int bits) {
  std::vector<std::uint8_t> p(bits);
  for (int b = 0; b < bits; ++b) p[b] = static_cast<std::uint8_t>((code >> b) & 1u);
  return p;
}

inline std::uint32_t planes_to_code(std::span<const std::uint8_t> planes) {
  std::uint32_t c = 0;
  for (std::size_t b = 0; b < planes.size(); ++b) c |= std::uint32_t{planes[b]} << b;
  return c;
}

// Unsigned uniform quantization to `bits`, scaled so the largest activation maps to 2^bits - 1.
// Pass `scale` > 0 to use a fixed scale instead.
inline BitPlanes bit_serialize_inputs(std::span<const float> activations, int bits, double scale = 0.0) {
  if (bits < 1 || bits > 16) throw std::invalid_argument("input precision out of range");
  BitPlanes bp;
  const std::uint32_t qmax = (1u << bits) - 1;
  if (scale <= 0) {
    double amax = 0.0;
    for (float a : activations) amax = std::max(amax, double(a));
    scale = amax > 0 ? amax / qmax : 1.0;
  }
  bp.scale = scale;
  bp.codes.resize(activations.size());
  bp.planes.assign(bits, std::vector<std::uint8_t>(activations.size()));
  for (std::size_t i = 0; i < activations.size(); ++i) {
    if (activations[i] < 0) throw std::invalid_argument("bit_serialize_inputs expects non-negative activations");
    const double q = std::floor(activations[i] / scale + 0.5);
    const auto c = static_cast<std::uint32_t>(std::min<double>(q, qmax));
    bp.codes[i] = static_cast<std::uint16_t>(c);
    for (int b = 0; b < bits; ++b) bp.planes[b][i] = static_cast<std::uint8_t>((c >> b) & 1u);
  }
  return bp;
}

// Uniform ADC with 2^ap levels spanning [0, full_range]: step = full_range / (2^ap - 1), codes
// clipped to [0, 2^ap - 1]. Nearest rounds halves up; Floor truncates.
enum class AdcRounding { Nearest, Floor };

inline double adc_step(int ap, double full_range) { return full_range / double((1 << ap) - 1); }

inline int adc_quantize(double column_sum, int ap, double full_range, AdcRounding rounding = AdcRounding::Nearest) {
  if (ap < 1 || ap > 16) throw std::invalid_argument("ADC precision out of range");
  if (!(full_range > 0)) throw std::invalid_argument("ADC full range must be positive");
  const int top = (1 << ap) - 1;
  const double x = column_sum / adc_step(ap, full_range);
  const double q = rounding == AdcRounding::Floor ? std::floor(x) : std::floor(x + 0.5);
  if (!(q > 0)) return 0;
  return q >= top ? top : static_cast<int>(q);
}

}  // namespace xpert::nnsim
