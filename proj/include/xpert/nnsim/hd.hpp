#pragma once

// Training-free architecture score from Hamming distances between binary ReLU activation codes.
//
// Each sample's code is the concatenation of (activation > 0) over every ReLU unit of an
// untrained network. With N_A code bits, K_ij = N_A - hamming(c_i, c_j) and the score is
// log|det(K + lambda I)| with lambda = 1e-3 * N_A.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "xpert/designspace.hpp"
#include "xpert/nnsim/forward.hpp"
#include "xpert/nnsim/refnet.hpp"

namespace xpert::nnsim {

inline constexpr double kHdRegularization = 1e-3;

struct BinaryCodes {
  std::size_t bits = 0;
  std::vector<std::vector<std::uint64_t>> words;  // one packed code per sample
};

inline BinaryCodes relu_codes(const RefNet& net, const TensorBatch& batch) {
  const std::size_t n = std::size_t(batch.n());
  std::vector<std::vector<bool>> raw(n);
  ForwardOptions opt;
  opt.on_relu = [&](const Act& a) {
    for (std::size_t s = 0; s < n; ++s)
      for (Eigen::Index j = 0; j < a.x.cols(); ++j) raw[s].push_back(a.x(Eigen::Index(s), j) > 0.0f);
  };
  RefNet copy = net;
  run_forward(copy, batch, opt);
  BinaryCodes codes;
  codes.bits = n ? raw[0].size() : 0;
  codes.words.assign(n, std::vector<std::uint64_t>((codes.bits + 63) / 64, 0));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t b = 0; b < codes.bits; ++b)
      if (raw[s][b]) codes.words[s][b / 64] |= std::uint64_t{1} << (b % 64);
  return codes;
}

inline Eigen::MatrixXd hamming_kernel(const BinaryCodes& codes) {
  const std::size_t n = codes.words.size();
  const auto dim = Eigen::Index(n);
  Eigen::MatrixXd k(dim, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      std::size_t d = 0;
      for (std::size_t w = 0; w < codes.words[i].size(); ++w) d += std::popcount(codes.words[i][w] ^ codes.words[j][w]);
      k(Eigen::Index(i), Eigen::Index(j)) = k(Eigen::Index(j), Eigen::Index(i)) = double(codes.bits - d);
    }
  return k;
}

inline double hd_score_from_codes(const BinaryCodes& codes) {
  if (codes.words.empty()) throw std::invalid_argument("hd_score: empty batch");
  Eigen::MatrixXd k = hamming_kernel(codes);
  const double lambda = kHdRegularization * double(codes.bits);
  k.diagonal().array() += lambda;
  // K is a sum of Gram matrices, so K + lambda I is positive definite when lambda > 0.
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() == Eigen::Success) return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(k);
  return std::log(std::abs(lu.determinant()));
}

// Scores a network with its current weights.
inline double hd_score_of_net(const RefNet& net, const TensorBatch& batch) {
  return hd_score_from_codes(relu_codes(net, batch));
}

// Scores an architecture: fresh seeded He initialization, fresh BN statistics.
inline double hd_score(const RefNet& architecture, const TensorBatch& batch, std::uint64_t seed) {
  RefNet net = architecture;
  reinitialize(net, seed);
  return hd_score_of_net(net, batch);
}

inline double hd_score(const CandidateModel& model, const TensorBatch& batch, std::uint64_t seed) {
  return hd_score_of_net(net_from_candidate(model, seed), batch);
}

}  // namespace xpert::nnsim
