#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "mapcomm/abstraction.hpp"

namespace mapcomm {

/// Independent generator streams derived from one scenario seed.
enum class Stream : std::uint32_t { kChannel = 1, kActorPerception = 2, kTarget = 3 };

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which)};
  return std::mt19937_64(seq);
}

/// Adds N(0, variance) to every entry. Zero variance draws nothing.
inline Eigen::VectorXd add_gaussian_noise(const Eigen::VectorXd& clean, double variance, std::mt19937_64& rng) {
  if (variance < 0.0) throw std::invalid_argument("noise variance must be non-negative");
  if (variance == 0.0) return clean;
  std::normal_distribution<double> nd(0.0, std::sqrt(variance));
  Eigen::VectorXd out = clean;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += nd(rng);
  return out;
}

/// One message on the Sensor -> Actor link.
struct Transmission {
  Eigen::VectorXd payload;  // observation + channel noise
  Eigen::VectorXd noise;    // the realized perturbation
  OperatorSource source;
  std::int64_t bits = 0;
};

inline Transmission transmit(const Eigen::VectorXd& observation, const OperatorSource& source, const Codebook& codebook,
                             double variance, std::mt19937_64& rng) {
  Transmission t;
  t.payload = add_gaussian_noise(observation, variance, rng);
  t.noise = t.payload - observation;
  t.source = source;
  t.bits = bits_for(static_cast<std::size_t>(observation.size()), source.is_raw(), codebook);
  return t;
}

}  // namespace mapcomm
