#pragma once

// System size estimation: symmetric push-sum where one seed node holds the
// unit weight, so v/w converges to the number of nodes.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>

#include "becp/core.hpp"

namespace becp {

inline constexpr double kWeightFloor = 1e-9;

inline EstimatorPair ssepInit(bool is_seed) { return {1.0, is_seed ? 1.0 : 0.0}; }

inline void requireSingleSeed(std::size_t seed_count) {
  if (seed_count != 1)
    throw std::invalid_argument("exactly one seed node is required, got " +
                                std::to_string(seed_count));
}

struct Halves {
  EstimatorPair kept;
  EstimatorPair sent;
};

// Dividing by two is exact in binary floating point, so kept + sent == p.
inline Halves halveForSend(const EstimatorPair& p) {
  const EstimatorPair half{p.v * 0.5, p.w * 0.5};
  return {half, half};
}

inline EstimatorPair mergePair(const EstimatorPair& local, const EstimatorPair& incoming) {
  return local + incoming;
}

/// v / w, or nullopt while the weight is below kWeightFloor.
inline std::optional<double> ratioEstimate(const EstimatorPair& p) {
  if (p.w <= kWeightFloor) return std::nullopt;
  return p.v / p.w;
}

inline std::optional<double> getSystemSize(const EstimatorPair& p) { return ratioEstimate(p); }

}  // namespace becp
