#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "becp/rng.hpp"

namespace becp {

/// One-way network delay model.
struct LatencyModel {
  enum class Kind { Uniform, Pareto, Zero };

  Kind kind = Kind::Uniform;
  double lo = 0.05;
  double hi = 0.15;
  double x_m = 0.05;
  double alpha = 5.0;

  static LatencyModel uniform(double lo = 0.05, double hi = 0.15) {
    return {Kind::Uniform, lo, hi, 0.05, 5.0};
  }
  static LatencyModel pareto(double alpha, double x_m = 0.05) {
    return {Kind::Pareto, 0.05, 0.15, x_m, alpha};
  }
  static LatencyModel zero() { return {Kind::Zero, 0.0, 0.0, 0.0, 0.0}; }

  void validate() const {
    if (kind == Kind::Uniform && !(lo >= 0.0 && lo <= hi))
      throw std::invalid_argument("uniform latency needs 0 <= lo <= hi");
    if (kind == Kind::Pareto && !(x_m > 0.0 && alpha > 0.0))
      throw std::invalid_argument("pareto latency needs x_m > 0 and alpha > 0");
  }

  // Uniform: [lo, hi). Pareto: x_m * U^(-1/alpha) with U in (0, 1].
  double sample(SplitMix64& rng) const {
    switch (kind) {
      case Kind::Uniform: return rng.uniform(lo, hi);
      case Kind::Pareto: return x_m * std::pow(1.0 - rng.uniform01(), -1.0 / alpha);
      case Kind::Zero: return 0.0;
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case Kind::Uniform: return "uniform";
      case Kind::Pareto: return "pareto";
      case Kind::Zero: return "zero";
    }
    return "?";
  }
};

}  // namespace becp
