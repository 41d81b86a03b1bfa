//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/rng.hpp"

#include <cmath>
#include <numbers>

namespace erpflow {

double Rng::normal(double mean, double stddev) {
  double u1 = real();
  while (u1 <= 0.0) u1 = real();
  const double u2 = real();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace erpflow
