#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "caustic/grid.hpp"

namespace testutil {

using namespace caustic;

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Deterministic smooth random even field: a few Gaussian bumps with fixed
/// seed. Decays well before r_max.
inline RField random_smooth_field(const RadialGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> width(0.4, 1.2);
  std::uniform_real_distribution<double> center(0.0, 0.4 * g.r_max);
  RField f(g, Parity::Even);
  for (int b = 0; b < 4; ++b) {
    const double a = amp(rng), w = width(rng), c = center(rng);
    for (int j = 0; j < g.m; ++j) {
      const double rp = (g.r[j] - c) / w, rm = (g.r[j] + c) / w;
      f.v[j] += a * (std::exp(-rp * rp) + std::exp(-rm * rm)); // symmetrized: even
    }
  }
  return f;
}

} // namespace testutil
