#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "caustic/grid.hpp"

namespace caustic {

/// Initial amplitude a0 as a callable on r > 0, so quadrature-sensitive
/// consumers (mass profiles, characteristic launches) can evaluate it at
/// arbitrary radii instead of interpolating grid samples.
struct InitialData {
  std::string kind;
  std::function<double(double)> amp;

  double operator()(double r) const { return amp(r); }

  CField sample(const RadialGrid& g) const {
    return make_field<cplx>(g, Parity::Even, [&](double r) { return cplx(amp(r), 0.0); });
  }
  RField sample_real(const RadialGrid& g) const {
    return make_field<double>(g, Parity::Even, [&](double r) { return amp(r); });
  }
  RField density(const RadialGrid& g) const {
    return make_field<double>(g, Parity::Even, [&](double r) {
      const double a = amp(r);
      return a * a;
    });
  }
};

inline InitialData make_gaussian(double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian: sigma must be positive");
  return {"gaussian", [sigma](double r) { return std::exp(-r * r / (2.0 * sigma * sigma)); }};
}

inline InitialData make_constant(double c) {
  return {"constant", [c](double) { return c; }};
}

/// The sharp breakdown profile a0(r) = r^{-5/2} exp(-1/(2r)). Vanishes to
/// all orders at r = 0 and is square integrable in R^4.
inline InitialData make_peak_profile() {
  return {"example16", [](double r) {
            if (r <= 0.0) return 0.0;
            return std::pow(r, -2.5) * std::exp(-0.5 / r);
          }};
}

/// Two-column CSV (r,value), linearly interpolated, zero outside the table.
inline InitialData make_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("initial data file not readable: " + path);
  auto rs = std::make_shared<std::vector<double>>();
  auto vs = std::make_shared<std::vector<double>>();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double r, v;
    if (ls >> r >> v) {
      if (!rs->empty() && r <= rs->back())
        throw std::invalid_argument("initial data file: radii must increase");
      rs->push_back(r);
      vs->push_back(v);
    }
  }
  if (rs->size() < 2) throw std::invalid_argument("initial data file: need >= 2 rows");
  return {"file:" + path, [rs, vs](double r) {
            if (r <= rs->front() || r >= rs->back()) return 0.0;
            auto it = std::upper_bound(rs->begin(), rs->end(), r);
            const std::size_t i = static_cast<std::size_t>(it - rs->begin());
            const double t = (r - (*rs)[i - 1]) / ((*rs)[i] - (*rs)[i - 1]);
            return (1.0 - t) * (*vs)[i - 1] + t * (*vs)[i];
          }};
}

} // namespace caustic
