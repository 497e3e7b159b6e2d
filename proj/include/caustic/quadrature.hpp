#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace caustic {

struct QuadratureRule {
  std::vector<double> x; // nodes on [-1,1]
  std::vector<double> w;
};

/// Gauss-Legendre nodes by Newton iteration on P_n. Nodes are exact to
/// machine precision for the sizes used here (<= 512).
inline QuadratureRule gauss_legendre(int npts) {
  if (npts < 1) throw std::invalid_argument("gauss_legendre: npts < 1");
  QuadratureRule q;
  q.x.resize(npts);
  q.w.resize(npts);
  const int mhalf = (npts + 1) / 2;
  for (int i = 0; i < mhalf; ++i) {
    // Chebyshev-like initial guess
    double z = std::cos(M_PI * (i + 0.75) / (npts + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < npts; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = npts * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    q.x[i] = -z;
    q.x[npts - 1 - i] = z;
    const double w = 2.0 / ((1.0 - z * z) * pp * pp);
    q.w[i] = w;
    q.w[npts - 1 - i] = w;
  }
  return q;
}

/// Integrate f over [a,b] with a single Gauss-Legendre panel.
template <class F>
double gl_integrate(const QuadratureRule& q, F&& f, double a, double b) {
  const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i) s += q.w[i] * f(c + hw * q.x[i]);
  return s * hw;
}

} // namespace caustic
