#pragma once

#include <cmath>
#include <thread>
#include <vector>

#include "caustic/grid.hpp"
#include "caustic/quadrature.hpp"

namespace caustic {

// ---------------------------------------------------------------------------
// Riesz kernel: radial reduction of |x|^{-gamma} * rho in R^n
// ---------------------------------------------------------------------------

/// Dense radial convolution matrix:
///   (|x|^{-gamma} * rho)(r_i) = sum_j K_ij rho_j w_j,
///   K(r,s) = |S^{n-2}| int_0^pi (r^2 + s^2 - 2 r s cos t)^{-gamma/2} sin^{n-2} t dt.
/// Valid for 0 < gamma < n-1 (the coincidence singularity is integrable).
/// K(r,.) has a |r-s|^{n-1-gamma} kink on the diagonal which would cap the
/// midpoint rule at a large O(dr^2) constant; the diagonal entry is
/// moment-matched so that the three-cell band around it integrates
/// K(r_i,s) s^{n-1} exactly. The matrix stays symmetric.
struct RieszKernel {
  const RadialGrid* grid = nullptr;
  int n = 0;
  double gamma = 0.0;
  int quad_points = 0;
  std::vector<double> k; // row-major m x m

  double at(int i, int j) const { return k[static_cast<std::size_t>(i) * grid->m + j]; }
};

namespace detail {

inline double kernel_entry(double r, double s, int n, double gamma,
                           const QuadratureRule& q, double cn) {
  const double near = std::abs(r - s) / std::min(r, s);
  // |r e1 - s omega|^2 written as (r-s)^2 + 4 r s sin^2(t/2); the naive
  // r^2 + s^2 - 2 r s cos t cancels catastrophically on the diagonal.
  auto integrand = [&](double t) {
    const double sh = std::sin(0.5 * t);
    const double st = std::sin(t);
    const double d2 = (r - s) * (r - s) + 4.0 * r * s * sh * sh;
    return std::pow(d2, -0.5 * gamma) * std::pow(st, n - 2);
  };
  if (near < 0.25) {
    // Near the diagonal the integrand concentrates at t = 0 on the scale
    // |r-s|/sqrt(rs); give that region its own panel.
    const double width = std::abs(r - s) / std::sqrt(r * s);
    const double tc = std::min(0.5, std::max(12.0 * width, 0.02));
    return cn * (gl_integrate(q, integrand, 0.0, tc) + gl_integrate(q, integrand, tc, M_PI));
  }
  return cn * gl_integrate(q, integrand, 0.0, M_PI);
}

} // namespace detail

inline RieszKernel build_kernel(const RadialGrid& grid, int n, double gamma,
                                int quad_points) {
  if (n != grid.n) throw std::invalid_argument("build_kernel: dimension mismatch");
  if (!(gamma > 0.0)) throw std::invalid_argument("build_kernel: gamma must be positive");
  if (!(gamma < n - 1.0))
    throw std::invalid_argument("build_kernel: gamma >= n-1, diagonal diverges");
  if (quad_points < 32) throw std::invalid_argument("build_kernel: quad_points >= 32");

  RieszKernel ker;
  ker.grid = &grid;
  ker.n = n;
  ker.gamma = gamma;
  ker.quad_points = quad_points;
  ker.k.assign(static_cast<std::size_t>(grid.m) * grid.m, 0.0);

  const QuadratureRule q = gauss_legendre(quad_points);
  const double cn = sphere_area(n - 2);
  const int m = grid.m;

  // symmetric in (i,j); fill the upper triangle, rows split across threads
  auto fill_rows = [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      for (int j = i; j < m; ++j) {
        const double v = detail::kernel_entry(grid.r[i], grid.r[j], n, gamma, q, cn);
        ker.k[static_cast<std::size_t>(i) * m + j] = v;
        ker.k[static_cast<std::size_t>(j) * m + i] = v;
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw == 1 || m < 128) {
    fill_rows(0, m);
  } else {
    // upper-triangle rows get shorter with i; interleave by striding
    std::vector<std::thread> pool;
    const int nth = static_cast<int>(std::min<unsigned>(hw, 8));
    for (int t = 0; t < nth; ++t)
      pool.emplace_back([&, t] {
        for (int i = t; i < m; i += nth)
          for (int j = i; j < m; ++j) {
            const double v = detail::kernel_entry(grid.r[i], grid.r[j], n, gamma, q, cn);
            ker.k[static_cast<std::size_t>(i) * m + j] = v;
            ker.k[static_cast<std::size_t>(j) * m + i] = v;
          }
      });
    for (auto& th : pool) th.join();
  }

  // Moment-match the diagonal: replace K_ii so that the band
  // [r_i - 3dr/2, r_i + 3dr/2] integrates K(r_i,s) s^{n-1} exactly.
  const QuadratureRule qs = gauss_legendre(32);
  for (int i = 0; i < m; ++i) {
    const double ri = grid.r[i];
    const double lo = std::max(0.0, ri - 1.5 * grid.dr);
    const double hi = std::min(grid.r_max, ri + 1.5 * grid.dr);
    auto band_integrand = [&](double s) {
      return detail::kernel_entry(ri, s, n, gamma, q, cn) * std::pow(s, n - 1);
    };
    const double band = gl_integrate(qs, band_integrand, lo, ri) +
                        gl_integrate(qs, band_integrand, ri, hi);
    double off = 0.0;
    if (i > 0) off += ker.at(i, i - 1) * grid.w[i - 1];
    if (i + 1 < m) off += ker.at(i, i + 1) * grid.w[i + 1];
    ker.k[static_cast<std::size_t>(i) * m + i] = (band - off) / grid.w[i];
  }
  return ker;
}

/// Matrix-vector apply: returns (|x|^{-gamma} * rho) as an even field.
/// rho may be signed (linearized densities are).
inline RField apply_potential(const RieszKernel& ker, const RField& rho) {
  check_same_grid(ker.grid, rho.grid);
  const RadialGrid& g = *ker.grid;
  RField out(g, Parity::Even);
  for (int i = 0; i < g.m; ++i) {
    double s = 0.0;
    const double* row = &ker.k[static_cast<std::size_t>(i) * g.m];
    for (int j = 0; j < g.m; ++j) s += row[j] * rho.v[j] * g.w[j];
    out.v[i] = s;
  }
  return out;
}

/// K * Re(a conj(b)) - the real bilinear density every coupled phase
/// equation uses.
inline RField apply_potential_pair(const RieszKernel& ker, const CField& a, const CField& b) {
  check_same_grid(a.grid, b.grid);
  RField rho(*a.grid, Parity::Even);
  for (int j = 0; j < a.grid->m; ++j)
    rho.v[j] = a.v[j].real() * b.v[j].real() + a.v[j].imag() * b.v[j].imag();
  return apply_potential(ker, rho);
}

// ---------------------------------------------------------------------------
// Mass profiles and the Poisson special case gamma = n-2
// ---------------------------------------------------------------------------

/// Cumulative mass m0(r) = int_0^r rho s^{n-1} ds and mean mass M0 = m0/r^n,
/// by the trapezoid rule (a virtual node at r = 0 carries integrand 0).
struct MassProfile {
  const RadialGrid* grid = nullptr;
  std::vector<double> m0;
  std::vector<double> M0;
};

inline MassProfile mass_profile(const RField& rho) {
  const RadialGrid& g = *rho.grid;
  MassProfile mp;
  mp.grid = &g;
  mp.m0.resize(g.m);
  mp.M0.resize(g.m);
  auto f = [&](int j) { return rho.v[j] * std::pow(g.r[j], g.n - 1); };
  double acc = 0.5 * (0.0 + f(0)) * g.r[0]; // [0, r_0]
  mp.m0[0] = acc;
  for (int j = 1; j < g.m; ++j) {
    acc += 0.5 * (f(j - 1) + f(j)) * g.dr;
    mp.m0[j] = acc;
  }
  for (int j = 0; j < g.m; ++j) mp.M0[j] = mp.m0[j] / std::pow(g.r[j], g.n);
  return mp;
}

/// d_r V_p = m0(r)/r^{n-1}, the radial Poisson field of the density behind mp.
inline RField poisson_gradient(const MassProfile& mp) {
  const RadialGrid& g = *mp.grid;
  RField out(g, Parity::Odd);
  for (int j = 0; j < g.m; ++j) out.v[j] = mp.m0[j] / std::pow(g.r[j], g.n - 1);
  return out;
}

/// For gamma = n-2 the kernel gradient is an exact multiple of the Poisson
/// gradient; the multiple is -(n-2)|S^{n-1}| analytically. Measure it from
/// the discrete operators so output metadata reports what the code actually
/// realizes.
struct PoissonCalibration {
  double constant = 0.0;  // fitted ratio
  double analytic = 0.0;  // -(n-2)|S^{n-1}|
  double max_rel_spread = 0.0;
};

inline PoissonCalibration calibrate_poisson_constant(const RieszKernel& ker,
                                                     const RField& rho,
                                                     double r_lo, double r_hi) {
  const RadialGrid& g = *ker.grid;
  const RField pot = apply_potential(ker, rho);
  const RField dpot = radial_derivative(pot, 1);
  const RField pg = poisson_gradient(mass_profile(rho));
  double num = 0.0, den = 0.0;
  for (int j = 0; j < g.m; ++j) {
    if (g.r[j] < r_lo || g.r[j] > r_hi) continue;
    num += dpot.v[j] * pg.v[j];
    den += pg.v[j] * pg.v[j];
  }
  PoissonCalibration cal;
  cal.constant = num / den;
  cal.analytic = -(g.n - 2.0) * sphere_area(g.n - 1);
  for (int j = 0; j < g.m; ++j) {
    if (g.r[j] < r_lo || g.r[j] > r_hi) continue;
    if (std::abs(pg.v[j]) < 1e-300) continue;
    const double ratio = dpot.v[j] / pg.v[j];
    cal.max_rel_spread =
        std::max(cal.max_rel_spread, std::abs(ratio - cal.constant) / std::abs(cal.constant));
  }
  return cal;
}

} // namespace caustic
