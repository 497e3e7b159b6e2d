#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "caustic/rational.hpp"

namespace caustic {

using cplx = std::complex<double>;

/// Surface area of the unit d-sphere S^d embedded in R^{d+1}.
inline double sphere_area(int d) {
  // |S^d| = 2 pi^{(d+1)/2} / Gamma((d+1)/2)
  return 2.0 * std::pow(M_PI, 0.5 * (d + 1)) / std::tgamma(0.5 * (d + 1));
}

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

/// Physical and scaling parameters of one run. The semiclassical parameter
/// may be given either as eps or as h = eps^{1-alpha/gamma}; the other is
/// derived. tau0 = h^{alpha/(gamma-alpha)} = eps^{alpha/gamma} is the moving
/// initial time of the rescaled problem.
struct ModelParams {
  int n = 4;
  double gamma = 2.0;
  double alpha = 1.0;
  double lambda = 1.0;
  double eps = 0.0; // 0 = unset
  double h = 0.0;   // 0 = unset
  double T_final = 0.5;

  // exact forms, kept when the user supplied rationals (exponent-set work)
  std::optional<Rational> gamma_exact;
  std::optional<Rational> alpha_exact;

  void set_eps(double e) {
    if (e <= 0.0) throw std::invalid_argument("ModelParams: eps must be positive");
    eps = e;
    h = std::pow(e, 1.0 - alpha / gamma);
  }
  void set_h(double hh) {
    if (hh <= 0.0) throw std::invalid_argument("ModelParams: h must be positive");
    h = hh;
    eps = std::pow(hh, gamma / (gamma - alpha));
  }

  double tau0() const {
    if (h <= 0.0) throw std::logic_error("ModelParams: h not set");
    return std::pow(h, alpha / (gamma - alpha));
  }

  /// Parameter ranges shared by every module: n >= 3,
  /// max(1, n/2-2) < gamma <= n-2, 0 < alpha < gamma.
  void validate_core() const {
    if (n < 3) throw std::invalid_argument("ModelParams: n >= 3 required");
    const double glo = std::max(1.0, 0.5 * n - 2.0);
    if (!(gamma > glo && gamma <= n - 2.0))
      throw std::invalid_argument("ModelParams: gamma outside (max(1,n/2-2), n-2]");
    if (!(alpha > 0.0 && alpha < gamma))
      throw std::invalid_argument("ModelParams: alpha outside (0, gamma)");
    if (h > 0.0 && eps > 0.0) {
      const double hchk = std::pow(eps, 1.0 - alpha / gamma);
      if (std::abs(h - hchk) > 1e-12 * std::max(1.0, hchk))
        throw std::invalid_argument("ModelParams: h != eps^{1-alpha/gamma}");
    }
    if (h > 0.0) {
      const double t0 = tau0();
      if (!(t0 > 0.0 && t0 < 1.0))
        throw std::invalid_argument("ModelParams: tau0 outside (0,1)");
    }
  }

  /// The main asymptotics additionally require n >= 4.
  void validate_asymptotics() const {
    validate_core();
    if (n < 4) throw std::invalid_argument("ModelParams: n >= 4 required for asymptotics");
  }
};

// ---------------------------------------------------------------------------
// Grid and fields
// ---------------------------------------------------------------------------

/// Uniform cell-centered radial mesh on (0, r_max]: r_j = (j+1/2) dr.
/// No node sits at r = 0, so 1/r factors are always finite; parity ghost
/// cells recover second order accuracy at the axis.
struct RadialGrid {
  int n = 4; // ambient dimension; quadrature weight is r^{n-1} dr
  double r_max = 1.0;
  int m = 0;
  double dr = 0.0;
  std::vector<double> r;
  std::vector<double> w;

  RadialGrid() = default;
  RadialGrid(int n_, double r_max_, int m_) : n(n_), r_max(r_max_), m(m_) {
    if (n < 3) throw std::invalid_argument("RadialGrid: n >= 3 required");
    if (m < 8) throw std::invalid_argument("RadialGrid: need at least 8 cells");
    if (r_max <= 0.0) throw std::invalid_argument("RadialGrid: r_max must be positive");
    dr = r_max / m;
    r.resize(m);
    w.resize(m);
    for (int j = 0; j < m; ++j) {
      r[j] = (j + 0.5) * dr;
      w[j] = std::pow(r[j], n - 1) * dr;
    }
  }

  bool same_as(const RadialGrid& o) const {
    return n == o.n && m == o.m && r_max == o.r_max;
  }
};

enum class Parity { Even, Odd };

/// Radial samples tied to a grid. The grid must outlive the field.
template <class T>
struct RadialField {
  const RadialGrid* grid = nullptr;
  Parity parity = Parity::Even;
  std::vector<T> v;

  RadialField() = default;
  RadialField(const RadialGrid& g, Parity p) : grid(&g), parity(p), v(g.m, T{}) {}
  RadialField(const RadialGrid& g, Parity p, std::vector<T> vals)
      : grid(&g), parity(p), v(std::move(vals)) {
    if (static_cast<int>(v.size()) != g.m)
      throw std::invalid_argument("RadialField: value count != grid.m");
  }

  int size() const { return grid ? grid->m : 0; }
  T& operator[](int j) { return v[j]; }
  const T& operator[](int j) const { return v[j]; }
};

using RField = RadialField<double>;
using CField = RadialField<cplx>;

template <class T, class F>
RadialField<T> make_field(const RadialGrid& g, Parity p, F&& f) {
  RadialField<T> out(g, p);
  for (int j = 0; j < g.m; ++j) out.v[j] = f(g.r[j]);
  return out;
}

inline void check_same_grid(const RadialGrid* a, const RadialGrid* b) {
  if (!a || !b || !a->same_as(*b))
    throw std::invalid_argument("field grid mismatch");
}

// ---------------------------------------------------------------------------
// Derivatives
// ---------------------------------------------------------------------------

namespace detail {
template <class T>
inline T ghost(const RadialField<T>& f) {
  // mirror cell at -dr/2
  return f.parity == Parity::Even ? f.v[0] : -f.v[0];
}
} // namespace detail

/// First or second radial derivative, second-order accurate.
/// Centered in the interior, parity ghost at j = 0, one-sided at j = m-1.
template <class T>
RadialField<T> radial_derivative(const RadialField<T>& f, int order) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("radial_derivative: order must be 1 or 2");
  const RadialGrid& g = *f.grid;
  const int m = g.m;
  const double dr = g.dr;
  RadialField<T> out(g, order == 1
                            ? (f.parity == Parity::Even ? Parity::Odd : Parity::Even)
                            : f.parity);
  const T gst = detail::ghost(f);
  if (order == 1) {
    out.v[0] = (f.v[1] - gst) / (2.0 * dr);
    for (int j = 1; j + 1 < m; ++j) out.v[j] = (f.v[j + 1] - f.v[j - 1]) / (2.0 * dr);
    out.v[m - 1] = (3.0 * f.v[m - 1] - 4.0 * f.v[m - 2] + f.v[m - 3]) / (2.0 * dr);
  } else {
    out.v[0] = (f.v[1] - 2.0 * f.v[0] + gst) / (dr * dr);
    for (int j = 1; j + 1 < m; ++j)
      out.v[j] = (f.v[j + 1] - 2.0 * f.v[j] + f.v[j - 1]) / (dr * dr);
    out.v[m - 1] = (2.0 * f.v[m - 1] - 5.0 * f.v[m - 2] + 4.0 * f.v[m - 3] - f.v[m - 4]) /
                   (dr * dr);
  }
  return out;
}

/// Upwind-biased first derivative for advection terms: the stencil leans
/// against the local transport velocity. First order; diagnostics near
/// breakdown only.
template <class T>
RadialField<T> radial_derivative_upwind(const RadialField<T>& f, const RField& vel) {
  const RadialGrid& g = *f.grid;
  const int m = g.m;
  const double dr = g.dr;
  RadialField<T> out(g, f.parity == Parity::Even ? Parity::Odd : Parity::Even);
  const T gst = detail::ghost(f);
  for (int j = 0; j < m; ++j) {
    if (vel.v[j] >= 0.0) {
      const T fm = (j == 0) ? gst : f.v[j - 1];
      out.v[j] = (f.v[j] - fm) / dr;
    } else {
      const T fp = (j == m - 1) ? f.v[m - 1] : f.v[j + 1];
      out.v[j] = (fp - f.v[j]) / dr;
    }
  }
  return out;
}

/// Radial Laplacian in conservation form:
///   (L f)_j = (1/r_j^{n-1}) d_r(r^{n-1} d_r f)
/// discretized with face fluxes. The inner face area vanishes at r = 0, so
/// no ghost is needed there; the outer ghost is Dirichlet zero. L is
/// self-adjoint in the weighted inner product sum f g r^{n-1} dr, which is
/// what makes Crank-Nicolson exactly norm-preserving. The cost of keeping
/// the midpoint weights r_j^{n-1} dr in the normalization is an O(1)
/// truncation error confined to the axis cell (its measure is O(dr^n));
/// consistency holds pointwise away from the axis and at second order in
/// the weighted norm.
template <class T>
RadialField<T> radial_laplacian(const RadialField<T>& f) {
  const RadialGrid& g = *f.grid;
  const int m = g.m;
  const double dr = g.dr;
  RadialField<T> out(g, f.parity);
  for (int j = 0; j < m; ++j) {
    const double rl = j * dr;         // inner face
    const double rr = (j + 1) * dr;   // outer face
    const double bl = std::pow(rl, g.n - 1);
    const double br = std::pow(rr, g.n - 1);
    const T fl = (j == 0) ? T{} : bl * (f.v[j] - f.v[j - 1]);
    const T fr = (j == m - 1) ? br * (T{} - f.v[j]) : br * (f.v[j + 1] - f.v[j]);
    out.v[j] = (fr - fl) / (std::pow(g.r[j], g.n - 1) * dr * dr);
  }
  return out;
}

/// Off-diagonal/diagonal coefficients of the flux Laplacian, for implicit
/// solves: (L f)_j = lo_j f_{j-1} + di_j f_j + up_j f_{j+1}.
struct LaplacianStencil {
  std::vector<double> lo, di, up;
};

inline LaplacianStencil laplacian_stencil(const RadialGrid& g) {
  LaplacianStencil s;
  s.lo.assign(g.m, 0.0);
  s.di.assign(g.m, 0.0);
  s.up.assign(g.m, 0.0);
  for (int j = 0; j < g.m; ++j) {
    const double bl = std::pow(j * g.dr, g.n - 1);
    const double br = std::pow((j + 1) * g.dr, g.n - 1);
    const double scale = 1.0 / (std::pow(g.r[j], g.n - 1) * g.dr * g.dr);
    if (j > 0) s.lo[j] = bl * scale;
    s.di[j] = -(bl + br) * scale;
    if (j + 1 < g.m) s.up[j] = br * scale;
    // j = m-1: Dirichlet ghost contributes only to the diagonal
  }
  return s;
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

template <class T>
double weighted_l2_norm(const RadialField<T>& f) {
  double s = 0.0;
  const RadialGrid& g = *f.grid;
  for (int j = 0; j < g.m; ++j) s += std::norm(cplx(f.v[j])) * g.w[j];
  return std::sqrt(s);
}

/// Discrete surrogate for an H^s norm on the radial line with volume weight:
/// sqrt(sum_{k<=s} ||d_r^k f||_w^2), s in {0,1,2}.
template <class T>
double weighted_norm(const RadialField<T>& f, int s) {
  if (s < 0 || s > 2) throw std::invalid_argument("weighted_norm: s must be 0, 1, or 2");
  double acc = weighted_l2_norm(f);
  acc *= acc;
  if (s >= 1) {
    const auto d1 = radial_derivative(f, 1);
    const double n1 = weighted_l2_norm(d1);
    acc += n1 * n1;
    if (s == 2) {
      const auto d2 = radial_derivative(d1, 1);
      const double n2 = weighted_l2_norm(d2);
      acc += n2 * n2;
    }
  }
  return std::sqrt(acc);
}

template <class T>
double weighted_l2_distance(const RadialField<T>& a, const RadialField<T>& b) {
  check_same_grid(a.grid, b.grid);
  double s = 0.0;
  for (int j = 0; j < a.grid->m; ++j)
    s += std::norm(cplx(a.v[j]) - cplx(b.v[j])) * a.grid->w[j];
  return std::sqrt(s);
}

template <class T>
double max_abs(const RadialField<T>& f) {
  double s = 0.0;
  for (const auto& x : f.v) s = std::max(s, std::abs(x));
  return s;
}

} // namespace caustic
