#pragma once

#include "caustic/grid.hpp"
#include "caustic/hartree.hpp"

namespace caustic {

/// The three quadratic forms driving every amplitude/velocity system here:
///   Q1(a,v) = -(v.grad)a - (1/2) a div v
///   Q2(v1,v2) = -(v1.grad)v2
///   Q3(a1,a2) = -lambda grad(|x|^{-gamma} * Re(a1 conj a2))
/// In radial variables div v = d_r v + (n-1) v/r; v/r is finite everywhere
/// on the cell-centered mesh and tends to d_r v(0+) at the axis for odd v.

template <class T>
RadialField<T> q1(const RadialField<T>& a, const RField& v) {
  check_same_grid(a.grid, v.grid);
  const RadialGrid& g = *a.grid;
  const auto da = radial_derivative(a, 1);
  const auto dv = radial_derivative(v, 1);
  RadialField<T> out(g, a.parity);
  for (int j = 0; j < g.m; ++j) {
    const double divv = dv.v[j] + (g.n - 1) * v.v[j] / g.r[j];
    out.v[j] = -v.v[j] * da.v[j] - 0.5 * a.v[j] * divv;
  }
  return out;
}

inline RField q2(const RField& v1, const RField& v2) {
  check_same_grid(v1.grid, v2.grid);
  const auto dv2 = radial_derivative(v2, 1);
  RField out(*v1.grid, Parity::Odd);
  for (int j = 0; j < v1.grid->m; ++j) out.v[j] = -v1.v[j] * dv2.v[j];
  return out;
}

inline RField q3(const CField& a1, const CField& a2, const RieszKernel& ker, double lambda) {
  check_same_grid(a1.grid, ker.grid);
  auto pot = apply_potential_pair(ker, a1, a2);
  auto dpot = radial_derivative(pot, 1);
  for (auto& x : dpot.v) x *= -lambda;
  return dpot;
}

} // namespace caustic
