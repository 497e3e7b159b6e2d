#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "caustic/grid.hpp"

namespace caustic {

namespace detail {

/// 4-point Lagrange interpolation in time over stored snapshots.
/// Snapshot times need not be uniform (checkpoint landings perturb them).
struct TimeStencil {
  int base = 0;      // first of up to 4 snapshot indices
  int count = 0;     // 2..4
  double coef[4]{};
};

inline TimeStencil time_stencil(const std::vector<double>& times, double t) {
  const int nt = static_cast<int>(times.size());
  if (nt == 0) throw std::logic_error("trajectory: empty");
  TimeStencil st;
  if (nt == 1) {
    if (std::abs(t - times[0]) > 1e-12 * (1.0 + std::abs(t)))
      throw std::out_of_range("trajectory: time outside stored range");
    st.base = 0;
    st.count = 1;
    st.coef[0] = 1.0;
    return st;
  }
  const double tol = 1e-9 * (1.0 + std::abs(times.back()));
  if (t < times.front() - tol || t > times.back() + tol)
    throw std::out_of_range("trajectory: time outside stored range");
  int k = static_cast<int>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  k = std::clamp(k - 1, 0, nt - 2); // interval [k, k+1]
  st.base = std::clamp(k - 1, 0, nt - 4 >= 0 ? nt - 4 : 0);
  st.count = std::min(4, nt);
  for (int i = 0; i < st.count; ++i) {
    double c = 1.0;
    for (int j = 0; j < st.count; ++j) {
      if (i == j) continue;
      c *= (t - times[st.base + j]) / (times[st.base + i] - times[st.base + j]);
    }
    st.coef[i] = c;
  }
  return st;
}

} // namespace detail

/// Per-step solver diagnostics, recorded at snapshot stride.
struct HydroDiagnostics {
  double tau = 0.0;
  double cfl = 0.0;            // dt * max|v| / dr
  double grad_residual = 0.0;  // || d_r phi - v ||_w
  double max_abs_da = 0.0;     // max_j |d_r a|
};

/// Amplitude/phase state; the velocity is the discrete gradient of the phase.
struct HydroState {
  double tau = 0.0;
  CField a;
  RField phi;
};

struct HydroTrajectory {
  const RadialGrid* grid = nullptr;
  double t_offset = 0.0; // absolute tau = t_offset + stored time
  std::vector<double> times;
  std::vector<CField> a;
  std::vector<RField> phi;
  std::vector<RField> v; // d_r phi at snapshot time
  std::vector<HydroDiagnostics> diags;

  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }

  CField eval_a(double t) const {
    auto st = detail::time_stencil(times, t);
    CField out(*grid, Parity::Even);
    for (int i = 0; i < st.count; ++i)
      for (int j = 0; j < grid->m; ++j) out.v[j] += st.coef[i] * a[st.base + i].v[j];
    return out;
  }
  RField eval_phi(double t) const {
    auto st = detail::time_stencil(times, t);
    RField out(*grid, Parity::Even);
    for (int i = 0; i < st.count; ++i)
      for (int j = 0; j < grid->m; ++j) out.v[j] += st.coef[i] * phi[st.base + i].v[j];
    return out;
  }
  RField eval_v(double t) const {
    auto st = detail::time_stencil(times, t);
    RField out(*grid, Parity::Odd);
    for (int i = 0; i < st.count; ++i)
      for (int j = 0; j < grid->m; ++j) out.v[j] += st.coef[i] * v[st.base + i].v[j];
    return out;
  }
  HydroState eval(double t) const {
    HydroState s;
    s.tau = t + t_offset;
    s.a = eval_a(t);
    s.phi = eval_phi(t);
    return s;
  }
};

/// Wavefunction trajectory of the direct solver. Snapshots are stored at
/// checkpoints and stride; the wavefunction oscillates in time at rate
/// O(1/h), so consumers should read it at stored times only.
struct WaveTrajectory {
  const RadialGrid* grid = nullptr;
  std::vector<double> times; // absolute tau
  std::vector<CField> psi;
  std::vector<double> mass;  // weighted L2 norm at snapshot

  const CField& at_time(double tau) const {
    for (std::size_t i = 0; i < times.size(); ++i)
      if (std::abs(times[i] - tau) <= 1e-9 * (1.0 + std::abs(tau))) return psi[i];
    throw std::out_of_range("wave trajectory: no snapshot at requested time");
  }
};

/// Step schedule covering [t0, t1] with approximately uniform steps of the
/// requested size, landing exactly on every checkpoint.
inline std::vector<double> step_schedule(double t0, double t1, double dt,
                                         std::vector<double> checkpoints = {}) {
  if (!(dt > 0.0) || !(t1 > t0)) throw std::invalid_argument("step_schedule: bad window");
  checkpoints.push_back(t1);
  std::sort(checkpoints.begin(), checkpoints.end());
  std::vector<double> knots;
  knots.push_back(t0);
  for (double c : checkpoints) {
    if (c <= knots.back() + 1e-14 || c > t1 + 1e-14) continue;
    knots.push_back(std::min(c, t1));
  }
  std::vector<double> out;
  out.push_back(t0);
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double span = knots[k + 1] - knots[k];
    const int nsteps = std::max(1, static_cast<int>(std::ceil(span / dt - 1e-12)));
    for (int i = 1; i <= nsteps; ++i) out.push_back(knots[k] + span * i / nsteps);
  }
  return out;
}

} // namespace caustic
