#pragma once

#include <cmath>
#include <vector>

#include "caustic/hartree.hpp"
#include "caustic/hydro.hpp" // NumericalAbort, TimeWeight, step_schedule
#include "caustic/trajectory.hpp"
#include "caustic/tridiag.hpp"

namespace caustic {

// ---------------------------------------------------------------------------
// Direct integration of  i h d_tau psi + (h^2/2) Lap psi
//                          = lambda tau^{gamma-2} (K * |psi|^2) psi
// by Strang splitting:
//   half nonlinear phase | full Crank-Nicolson kinetic | half nonlinear phase.
// The nonlinear half-step multiplies by
//   exp(-(i/h) lambda (K*|psi|^2) int tau^{gamma-2})
// with the weight integrated in closed form over the substep, so the
// singularity at tau = 0 (gamma < 2) is never sampled. The potential is
// frozen at the substep's initial |psi|^2; that freeze is the splitting's
// leading error term. The kinetic step uses the weighted-symmetric flux
// Laplacian and is exactly norm-preserving in the grid's weighted norm.
// ---------------------------------------------------------------------------

struct NlsOptions {
  double dt = 0.0;            // requested step; must satisfy dt <= safety * h
  double safety = 0.5;        // phase-resolution factor c in dt <= c h
  int stride = 16;            // snapshot every this many steps
  std::vector<double> checkpoints; // absolute tau values to land on and store
  double mass_guard = 1e-8;   // abort if relative mass drift exceeds this
};

namespace detail {

struct KineticFlow {
  std::vector<cplx> lo, di, up;
  double coef = 0.0; // h/2
  double dt = 0.0;
  const RadialGrid* grid = nullptr;

  KineticFlow(const RadialGrid& g, double h, double dt_) : coef(0.5 * h), dt(dt_), grid(&g) {
    auto st = laplacian_stencil(g);
    const cplx it{0.0, 0.5 * coef * dt};
    lo.resize(g.m);
    di.resize(g.m);
    up.resize(g.m);
    for (int j = 0; j < g.m; ++j) {
      lo[j] = -it * st.lo[j];
      di[j] = 1.0 - it * st.di[j];
      up[j] = -it * st.up[j];
    }
  }
  // (1 - i c dt L / 2)^{-1} (1 + i c dt L / 2), unitary in the weighted norm
  void apply(CField& psi) const {
    auto L = radial_laplacian(psi);
    std::vector<cplx> rhs(grid->m);
    const cplx it{0.0, 0.5 * coef * dt};
    for (int j = 0; j < grid->m; ++j) rhs[j] = psi.v[j] + it * L.v[j];
    psi.v = solve_tridiag(lo, di, up, rhs);
  }
};

} // namespace detail

/// Evolve psi0 given at absolute time tau_start up to tau_end. Negative
/// steps are admitted with lambda = 0 (the kinetic flow is time-symmetric);
/// reversibility checks use that.
inline WaveTrajectory nls_evolve(const ModelParams& params, const RieszKernel& kernel,
                                 const CField& psi0, double tau_start, double tau_end,
                                 const NlsOptions& opt) {
  params.validate_core();
  if (params.h <= 0.0) throw std::invalid_argument("nls_evolve: h not set");
  check_same_grid(psi0.grid, kernel.grid);
  const RadialGrid& g = *psi0.grid;
  if (g.n != params.n) throw std::invalid_argument("nls_evolve: dimension mismatch");
  if (!(opt.dt > 0.0)) throw std::invalid_argument("nls_evolve: dt must be positive");
  if (opt.dt > opt.safety * params.h)
    throw std::invalid_argument("nls_evolve: dt exceeds safety * h; the phase scale is h");

  const bool forward = tau_end > tau_start;
  const double h = params.h;
  const double lam = params.lambda;
  TimeWeight f = TimeWeight::power(params.gamma, 0.0);

  auto schedule = forward
                      ? step_schedule(tau_start, tau_end, opt.dt, opt.checkpoints)
                      : std::vector<double>{};
  if (!forward) {
    // mirrored schedule for backward runs
    auto fwd = step_schedule(tau_end, tau_start, opt.dt, {});
    schedule.assign(fwd.rbegin(), fwd.rend());
  }
  auto is_checkpoint = [&](double t) {
    for (double c : opt.checkpoints)
      if (std::abs(t - c) <= 1e-12 * (1.0 + std::abs(c))) return true;
    return false;
  };

  WaveTrajectory traj;
  traj.grid = &g;
  CField psi = psi0;
  const double mass0 = weighted_l2_norm(psi);

  auto store = [&](double t) {
    traj.times.push_back(t);
    traj.psi.push_back(psi);
    traj.mass.push_back(weighted_l2_norm(psi));
  };
  store(schedule.front());

  auto phase_halfstep = [&](double t0, double t1) {
    if (lam == 0.0) return;
    RField rho(g, Parity::Even);
    for (int j = 0; j < g.m; ++j) rho.v[j] = std::norm(psi.v[j]);
    const RField pot = apply_potential(kernel, rho);
    const double weight = f.integral(t0, t1);
    for (int j = 0; j < g.m; ++j)
      psi.v[j] *= std::exp(cplx{0.0, -lam * pot.v[j] * weight / h});
  };

  std::optional<detail::KineticFlow> kin;
  for (std::size_t s = 0; s + 1 < schedule.size(); ++s) {
    const double t0 = schedule[s], t1 = schedule[s + 1];
    const double dt = t1 - t0;
    phase_halfstep(t0, 0.5 * (t0 + t1));
    if (!kin || std::abs(kin->dt - dt) > 1e-15 * std::abs(dt))
      kin.emplace(g, h, dt);
    kin->apply(psi);
    phase_halfstep(0.5 * (t0 + t1), t1);

    const double mass = weighted_l2_norm(psi);
    if (!std::isfinite(mass))
      throw BlowupSuspected("non-finite wavefunction", t1, static_cast<int>(s));
    if (std::abs(mass - mass0) > opt.mass_guard * std::max(mass0, 1e-300))
      throw NumericalAbort("mass drift " + std::to_string(std::abs(mass - mass0) / mass0) +
                               " over guard",
                           t1, static_cast<int>(s));

    const bool is_last = (s + 2 == schedule.size());
    if (is_last || is_checkpoint(t1) || ((s + 1) % opt.stride == 0)) store(t1);
  }
  return traj;
}

/// Start state for a run from the natural initial time tau0 = h^{a/(g-a)}.
inline CField nls_initial_state(const CField& a0) { return a0; }

/// Well-prepared start: amplitude and phase of the limit pair at tau0,
/// assembled as b0(tau0) exp(i phi0(tau0)/h).
inline CField nls_prepared_state(const ModelParams& params, const HydroTrajectory& base) {
  const double tau0 = params.tau0();
  if (tau0 < base.t_begin() - 1e-12 || tau0 > base.t_end() + 1e-12)
    throw std::invalid_argument("nls_prepared_state: tau0 outside base trajectory");
  CField b = base.eval_a(tau0);
  RField p = base.eval_phi(tau0);
  CField out(*b.grid, Parity::Even);
  for (int j = 0; j < b.grid->m; ++j)
    out.v[j] = b.v[j] * std::exp(cplx{0.0, p.v[j] / params.h});
  return out;
}

} // namespace caustic
