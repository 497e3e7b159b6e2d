#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "caustic/hydro.hpp"
#include "caustic/nls.hpp"

namespace caustic {

// ---------------------------------------------------------------------------
// Coordinate maps between laboratory time t and rescaled time
// tau = eps^{alpha/gamma} / (1-t). The y-grid is the native grid of every
// field here (y = x/(1-t)); no spatial map is ever needed.
// ---------------------------------------------------------------------------

struct ConformalMap {
  double tau0 = 0.0; // eps^{alpha/gamma} = h^{alpha/(gamma-alpha)}

  explicit ConformalMap(const ModelParams& p) : tau0(p.tau0()) {}
  double tau_of_t(double t) const { return tau0 / (1.0 - t); }
  double t_of_tau(double tau) const { return 1.0 - tau0 / tau; }
};

// ---------------------------------------------------------------------------
// WKB approximant: leading pair, optional sub-order-h ladder, order-h pair.
// ---------------------------------------------------------------------------
//
// Phase (in rescaled variables, where it is the full laboratory phase):
//   Phi(tau) = [ phi0(tau) + sum_j h^{p_j} phi_j(tau - tau0) ] / h,
// the corrections running on the shifted clock. Amplitude:
//   A(tau) = b0(tau) exp(i phi_equ(tau)).

struct WkbApproximant {
  ModelParams params;
  const HydroTrajectory* base = nullptr; // (b0, phi0) from time 0
  const CorrectionSet* corrections = nullptr; // null when alpha >= 1 or prepared
  const HydroTrajectory* equ = nullptr;  // order-h pair (may equal &corrections->equ)
  bool prepared = false;

  void check() const {
    if (!base || !equ) throw std::invalid_argument("WkbApproximant: missing trajectories");
    if (params.h <= 0.0) throw std::invalid_argument("WkbApproximant: h not set");
  }
  bool has_ladder() const {
    return corrections != nullptr && corrections->pset.N > 0 && !prepared;
  }
};

/// Full phase Phi at rescaled time tau on the y-grid.
inline RField assemble_phase(const WkbApproximant& w, double tau) {
  w.check();
  const double tau0 = w.params.tau0();
  if (tau < tau0 * (1.0 - 1e-9) || tau > w.base->t_end() + 1e-12)
    throw std::out_of_range("assemble_phase: tau outside [tau0, T]");
  RField phi = w.base->eval_phi(tau);
  if (w.has_ladder()) {
    const auto& set = *w.corrections;
    for (int i = 1; i < set.pset.size(); ++i) {
      const double hp = std::pow(w.params.h, set.pset[i].value);
      const RField pj = set.terms[i].eval_phi(tau - tau0);
      for (int k = 0; k < phi.grid->m; ++k) phi.v[k] += hp * pj.v[k];
    }
  }
  for (int k = 0; k < phi.grid->m; ++k) phi.v[k] /= w.params.h;
  return phi;
}

/// Laboratory-time wrapper for the phase.
inline RField assemble_phase_at_t(const WkbApproximant& w, double t) {
  const ConformalMap map(w.params);
  return assemble_phase(w, map.tau_of_t(t));
}

/// Amplitude factor A(tau) = b0(tau) exp(i phi_equ(tau)).
inline CField assemble_amplitude(const WkbApproximant& w, double tau) {
  w.check();
  const CField b0 = w.base->eval_a(tau);
  const RField pe = w.equ->eval_phi(tau);
  CField out(*b0.grid, Parity::Even);
  for (int k = 0; k < b0.grid->m; ++k)
    out.v[k] = b0.v[k] * std::exp(cplx{0.0, pe.v[k]});
  return out;
}

// ---------------------------------------------------------------------------
// Approximation error
// ---------------------------------------------------------------------------
//
// In rescaled variables the conformal prefactor and the quadratic phase
// cancel between the solution and the approximant, and the scaled Galilean
// weight |J|^s turns into s plain y-derivatives. What is measured is
//   || d_r^s [ psi(tau) e^{-i Phi(tau)} - A(tau) ] ||_w,
// i.e. the oscillation-filtered distance between the wavefunction and the
// amplitude prediction.

struct WkbErrorSample {
  double eps = 0.0;
  double h = 0.0;
  double tau = 0.0;
  double t = 0.0;
  int s = 0;
  double error = 0.0;
};

inline CField wkb_error_field(const WkbApproximant& w, const CField& psi, double tau) {
  const RField phase = assemble_phase(w, tau);
  const CField amp = assemble_amplitude(w, tau);
  check_same_grid(psi.grid, amp.grid);
  CField out(*psi.grid, Parity::Even);
  for (int k = 0; k < psi.grid->m; ++k)
    out.v[k] = psi.v[k] * std::exp(cplx{0.0, -phase.v[k]}) - amp.v[k];
  return out;
}

inline WkbErrorSample wkb_error_at(const WkbApproximant& w, const CField& psi, double tau,
                                   int s) {
  if (s < 0 || s > 2) throw std::invalid_argument("wkb_error: s in {0,1,2}");
  CField e = wkb_error_field(w, psi, tau);
  for (int k = 0; k < s; ++k) e = radial_derivative(e, 1);
  WkbErrorSample out;
  out.eps = w.params.eps;
  out.h = w.params.h;
  out.tau = tau;
  out.t = ConformalMap(w.params).t_of_tau(tau);
  out.s = s;
  out.error = weighted_l2_norm(e);
  return out;
}

/// Error curve over stored snapshot times of the wave trajectory.
inline std::vector<WkbErrorSample> wkb_error(const WkbApproximant& w,
                                             const WaveTrajectory& wave, int s,
                                             const std::vector<double>& taus) {
  std::vector<WkbErrorSample> out;
  out.reserve(taus.size());
  for (double tau : taus) out.push_back(wkb_error_at(w, wave.at_time(tau), tau, s));
  return out;
}

/// Well-prepared start data: the limit pair at the moving initial time.
struct PreparedData {
  CField amplitude;
  RField phase;
};

inline PreparedData well_prepared_initial(const ModelParams& params,
                                          const HydroTrajectory& base) {
  const double tau0 = params.tau0();
  if (tau0 < base.t_begin() - 1e-12 || tau0 > base.t_end() + 1e-12)
    throw std::invalid_argument("well_prepared_initial: tau0 outside base trajectory");
  PreparedData out{base.eval_a(tau0), base.eval_phi(tau0)};
  return out;
}

} // namespace caustic
