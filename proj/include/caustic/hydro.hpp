#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "caustic/expansion.hpp"
#include "caustic/qforms.hpp"
#include "caustic/trajectory.hpp"
#include "caustic/tridiag.hpp"

namespace caustic {

// ---------------------------------------------------------------------------
// Failure modes. Breakdown is physical here; the solver must stop loudly.
// ---------------------------------------------------------------------------

struct NumericalAbort : std::runtime_error {
  double tau = 0.0;
  int step = -1;
  NumericalAbort(const std::string& what, double tau_, int step_)
      : std::runtime_error(what), tau(tau_), step(step_) {}
};

struct CflViolation : NumericalAbort {
  using NumericalAbort::NumericalAbort;
};

struct BlowupSuspected : NumericalAbort {
  using NumericalAbort::NumericalAbort;
};

// ---------------------------------------------------------------------------
// Time weight f(t)
// ---------------------------------------------------------------------------

/// The nonlocal term carries (t+delta)^{gamma-2}, integrable but singular at
/// t+delta = 0 when gamma < 2. It is never sampled near that point: steps
/// touching it integrate f exactly over the substep.
struct TimeWeight {
  enum class Kind { Constant, Power };
  Kind kind = Kind::Constant;
  double value = 1.0; // Constant
  double gamma = 2.0; // Power: (t+delta)^{gamma-2}
  double delta = 0.0;

  static TimeWeight constant(double c) {
    TimeWeight f;
    f.kind = Kind::Constant;
    f.value = c;
    return f;
  }
  static TimeWeight power(double gamma, double delta) {
    if (gamma <= 1.0) throw std::invalid_argument("TimeWeight: gamma > 1 required");
    TimeWeight f;
    f.kind = Kind::Power;
    f.gamma = gamma;
    f.delta = delta;
    return f;
  }

  double at(double t) const {
    if (kind == Kind::Constant) return value;
    return std::pow(t + delta, gamma - 2.0);
  }
  double integral(double t0, double t1) const {
    if (kind == Kind::Constant) return value * (t1 - t0);
    return (std::pow(t1 + delta, gamma - 1.0) - std::pow(t0 + delta, gamma - 1.0)) /
           (gamma - 1.0);
  }
  bool needs_split(double t_start, double dt) const {
    return kind == Kind::Power && gamma < 2.0 && (t_start + delta) < 5.0 * dt;
  }
};

// ---------------------------------------------------------------------------
// Generic system
// ---------------------------------------------------------------------------
//
//   d_t a   = c1 Q1(a,v) + Q1(B,v) + Q1(a,W) + R_a(t) + i r Delta a
//   d_t phi = -(c2/2)|v|^2 - W.v
//             - lambda f(t) [ c2 K*|a|^2 + 2 K*Re(a conj B) ]
//             + R_phi(t) + f(t) R_phi_w(t),          v := d_r phi.
//
// Every amplitude/phase system in this project is an instance: the full pair
// (c1 = c2 = 1, r = h/2), its limit (r = 0), the order-h pair and the
// sub-order-h correction ladder (c1 = c2 = r = 0, background + sources).
// Propagating the scalar phase and deriving v keeps the pair compatible to
// machine precision; the velocity form of each system is the discrete
// gradient of what is integrated here.

struct SourceSpec {
  std::function<void(double, CField&)> a;            // into d_t a
  std::function<void(double, RField&)> phi_plain;    // into d_t phi
  std::function<void(double, RField&)> phi_weighted; // into d_t phi, times f(t)
};

struct GenericSystemSpec {
  ModelParams params;
  const RieszKernel* kernel = nullptr;
  cplx c1{0.0, 0.0};
  double c2 = 0.0;
  double r_coef = 0.0;
  TimeWeight f;
  double t_offset = 0.0; // absolute tau of local time 0
  const HydroTrajectory* background = nullptr;
  SourceSpec source;
  bool upwind = false;
};

struct IntegrateOptions {
  double dt = 1e-3;
  int stride = 8;
  std::vector<double> checkpoints; // local times to land on and store
  double cfl_limit = 0.5;
};

namespace detail {

struct HydroWork {
  CField a;
  RField phi;
};

template <class T>
RadialField<T> advective_derivative(const RadialField<T>& f, const RField& vel, bool upwind) {
  return upwind ? radial_derivative_upwind(f, vel) : radial_derivative(f, 1);
}

/// d/dt of (a, phi) per the spec; f-weighted terms included only when asked.
inline void hydro_rhs(const GenericSystemSpec& spec, double t, const CField& a,
                      const RField& phi, bool include_f, CField& da, RField& dphi) {
  const RadialGrid& g = *a.grid;
  const RField v = radial_derivative(phi, 1);
  const RField dv = radial_derivative(v, 1);

  da = CField(g, Parity::Even);
  dphi = RField(g, Parity::Even);

  if (spec.c1 != cplx{0.0, 0.0}) {
    const CField dadr = advective_derivative(a, v, spec.upwind);
    for (int j = 0; j < g.m; ++j) {
      const double divv = dv.v[j] + (g.n - 1) * v.v[j] / g.r[j];
      da.v[j] += spec.c1 * (-v.v[j] * dadr.v[j] - 0.5 * a.v[j] * divv);
    }
  }
  for (int j = 0; j < g.m; ++j) dphi.v[j] = -0.5 * spec.c2 * v.v[j] * v.v[j];

  if (spec.background) {
    const CField B = spec.background->eval_a(t);
    const RField W = spec.background->eval_v(t);
    const CField dB = radial_derivative(B, 1);
    const CField dadr = advective_derivative(a, W, spec.upwind);
    const RField dW = radial_derivative(W, 1);
    for (int j = 0; j < g.m; ++j) {
      const double divv = dv.v[j] + (g.n - 1) * v.v[j] / g.r[j];
      const double divW = dW.v[j] + (g.n - 1) * W.v[j] / g.r[j];
      // Q1(B, v) + Q1(a, W)
      da.v[j] += -v.v[j] * dB.v[j] - 0.5 * B.v[j] * divv;
      da.v[j] += -W.v[j] * dadr.v[j] - 0.5 * a.v[j] * divW;
      dphi.v[j] += -W.v[j] * v.v[j];
    }
    if (include_f) {
      const double fv = spec.f.at(t);
      const RField conv = apply_potential_pair(*spec.kernel, a, B);
      for (int j = 0; j < g.m; ++j)
        dphi.v[j] += -spec.params.lambda * fv * 2.0 * conv.v[j];
    }
  }
  if (include_f && spec.c2 != 0.0) {
    const double fv = spec.f.at(t);
    RField rho(g, Parity::Even);
    for (int j = 0; j < g.m; ++j) rho.v[j] = std::norm(a.v[j]);
    const RField conv = apply_potential(*spec.kernel, rho);
    for (int j = 0; j < g.m; ++j)
      dphi.v[j] += -spec.params.lambda * spec.c2 * fv * conv.v[j];
  }
  if (spec.source.a) spec.source.a(t, da);
  if (spec.source.phi_plain) spec.source.phi_plain(t, dphi);
  if (include_f && spec.source.phi_weighted) {
    RField tmp(g, Parity::Even);
    spec.source.phi_weighted(t, tmp);
    const double fv = spec.f.at(t);
    for (int j = 0; j < g.m; ++j) dphi.v[j] += fv * tmp.v[j];
  }
}

/// Impulse of all f-weighted phase terms over a window, with the amplitude
/// frozen: phi += (int f) * G(a, t_eval).
inline void apply_weighted_impulse(const GenericSystemSpec& spec, double t_eval,
                                   double f_integral, const CField& a, RField& phi) {
  const RadialGrid& g = *a.grid;
  RField gain(g, Parity::Even);
  if (spec.c2 != 0.0) {
    RField rho(g, Parity::Even);
    for (int j = 0; j < g.m; ++j) rho.v[j] = std::norm(a.v[j]);
    const RField conv = apply_potential(*spec.kernel, rho);
    for (int j = 0; j < g.m; ++j)
      gain.v[j] += -spec.params.lambda * spec.c2 * conv.v[j];
  }
  if (spec.background) {
    const CField B = spec.background->eval_a(t_eval);
    const RField conv = apply_potential_pair(*spec.kernel, a, B);
    for (int j = 0; j < g.m; ++j)
      gain.v[j] += -spec.params.lambda * 2.0 * conv.v[j];
  }
  if (spec.source.phi_weighted) spec.source.phi_weighted(t_eval, gain);
  for (int j = 0; j < g.m; ++j) phi.v[j] += f_integral * gain.v[j];
}

/// Half Crank-Nicolson flow of d_t a = i r Delta a over dt_half.
struct DispersiveFlow {
  std::vector<cplx> lo, di, up;
  double theta = 0.0;
  double dt_half = 0.0;

  DispersiveFlow(const RadialGrid& g, double r_coef, double dt_half_) : dt_half(dt_half_) {
    auto st = laplacian_stencil(g);
    theta = 0.5 * r_coef * dt_half;
    lo.resize(g.m);
    di.resize(g.m);
    up.resize(g.m);
    const cplx it{0.0, theta};
    for (int j = 0; j < g.m; ++j) {
      lo[j] = -it * st.lo[j];
      di[j] = 1.0 - it * st.di[j];
      up[j] = -it * st.up[j];
    }
  }
  void apply(CField& a) const {
    const RadialGrid& g = *a.grid;
    auto L = radial_laplacian(a);
    std::vector<cplx> rhs(g.m);
    const cplx it{0.0, theta};
    for (int j = 0; j < g.m; ++j) rhs[j] = a.v[j] + it * L.v[j];
    a.v = solve_tridiag(lo, di, up, rhs);
  }
};

} // namespace detail

/// Integrate the generic system from `init` (at local time init.tau) to
/// t_end. RK4 carries the transport and sources; when the time weight is
/// singular at the window start the f-terms are peeled off into exactly
/// integrated half-impulses around the RK4 step; a nonzero dispersive
/// coefficient adds half Crank-Nicolson flows on each side.
inline HydroTrajectory integrate(const GenericSystemSpec& spec, const HydroState& init,
                                 double t_end, const IntegrateOptions& opt) {
  const RadialGrid& g = *init.a.grid;
  if (spec.kernel) check_same_grid(spec.kernel->grid, init.a.grid);
  spec.params.validate_core();
  if (g.n != spec.params.n) throw std::invalid_argument("integrate: dimension mismatch");

  HydroTrajectory traj;
  traj.grid = &g;
  traj.t_offset = spec.t_offset;

  auto schedule = step_schedule(init.tau, t_end, opt.dt, opt.checkpoints);
  auto is_checkpoint = [&](double t) {
    for (double c : opt.checkpoints)
      if (std::abs(t - c) <= 1e-12 * (1.0 + std::abs(c))) return true;
    return false;
  };

  CField a = init.a;
  RField phi = init.phi;

  std::optional<detail::DispersiveFlow> disp;

  double last_cfl = 0.0;
  auto store = [&](double t) {
    traj.times.push_back(t);
    traj.a.push_back(a);
    traj.phi.push_back(phi);
    RField v = radial_derivative(phi, 1);
    HydroDiagnostics d;
    d.tau = t + spec.t_offset;
    d.cfl = last_cfl;
    d.grad_residual = 0.0; // v is the gradient of phi by construction
    d.max_abs_da = max_abs(radial_derivative(a, 1));
    traj.v.push_back(std::move(v));
    traj.diags.push_back(d);
  };
  store(schedule.front());

  CField k1a(g, Parity::Even), k2a(g, Parity::Even), k3a(g, Parity::Even),
      k4a(g, Parity::Even);
  RField k1p(g, Parity::Even), k2p(g, Parity::Even), k3p(g, Parity::Even),
      k4p(g, Parity::Even);

  for (std::size_t s = 0; s + 1 < schedule.size(); ++s) {
    const double t0 = schedule[s], t1 = schedule[s + 1];
    const double dt = t1 - t0;

    {
      // transport speed: the state's own velocity only when it self-advects
      // (c1 != 0); linearized systems are advected by the background
      double speed = 0.0;
      if (spec.c1 != cplx{0.0, 0.0})
        speed = std::abs(spec.c1) * max_abs(radial_derivative(phi, 1));
      if (spec.background) speed = std::max(speed, max_abs(spec.background->eval_v(t0)));
      last_cfl = dt * speed / g.dr;
      if (last_cfl > opt.cfl_limit)
        throw CflViolation("advective CFL " + std::to_string(last_cfl) + " over limit",
                           t0 + spec.t_offset, static_cast<int>(s));
    }

    const bool split = spec.f.needs_split(t0, dt);
    if (split)
      detail::apply_weighted_impulse(spec, t0, spec.f.integral(t0, 0.5 * (t0 + t1)), a, phi);
    if (spec.r_coef != 0.0) {
      // step sizes vary near checkpoints; rebuild the flow when dt changes
      if (!disp || std::abs(disp->dt_half - 0.5 * dt) > 1e-15 * dt)
        disp.emplace(g, spec.r_coef, 0.5 * dt);
      disp->apply(a);
    }

    const bool inf = !split;
    auto add_state = [&](const CField& base_a, const RField& base_p, const CField& ka,
                         const RField& kp, double c, CField& oa, RField& op) {
      oa = base_a;
      op = base_p;
      for (int j = 0; j < g.m; ++j) {
        oa.v[j] += c * ka.v[j];
        op.v[j] += c * kp.v[j];
      }
    };
    CField ta(g, Parity::Even);
    RField tp(g, Parity::Even);
    detail::hydro_rhs(spec, t0, a, phi, inf, k1a, k1p);
    add_state(a, phi, k1a, k1p, 0.5 * dt, ta, tp);
    detail::hydro_rhs(spec, t0 + 0.5 * dt, ta, tp, inf, k2a, k2p);
    add_state(a, phi, k2a, k2p, 0.5 * dt, ta, tp);
    detail::hydro_rhs(spec, t0 + 0.5 * dt, ta, tp, inf, k3a, k3p);
    add_state(a, phi, k3a, k3p, dt, ta, tp);
    detail::hydro_rhs(spec, t1, ta, tp, inf, k4a, k4p);
    for (int j = 0; j < g.m; ++j) {
      a.v[j] += dt / 6.0 * (k1a.v[j] + 2.0 * k2a.v[j] + 2.0 * k3a.v[j] + k4a.v[j]);
      phi.v[j] += dt / 6.0 * (k1p.v[j] + 2.0 * k2p.v[j] + 2.0 * k3p.v[j] + k4p.v[j]);
    }

    if (spec.r_coef != 0.0) disp->apply(a);
    if (split)
      detail::apply_weighted_impulse(spec, t1, spec.f.integral(0.5 * (t0 + t1), t1), a, phi);

    const double amax = max_abs(a), pmax = max_abs(phi);
    if (!std::isfinite(amax) || !std::isfinite(pmax))
      throw BlowupSuspected("non-finite state, breakdown suspected",
                            t1 + spec.t_offset, static_cast<int>(s));

    const bool is_last = (s + 2 == schedule.size());
    if (is_last || is_checkpoint(t1) || ((s + 1) % opt.stride == 0)) store(t1);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// System instantiations
// ---------------------------------------------------------------------------

inline HydroState hydro_initial_state(const CField& a0, double t_local = 0.0) {
  HydroState s;
  s.tau = t_local;
  s.a = a0;
  s.phi = RField(*a0.grid, Parity::Even);
  return s;
}

/// Limit pair: amplitude transport plus eikonal phase with weight t^{gamma-2},
/// data (a0, 0) at t = 0.
inline GenericSystemSpec make_limit_system(const ModelParams& params,
                                           const RieszKernel& kernel) {
  GenericSystemSpec s;
  s.params = params;
  s.kernel = &kernel;
  s.c1 = cplx{1.0, 0.0};
  s.c2 = 1.0;
  s.r_coef = 0.0;
  s.f = TimeWeight::power(params.gamma, 0.0);
  return s;
}

/// Full pair at finite h, run in shifted local time t = tau - tau0, so the
/// weight is (t + tau0)^{gamma-2}.
inline GenericSystemSpec make_full_system(const ModelParams& params,
                                          const RieszKernel& kernel) {
  if (params.h <= 0.0) throw std::invalid_argument("make_full_system: h not set");
  GenericSystemSpec s;
  s.params = params;
  s.kernel = &kernel;
  s.c1 = cplx{1.0, 0.0};
  s.c2 = 1.0;
  s.r_coef = 0.5 * params.h;
  s.f = TimeWeight::power(params.gamma, params.tau0());
  s.t_offset = params.tau0();
  return s;
}

/// Linearization around the limit pair: background transport only. The
/// order-h pair and every sub-order-h correction share this shape, differing
/// in sources and data.
inline GenericSystemSpec make_linearized_system(const ModelParams& params,
                                                const RieszKernel& kernel,
                                                const HydroTrajectory& base) {
  GenericSystemSpec s;
  s.params = params;
  s.kernel = &kernel;
  s.c1 = cplx{0.0, 0.0};
  s.c2 = 0.0;
  s.r_coef = 0.0;
  s.f = TimeWeight::power(params.gamma, 0.0);
  s.background = &base;
  return s;
}

// ---------------------------------------------------------------------------
// Correction hierarchy
// ---------------------------------------------------------------------------

struct CorrectionSet {
  PSet pset;
  // terms[i] solves the p_i system, i = 1..N; terms[0] is empty (the base
  // trajectory plays that role)
  std::vector<HydroTrajectory> terms;
  HydroTrajectory equ;
};

namespace detail {

struct InteractionPair {
  const HydroTrajectory* bj;
  const HydroTrajectory* bk;
};

/// Sources produced by sum_{p_j+p_k = target} of the quadratic forms over
/// ordered pairs with j,k >= 1.
inline SourceSpec interaction_sources(std::vector<InteractionPair> pairs,
                                      const RieszKernel& kernel, double lambda, int n) {
  SourceSpec src;
  if (pairs.empty()) return src;
  auto shared = std::make_shared<std::vector<InteractionPair>>(std::move(pairs));
  src.a = [shared, n](double t, CField& add) {
    const RadialGrid& g = *add.grid;
    for (const auto& pr : *shared) {
      const CField bj = pr.bj->eval_a(t);
      const RField wk = pr.bk->eval_v(t);
      const CField dbj = radial_derivative(bj, 1);
      const RField dwk = radial_derivative(wk, 1);
      for (int i = 0; i < g.m; ++i) {
        const double divw = dwk.v[i] + (g.n - 1) * wk.v[i] / g.r[i];
        add.v[i] += -wk.v[i] * dbj.v[i] - 0.5 * bj.v[i] * divw;
      }
    }
  };
  src.phi_plain = [shared](double t, RField& add) {
    const RadialGrid& g = *add.grid;
    for (const auto& pr : *shared) {
      const RField wj = pr.bj->eval_v(t);
      const RField wk = pr.bk->eval_v(t);
      for (int i = 0; i < g.m; ++i) add.v[i] += -0.5 * wj.v[i] * wk.v[i];
    }
  };
  src.phi_weighted = [shared, &kernel, lambda](double t, RField& add) {
    const RadialGrid& g = *add.grid;
    for (const auto& pr : *shared) {
      const CField bj = pr.bj->eval_a(t);
      const CField bk = pr.bk->eval_a(t);
      const RField conv = apply_potential_pair(kernel, bj, bk);
      for (int i = 0; i < g.m; ++i) add.v[i] += -lambda * conv.v[i];
    }
  };
  return src;
}

inline void merge_sources(SourceSpec& dst, SourceSpec extra) {
  if (extra.a) {
    auto prev = dst.a;
    auto add = extra.a;
    dst.a = prev ? std::function<void(double, CField&)>([prev, add](double t, CField& o) {
      prev(t, o);
      add(t, o);
    })
                 : add;
  }
  if (extra.phi_plain) {
    auto prev = dst.phi_plain;
    auto add = extra.phi_plain;
    dst.phi_plain =
        prev ? std::function<void(double, RField&)>([prev, add](double t, RField& o) {
          prev(t, o);
          add(t, o);
        })
             : add;
  }
  if (extra.phi_weighted) {
    auto prev = dst.phi_weighted;
    auto add = extra.phi_weighted;
    dst.phi_weighted =
        prev ? std::function<void(double, RField&)>([prev, add](double t, RField& o) {
          prev(t, o);
          add(t, o);
        })
             : add;
  }
}

} // namespace detail

/// Initial state of the p_i correction: -a_l amplitude data when p_i is an
/// amplitude exponent, -phi_l phase data when it is a phase exponent, zero
/// otherwise.
inline HydroState correction_initial_state(const PExponent& e, const ExpansionTable& table) {
  const RadialGrid& g = *table.grid;
  HydroState s;
  s.tau = 0.0;
  s.a = CField(g, Parity::Even);
  s.phi = RField(g, Parity::Even);
  if (e.amp_l) {
    if (*e.amp_l > table.J_max)
      throw std::invalid_argument("correction data needs a_" + std::to_string(*e.amp_l) +
                                  " beyond the expansion table");
    for (int j = 0; j < g.m; ++j) s.a.v[j] = -table.a[*e.amp_l].v[j];
  }
  if (e.pha_l) {
    if (*e.pha_l > table.J_max)
      throw std::invalid_argument("correction data needs phi_" + std::to_string(*e.pha_l) +
                                  " beyond the expansion table");
    for (int j = 0; j < g.m; ++j) s.phi.v[j] = -table.phi[*e.pha_l].v[j];
  }
  return s;
}

/// Solve the order-h pair: linearized transport around the base with the
/// dispersive remainder (i/2) Delta b0 as amplitude source, interaction
/// sources from exponent pairs summing to exactly 1, and data given by the
/// order-h data rule.
inline HydroTrajectory solve_equ(const ModelParams& params, const RieszKernel& kernel,
                                 const HydroTrajectory& base, const ExpansionTable& table,
                                 const PSet& pset,
                                 const std::vector<HydroTrajectory>& terms, double t_end,
                                 const IntegrateOptions& opt) {
  GenericSystemSpec spec = make_linearized_system(params, kernel, base);
  SourceSpec dispersive;
  dispersive.a = [&base](double t, CField& add) {
    const CField b0 = base.eval_a(t);
    const CField lap = radial_laplacian(b0);
    for (int j = 0; j < add.grid->m; ++j) add.v[j] += cplx{0.0, 0.5} * lap.v[j];
  };
  detail::merge_sources(spec.source, dispersive);

  std::vector<detail::InteractionPair> pairs;
  for (int j = 1; j < pset.size(); ++j)
    for (int k = 1; k < pset.size(); ++k)
      if (std::abs(pset[j].value + pset[k].value - 1.0) <= PSet::merge_tol)
        pairs.push_back({&terms[j], &terms[k]});
  if (!pairs.empty())
    detail::merge_sources(spec.source,
                          detail::interaction_sources(std::move(pairs), kernel,
                                                      params.lambda, params.n));

  const EquDataRule rule = equ_data_rule(params);
  PExponent pseudo;
  pseudo.amp_l = rule.amp_l;
  pseudo.pha_l = rule.pha_l;
  if ((rule.amp_l && *rule.amp_l > table.J_max) || (rule.pha_l && *rule.pha_l > table.J_max))
    throw std::invalid_argument("solve_equ: expansion table too short for the data rule");
  HydroState init = correction_initial_state(pseudo, table);
  return integrate(spec, init, t_end, opt);
}

/// Solve the sub-order-h ladder in ascending exponent order, then the
/// order-h pair. For alpha >= 1 the ladder is empty and only the order-h
/// pair remains.
inline CorrectionSet solve_correction_hierarchy(const ModelParams& params,
                                                const RieszKernel& kernel,
                                                const HydroTrajectory& base,
                                                const PSet& pset,
                                                const ExpansionTable& table, double t_end,
                                                const IntegrateOptions& opt) {
  CorrectionSet out;
  out.pset = pset;
  out.terms.resize(pset.size());
  for (int i = 1; i < pset.size(); ++i) {
    GenericSystemSpec spec = make_linearized_system(params, kernel, base);
    std::vector<detail::InteractionPair> pairs;
    for (int j = 1; j < i; ++j)
      for (int k = 1; k < i; ++k)
        if (std::abs(pset[j].value + pset[k].value - pset[i].value) <= PSet::merge_tol)
          pairs.push_back({&out.terms[j], &out.terms[k]});
    spec.source =
        detail::interaction_sources(std::move(pairs), kernel, params.lambda, params.n);
    HydroState init = correction_initial_state(pset[i], table);
    out.terms[i] = integrate(spec, init, t_end, opt);
  }
  out.equ = solve_equ(params, kernel, base, table, pset, out.terms, t_end, opt);
  return out;
}

} // namespace caustic
