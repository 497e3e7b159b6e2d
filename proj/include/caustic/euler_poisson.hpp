#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "caustic/grid.hpp"
#include "caustic/hartree.hpp"
#include "caustic/hydro.hpp" // NumericalAbort/BlowupSuspected
#include "caustic/initial_data.hpp"
#include "caustic/quadrature.hpp"

namespace caustic {

// ---------------------------------------------------------------------------
// Radial pressureless Euler-Poisson flow by characteristics:
//   X'' = lambda m0(R) tau^{n-4} / X^{n-1},  X(0) = R, X'(0) = 0,
// with the mass m0(R) carried along each curve. The indicator
// Gamma = dX/dR obeys the variational equation
//   Gamma'' = lambda tau^{n-4} [ m0'(R)/X^{n-1} - (n-1) m0 Gamma / X^n ],
//   Gamma(0) = 1, Gamma'(0) = 0,
// and its first zero marks the breakdown (characteristic crossing). Tracing
// Gamma by this ODE keeps the crossing sharp where differencing X across
// launch radii would lose digits. n = 3 is rejected: the tau^{-1} weight is
// not integrable at the start.
// ---------------------------------------------------------------------------

struct CrossingEvent {
  enum class Kind { IndicatorZero, Collapse };
  Kind kind = Kind::IndicatorZero;
  double tau = 0.0;
  double R = 0.0;
  int radius_index = -1;
};

struct EPTrajectory {
  int n = 4;
  double lambda = 0.0;
  std::vector<double> R;
  std::vector<double> m0, dm0, a0sq, M0; // launch data per radius
  std::vector<double> times;
  std::vector<std::vector<double>> X, Xdot, Gamma, Gammadot; // [time][radius]
  std::optional<CrossingEvent> crossing;

  int radii() const { return static_cast<int>(R.size()); }

  // 4-point Lagrange interpolation of one column at arbitrary tau
  double interp(const std::vector<std::vector<double>>& q, double tau, int i) const {
    auto st = detail::time_stencil(times, tau);
    double out = 0.0;
    for (int k = 0; k < st.count; ++k) out += st.coef[k] * q[st.base + k][i];
    return out;
  }
};

struct EPOptions {
  double dt = 1e-3;
  double tau_end = 2.0;
  int stride = 8;
  bool stop_at_crossing = true;
};

/// Cumulative mass at the launch radii by per-segment Gauss-Legendre; the
/// characteristic oracles need much more accuracy here than the grid
/// trapezoid provides.
inline std::vector<double> cumulative_mass(const InitialData& a0, int n,
                                           const std::vector<double>& radii) {
  static const QuadratureRule q = gauss_legendre(24);
  std::vector<double> m0(radii.size());
  double acc = 0.0, prev = 0.0;
  auto f = [&](double s) {
    const double a = a0(s);
    return a * a * std::pow(s, n - 1);
  };
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (radii[i] <= prev) throw std::invalid_argument("cumulative_mass: radii must increase");
    acc += gl_integrate(q, f, prev, radii[i]);
    m0[i] = acc;
    prev = radii[i];
  }
  return m0;
}

namespace detail {

// cubic Hermite root of (f0,df0)-(f1,df1) on [t0,t1], refined by bisection
inline double hermite_root(double t0, double t1, double f0, double df0, double f1,
                           double df1, double tol) {
  const double dt = t1 - t0;
  auto eval = [&](double t) {
    const double s = (t - t0) / dt;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    return h00 * f0 + h10 * dt * df0 + h01 * f1 + h11 * dt * df1;
  };
  double lo = t0, hi = t1, flo = f0;
  for (int it = 0; it < 200 && (hi - lo) > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = eval(mid);
    if ((flo <= 0.0) == (fm <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace detail

inline EPTrajectory ep_trace(const InitialData& a0, const ModelParams& params,
                             const std::vector<double>& radii, const EPOptions& opt) {
  if (params.n < 4)
    throw std::invalid_argument("ep_trace: n >= 4 required (tau^{n-4} weight)");
  if (radii.empty()) throw std::invalid_argument("ep_trace: no launch radii");

  EPTrajectory traj;
  traj.n = params.n;
  traj.lambda = params.lambda;
  traj.R = radii;
  traj.m0 = cumulative_mass(a0, params.n, radii);
  const int nr = traj.radii();
  traj.dm0.resize(nr);
  traj.a0sq.resize(nr);
  traj.M0.resize(nr);
  for (int i = 0; i < nr; ++i) {
    const double a = a0(radii[i]);
    traj.a0sq[i] = a * a;
    traj.dm0[i] = a * a * std::pow(radii[i], params.n - 1);
    traj.M0[i] = traj.m0[i] / std::pow(radii[i], params.n);
  }

  const int n = params.n;
  const double lam = params.lambda;
  // state per radius: X, V = X', G = Gamma, Gd = Gamma'
  std::vector<double> X(radii), V(nr, 0.0), G(nr, 1.0), Gd(nr, 0.0);

  auto rhs = [&](double tau, const std::vector<double>& x, const std::vector<double>& v,
                 const std::vector<double>& g, const std::vector<double>& gd,
                 std::vector<double>& dx, std::vector<double>& dv, std::vector<double>& dg,
                 std::vector<double>& dgd) {
    const double w = (n == 4) ? 1.0 : std::pow(tau, n - 4);
    for (int i = 0; i < nr; ++i) {
      const double xp = std::pow(x[i], n - 1);
      dx[i] = v[i];
      dv[i] = lam * traj.m0[i] * w / xp;
      dg[i] = gd[i];
      dgd[i] = lam * w * (traj.dm0[i] / xp - (n - 1) * traj.m0[i] * g[i] / (xp * x[i]));
    }
  };

  const int nsteps = std::max(1, static_cast<int>(std::ceil(opt.tau_end / opt.dt - 1e-12)));
  const double dt = opt.tau_end / nsteps;

  traj.times.push_back(0.0);
  traj.X.push_back(X);
  traj.Xdot.push_back(V);
  traj.Gamma.push_back(G);
  traj.Gammadot.push_back(Gd);

  std::vector<double> k1x(nr), k1v(nr), k1g(nr), k1gd(nr), k2x(nr), k2v(nr), k2g(nr),
      k2gd(nr), k3x(nr), k3v(nr), k3g(nr), k3gd(nr), k4x(nr), k4v(nr), k4g(nr), k4gd(nr),
      tx(nr), tv(nr), tg(nr), tgd(nr);

  for (int s = 0; s < nsteps; ++s) {
    const double t0 = s * dt, t1 = (s + 1) * dt;
    const std::vector<double> Xp = X, Vp = V, Gp = G, Gdp = Gd;

    rhs(t0, X, V, G, Gd, k1x, k1v, k1g, k1gd);
    for (int i = 0; i < nr; ++i) {
      tx[i] = X[i] + 0.5 * dt * k1x[i];
      tv[i] = V[i] + 0.5 * dt * k1v[i];
      tg[i] = G[i] + 0.5 * dt * k1g[i];
      tgd[i] = Gd[i] + 0.5 * dt * k1gd[i];
    }
    rhs(t0 + 0.5 * dt, tx, tv, tg, tgd, k2x, k2v, k2g, k2gd);
    for (int i = 0; i < nr; ++i) {
      tx[i] = X[i] + 0.5 * dt * k2x[i];
      tv[i] = V[i] + 0.5 * dt * k2v[i];
      tg[i] = G[i] + 0.5 * dt * k2g[i];
      tgd[i] = Gd[i] + 0.5 * dt * k2gd[i];
    }
    rhs(t0 + 0.5 * dt, tx, tv, tg, tgd, k3x, k3v, k3g, k3gd);
    for (int i = 0; i < nr; ++i) {
      tx[i] = X[i] + dt * k3x[i];
      tv[i] = V[i] + dt * k3v[i];
      tg[i] = G[i] + dt * k3g[i];
      tgd[i] = Gd[i] + dt * k3gd[i];
    }
    rhs(t1, tx, tv, tg, tgd, k4x, k4v, k4g, k4gd);
    for (int i = 0; i < nr; ++i) {
      X[i] += dt / 6 * (k1x[i] + 2 * k2x[i] + 2 * k3x[i] + k4x[i]);
      V[i] += dt / 6 * (k1v[i] + 2 * k2v[i] + 2 * k3v[i] + k4v[i]);
      G[i] += dt / 6 * (k1g[i] + 2 * k2g[i] + 2 * k3g[i] + k4g[i]);
      Gd[i] += dt / 6 * (k1gd[i] + 2 * k2gd[i] + 2 * k3gd[i] + k4gd[i]);
      if (!std::isfinite(X[i]) || !std::isfinite(G[i]))
        throw NumericalAbort("characteristic step failed", t1, s);
    }

    // crossings in this step: indicator zero, or collapse through X = 0
    std::optional<CrossingEvent> hit;
    for (int i = 0; i < nr; ++i) {
      if (Gp[i] > 0.0 && G[i] <= 0.0) {
        CrossingEvent ev;
        ev.kind = CrossingEvent::Kind::IndicatorZero;
        ev.tau = detail::hermite_root(t0, t1, Gp[i], Gdp[i], G[i], Gd[i], 1e-10);
        ev.R = radii[i];
        ev.radius_index = i;
        if (!hit || ev.tau < hit->tau) hit = ev;
      }
      if (Xp[i] > 0.0 && X[i] <= 0.0) {
        CrossingEvent ev;
        ev.kind = CrossingEvent::Kind::Collapse;
        ev.tau = detail::hermite_root(t0, t1, Xp[i], Vp[i], X[i], V[i], 1e-10);
        ev.R = radii[i];
        ev.radius_index = i;
        if (!hit || ev.tau < hit->tau) hit = ev;
      }
    }
    if (hit) {
      traj.crossing = hit;
      if (opt.stop_at_crossing) {
        traj.times.push_back(t1);
        traj.X.push_back(X);
        traj.Xdot.push_back(V);
        traj.Gamma.push_back(G);
        traj.Gammadot.push_back(Gd);
        return traj;
      }
    }
    if (s + 1 == nsteps || ((s + 1) % opt.stride == 0)) {
      traj.times.push_back(t1);
      traj.X.push_back(X);
      traj.Xdot.push_back(V);
      traj.Gamma.push_back(G);
      traj.Gammadot.push_back(Gd);
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Closed forms in n = 4, where the characteristic system is autonomous.
// ---------------------------------------------------------------------------

struct CharClosedForm {
  double X = 0.0;
  double Xdot = 0.0;
  bool collapsed = false; // negative radicand (attractive case)
};

/// X(tau,R) = sqrt(R^2 + lambda m0 tau^2 / R^2).
inline CharClosedForm char_closed_form_n4(double R, double tau, double lambda, double m0) {
  CharClosedForm out;
  if (R <= 0.0) throw std::invalid_argument("char_closed_form_n4: R > 0 required");
  const double rad = R * R + lambda * m0 * tau * tau / (R * R);
  if (rad <= 0.0) {
    out.collapsed = true;
    return out;
  }
  out.X = std::sqrt(rad);
  out.Xdot = lambda * m0 * tau / (R * R * out.X);
  return out;
}

/// Gamma(tau,R) = (1 + lambda (|a0|^2/2 - M0) tau^2) / sqrt(1 + lambda M0 tau^2).
inline double indicator_closed_form_n4(double tau, double lambda, double a0sq, double M0) {
  const double rad = 1.0 + lambda * M0 * tau * tau;
  if (rad <= 0.0) throw std::domain_error("indicator_closed_form_n4: collapsed");
  return (1.0 + lambda * (0.5 * a0sq - M0) * tau * tau) / std::sqrt(rad);
}

// ---------------------------------------------------------------------------
// Breakdown certificates
// ---------------------------------------------------------------------------

struct BlowupReport {
  enum class Status { Global, Blowup, Undetermined };
  Status status = Status::Undetermined;
  std::optional<double> tau_star;      // traced first crossing
  std::optional<double> R_star;
  std::optional<double> bound_T_star;  // attractive upper bound
  std::optional<double> tau_c_closed;  // repulsive n = 4 critical time
  std::optional<double> r_star_margin; // maximizer of 2 M0 - |a0|^2
  bool borderline = false;             // margin max within tolerance of zero
  std::vector<double> margin_r;
  std::vector<double> margin;          // 2 M0 - |a0|^2 sampled on margin_r

  std::string status_str() const {
    switch (status) {
      case Status::Global: return "global";
      case Status::Blowup: return "blowup";
      default: return "undetermined";
    }
  }
};

/// Attractive case: breakdown no later than
///   T* = ((n-2)(n-3) / (|lambda| sup M0))^{1/(n-2)}.
inline double attractive_bound(const InitialData& a0, const ModelParams& params,
                               double r_scan_max, int scan_points = 4096) {
  if (params.lambda >= 0.0)
    throw std::invalid_argument("attractive_bound: lambda < 0 required");
  if (params.n < 4) throw std::invalid_argument("attractive_bound: n >= 4 required");
  std::vector<double> radii(scan_points);
  for (int i = 0; i < scan_points; ++i)
    radii[i] = r_scan_max * (i + 1.0) / scan_points;
  auto m0 = cumulative_mass(a0, params.n, radii);
  double sup = 0.0;
  for (int i = 0; i < scan_points; ++i)
    sup = std::max(sup, m0[i] / std::pow(radii[i], params.n));
  if (sup <= 0.0) throw std::invalid_argument("attractive_bound: vanishing data");
  const double nn = params.n;
  return std::pow((nn - 2.0) * (nn - 3.0) / (std::abs(params.lambda) * sup),
                  1.0 / (nn - 2.0));
}

/// Repulsive n = 4: global iff 2 M0 - |a0|^2 <= 0 everywhere; otherwise
///   tau_c = sqrt(2 / (lambda max(2 M0 - |a0|^2))),
/// with the grid max refined by a local quadratic fit.
inline BlowupReport repulsive_critical_n4(const RField& a0_field, double lambda) {
  if (lambda <= 0.0)
    throw std::invalid_argument("repulsive_critical_n4: lambda > 0 required");
  const RadialGrid& g = *a0_field.grid;
  if (g.n != 4) throw std::invalid_argument("repulsive_critical_n4: n = 4 required");

  RField rho(g, Parity::Even);
  for (int j = 0; j < g.m; ++j) rho.v[j] = a0_field.v[j] * a0_field.v[j];
  auto mp = mass_profile(rho);

  BlowupReport rep;
  rep.margin_r.resize(g.m);
  rep.margin.resize(g.m);
  double gmax = -1e300;
  int kmax = 0;
  double scale = 0.0;
  for (int j = 0; j < g.m; ++j) {
    rep.margin_r[j] = g.r[j];
    rep.margin[j] = 2.0 * mp.M0[j] - rho.v[j];
    scale = std::max(scale, std::abs(rep.margin[j]));
    if (rep.margin[j] > gmax) {
      gmax = rep.margin[j];
      kmax = j;
    }
  }

  const double tol = 1e-12 * std::max(scale, 1e-300);
  if (gmax <= tol) {
    rep.status = BlowupReport::Status::Global;
    rep.borderline = std::abs(gmax) <= tol && scale > 0.0;
    return rep;
  }

  double rstar = g.r[kmax], gstar = gmax;
  if (kmax > 0 && kmax + 1 < g.m) {
    const double gm = rep.margin[kmax - 1], g0 = rep.margin[kmax], gp = rep.margin[kmax + 1];
    const double denom = gp - 2.0 * g0 + gm;
    if (denom < 0.0) {
      const double delta = 0.5 * (gm - gp) / denom;
      rstar = g.r[kmax] + delta * g.dr;
      gstar = g0 - 0.25 * (gm - gp) * delta;
    }
  }
  rep.status = BlowupReport::Status::Blowup;
  rep.r_star_margin = rstar;
  rep.tau_c_closed = std::sqrt(2.0 / (lambda * gstar));
  return rep;
}

inline BlowupReport repulsive_critical_n4(const InitialData& a0, double lambda,
                                          double r_max = 6.0, int m = 16384) {
  RadialGrid g(4, r_max, m);
  return repulsive_critical_n4(a0.sample_real(g), lambda);
}

// ---------------------------------------------------------------------------
// Density along the flow
// ---------------------------------------------------------------------------

struct FlowSample {
  double R = 0.0;
  double X = 0.0;
  double v = 0.0;
  double rho = 0.0;
};

/// rho(tau, X(tau,R)) = rho0(R) R^{n-1} / (X^{n-1} Gamma); refuses slices
/// that have already broken down.
inline std::vector<FlowSample> density_along(const EPTrajectory& traj, double tau) {
  std::vector<FlowSample> out(traj.radii());
  for (int i = 0; i < traj.radii(); ++i) {
    FlowSample s;
    s.R = traj.R[i];
    s.X = traj.interp(traj.X, tau, i);
    s.v = traj.interp(traj.Xdot, tau, i);
    const double gam = traj.interp(traj.Gamma, tau, i);
    if (gam <= 0.0)
      throw std::domain_error("density_along: indicator non-positive on the slice");
    const double rho0 = traj.a0sq[i];
    s.rho = rho0 * std::pow(traj.R[i] / s.X, traj.n - 1) / gam;
    out[i] = s;
  }
  return out;
}

/// Exactly balanced initial velocity of the attractive autonomous flow:
///   v0(r) = sqrt(2 |lambda| m0(r) / ((n-2) r^{n-2})).
inline RField autonomous_global_velocity(const RField& rho0, double lambda,
                                         const ModelParams& params) {
  if (lambda >= 0.0)
    throw std::invalid_argument("autonomous_global_velocity: lambda < 0 required");
  if (params.n < 3)
    throw std::invalid_argument("autonomous_global_velocity: n >= 3 required");
  const RadialGrid& g = *rho0.grid;
  auto mp = mass_profile(rho0);
  RField out(g, Parity::Odd);
  for (int j = 0; j < g.m; ++j)
    out.v[j] = std::sqrt(2.0 * std::abs(lambda) * mp.m0[j] /
                         ((params.n - 2.0) * std::pow(g.r[j], params.n - 2)));
  return out;
}

/// Log-spaced launch radii for resolving small-R behavior.
inline std::vector<double> log_radii(double r_min, double r_max, int count) {
  if (!(r_min > 0.0 && r_max > r_min && count >= 2))
    throw std::invalid_argument("log_radii: bad range");
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i)
    out[i] = r_min * std::pow(r_max / r_min, i / (count - 1.0));
  return out;
}

} // namespace caustic
