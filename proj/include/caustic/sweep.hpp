#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include "caustic/initial_data.hpp"
#include "caustic/wkb.hpp"

namespace caustic {

// ---------------------------------------------------------------------------
// Epsilon-sweep harness: solve the h-independent hydrodynamic side once
// (limit pair, correction ladder, order-h pair), then for each eps run the
// direct solver and evaluate the filtered error at the requested times.
// ---------------------------------------------------------------------------

struct SweepConfig {
  ModelParams params;          // eps/h ignored; set per sweep point
  double r_max = 6.0;
  int m = 512;
  int quad_points = 48;
  InitialData data = make_gaussian(1.0);
  std::vector<double> eps_list;
  std::vector<double> tau_eval = {0.5};
  int s = 0;
  double hydro_dt = 1e-3;
  double nls_dt = 2e-4;     // capped further by safety * h
  double nls_safety = 0.5;
  bool prepared = false;    // start the wavefunction from the prepared pair
  int jobs = 1;
};

struct SweepPoint {
  double eps = 0.0;
  double h = 0.0;
  std::vector<WkbErrorSample> samples;
};

struct SweepResult {
  std::vector<SweepPoint> points;       // ordered as eps_list
  bool strictly_decreasing = false;     // at each tau_eval, error decreases in eps
  double fitted_order = 0.0;            // d log(err)/d log(eps) at tau_eval.back()
};

/// The h-independent half of a sweep, reusable across sweep points.
struct SweepBaseline {
  RadialGrid grid;
  RieszKernel kernel;
  CField a0;
  PSet pset;
  ExpansionTable table;
  HydroTrajectory base;
  CorrectionSet corrections;
};

inline int expansion_order_needed(const PSet& pset, const EquDataRule& rule) {
  int J = 1;
  for (int i = 1; i < pset.size(); ++i) {
    if (pset[i].amp_l) J = std::max(J, *pset[i].amp_l);
    if (pset[i].pha_l) J = std::max(J, *pset[i].pha_l);
  }
  if (rule.amp_l) J = std::max(J, *rule.amp_l);
  if (rule.pha_l) J = std::max(J, *rule.pha_l);
  return J;
}

inline SweepBaseline prepare_baseline(const SweepConfig& cfg) {
  SweepBaseline bl{RadialGrid(cfg.params.n, cfg.r_max, cfg.m),
                   RieszKernel{},
                   CField{},
                   PSet{},
                   ExpansionTable{},
                   HydroTrajectory{},
                   CorrectionSet{}};
  bl.kernel = build_kernel(bl.grid, cfg.params.n, cfg.params.gamma, cfg.quad_points);
  bl.a0 = cfg.data.sample(bl.grid);
  bl.pset = build_pset(cfg.params);
  bl.table = expand(bl.a0, cfg.params, bl.kernel,
                    expansion_order_needed(bl.pset, equ_data_rule(cfg.params)));

  const double t_end = *std::max_element(cfg.tau_eval.begin(), cfg.tau_eval.end());
  IntegrateOptions opt;
  opt.dt = cfg.hydro_dt;
  opt.checkpoints = cfg.tau_eval;
  auto spec = make_limit_system(cfg.params, bl.kernel);
  bl.base = integrate(spec, hydro_initial_state(bl.a0), t_end + 2.0 * cfg.hydro_dt, opt);
  bl.corrections = solve_correction_hierarchy(cfg.params, bl.kernel, bl.base, bl.pset,
                                              bl.table, t_end + 2.0 * cfg.hydro_dt, opt);
  return bl;
}

inline SweepPoint run_sweep_point(const SweepConfig& cfg, const SweepBaseline& bl,
                                  double eps) {
  ModelParams p = cfg.params;
  p.set_eps(eps);

  WkbApproximant w;
  w.params = p;
  w.base = &bl.base;
  w.corrections = &bl.corrections;
  w.equ = &bl.corrections.equ;
  w.prepared = cfg.prepared;

  const double tau0 = p.tau0();
  CField psi0 = cfg.prepared ? nls_prepared_state(p, bl.base) : bl.a0;

  NlsOptions nopt;
  nopt.dt = std::min(cfg.nls_dt, cfg.nls_safety * p.h);
  nopt.safety = cfg.nls_safety;
  nopt.checkpoints = cfg.tau_eval;
  nopt.stride = 1 << 20; // checkpoints only
  const double t_end = *std::max_element(cfg.tau_eval.begin(), cfg.tau_eval.end());
  if (t_end <= tau0)
    throw std::invalid_argument("sweep: tau_eval below the initial time tau0(eps)");
  auto wave = nls_evolve(p, bl.kernel, psi0, tau0, t_end, nopt);

  SweepPoint out;
  out.eps = eps;
  out.h = p.h;
  out.samples = wkb_error(w, wave, cfg.s, cfg.tau_eval);
  return out;
}

inline SweepResult run_error_sweep(const SweepConfig& cfg, const SweepBaseline& bl) {
  SweepResult res;
  res.points.resize(cfg.eps_list.size());
  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1 || cfg.eps_list.size() <= 1) {
    for (std::size_t i = 0; i < cfg.eps_list.size(); ++i)
      res.points[i] = run_sweep_point(cfg, bl, cfg.eps_list[i]);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cfg.eps_list.size();
             i = next.fetch_add(1))
          res.points[i] = run_sweep_point(cfg, bl, cfg.eps_list[i]);
      });
    for (auto& th : pool) th.join();
  }

  res.strictly_decreasing = res.points.size() >= 2;
  for (std::size_t k = 0; k < cfg.tau_eval.size(); ++k)
    for (std::size_t i = 0; i + 1 < res.points.size(); ++i)
      if (!(res.points[i + 1].samples[k].error < res.points[i].samples[k].error))
        res.strictly_decreasing = false;

  if (res.points.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const std::size_t k = cfg.tau_eval.size() - 1;
    for (const auto& pt : res.points) {
      const double lx = std::log(pt.eps), ly = std::log(pt.samples[k].error);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double n = static_cast<double>(res.points.size());
    res.fitted_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return res;
}

inline SweepResult run_error_sweep(const SweepConfig& cfg) {
  auto bl = prepare_baseline(cfg);
  return run_error_sweep(cfg, bl);
}

} // namespace caustic
