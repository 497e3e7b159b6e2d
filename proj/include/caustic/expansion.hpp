#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "caustic/grid.hpp"
#include "caustic/hartree.hpp"
#include "caustic/qforms.hpp"
#include "caustic/rational.hpp"

namespace caustic {

// ---------------------------------------------------------------------------
// The exponent set P
// ---------------------------------------------------------------------------
//
// P = { alpha (gamma l1 - l2)/(gamma - alpha) : 0 <= l2 <= l1 } intersected
// with [0,1). Exponents of the sub-leading terms in h that the amplitude and
// velocity expansions pick up when the initial time moves like
// h^{alpha/(gamma-alpha)}.

struct PExponent {
  double value = 0.0;
  std::optional<Rational> exact;
  std::vector<std::pair<int, int>> provenance; // realizing (l1,l2) pairs
  std::optional<int> pha_l;                    // value = alpha(gamma l - 1)/(gamma-alpha)
  std::optional<int> amp_l;                    // value = alpha gamma l /(gamma-alpha)
  bool interaction = false;                    // value = p_j + p_k, j,k >= 1
  std::string classification;                  // pha(l) | amp(l) | int | resonant(...)
};

struct PSet {
  std::vector<PExponent> exponents; // ascending; exponents[0] is 0
  int N = 0;                        // #P - 1
  bool exact_mode = false;
  bool merge_warning = false; // tolerance merge between formally distinct pairs

  static constexpr double merge_tol = 1e-12;

  int size() const { return static_cast<int>(exponents.size()); }
  const PExponent& operator[](int i) const { return exponents[i]; }

  int index_of(double p) const {
    for (int i = 0; i < size(); ++i)
      if (std::abs(exponents[i].value - p) <= merge_tol) return i;
    return -1;
  }

  /// Every pairwise sum either lands back in P or reaches 1.
  bool closure_holds() const {
    for (int i = 0; i < size(); ++i)
      for (int j = 0; j < size(); ++j) {
        const double s = exponents[i].value + exponents[j].value;
        if (s >= 1.0 - merge_tol) continue;
        if (index_of(s) < 0) return false;
      }
    return true;
  }
};

inline PSet build_pset(const ModelParams& params) {
  params.validate_core();
  PSet out;
  out.exact_mode = params.alpha_exact.has_value() && params.gamma_exact.has_value();

  PExponent zero;
  zero.value = 0.0;
  if (out.exact_mode) zero.exact = Rational(0);
  zero.provenance.push_back({0, 0});
  zero.classification = "base";
  out.exponents.push_back(zero);
  if (params.alpha >= 1.0) {
    out.N = 0;
    return out; // every candidate exponent reaches 1
  }

  // smallest positive increment is alpha(gamma-1)/(gamma-alpha)
  const int l1_max =
      static_cast<int>(std::ceil((params.gamma - params.alpha) /
                                 (params.alpha * (params.gamma - 1.0)))) + 1;

  const Rational ga = out.exact_mode ? *params.gamma_exact : Rational(0);
  const Rational al = out.exact_mode ? *params.alpha_exact : Rational(0);

  for (int l1 = 0; l1 <= l1_max; ++l1) {
    for (int l2 = 0; l2 <= l1; ++l2) {
      if (l1 == 0 && l2 == 0) continue;
      std::optional<Rational> pexact;
      double p;
      if (out.exact_mode) {
        pexact = al * (ga * Rational(l1) - Rational(l2)) / (ga - al);
        p = pexact->value();
        if (!(Rational(0) < *pexact) && !(*pexact == Rational(0))) continue;
        if (!(*pexact < Rational(1))) continue;
      } else {
        p = params.alpha * (params.gamma * l1 - l2) / (params.gamma - params.alpha);
        if (p < 0.0 || p >= 1.0 - PSet::merge_tol) continue;
      }
      // find or insert
      int hit = -1;
      for (int i = 0; i < out.size(); ++i) {
        if (out.exact_mode && out.exponents[i].exact && pexact) {
          if (*out.exponents[i].exact == *pexact) { hit = i; break; }
        } else if (std::abs(out.exponents[i].value - p) <= PSet::merge_tol) {
          hit = i;
          if (!out.exact_mode) out.merge_warning |= false; // same value, see below
          break;
        }
      }
      if (hit < 0) {
        PExponent e;
        e.value = p;
        e.exact = pexact;
        e.provenance.push_back({l1, l2});
        out.exponents.push_back(e);
      } else {
        out.exponents[hit].provenance.push_back({l1, l2});
      }
    }
  }

  std::sort(out.exponents.begin(), out.exponents.end(),
            [](const PExponent& a, const PExponent& b) { return a.value < b.value; });

  // In double mode, if two formally distinct pairs merged, and the merged
  // value is not forced by an exact coincidence of the defining formula,
  // we cannot tell resonance from round-off; flag it.
  if (!out.exact_mode) {
    for (const auto& e : out.exponents)
      if (e.provenance.size() > 1) out.merge_warning = true;
  }

  // classify
  for (int i = 1; i < out.size(); ++i) {
    auto& e = out.exponents[i];
    for (const auto& [l1, l2] : e.provenance) {
      if (l2 == 1 && l1 >= 1) e.pha_l = l1;
      if (l2 == 0 && l1 >= 1) e.amp_l = l1;
    }
    for (int j = 1; j < out.size() && !e.interaction; ++j)
      for (int k = j; k < out.size(); ++k) {
        if (std::abs(out.exponents[j].value + out.exponents[k].value - e.value) <=
            PSet::merge_tol) {
          e.interaction = true;
          break;
        }
      }
    if (e.pha_l && e.amp_l)
      throw std::logic_error("PSet: pha/amp resonance impossible for gamma > 1");
    std::vector<std::string> tags;
    if (e.pha_l) tags.push_back("pha(" + std::to_string(*e.pha_l) + ")");
    if (e.amp_l) tags.push_back("amp(" + std::to_string(*e.amp_l) + ")");
    if (e.interaction) tags.push_back("int");
    if (tags.empty())
      throw std::logic_error("PSet: exponent with no provenance class");
    if (tags.size() == 1) {
      e.classification = tags[0];
    } else {
      e.classification = "resonant(" + tags[0];
      for (std::size_t t = 1; t < tags.size(); ++t) e.classification += "," + tags[t];
      e.classification += ")";
    }
  }
  out.N = out.size() - 1;
  return out;
}

/// Initial-data rule for the order-h correction pair: nonzero amplitude data
/// -a_l iff alpha gamma l/(gamma-alpha) = 1 (so l = 1/alpha - 1/gamma), and
/// nonzero phase data -phi_{l'} iff alpha(gamma l' - 1)/(gamma-alpha) = 1
/// (so l' = 1/alpha).
struct EquDataRule {
  std::optional<int> amp_l;
  std::optional<int> pha_l;
};

inline EquDataRule equ_data_rule(const ModelParams& params) {
  EquDataRule rule;
  const bool exact = params.alpha_exact && params.gamma_exact;
  if (exact) {
    const Rational one(1);
    const Rational al = *params.alpha_exact, ga = *params.gamma_exact;
    const Rational lamp = (one / al) - (one / ga);
    if (lamp.den == 1 && lamp.num >= 1) rule.amp_l = static_cast<int>(lamp.num);
    const Rational lpha = one / al;
    if (lpha.den == 1 && lpha.num >= 1) rule.pha_l = static_cast<int>(lpha.num);
  } else {
    const double lamp = 1.0 / params.alpha - 1.0 / params.gamma;
    if (std::abs(lamp - std::round(lamp)) < 1e-12 && std::round(lamp) >= 1.0)
      rule.amp_l = static_cast<int>(std::round(lamp));
    const double lpha = 1.0 / params.alpha;
    if (std::abs(lpha - std::round(lpha)) < 1e-12 && std::round(lpha) >= 1.0)
      rule.pha_l = static_cast<int>(std::round(lpha));
  }
  return rule;
}

// ---------------------------------------------------------------------------
// Boundary layer schedule
// ---------------------------------------------------------------------------

struct LayerRow {
  int J = 0;
  double t_exponent = 0.0;   // 1-t ~ eps^{(J alpha - 1)/(J gamma - 1)}
  double tau_exponent = 0.0; // tau ~ h^{1/(J gamma - 1)}
};

struct LayerTable {
  std::vector<LayerRow> rows;
  double initial_tau_exponent = 0.0; // tau0 = h^{alpha/(gamma-alpha)}
  double final_t_exponent = 0.0;     // 1-t ~ eps^{alpha/gamma}; tau = T there
  bool transposed = false; // alpha < 1: initial time sits beyond the first layer
};

inline LayerTable layer_schedule(const ModelParams& params, int J_max) {
  params.validate_core();
  LayerTable t;
  for (int J = 1; J <= J_max; ++J) {
    LayerRow row;
    row.J = J;
    row.t_exponent = (J * params.alpha - 1.0) / (J * params.gamma - 1.0);
    row.tau_exponent = 1.0 / (J * params.gamma - 1.0);
    t.rows.push_back(row);
  }
  t.initial_tau_exponent = params.alpha / (params.gamma - params.alpha);
  t.final_t_exponent = params.alpha / params.gamma;
  t.transposed = params.alpha < 1.0;
  return t;
}

// ---------------------------------------------------------------------------
// Small-time expansion of the limit pair
// ---------------------------------------------------------------------------
//
// b0 ~ sum tau^{gamma j} a_j, w0 ~ sum tau^{gamma j - 1} v_j,
// phi0 ~ sum tau^{gamma j - 1} phi_j, with
//   a_j  = (1/(gamma j))  sum_{k1>=0,k2>=1,k1+k2=j} Q1(a_k1, v_k2)
//   phi_j = (1/(1-gamma j)) [ sum_{k1,k2>=1,k1+k2=j} (1/2) v_k1.v_k2
//                           + sum_{k1,k2>=0,k1+k2=j-1} lambda K*(a_k1 conj a_k2) ]
// and v_j = grad phi_j; taking the discrete gradient of phi_j keeps the
// phase/velocity pair compatible to machine precision (the velocity-side
// recursion agrees with it up to the stencil's O(dr^2)).

struct ExpansionTable {
  ModelParams params;
  const RadialGrid* grid = nullptr;
  int J_max = 0;
  std::vector<CField> a;   // a[0..J]
  std::vector<RField> v;   // v[1..J]; v[0] is a zero field
  std::vector<RField> phi; // phi[1..J]; phi[0] is a zero field
};

inline ExpansionTable expand(const CField& a0, const ModelParams& params,
                             const RieszKernel& kernel, int J) {
  params.validate_core();
  if (J < 1) throw std::invalid_argument("expand: J >= 1 required");
  if (params.gamma == 1.0) throw std::invalid_argument("expand: gamma = 1 not admissible");
  check_same_grid(a0.grid, kernel.grid);
  const RadialGrid& g = *a0.grid;

  ExpansionTable t;
  t.params = params;
  t.grid = &g;
  t.J_max = J;
  t.a.push_back(a0);
  t.v.emplace_back(g, Parity::Odd);
  t.phi.emplace_back(g, Parity::Even);

  const double lam = params.lambda;
  for (int j = 1; j <= J; ++j) {
    RField phij(g, Parity::Even);
    for (int k1 = 1; k1 <= j - 1; ++k1) {
      const int k2 = j - k1;
      for (int i = 0; i < g.m; ++i) phij.v[i] += 0.5 * t.v[k1].v[i] * t.v[k2].v[i];
    }
    for (int k1 = 0; k1 <= j - 1; ++k1) {
      const int k2 = j - 1 - k1;
      auto pot = apply_potential_pair(kernel, t.a[k1], t.a[k2]);
      for (int i = 0; i < g.m; ++i) phij.v[i] += lam * pot.v[i];
    }
    const double cphi = 1.0 / (1.0 - params.gamma * j);
    for (int i = 0; i < g.m; ++i) phij.v[i] *= cphi;
    t.phi.push_back(phij);
    t.v.push_back(radial_derivative(phij, 1));

    CField aj(g, Parity::Even);
    for (int k2 = 1; k2 <= j; ++k2) {
      const int k1 = j - k2;
      auto term = q1(t.a[k1], t.v[k2]);
      for (int i = 0; i < g.m; ++i) aj.v[i] += term.v[i];
    }
    const double ca = 1.0 / (params.gamma * j);
    for (int i = 0; i < g.m; ++i) aj.v[i] *= ca;
    t.a.push_back(aj);
  }
  return t;
}

/// One (tau, amplitude, velocity) sample of the limit trajectory, for
/// residual order fits.
struct BaseSample {
  double tau = 0.0;
  CField b;
  RField w;
};

struct ExpansionOrderFit {
  double slope_b = 0.0;
  double slope_w = 0.0;
  bool degenerate = false;
};

/// Fit the decay order of || b(tau) - sum_{j<=J} tau^{gamma j} a_j ||_w and
/// the velocity analogue against tau. Expected slopes are gamma(J+1) and
/// gamma(J+1) - 1.
inline ExpansionOrderFit verify_expansion_order(const std::vector<BaseSample>& samples,
                                                const ExpansionTable& table, int J) {
  if (samples.size() < 4)
    throw std::invalid_argument("verify_expansion_order: need >= 4 samples");
  if (J > table.J_max) throw std::invalid_argument("verify_expansion_order: J > table");
  const RadialGrid& g = *table.grid;

  std::vector<double> lt, lb, lw;
  double scale = 0.0;
  for (const auto& s : samples) scale = std::max(scale, weighted_l2_norm(s.b));
  ExpansionOrderFit fit;
  for (const auto& s : samples) {
    CField rb = s.b;
    for (int j = 0; j <= J; ++j) {
      const double c = std::pow(s.tau, table.params.gamma * j);
      for (int i = 0; i < g.m; ++i) rb.v[i] -= c * table.a[j].v[i];
    }
    RField rw = s.w;
    for (int j = 1; j <= J; ++j) {
      const double c = std::pow(s.tau, table.params.gamma * j - 1.0);
      for (int i = 0; i < g.m; ++i) rw.v[i] -= c * table.v[j].v[i];
    }
    const double nb = weighted_l2_norm(rb), nw = weighted_l2_norm(rw);
    if (nb < 1e-14 * (1.0 + scale) || nw < 1e-14 * (1.0 + scale)) {
      fit.degenerate = true;
      return fit;
    }
    lt.push_back(std::log(s.tau));
    lb.push_back(std::log(nb));
    lw.push_back(std::log(nw));
  }
  auto slope = [&](const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(lt.size());
    for (int i = 0; i < n; ++i) {
      sx += lt[i];
      sy += y[i];
      sxx += lt[i] * lt[i];
      sxy += lt[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  fit.slope_b = slope(lb);
  fit.slope_w = slope(lw);
  return fit;
}

} // namespace caustic
