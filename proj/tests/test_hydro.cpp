#include <catch2/catch_amalgamated.hpp>

#include "caustic/hydro.hpp"
#include "caustic/initial_data.hpp"
#include "helpers.hpp"

using namespace caustic;

namespace {

struct HydroFixture {
  RadialGrid grid{4, 8.0, 256};
  ModelParams params;
  RieszKernel kernel;
  CField a0;
  HydroFixture() {
    params.n = 4;
    params.gamma = 2.0;
    params.alpha = 1.0 / 3.0;
    params.lambda = 1.0;
    params.T_final = 0.5;
    kernel = build_kernel(grid, 4, 2.0, 48);
    a0 = make_field<cplx>(grid, Parity::Even,
                          [](double r) { return cplx(std::exp(-r * r / 2), 0.0); });
  }
};

HydroFixture& fx() {
  static HydroFixture f;
  return f;
}

} // namespace

TEST_CASE("quadratic form Q1") {
  const auto& g = fx().grid;
  SECTION("vanishes with the velocity") {
    auto a = make_field<cplx>(g, Parity::Even, [](double r) { return cplx(r * r, 0); });
    RField v(g, Parity::Odd);
    auto out = q1(a, v);
    REQUIRE(weighted_l2_norm(out) == 0.0);
  }
  SECTION("constant amplitude in the linear velocity field") {
    // div(r e_r) = n, so Q1(1, r) = -n/2 = -2 in n = 4
    auto a = make_field<cplx>(g, Parity::Even, [](double) { return cplx(1, 0); });
    auto v = make_field<double>(g, Parity::Odd, [](double r) { return r; });
    auto out = q1(a, v);
    for (int j = 0; j < g.m - 1; ++j)
      REQUIRE(out.v[j].real() == Catch::Approx(-2.0).margin(1e-11));
  }
  SECTION("bilinearity") {
    auto a1 = testutil::random_smooth_field(g, 3u);
    auto a2 = testutil::random_smooth_field(g, 4u);
    auto vf = make_field<double>(g, Parity::Odd, [](double r) { return r * std::exp(-r); });
    CField ca1(g, Parity::Even), ca2(g, Parity::Even), sum(g, Parity::Even);
    for (int j = 0; j < g.m; ++j) {
      ca1.v[j] = a1.v[j];
      ca2.v[j] = a2.v[j];
      sum.v[j] = 2.0 * a1.v[j] + 3.0 * a2.v[j];
    }
    auto q_sum = q1(sum, vf);
    auto qa1 = q1(ca1, vf);
    auto qa2 = q1(ca2, vf);
    for (int j = 0; j < g.m; ++j)
      REQUIRE(std::abs(q_sum.v[j] - 2.0 * qa1.v[j] - 3.0 * qa2.v[j]) <= 1e-12);
  }
}

TEST_CASE("quadratic form Q2") {
  const auto& g = fx().grid;
  SECTION("zero first slot") {
    RField z(g, Parity::Odd);
    auto v = make_field<double>(g, Parity::Odd, [](double r) { return r; });
    REQUIRE(weighted_l2_norm(q2(z, v)) == 0.0);
  }
  SECTION("linear field: Q2(r, r) = -r") {
    auto v = make_field<double>(g, Parity::Odd, [](double r) { return r; });
    auto out = q2(v, v);
    for (int j = 0; j < g.m - 1; ++j)
      REQUIRE(out.v[j] == Catch::Approx(-g.r[j]).margin(1e-11));
  }
  SECTION("Q2(v,v) equals -(1/2) d_r(v^2) under differencing") {
    auto v = make_field<double>(g, Parity::Odd,
                                [](double r) { return r * std::exp(-r * r / 2); });
    auto out = q2(v, v);
    RField v2(g, Parity::Even);
    for (int j = 0; j < g.m; ++j) v2.v[j] = v.v[j] * v.v[j];
    auto dv2 = radial_derivative(v2, 1);
    for (int j = 1; j < g.m - 1; ++j)
      REQUIRE(out.v[j] == Catch::Approx(-0.5 * dv2.v[j]).margin(5e-3));
  }
}

TEST_CASE("quadratic form Q3") {
  const auto& g = fx().grid;
  const auto& ker = fx().kernel;
  SECTION("zero amplitude") {
    CField z(g, Parity::Even);
    REQUIRE(weighted_l2_norm(q3(z, fx().a0, ker, 1.0)) == 0.0);
  }
  SECTION("peak-profile amplitude reproduces the mass-field gradient") {
    RadialGrid gg(4, 5.5, 1024);
    auto kk = build_kernel(gg, 4, 2.0, 48);
    auto a0 = make_peak_profile().sample(gg);
    auto out = q3(a0, a0, kk, 1.0);
    const double cal = -(gg.n - 2.0) * sphere_area(gg.n - 1);
    for (int j = 0; j < gg.m; ++j) {
      const double r = gg.r[j];
      if (r < 0.3 || r > 3.0) continue;
      const double expected = -1.0 * cal * std::exp(-1.0 / r) / (r * r * r);
      REQUIRE(out.v[j] == Catch::Approx(expected).epsilon(1e-3));
    }
  }
  SECTION("symmetrized pair is real by construction") {
    auto a1 = make_field<cplx>(g, Parity::Even,
                               [](double r) { return cplx(std::exp(-r * r), 0.3 * r * r * std::exp(-r * r)); });
    auto a2 = make_field<cplx>(g, Parity::Even,
                               [](double r) { return cplx(std::exp(-r * r / 2), -0.1 * std::exp(-r)); });
    auto s12 = q3(a1, a2, ker, 1.0);
    auto s21 = q3(a2, a1, ker, 1.0);
    // q3 takes the real bilinear density, so both orders agree
    for (int j = 0; j < g.m; ++j) REQUIRE(s12.v[j] == Catch::Approx(s21.v[j]).margin(1e-13));
  }
}

TEST_CASE("zero data stays zero") {
  auto& f = fx();
  CField z(f.grid, Parity::Even);
  auto spec = make_limit_system(f.params, f.kernel);
  IntegrateOptions opt;
  opt.dt = 5e-3;
  auto traj = integrate(spec, hydro_initial_state(z), 0.2, opt);
  REQUIRE(weighted_l2_norm(traj.a.back()) == 0.0);
  REQUIRE(weighted_l2_norm(traj.phi.back()) == 0.0);
}

TEST_CASE("limit pair follows the small-time expansion") {
  auto& f = fx();
  auto table = expand(f.a0, f.params, f.kernel, 2);
  auto spec = make_limit_system(f.params, f.kernel);
  IntegrateOptions opt;
  opt.dt = 2e-4;
  opt.checkpoints = {1e-2, 2e-2, 4e-2, 8e-2, 1.6e-1};
  auto traj = integrate(spec, hydro_initial_state(f.a0), 0.16, opt);

  std::vector<BaseSample> samples;
  for (double tau : opt.checkpoints) {
    BaseSample s;
    s.tau = tau;
    s.b = traj.eval_a(tau);
    s.w = traj.eval_v(tau);
    samples.push_back(std::move(s));
  }
  auto fit0 = verify_expansion_order(samples, table, 0);
  REQUIRE(fit0.slope_b == Catch::Approx(f.params.gamma).epsilon(0.15));
  REQUIRE(fit0.slope_w == Catch::Approx(f.params.gamma - 1.0).epsilon(0.15));
  auto fit1 = verify_expansion_order(samples, table, 1);
  REQUIRE(fit1.slope_b == Catch::Approx(2 * f.params.gamma).epsilon(0.15));
  REQUIRE(fit1.slope_w == Catch::Approx(2 * f.params.gamma - 1.0).epsilon(0.15));
}

TEST_CASE("gradient consistency along trajectories") {
  auto& f = fx();
  auto spec = make_limit_system(f.params, f.kernel);
  IntegrateOptions opt;
  opt.dt = 1e-3;
  auto traj = integrate(spec, hydro_initial_state(f.a0), 0.3, opt);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    auto dphi = radial_derivative(traj.phi[k], 1);
    double acc = 0.0, vn = 0.0;
    for (int j = 0; j < f.grid.m; ++j) {
      const double d = dphi.v[j] - traj.v[k].v[j];
      acc += d * d * f.grid.w[j];
      vn += traj.v[k].v[j] * traj.v[k].v[j] * f.grid.w[j];
    }
    REQUIRE(std::sqrt(acc) <= 1e-5 * (1.0 + std::sqrt(vn)));
  }
}

TEST_CASE("full pair converges to the limit pair as h decreases") {
  auto& f = fx();
  ModelParams p = f.params;
  p.alpha = 1.5; // plain order-h regime
  const double tau_eval = 0.3;

  auto lim_spec = make_limit_system(p, f.kernel);
  IntegrateOptions opt;
  opt.dt = 1e-3;
  opt.checkpoints = {tau_eval};
  auto lim = integrate(lim_spec, hydro_initial_state(f.a0), 0.32, opt);
  const CField b0 = lim.eval_a(tau_eval);

  double prev = 1e300;
  for (double h : {0.2, 0.1, 0.05}) {
    p.set_h(h);
    auto spec = make_full_system(p, f.kernel);
    IntegrateOptions fopt;
    fopt.dt = 5e-4;
    const double t_local_end = tau_eval - p.tau0();
    fopt.checkpoints = {t_local_end};
    auto traj = integrate(spec, hydro_initial_state(f.a0), t_local_end + 1e-3, fopt);
    const CField ah = traj.eval_a(t_local_end);
    const double dist = weighted_l2_distance(ah, b0);
    REQUIRE(dist < prev);
    prev = dist;
  }
}

TEST_CASE("order-h correction: nonzero despite zero data, linear in sources") {
  auto& f = fx();
  ModelParams p = f.params;
  p.alpha = 1.5;
  auto lim_spec = make_limit_system(p, f.kernel);
  IntegrateOptions opt;
  opt.dt = 1e-3;
  auto base = integrate(lim_spec, hydro_initial_state(f.a0), 0.3, opt);

  auto table = expand(f.a0, p, f.kernel, 1);
  auto pset = build_pset(p); // trivial for alpha > 1
  REQUIRE(pset.N == 0);
  std::vector<HydroTrajectory> none(1);
  auto equ = solve_equ(p, f.kernel, base, table, pset, none, 0.25, opt);

  // data is zero but the dispersive source drives it
  REQUIRE(weighted_l2_norm(equ.a.front()) == 0.0);
  REQUIRE(weighted_l2_norm(equ.a.back()) > 1e-4);

  SECTION("doubling the amplitude source doubles the solution") {
    auto spec1 = make_linearized_system(p, f.kernel, base);
    auto spec2 = spec1;
    spec1.source.a = [&base](double t, CField& add) {
      const CField lap = radial_laplacian(base.eval_a(t));
      for (int j = 0; j < add.grid->m; ++j) add.v[j] += cplx{0.0, 0.5} * lap.v[j];
    };
    spec2.source.a = [&base](double t, CField& add) {
      const CField lap = radial_laplacian(base.eval_a(t));
      for (int j = 0; j < add.grid->m; ++j) add.v[j] += cplx{0.0, 1.0} * lap.v[j];
    };
    HydroState zero;
    zero.tau = 0.0;
    zero.a = CField(f.grid, Parity::Even);
    zero.phi = RField(f.grid, Parity::Even);
    auto t1 = integrate(spec1, zero, 0.2, opt);
    auto t2 = integrate(spec2, zero, 0.2, opt);
    for (int j = 0; j < f.grid.m; ++j) {
      REQUIRE(std::abs(t2.a.back().v[j] - 2.0 * t1.a.back().v[j]) <= 1e-12);
      REQUIRE(std::abs(t2.phi.back().v[j] - 2.0 * t1.phi.back().v[j]) <= 1e-12);
    }
  }
}

TEST_CASE("order-h data rule at alpha = 1 matches the first expansion step") {
  auto& f = fx();
  ModelParams p = f.params;
  p.alpha = 1.0;
  auto table = expand(f.a0, p, f.kernel, 1);
  auto pset = build_pset(p);
  auto lim_spec = make_limit_system(p, f.kernel);
  IntegrateOptions opt;
  opt.dt = 1e-3;
  auto base = integrate(lim_spec, hydro_initial_state(f.a0), 0.1, opt);
  std::vector<HydroTrajectory> none(1);
  auto equ = solve_equ(p, f.kernel, base, table, pset, none, 0.05, opt);
  // w_equ(0) = -v_1 = -Q3(a0,a0)/(gamma-1)
  auto v0 = radial_derivative(equ.phi.front(), 1);
  auto v1q = q3(f.a0, f.a0, f.kernel, p.lambda);
  for (int j = 0; j < f.grid.m; ++j)
    REQUIRE(v0.v[j] ==
            Catch::Approx(-v1q.v[j] / (p.gamma - 1.0)).margin(1e-12));
}

TEST_CASE("supercritical hierarchy solves in exponent order") {
  auto& f = fx();
  ModelParams p = f.params; // alpha = 1/3, gamma = 2
  p.alpha_exact = Rational(1, 3);
  p.gamma_exact = Rational(2);
  auto pset = build_pset(p);
  REQUIRE(pset.N == 4);
  auto table = expand(f.a0, p, f.kernel, 3);
  auto lim_spec = make_limit_system(p, f.kernel);
  IntegrateOptions opt;
  opt.dt = 2e-3;
  auto base = integrate(lim_spec, hydro_initial_state(f.a0), 0.2, opt);
  auto set = solve_correction_hierarchy(p, f.kernel, base, pset, table, 0.15, opt);

  // p1 = 1/5 is a pure phase correction: amplitude data zero, phase data -phi_1
  REQUIRE(weighted_l2_norm(set.terms[1].a.front()) == 0.0);
  for (int j = 0; j < f.grid.m; ++j)
    REQUIRE(set.terms[1].phi.front().v[j] == Catch::Approx(-table.phi[1].v[j]).margin(1e-13));
  // p2 = 2/5 carries amplitude data -a_1
  for (int j = 0; j < f.grid.m; ++j)
    REQUIRE(set.terms[2].a.front().v[j].real() ==
            Catch::Approx(-table.a[1].v[j].real()).margin(1e-13));
  // the equ pair at alpha = 1/3 has phase data -phi_3
  for (int j = 0; j < f.grid.m; ++j)
    REQUIRE(set.equ.phi.front().v[j] == Catch::Approx(-table.phi[3].v[j]).margin(1e-13));
  // all terms remain finite and nontrivial
  for (int i = 1; i <= pset.N; ++i)
    REQUIRE(std::isfinite(weighted_l2_norm(set.terms[i].a.back())));
}

TEST_CASE("superposition of the order-h pair and the first phase correction") {
  // with data -phi_1 the order-h pair equals (zero-data order-h pair) +
  // (first phase correction), exactly, because the systems are linear and
  // integrate over identical step sequences
  auto& f = fx();
  ModelParams p = f.params;
  p.alpha = 1.0;
  auto table = expand(f.a0, p, f.kernel, 1);
  auto pset = build_pset(p);
  auto lim_spec = make_limit_system(p, f.kernel);
  IntegrateOptions opt;
  opt.dt = 1e-3;
  opt.checkpoints = {0.1, 0.2};
  auto base = integrate(lim_spec, hydro_initial_state(f.a0), 0.25, opt);
  std::vector<HydroTrajectory> none(1);

  // tilde pair: data rule at alpha = 1 gives phase data -phi_1
  auto tilde = solve_equ(p, f.kernel, base, table, pset, none, 0.2, opt);

  // plain pair: zero data
  ModelParams p_zero = p;
  p_zero.alpha = 1.5; // same dynamics; data rule becomes zero
  auto plain = solve_equ(p_zero, f.kernel, base, table, pset, none, 0.2, opt);

  // first phase correction: no source, data -phi_1
  auto pha_spec = make_linearized_system(p, f.kernel, base);
  HydroState pha0;
  pha0.tau = 0.0;
  pha0.a = CField(f.grid, Parity::Even);
  pha0.phi = RField(f.grid, Parity::Even);
  for (int j = 0; j < f.grid.m; ++j) pha0.phi.v[j] = -table.phi[1].v[j];
  auto pha = integrate(pha_spec, pha0, 0.2, opt);

  for (double t : {0.1, 0.2}) {
    auto phi_t = tilde.eval_phi(t);
    auto phi_p = plain.eval_phi(t);
    auto phi_1 = pha.eval_phi(t);
    RField diff(f.grid, Parity::Even);
    for (int j = 0; j < f.grid.m; ++j)
      diff.v[j] = phi_t.v[j] - phi_p.v[j] - phi_1.v[j];
    REQUIRE(weighted_l2_norm(diff) <= 1e-6);
  }
}

TEST_CASE("abort paths") {
  auto& f = fx();
  SECTION("CFL violation reports the step") {
    auto spec = make_limit_system(f.params, f.kernel);
    HydroState s = hydro_initial_state(f.a0);
    // enormous phase gradient
    for (int j = 0; j < f.grid.m; ++j) s.phi.v[j] = 1e4 * std::exp(-f.grid.r[j]);
    IntegrateOptions opt;
    opt.dt = 1e-2;
    CHECK_THROWS_AS(integrate(spec, s, 0.1, opt), CflViolation);
  }
}

TEST_CASE("steepening near the critical time of the peak profile") {
  // the limit pair with the peak data steepens monotonically toward the
  // predicted breakdown; lambda on the convolution side corresponds to
  // (n-2)|S^{n-1}| lambda on the characteristic side. The initial profile
  // has a static steep inner wall near r = 0.07, so the diagnostic watches
  // the compression front around the predicted focal radius X ~ 1.5.
  RadialGrid g(4, 4.0, 512);
  auto ker = build_kernel(g, 4, 2.0, 48);
  ModelParams p;
  p.n = 4;
  p.gamma = 2.0;
  p.alpha = 0.5;
  p.lambda = 1.0 / ((4.0 - 2.0) * sphere_area(3)); // characteristic-side lambda = 1
  auto a0 = make_peak_profile().sample(g);
  auto spec = make_limit_system(p, ker);
  // tau_c for characteristic-side lambda = 1: sqrt(2/max(2M0-|a0|^2))
  const double tau_c = 1.87234;
  IntegrateOptions opt;
  opt.dt = 5e-4;
  opt.stride = 400;
  std::vector<double> taus;
  for (double x = 0.50; x <= 0.951; x += 0.05) taus.push_back(x * tau_c);
  opt.checkpoints = taus;
  auto traj = integrate(spec, hydro_initial_state(a0), 0.96 * tau_c, opt);
  std::vector<double> steep;
  for (double t : taus) {
    auto da = radial_derivative(traj.eval_a(t), 1);
    double mx = 0.0;
    for (int j = 0; j < g.m; ++j)
      if (g.r[j] >= 0.35 && g.r[j] <= 3.0) mx = std::max(mx, std::abs(da.v[j]));
    steep.push_back(mx);
  }
  for (std::size_t i = 0; i + 1 < steep.size(); ++i) REQUIRE(steep[i + 1] > steep[i]);
  REQUIRE(steep.back() > 5.0 * steep.front());
}
