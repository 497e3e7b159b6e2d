#include <catch2/catch_amalgamated.hpp>

#include "caustic/euler_poisson.hpp"
#include "helpers.hpp"

using namespace caustic;

namespace {
ModelParams ep_params(int n, double lambda) {
  ModelParams p;
  p.n = n;
  p.gamma = n - 2.0;
  p.alpha = 0.5;
  p.lambda = lambda;
  return p;
}

// critical time of the peak profile at repulsive coupling lambda:
// sqrt((3405 + 827 sqrt(17)) / (lambda 2^13)) * exp((7 - sqrt(17))/4)
double peak_tau_c(double lambda) {
  const double s17 = std::sqrt(17.0);
  return std::sqrt((3405.0 + 827.0 * s17) / (lambda * 8192.0)) *
         std::exp((7.0 - s17) / 4.0);
}
double peak_r0() { return (7.0 + std::sqrt(17.0)) / 16.0; }
} // namespace

TEST_CASE("closed-form consistency of the peak profile critical data") {
  // tau_c from the explicit radical/exponential expression must equal
  // sqrt(2 / (lambda g(r0))) with g = 2 M0 - |a0|^2 evaluated analytically
  const double r0 = peak_r0();
  REQUIRE(8.0 * r0 * r0 - 7.0 * r0 + 1.0 == Catch::Approx(0.0).margin(1e-14));
  const double g_r0 = (2.0 * r0 - 1.0) * std::pow(r0, -5.0) * std::exp(-1.0 / r0);
  for (double lambda : {1.0, 2.5}) {
    REQUIRE(peak_tau_c(lambda) ==
            Catch::Approx(std::sqrt(2.0 / (lambda * g_r0))).epsilon(1e-14));
  }
}

TEST_CASE("zero data: characteristics are straight lines") {
  auto a0 = make_constant(0.0);
  EPOptions opt;
  opt.dt = 1e-2;
  opt.tau_end = 1.0;
  auto traj = ep_trace(a0, ep_params(4, 1.0), log_radii(0.1, 3.0, 16), opt);
  REQUIRE_FALSE(traj.crossing.has_value());
  for (int i = 0; i < traj.radii(); ++i) {
    REQUIRE(traj.X.back()[i] == Catch::Approx(traj.R[i]).margin(1e-14));
    REQUIRE(traj.Gamma.back()[i] == Catch::Approx(1.0).margin(1e-14));
  }
}

TEST_CASE("n = 3 rejected") {
  auto a0 = make_gaussian(1.0);
  EPOptions opt;
  CHECK_THROWS_AS(ep_trace(a0, ep_params(3, 1.0), log_radii(0.1, 2.0, 8), opt),
                  std::invalid_argument);
}

TEST_CASE("traced characteristics match the n = 4 closed form") {
  auto a0 = make_peak_profile();
  const double tau_c = peak_tau_c(1.0);
  EPOptions opt;
  opt.dt = 2.5e-4;
  opt.tau_end = 0.9 * tau_c;
  auto radii = log_radii(0.1, 4.0, 64);
  auto traj = ep_trace(a0, ep_params(4, 1.0), radii, opt);
  REQUIRE_FALSE(traj.crossing.has_value());

  double max_rel_X = 0.0, max_rel_G = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const double tau = traj.times[k];
    for (int i = 0; i < traj.radii(); ++i) {
      // exact mass of the peak profile: m0 = exp(-1/R)
      const double m0 = std::exp(-1.0 / traj.R[i]);
      auto cf = char_closed_form_n4(traj.R[i], tau, 1.0, m0);
      REQUIRE_FALSE(cf.collapsed);
      max_rel_X = std::max(max_rel_X, std::abs(traj.X[k][i] - cf.X) / cf.X);
      const double gcf = indicator_closed_form_n4(
          tau, 1.0, a0(traj.R[i]) * a0(traj.R[i]), m0 / std::pow(traj.R[i], 4));
      max_rel_G = std::max(max_rel_G, std::abs(traj.Gamma[k][i] - gcf) /
                                          std::max(std::abs(gcf), 1e-2));
    }
  }
  REQUIRE(max_rel_X <= 1e-8);
  REQUIRE(max_rel_G <= 1e-7);
}

TEST_CASE("closed form basics") {
  SECTION("lambda = 0: X = R") {
    auto cf = char_closed_form_n4(0.7, 2.0, 0.0, 0.5);
    REQUIRE(cf.X == Catch::Approx(0.7));
    REQUIRE(cf.Xdot == 0.0);
    REQUIRE(indicator_closed_form_n4(2.0, 0.0, 0.3, 0.2) == Catch::Approx(1.0));
  }
  SECTION("peak profile X formula") {
    const double R = 0.8, tau = 1.0, lam = 1.5;
    auto cf = char_closed_form_n4(R, tau, lam, std::exp(-1.0 / R));
    const double want = R * std::sqrt(1.0 + lam * std::pow(R, -4.0) *
                                                std::exp(-1.0 / R) * tau * tau);
    REQUIRE(cf.X == Catch::Approx(want).epsilon(1e-14));
  }
  SECTION("negative radicand reports collapse") {
    auto cf = char_closed_form_n4(0.5, 10.0, -1.0, 1.0);
    REQUIRE(cf.collapsed);
  }
}

TEST_CASE("first indicator crossing of the peak profile") {
  auto a0 = make_peak_profile();
  const double tau_c = peak_tau_c(1.0);
  const double r0 = peak_r0();
  EPOptions opt;
  opt.dt = 2e-4;
  opt.tau_end = 1.2 * tau_c;
  // launch a band bracketing the predicted critical radius
  std::vector<double> radii;
  for (int i = 0; i < 241; ++i) radii.push_back(0.58 + 0.001 * i);
  auto traj = ep_trace(a0, ep_params(4, 1.0), radii, opt);
  REQUIRE(traj.crossing.has_value());
  REQUIRE(traj.crossing->kind == CrossingEvent::Kind::IndicatorZero);
  REQUIRE(std::abs(traj.crossing->tau - tau_c) <= 1e-4);
  REQUIRE(std::abs(traj.crossing->R - r0) <= 1e-3);
}

TEST_CASE("attractive bound") {
  SECTION("constant density: T* = sqrt(8) in n = 4") {
    auto a0 = make_constant(1.0);
    REQUIRE(attractive_bound(a0, ep_params(4, -1.0), 5.0) ==
            Catch::Approx(std::sqrt(8.0)).epsilon(1e-6));
  }
  SECTION("scaling in lambda") {
    auto a0 = make_gaussian(1.0);
    const double t1 = attractive_bound(a0, ep_params(4, -1.0), 6.0);
    const double t4 = attractive_bound(a0, ep_params(4, -4.0), 6.0);
    REQUIRE(t4 == Catch::Approx(t1 / 2.0).epsilon(1e-12));
  }
  SECTION("rejections") {
    auto a0 = make_gaussian(1.0);
    CHECK_THROWS_AS(attractive_bound(a0, ep_params(4, 1.0), 6.0), std::invalid_argument);
    CHECK_THROWS_AS(attractive_bound(make_constant(0.0), ep_params(4, -1.0), 6.0),
                    std::invalid_argument);
  }
}

TEST_CASE("attractive collapse: monotone, and no later than the bound") {
  auto a0 = make_gaussian(1.0);
  auto params = ep_params(4, -1.0);
  const double tstar = attractive_bound(a0, params, 6.0);
  EPOptions opt;
  opt.dt = 1e-3;
  opt.tau_end = 1.05 * tstar;
  auto radii = log_radii(0.05, 3.0, 48);
  auto traj = ep_trace(a0, params, radii, opt);
  REQUIRE(traj.crossing.has_value());
  REQUIRE(traj.crossing->tau <= tstar);
  // X' <= 0 and X <= R along every stored slice
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    for (int i = 0; i < traj.radii(); ++i) {
      REQUIRE(traj.Xdot[k][i] <= 1e-14);
      REQUIRE(traj.X[k][i] <= traj.R[i] + 1e-14);
    }
}

TEST_CASE("repulsive critical analysis in n = 4") {
  SECTION("peak profile: maximizer and critical time") {
    auto rep = repulsive_critical_n4(make_peak_profile(), 1.0);
    REQUIRE(rep.status == BlowupReport::Status::Blowup);
    REQUIRE(std::abs(*rep.r_star_margin - peak_r0()) <= 1e-6);
    REQUIRE(*rep.tau_c_closed == Catch::Approx(peak_tau_c(1.0)).epsilon(1e-6));
  }
  SECTION("constant amplitude is global: margin is c/2 - c < 0") {
    auto rep = repulsive_critical_n4(make_constant(1.0), 1.0);
    REQUIRE(rep.status == BlowupReport::Status::Global);
  }
  SECTION("square-integrable data breaks down") {
    auto rep = repulsive_critical_n4(make_gaussian(1.0), 1.0);
    REQUIRE(rep.status == BlowupReport::Status::Blowup);
    REQUIRE(rep.tau_c_closed.has_value());
  }
  SECTION("lambda <= 0 rejected") {
    CHECK_THROWS_AS(repulsive_critical_n4(make_gaussian(1.0), -1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("density along the flow") {
  auto a0 = make_peak_profile();
  const double tau_c = peak_tau_c(1.0);
  EPOptions opt;
  opt.dt = 5e-4;
  opt.tau_end = 0.9 * tau_c;
  auto radii = log_radii(0.25, 2.5, 96);
  auto traj = ep_trace(a0, ep_params(4, 1.0), radii, opt);

  SECTION("initial slice returns the initial density") {
    auto slice = density_along(traj, 0.0);
    for (int i = 0; i < traj.radii(); ++i) {
      REQUIRE(slice[i].X == Catch::Approx(traj.R[i]));
      REQUIRE(slice[i].rho ==
              Catch::Approx(a0(traj.R[i]) * a0(traj.R[i])).epsilon(1e-12));
    }
  }
  SECTION("matches the closed form before breakdown") {
    for (double frac : {0.3, 0.6, 0.9}) {
      const double tau = frac * traj.times.back();
      auto slice = density_along(traj, tau);
      for (int i = 0; i < traj.radii(); ++i) {
        const double R = traj.R[i];
        const double denom =
            2.0 * std::pow(R, 5) * std::exp(1.0 / R) - (2.0 * R - 1.0) * tau * tau;
        const double want = 2.0 * R * R / (slice[i].X * slice[i].X * denom);
        REQUIRE(slice[i].rho == Catch::Approx(want).epsilon(1e-6));
      }
    }
  }
  SECTION("transported mass reproduces the initial mass function") {
    const double tau = 0.8 * traj.times.back();
    auto slice = density_along(traj, tau);
    // integrate rho X^3 dX = rho X^3 Gamma dR back in launch coordinates
    double macc = 0.0, prevR = 0.0, prevF = 0.0;
    double m0acc = 0.0, prevF0 = 0.0;
    for (int i = 0; i < traj.radii(); ++i) {
      const double gam = traj.interp(traj.Gamma, tau, i);
      const double f = slice[i].rho * std::pow(slice[i].X, 3) * gam;
      const double f0 = traj.a0sq[i] * std::pow(traj.R[i], 3);
      macc += 0.5 * (prevF + f) * (traj.R[i] - prevR);
      m0acc += 0.5 * (prevF0 + f0) * (traj.R[i] - prevR);
      prevR = traj.R[i];
      prevF = f;
      prevF0 = f0;
      REQUIRE(std::abs(macc - m0acc) <= 1e-8 * std::max(1.0, m0acc));
    }
  }
  SECTION("post-breakdown slice refused") {
    EPOptions late;
    late.dt = 1e-3;
    late.tau_end = 1.3 * tau_c;
    late.stop_at_crossing = false;
    std::vector<double> band;
    for (int i = 0; i < 41; ++i) band.push_back(0.6 + 0.005 * i);
    auto past = ep_trace(a0, ep_params(4, 1.0), band, late);
    REQUIRE(past.crossing.has_value());
    CHECK_THROWS_AS(density_along(past, 1.25 * tau_c), std::domain_error);
  }
}

TEST_CASE("traced indicator agrees with differencing across launch radii") {
  auto a0 = make_gaussian(1.0);
  EPOptions opt;
  opt.dt = 1e-3;
  opt.tau_end = 0.8;
  std::vector<double> radii;
  for (int i = 0; i < 200; ++i) radii.push_back(0.2 + 0.01 * i);
  auto traj = ep_trace(a0, ep_params(4, 1.0), radii, opt);
  const auto& X = traj.X.back();
  const auto& G = traj.Gamma.back();
  for (int i = 1; i + 1 < traj.radii(); ++i) {
    const double fd = (X[i + 1] - X[i - 1]) / (traj.R[i + 1] - traj.R[i - 1]);
    REQUIRE(G[i] == Catch::Approx(fd).epsilon(1e-3));
  }
}

TEST_CASE("mean mass at the origin limit") {
  // for continuous a0, M0(R) -> |a0(0)|^2/4 as R -> 0 in n = 4
  auto a0 = make_gaussian(1.0);
  auto radii = log_radii(1e-3, 1.0, 24);
  auto m0 = cumulative_mass(a0, 4, radii);
  for (int i = 0; i < 4; ++i) {
    const double M0 = m0[i] / std::pow(radii[i], 4);
    REQUIRE(M0 == Catch::Approx(0.25).margin(2e-3 + radii[i] * radii[i]));
  }
}

TEST_CASE("balanced initial velocity of the attractive autonomous flow") {
  RadialGrid g(4, 4.0, 2048);
  SECTION("zero density") {
    RField rho(g, Parity::Even);
    auto v = autonomous_global_velocity(rho, -1.0, ep_params(4, -1.0));
    REQUIRE(weighted_l2_norm(v) == 0.0);
  }
  SECTION("constant density: v0 = r/2") {
    auto rho = make_field<double>(g, Parity::Even, [](double) { return 1.0; });
    auto v = autonomous_global_velocity(rho, -1.0, ep_params(4, -1.0));
    for (int j = 256; j < g.m; j += 256)
      REQUIRE(v.v[j] == Catch::Approx(g.r[j] / 2.0).epsilon(1e-5));
  }
  SECTION("square-root homogeneity") {
    auto rho1 = make_field<double>(g, Parity::Even, [](double r) { return std::exp(-r); });
    RField rho4(g, Parity::Even);
    for (int j = 0; j < g.m; ++j) rho4.v[j] = 4.0 * rho1.v[j];
    auto v1 = autonomous_global_velocity(rho1, -1.0, ep_params(4, -1.0));
    auto v4 = autonomous_global_velocity(rho4, -1.0, ep_params(4, -1.0));
    for (int j = 0; j < g.m; j += 128)
      REQUIRE(v4.v[j] == Catch::Approx(2.0 * v1.v[j]).epsilon(1e-12));
  }
  SECTION("lambda >= 0 rejected") {
    auto rho = make_field<double>(g, Parity::Even, [](double) { return 1.0; });
    CHECK_THROWS_AS(autonomous_global_velocity(rho, 0.5, ep_params(4, 0.5)),
                    std::invalid_argument);
  }
}
