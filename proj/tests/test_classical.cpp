#include <gtest/gtest.h>

#include <random>

#include "dicke/classical.hpp"

using namespace dicke;

namespace {

const DickeParams P2 = DickeParams::with_ratio(1.0, 1.0, 2.0, 1.0);

TrajectoryConfig short_run(double t_max) {
  TrajectoryConfig c;
  c.t_max = t_max;
  return c;
}

RegularizedPoint random_point(std::mt19937_64& rng) {
  const double r = 1.9 * std::sqrt(uniform01(rng)), a = two_pi * uniform01(rng);
  return {4 * uniform01(rng) - 2, 4 * uniform01(rng) - 2, r * std::cos(a), r * std::sin(a)};
}

// Hamilton's equations from central differences of the energy
State4 fd_flow(const DickeParams& P, const RegularizedPoint& x, double h) {
  auto d = [&](int i) {
    State4 a = to_state(x), b = to_state(x);
    a[i] += h;
    b[i] -= h;
    return (classical_energy(P, to_point(a)) - classical_energy(P, to_point(b))) / (2 * h);
  };
  return {d(1), -d(0), d(3), -d(2)};
}

}  // namespace

TEST(EquationsOfMotion, FiniteDifferenceOracle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_point(rng);
    const State4 f = equations_of_motion(P2, x), g = fd_flow(P2, x, 1e-5);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(f[k], g[k], 1e-6);
  }
}

TEST(EquationsOfMotion, AgreesWithAngleChart) {
  // d(jz)/dt = -dH/dphi and d(phi)/dt = dH/d(jz) in the (jz, phi) chart
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const PhasePoint x{2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1, 1.8 * uniform01(rng) - 0.9,
                       two_pi * uniform01(rng)};
    const double h = 1e-6;
    auto H = [&](double jz, double phi) { return classical_energy(P2, PhasePoint{x.q, x.p, jz, phi}); };
    const double djz = -(H(x.jz_tilde, x.phi + h) - H(x.jz_tilde, x.phi - h)) / (2 * h);
    const double dphi = (H(x.jz_tilde + h, x.phi) - H(x.jz_tilde - h, x.phi)) / (2 * h);
    const auto r = to_regularized(x);
    const State4 f = equations_of_motion(P2, r);
    // jz = (Qa^2 + Pa^2)/2 - 1 and phi = atan2(-Pa, Qa)
    const double rho2 = r.Qa * r.Qa + r.Pa * r.Pa;
    EXPECT_NEAR(r.Qa * f[2] + r.Pa * f[3], djz, 1e-8);
    EXPECT_NEAR((r.Pa * f[2] - r.Qa * f[3]) / rho2, dphi, 1e-8);
  }
}

TEST(EquationsOfMotion, Jacobian) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_point(rng);
    const Matrix4 J = jacobian(P2, x);
    for (int l = 0; l < 4; ++l) {
      State4 a = to_state(x), b = to_state(x);
      const double h = 1e-6;
      a[l] += h;
      b[l] -= h;
      const State4 fa = equations_of_motion(P2, to_point(a)), fb = equations_of_motion(P2, to_point(b));
      for (int k = 0; k < 4; ++k) EXPECT_NEAR(J[k][l], (fa[k] - fb[k]) / (2 * h), 1e-7);
    }
  }
}

TEST(EquationsOfMotion, FixedPoints) {
  const auto normal = DickeParams::with_ratio(1.0, 1.0, 0.5, 1.0);
  for (double v : equations_of_motion(normal, to_regularized(PhasePoint{0, 0, -1, 0}))) EXPECT_EQ(v, 0.0);
  // superradiant minimum by numerical minimization over the p = 0, phi = 0 plane
  double best = 1e300, bq = 0, bjz = 0;
  for (int i = 0; i <= 2000; ++i)
    for (int k = 0; k <= 400; ++k) {
      const double jz = -1 + i / 2000.0, q = -2.0 + k / 100.0;
      const double e = classical_energy(P2, PhasePoint{q, 0, jz, 0});
      if (e < best) best = e, bq = q, bjz = jz;
    }
  for (int it = 0; it < 60; ++it) {
    // Newton polish on the 2-d gradient
    const double h = 1e-5;
    auto E = [&](double q, double jz) { return classical_energy(P2, PhasePoint{q, 0, jz, 0}); };
    const double gq = (E(bq + h, bjz) - E(bq - h, bjz)) / (2 * h), gj = (E(bq, bjz + h) - E(bq, bjz - h)) / (2 * h);
    const double hqq = (E(bq + h, bjz) - 2 * E(bq, bjz) + E(bq - h, bjz)) / (h * h);
    const double hjj = (E(bq, bjz + h) - 2 * E(bq, bjz) + E(bq, bjz - h)) / (h * h);
    const double hqj = (E(bq + h, bjz + h) - E(bq + h, bjz - h) - E(bq - h, bjz + h) + E(bq - h, bjz - h)) / (4 * h * h);
    const double det = hqq * hjj - hqj * hqj;
    bq -= (hjj * gq - hqj * gj) / det;
    bjz -= (-hqj * gq + hqq * gj) / det;
  }
  EXPECT_NEAR(classical_energy(P2, PhasePoint{bq, 0, bjz, 0}), -2.125, 1e-9);
  // the finite-difference polish limits this location to ~1e-9
  for (double v : equations_of_motion(P2, to_regularized(PhasePoint{bq, 0, bjz, 0}))) EXPECT_NEAR(v, 0.0, 1e-8);
  for (double v : equations_of_motion(P2, to_regularized(ground_state_point(P2)))) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Integrate, FixedPointStaysPut) {
  auto c = short_run(100);
  const auto x0 = to_regularized(ground_state_point(P2));
  const auto tr = integrate(P2, x0, c);
  for (const auto& x : tr.points) {
    EXPECT_NEAR(x.q, x0.q, 1e-10);
    EXPECT_NEAR(x.Qa, x0.Qa, 1e-10);
    EXPECT_NEAR(x.Pa, x0.Pa, 1e-10);
  }
}

TEST(Integrate, DecoupledHarmonicMotion) {
  const auto P = DickeParams::make(1.7, 0.9, 0.0, 1.0);
  auto c = short_run(200);
  c.sample_interval = 0.5;
  const RegularizedPoint x0 = to_regularized(PhasePoint{0.8, -0.3, -0.4, 1.1});
  const auto tr = integrate(P, x0, c);
  const double amp = std::hypot(x0.q, x0.p);
  for (std::size_t i = 0; i < tr.points.size(); ++i) {
    const double t = tr.times[i], wt = 1.7 * t;
    EXPECT_NEAR(tr.points[i].q, x0.q * std::cos(wt) + x0.p * std::sin(wt), 1e-8);
    EXPECT_NEAR(std::hypot(tr.points[i].q, tr.points[i].p), amp, 1e-8);
    EXPECT_NEAR(tr.points[i].jz_tilde(), -0.4, 1e-9);
  }
}

TEST(Integrate, EnergyConservationAndBlochConstraint) {
  std::mt19937_64 rng(9);
  for (double eps : {-1.8, -1.5, -0.5, 0.5}) {
    auto x0 = sample_shell_point(P2, eps, rng);
    ASSERT_TRUE(x0);
    const auto tr = integrate(P2, *x0, short_run(1000));
    EXPECT_LT(tr.max_relative_drift, 1e-8) << eps;
    for (const auto& x : tr.points) EXPECT_LE(x.Qa * x.Qa + x.Pa * x.Pa, 4.0 + 1e-9);
  }
}

TEST(Integrate, TimeReversal) {
  const auto x0 = shell_point(P2, -1.8, -0.495, 0.0, Branch::plus);
  const auto c = short_run(1000);
  const auto x1 = integrate_to(P2, x0, 1000.0, c);
  const auto x2 = integrate_to(P2, x1, -1000.0, c);
  EXPECT_NEAR(x2.q, x0.q, 1e-6);
  EXPECT_NEAR(x2.p, x0.p, 1e-6);
  EXPECT_NEAR(x2.Qa, x0.Qa, 1e-6);
  EXPECT_NEAR(x2.Pa, x0.Pa, 1e-6);
}

TEST(Integrate, Errors) {
  const auto x0 = shell_point(P2, -0.5, 0.075, 0.0, Branch::plus);
  auto c = short_run(500);
  c.rel_tol = c.abs_tol = 1e-4;
  c.energy_drift_max = 1e-14;
  EXPECT_THROW(integrate(P2, x0, c), DriftError);
  EXPECT_THROW(integrate(P2, to_regularized(PhasePoint{1.0, 0, 0.99, std::numbers::pi / 2}), short_run(1)),
               std::domain_error);
  c = short_run(1);
  c.rel_tol = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Lyapunov, Classification) {
  EXPECT_EQ(classify_binary_lyapunov(0.322), 1);
  EXPECT_EQ(classify_binary_lyapunov(9.18e-6), 0);
  EXPECT_EQ(classify_binary_lyapunov(0.004), 0);
  EXPECT_THROW(classify_binary_lyapunov(std::nan("")), std::invalid_argument);
}

TEST(Lyapunov, ChaoticAndRegularPoints) {
  const auto chaotic = lyapunov_exponent(P2, shell_point(P2, -0.5, 0.075, 0.0, Branch::plus), TrajectoryConfig{});
  EXPECT_NEAR(chaotic.lambda, 0.322, 0.2 * 0.322);
  EXPECT_EQ(chaotic.binary, 1);
  EXPECT_TRUE(chaotic.converged);
  EXPECT_LT(chaotic.max_relative_drift, 1e-8);
  const auto regular = lyapunov_exponent(P2, shell_point(P2, -1.8, -0.495, 0.0, Branch::plus), TrajectoryConfig{});
  EXPECT_LT(regular.lambda, lyapunov_threshold);
  EXPECT_EQ(regular.binary, 0);
}

TEST(Lyapunov, EstimatorStability) {
  const auto x0 = shell_point(P2, -0.5, 0.075, 0.0, Branch::plus);
  auto base = short_run(1e4);
  const double a = lyapunov_exponent(P2, x0, base).lambda;
  auto half = base;
  half.renorm_interval = 0.5;
  auto twice = base;
  twice.t_max = 2e4;
  EXPECT_NEAR(lyapunov_exponent(P2, x0, half).lambda, a, 0.1 * a);
  EXPECT_NEAR(lyapunov_exponent(P2, x0, twice).lambda, a, 0.1 * a);
}

TEST(Lyapunov, ParitySymmetricInitialConditions) {
  const PhasePoint x = *surface_point(P2, {-0.5, 0.2, 0.4, Branch::plus});
  const PhasePoint y{-x.q, x.p, x.jz_tilde, x.phi + std::numbers::pi};
  EXPECT_NEAR(classical_energy(P2, y), -0.5, 1e-12);
  const double a = lyapunov_exponent(P2, to_regularized(x), TrajectoryConfig{}).lambda;
  const double b = lyapunov_exponent(P2, to_regularized(y), TrajectoryConfig{}).lambda;
  EXPECT_NEAR(a, b, 0.1 * a);
}

TEST(Sali, Examples) {
  auto c = short_run(5000);
  const auto chaotic = sali(P2, shell_point(P2, -0.5, 0.075, 0.0, Branch::plus), c);
  EXPECT_EQ(chaotic.classification, SaliClass::chaotic);
  EXPECT_GT(chaotic.decay_rate, 0.0);
  EXPECT_LT(chaotic.sali_final, sali_threshold);
  const auto regular = sali(P2, shell_point(P2, -1.8, -0.495, 0.0, Branch::plus), c);
  EXPECT_EQ(regular.classification, SaliClass::regular);
  const auto P0 = DickeParams::make(1.0, 1.0, 0.0, 1.0);
  const auto free = sali(P0, to_regularized(PhasePoint{0.5, 0.2, -0.3, 1.0}), c);
  EXPECT_EQ(free.classification, SaliClass::regular);
  for (double s : free.history) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, std::sqrt(2.0) + 1e-12);
  }
}

TEST(Poincare, CrossingsLieOnSectionAndShell) {
  auto c = short_run(300);
  const auto sec = poincare_section(P2, -1.5, Branch::plus, 6, c, 1);
  ASSERT_GT(sec.crossings.size(), 20u);
  EXPECT_EQ(sec.crossings.size(), sec.orbit_ids.size());
  for (const auto& x : sec.crossings) {
    EXPECT_LT(std::abs(x.point.p), crossing_tolerance);
    EXPECT_NEAR(classical_energy(P2, x.point), -1.5, 1e-8 * 1.5);
    // q+ crossings sit right of the parabola vertex
    auto r = q_branches(P2, -1.5, x.jz_tilde, x.phi);
    ASSERT_TRUE(r);
    EXPECT_NEAR(x.point.q, r->plus, 1e-4);
  }
  EXPECT_THROW(poincare_section(P2, -2.2, Branch::plus, 4, c, 1), std::domain_error);
}

TEST(Poincare, MinusBranchCrossings) {
  const auto sec = poincare_section(P2, -0.5, Branch::minus, 2, short_run(200), 1);
  ASSERT_FALSE(sec.crossings.empty());
  for (const auto& x : sec.crossings) {
    auto r = q_branches(P2, -0.5, x.jz_tilde, x.phi);
    ASSERT_TRUE(r);
    EXPECT_NEAR(x.point.q, r->minus, 1e-4);
  }
}

TEST(Poincare, PeriodicOrbitRepeats) {
  auto c = short_run(200);
  // the centre of the regular island that surrounds jz = -0.495 on phi = 0
  std::optional<PeriodicOrbit> orbit;
  for (double guess : {-0.45, -0.5, -0.4, -0.55, -0.35}) {
    orbit = find_periodic_orbit(P2, -1.8, Branch::plus, guess, 0.0, c);
    if (orbit) break;
  }
  ASSERT_TRUE(orbit);
  EXPECT_LT(orbit->residual, 1e-10);
  auto x0 = shell_point(P2, -1.8, orbit->jz_tilde, orbit->phi, Branch::plus);
  c.t_max = 10.5 * orbit->period;
  const auto cr = section_crossings(P2, x0, Branch::plus, c);
  ASSERT_GE(cr.size(), 10u);
  for (const auto& x : cr) {
    EXPECT_NEAR(x.jz_tilde, orbit->jz_tilde, 1e-6);
    EXPECT_NEAR(std::remainder(x.phi - orbit->phi, two_pi), 0.0, 1e-6);
  }
}

TEST(ChaosMap, EmptyCellsAndDeterminism) {
  auto c = short_run(300);
  const std::vector<double> gammas{0.2, 1.0}, eps{-2.5, -1.2, -0.5};
  const auto a = chaos_map(P2, gammas, eps, 2, c, 17, 1);
  const auto b = chaos_map(P2, gammas, eps, 2, c, 17, 2);
  EXPECT_TRUE(a.empty[a.index(0, 0)]);
  EXPECT_TRUE(a.empty[a.index(1, 0)]);
  EXPECT_TRUE(std::isnan(a.mean_lambda[a.index(0, 0)]));
  for (std::size_t i = 0; i < a.mean_lambda.size(); ++i) {
    if (a.empty[i]) continue;
    EXPECT_EQ(a.mean_lambda[i], b.mean_lambda[i]);
    EXPECT_GE(a.mean_lambda[i], 0.0);
    EXPECT_EQ(a.n_accepted[i], 2u);
  }
  EXPECT_THROW(chaos_map(P2, {1.0, 0.5}, eps, 2, c, 1), std::invalid_argument);
}

TEST(ChaosMap, WeakCouplingIsRegular) {
  const auto g = chaos_map(P2, {0.1}, {-0.95, -0.8}, 3, short_run(3000), 5, 1);
  for (double v : g.mean_lambda) EXPECT_LT(v, lyapunov_threshold);
}
